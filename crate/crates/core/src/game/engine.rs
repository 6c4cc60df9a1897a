use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::text::{normalize_action, tokenize, Context};

use super::spec::{Condition, Effect, GameSpec, Location, Pattern, VerbKind, DIRECTIONS};
use super::GameError;

pub const NOT_HERE: &str = "That object is either not here or not important.";
pub const NO_VERB: &str = "That's not a verb I recognise.";
pub const NO_INPUT: &str = "I beg your pardon?";
pub const NO_EXIT: &str = "You can't go that way.";
pub const WAY_SHUT: &str = "The way is shut.";
pub const ALREADY_HAVE: &str = "You already have that.";
pub const NOT_CARRYING: &str = "You aren't carrying that.";
pub const FIXED: &str = "That's fixed in place.";
pub const CANT_OPEN: &str = "That's not something you can open.";
pub const CANT_CLOSE: &str = "That's not something you can close.";
pub const ALREADY_OPEN: &str = "That's already open.";
pub const ALREADY_CLOSED: &str = "That's already closed.";
pub const IS_LOCKED: &str = "It seems to be locked.";
pub const NO_LOCK: &str = "That doesn't seem to have a lock.";
pub const ALREADY_UNLOCKED: &str = "It's already unlocked.";
pub const ALREADY_LOCKED: &str = "It's already locked.";
pub const WRONG_KEY: &str = "That doesn't seem to fit the lock.";
pub const CLOSE_FIRST: &str = "You'll have to close it first.";
pub const NOT_CONTAINER: &str = "That can't contain things.";
pub const SELF_CONTAIN: &str = "You can't put something inside itself.";
pub const CONTAINER_CLOSED: &str = "It's closed.";
pub const CANT_LIGHT: &str = "That's not something you can switch on.";
pub const CANT_EXTINGUISH: &str = "That's not something you can switch off.";
pub const ALREADY_ON: &str = "It's already on.";
pub const ALREADY_OFF: &str = "It's already off.";
pub const NOTHING_HAPPENS: &str = "Nothing happens.";
pub const GAME_OVER: &str = "The game is over.";

/// Every response the engine gives when an action does not change the state
/// for a reason other than a rule's own text.
pub const FAILURE_MESSAGES: [&str; 27] = [
    NOT_HERE,
    NO_VERB,
    NO_INPUT,
    NO_EXIT,
    WAY_SHUT,
    ALREADY_HAVE,
    NOT_CARRYING,
    FIXED,
    CANT_OPEN,
    CANT_CLOSE,
    ALREADY_OPEN,
    ALREADY_CLOSED,
    IS_LOCKED,
    NO_LOCK,
    ALREADY_UNLOCKED,
    ALREADY_LOCKED,
    WRONG_KEY,
    CLOSE_FIRST,
    NOT_CONTAINER,
    SELF_CONTAIN,
    CONTAINER_CLOSED,
    CANT_LIGHT,
    CANT_EXTINGUISH,
    ALREADY_ON,
    ALREADY_OFF,
    NOTHING_HAPPENS,
    GAME_OVER,
];

const DARK_LOOK: &str = "Darkness. It is pitch black. You can't see a thing.";

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub player_room: usize,
    /// Indexed like `GameSpec::objects`.
    pub object_locations: Vec<Location>,
    /// Indexed like `GameSpec::flags`.
    pub flags: Vec<bool>,
    pub score: f64,
    pub moves: u32,
    /// Claim count per reward; once-only rewards never exceed one.
    pub rewards_claimed: Vec<u32>,
}

impl WorldState {
    /// Equality on everything except the move counter.
    pub fn same_world(&self, other: &Self) -> bool {
        self.player_room == other.player_room
            && self.object_locations == other.object_locations
            && self.flags == other.flags
            && self.score == other.score
            && self.rewards_claimed == other.rewards_claimed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// Response followed by the look and inventory descriptions.
    pub observation: String,
    /// The bare response to the command.
    pub response: String,
    pub reward: f64,
    pub done: bool,
    pub state_changed: bool,
}

/// One record of a walkthrough replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub context: Context,
    pub gold: String,
    pub admissible: Vec<String>,
}

enum Parsed {
    Command { verb: usize, args: Vec<usize> },
    NotHere,
    NoVerb,
}

struct Outcome {
    response: String,
    reward: f64,
    changed: bool,
}

impl GameSpec {
    pub fn reset(&self) -> (WorldState, String) {
        let mut flags = vec![false; self.flags.len()];
        for (i, o) in self.objects.iter().enumerate() {
            if let Some(f) = self.open_flag[i] {
                flags[f] = o.initially_open;
            }
            if let Some(f) = self.locked_flag[i] {
                flags[f] = o.initially_locked;
            }
            if let Some(f) = self.lit_flag[i] {
                flags[f] = o.initially_lit;
            }
        }
        let state = WorldState {
            player_room: self.start,
            object_locations: self.objects.iter().map(|o| o.location.clone()).collect(),
            flags,
            score: 0.0,
            moves: 0,
            rewards_claimed: vec![0; self.rewards.len()],
        };
        let observation = self.augment(&state, &self.intro);
        (state, observation)
    }

    pub fn is_done(&self, state: &WorldState) -> bool {
        state.flags[self.game_over_flag] || state.score >= self.max_score - 1e-9
    }

    pub fn step(&self, state: &WorldState, action: &str) -> (WorldState, StepResult) {
        let (next, outcome) = self.transition(state, action);
        let done = self.is_done(&next);
        let observation = self.augment(&next, &outcome.response);
        (
            next,
            StepResult {
                observation,
                response: outcome.response,
                reward: outcome.reward,
                done,
                state_changed: outcome.changed,
            },
        )
    }

    /// Whether `action` would change the state; skips observation rendering.
    pub fn changes_state(&self, state: &WorldState, action: &str) -> bool {
        self.transition(state, action).1.changed
    }

    /// Canonical verb templates bound to in-scope objects, kept when stepping
    /// them on a copy of `state` changes it.
    pub fn admissible_actions(&self, state: &WorldState) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if self.is_done(state) {
            return out;
        }
        let scope = self.scope(state);
        let names: Vec<String> = self.objects.iter().map(|o| o.canonical_name()).collect();
        let visible: Vec<usize> = (0..self.objects.len()).filter(|&o| scope[o]).collect();
        let mut consider = |text: String| {
            if !out.contains(&text) && self.changes_state(state, &text) {
                out.insert(text);
            }
        };
        for verb in &self.verbs {
            let t = verb.canonical();
            match t.arity() {
                0 => consider(t.text()),
                1 => {
                    for &o in &visible {
                        consider(t.render(&[&names[o]]));
                    }
                }
                _ => {
                    for &a in &visible {
                        for &b in &visible {
                            consider(t.render(&[&names[a], &names[b]]));
                        }
                    }
                }
            }
        }
        out
    }

    /// Replays the walkthrough, recording the context, gold action and
    /// admissible set at every step.
    pub fn walkthrough_trajectory(&self) -> Result<Vec<TrajectoryStep>, GameError> {
        let (mut state, obs) = self.reset();
        let mut context = Context::initial(obs);
        let mut records = Vec::with_capacity(self.walkthrough.len());
        for (i, gold) in self.walkthrough.iter().enumerate() {
            let admissible: Vec<String> = self.admissible_actions(&state).into_iter().collect();
            let gold = normalize_action(gold);
            if !admissible.contains(&gold) {
                return Err(GameError::Divergence {
                    step: i + 1,
                    action: gold,
                });
            }
            let (next, result) = self.step(&state, &gold);
            records.push(TrajectoryStep {
                step: i + 1,
                context: context.clone(),
                gold: gold.clone(),
                admissible,
            });
            context = context.advance(&gold, result.observation);
            state = next;
        }
        Ok(records)
    }

    /// Look text for the current room.
    pub fn look(&self, state: &WorldState) -> String {
        if !self.room_lit(state) {
            return DARK_LOOK.to_string();
        }
        let room = &self.rooms[state.player_room];
        let mut text = format!("{}. {}", room.name, room.description);
        let here: Vec<usize> = (0..self.objects.len())
            .filter(|&o| self.on_floor(state, o))
            .collect();
        if !here.is_empty() {
            text.push_str(&format!(" You can see {} here.", self.list(&here)));
        }
        let scope = self.scope(state);
        for &o in &here {
            self.describe_contents(state, o, &scope, &mut text);
        }
        text.trim_end().to_string()
    }

    pub fn inventory(&self, state: &WorldState) -> String {
        let held: Vec<usize> = (0..self.objects.len())
            .filter(|&o| state.object_locations[o] == Location::Inventory)
            .collect();
        if held.is_empty() {
            return "You are empty-handed.".to_string();
        }
        let mut text = format!("You are carrying {}.", self.list(&held));
        let scope = self.scope(state);
        for &o in &held {
            self.describe_contents(state, o, &scope, &mut text);
        }
        text
    }

    fn augment(&self, state: &WorldState, response: &str) -> String {
        let mut parts = Vec::with_capacity(3);
        if !response.is_empty() {
            parts.push(response.to_string());
        }
        parts.push(self.look(state));
        parts.push(self.inventory(state));
        parts.join("\n")
    }

    fn describe_contents(&self, state: &WorldState, container: usize, scope: &[bool], text: &mut String) {
        if !self.objects[container].container || !self.is_open(state, container) {
            return;
        }
        let inside: Vec<usize> = (0..self.objects.len())
            .filter(|&o| scope[o] && state.object_locations[o] == Location::Inside(container))
            .collect();
        if inside.is_empty() {
            return;
        }
        text.push_str(&format!(
            " The {} contains {}.",
            self.objects[container].display,
            self.list(&inside)
        ));
        for o in inside {
            self.describe_contents(state, o, scope, text);
        }
    }

    fn list(&self, objects: &[usize]) -> String {
        let names: Vec<String> = objects
            .iter()
            .map(|&o| with_article(&self.objects[o].display))
            .collect();
        match names.as_slice() {
            [] => String::new(),
            [one] => one.clone(),
            [init @ .., last] => format!("{} and {last}", init.join(", ")),
        }
    }

    fn on_floor(&self, state: &WorldState, o: usize) -> bool {
        match state.object_locations[o] {
            Location::Room(r) => {
                r == state.player_room
                    || (r == home_room(&self.objects[o].location)
                        && self.objects[o].also_in.contains(&state.player_room))
            }
            _ => false,
        }
    }

    fn is_open(&self, state: &WorldState, o: usize) -> bool {
        match self.open_flag[o] {
            Some(f) => state.flags[f],
            None => true,
        }
    }

    fn is_locked(&self, state: &WorldState, o: usize) -> bool {
        self.locked_flag[o].is_some_and(|f| state.flags[f])
    }

    fn is_lit(&self, state: &WorldState, o: usize) -> bool {
        self.lit_flag[o].is_some_and(|f| state.flags[f])
    }

    fn carrying(&self, state: &WorldState, mut o: usize) -> bool {
        for _ in 0..=self.objects.len() {
            match state.object_locations[o] {
                Location::Inventory => return true,
                Location::Inside(c) => o = c,
                _ => return false,
            }
        }
        false
    }

    fn room_lit(&self, state: &WorldState) -> bool {
        if !self.rooms[state.player_room].dark {
            return true;
        }
        (0..self.objects.len()).any(|o| {
            self.is_lit(state, o)
                && (state.object_locations[o] == Location::Inventory || self.on_floor(state, o))
        })
    }

    /// Objects the player can refer to.
    pub fn scope(&self, state: &WorldState) -> Vec<bool> {
        let lit = self.room_lit(state);
        let n = self.objects.len();
        let mut memo: Vec<Option<bool>> = vec![None; n];
        fn visit(spec: &GameSpec, state: &WorldState, lit: bool, o: usize, memo: &mut [Option<bool>], depth: usize) -> bool {
            if let Some(v) = memo[o] {
                return v;
            }
            let v = depth <= memo.len()
                && match state.object_locations[o] {
                    Location::Inventory => true,
                    Location::Nowhere => false,
                    Location::Room(_) => lit && spec.on_floor(state, o),
                    Location::Inside(c) => {
                        spec.is_open(state, c) && visit(spec, state, lit, c, memo, depth + 1)
                    }
                };
            memo[o] = Some(v);
            v
        }
        (0..n).map(|o| visit(self, state, lit, o, &mut memo, 0)).collect()
    }

    fn holds(&self, state: &WorldState, scope: &[bool], c: &Condition) -> bool {
        match *c {
            Condition::At(r) => state.player_room == r,
            Condition::Carrying(o) => self.carrying(state, o),
            Condition::Here(o) => scope[o],
            Condition::Located(o, r) => state.object_locations[o] == Location::Room(r),
            Condition::Inside(o, p) => state.object_locations[o] == Location::Inside(p),
            Condition::Open(o) => self.is_open(state, o),
            Condition::Locked(o) => self.is_locked(state, o),
            Condition::Lit(o) => self.is_lit(state, o),
            Condition::Flag(f) => state.flags[f],
            Condition::Not(ref inner) => !self.holds(state, scope, inner),
        }
    }

    fn all_hold(&self, state: &WorldState, scope: &[bool], cs: &[Condition]) -> bool {
        cs.iter().all(|c| self.holds(state, scope, c))
    }

    fn parse(&self, tokens: &[String], scope: &[bool]) -> Parsed {
        let mut partial = false;
        let mut out_of_scope = false;
        for (vi, verb) in self.verbs.iter().enumerate() {
            for t in &verb.templates {
                if let Some(Pattern::Word(w)) = t.parts.first() {
                    if *w == tokens[0] {
                        partial = true;
                    }
                }
                let mut spans = Vec::new();
                let mut found = None;
                match_parts(&t.parts, tokens, 0, &mut spans, &mut |spans| {
                    let mut args = Vec::with_capacity(spans.len());
                    for &(a, b) in spans {
                        match self.resolve(&tokens[a..b]) {
                            Some(o) => args.push(o),
                            None => return false,
                        }
                    }
                    if args.iter().all(|&o| scope[o]) {
                        found = Some(args);
                        true
                    } else {
                        out_of_scope = true;
                        false
                    }
                });
                if let Some(args) = found {
                    return Parsed::Command { verb: vi, args };
                }
            }
        }
        if partial || out_of_scope {
            Parsed::NotHere
        } else {
            Parsed::NoVerb
        }
    }

    /// First object, in declaration order, with a synonym equal to `span`.
    fn resolve(&self, span: &[String]) -> Option<usize> {
        self.objects
            .iter()
            .position(|o| o.names.iter().any(|n| n.as_slice() == span))
    }

    fn transition(&self, state: &WorldState, action: &str) -> (WorldState, Outcome) {
        let mut next = state.clone();
        next.moves += 1;
        let fail = |next: WorldState, msg: &str| {
            (
                next,
                Outcome {
                    response: msg.to_string(),
                    reward: 0.0,
                    changed: false,
                },
            )
        };
        if self.is_done(state) {
            return fail(next, GAME_OVER);
        }
        let tokens = tokenize(action);
        if tokens.is_empty() {
            return fail(next, NO_INPUT);
        }
        let scope = self.scope(state);
        let (verb, args) = match self.parse(&tokens, &scope) {
            Parsed::Command { verb, args } => (verb, args),
            Parsed::NotHere => return fail(next, NOT_HERE),
            Parsed::NoVerb => return fail(next, NO_VERB),
        };
        let mut response = self.execute(&mut next, &scope, verb, &args);
        if !next.same_world(state) {
            let post_scope = self.scope(&next);
            let mut reward = 0.0;
            for (i, r) in self.rewards.iter().enumerate() {
                if r.once && next.rewards_claimed[i] > 0 {
                    continue;
                }
                if self.all_hold(&next, &post_scope, &r.conditions)
                    && !self.all_hold(state, &scope, &r.conditions)
                {
                    next.rewards_claimed[i] += 1;
                    reward += r.value;
                }
            }
            next.score += reward;
            if reward > 0.0 {
                response.push_str(&format!(" [Your score has gone up by {}.]", points(reward)));
            } else if reward < 0.0 {
                response.push_str(&format!(" [Your score has gone down by {}.]", points(-reward)));
            }
            if next.score >= self.max_score - 1e-9 {
                response.push_str(" *** You have won ***");
            } else if next.flags[self.game_over_flag] {
                response.push_str(" *** The game is over ***");
            }
            return (
                next,
                Outcome {
                    response,
                    reward,
                    changed: true,
                },
            );
        }
        // A rule or builtin may have produced text without changing anything;
        // the state itself is returned untouched apart from the move counter.
        let mut same = state.clone();
        same.moves += 1;
        (
            same,
            Outcome {
                response,
                reward: 0.0,
                changed: false,
            },
        )
    }

    fn execute(&self, st: &mut WorldState, scope: &[bool], verb: usize, args: &[usize]) -> String {
        for rule in &self.rules {
            if rule.verb == verb && rule.args == args && self.all_hold(st, scope, &rule.conditions) {
                for e in &rule.effects {
                    self.apply(st, e);
                }
                return if !rule.say.is_empty() {
                    rule.say.clone()
                } else if rule.effects.is_empty() {
                    NOTHING_HAPPENS.to_string()
                } else {
                    "Done.".to_string()
                };
            }
        }
        let name = |o: usize| self.objects[o].display.as_str();
        let msg = |s: &str| s.to_string();
        match self.verbs[verb].kind {
            VerbKind::Go(d) => {
                let exit = self.rooms[st.player_room]
                    .exits
                    .iter()
                    .find(|e| e.direction == d && self.all_hold(st, scope, &e.guard));
                match exit {
                    None => msg(NO_EXIT),
                    Some(e) => {
                        if let Some(door) = e.via {
                            if !self.is_open(st, door) {
                                return msg(WAY_SHUT);
                            }
                        }
                        st.player_room = e.target;
                        format!("You go {}.", DIRECTIONS[d])
                    }
                }
            }
            VerbKind::Take => {
                let o = args[0];
                if st.object_locations[o] == Location::Inventory {
                    msg(ALREADY_HAVE)
                } else if !self.objects[o].takeable {
                    msg(FIXED)
                } else {
                    st.object_locations[o] = Location::Inventory;
                    "Taken.".to_string()
                }
            }
            VerbKind::Drop => {
                let o = args[0];
                if st.object_locations[o] != Location::Inventory {
                    msg(NOT_CARRYING)
                } else {
                    st.object_locations[o] = Location::Room(st.player_room);
                    "Dropped.".to_string()
                }
            }
            VerbKind::Open => {
                let o = args[0];
                match self.open_flag[o] {
                    None => msg(CANT_OPEN),
                    Some(_) if self.is_open(st, o) => msg(ALREADY_OPEN),
                    Some(_) if self.is_locked(st, o) => msg(IS_LOCKED),
                    Some(f) => {
                        st.flags[f] = true;
                        format!("You open the {}.", name(o))
                    }
                }
            }
            VerbKind::Close => {
                let o = args[0];
                match self.open_flag[o] {
                    None => msg(CANT_CLOSE),
                    Some(_) if !self.is_open(st, o) => msg(ALREADY_CLOSED),
                    Some(f) => {
                        st.flags[f] = false;
                        format!("You close the {}.", name(o))
                    }
                }
            }
            VerbKind::Unlock | VerbKind::Lock => {
                let (o, key) = (args[0], args[1]);
                let locking = self.verbs[verb].kind == VerbKind::Lock;
                match self.locked_flag[o] {
                    None => msg(NO_LOCK),
                    Some(_) if !locking && !self.is_locked(st, o) => msg(ALREADY_UNLOCKED),
                    Some(_) if locking && self.is_locked(st, o) => msg(ALREADY_LOCKED),
                    Some(_) if locking && self.is_open(st, o) && self.open_flag[o].is_some() => {
                        msg(CLOSE_FIRST)
                    }
                    Some(_) if self.objects[o].locked_by != Some(key) => msg(WRONG_KEY),
                    Some(_) if !self.carrying(st, key) => msg(NOT_CARRYING),
                    Some(f) => {
                        st.flags[f] = locking;
                        if locking {
                            format!("You lock the {}.", name(o))
                        } else {
                            format!("You unlock the {} with the {}.", name(o), name(key))
                        }
                    }
                }
            }
            VerbKind::PutIn => {
                let (o, c) = (args[0], args[1]);
                if !self.carrying(st, o) {
                    msg(NOT_CARRYING)
                } else if o == c || self.contains(st, o, c) {
                    msg(SELF_CONTAIN)
                } else if !self.objects[c].container {
                    msg(NOT_CONTAINER)
                } else if !self.is_open(st, c) {
                    msg(CONTAINER_CLOSED)
                } else if st.object_locations[o] == Location::Inside(c) {
                    msg(NOTHING_HAPPENS)
                } else {
                    st.object_locations[o] = Location::Inside(c);
                    format!("You put the {} in the {}.", name(o), name(c))
                }
            }
            VerbKind::Light => {
                let o = args[0];
                match self.lit_flag[o] {
                    None => msg(CANT_LIGHT),
                    Some(_) if self.is_lit(st, o) => msg(ALREADY_ON),
                    Some(f) => {
                        st.flags[f] = true;
                        format!("The {} is now on.", name(o))
                    }
                }
            }
            VerbKind::Extinguish => {
                let o = args[0];
                match self.lit_flag[o] {
                    None => msg(CANT_EXTINGUISH),
                    Some(_) if !self.is_lit(st, o) => msg(ALREADY_OFF),
                    Some(f) => {
                        st.flags[f] = false;
                        format!("The {} is now off.", name(o))
                    }
                }
            }
            VerbKind::Examine => {
                let o = &self.objects[args[0]];
                if o.description.is_empty() {
                    format!("You see nothing special about the {}.", o.display)
                } else {
                    o.description.clone()
                }
            }
            VerbKind::Look => self.look(st),
            VerbKind::Inventory => self.inventory(st),
            VerbKind::Wait => "Time passes.".to_string(),
            VerbKind::Custom => msg(NOTHING_HAPPENS),
        }
    }

    /// Whether `inner` is (transitively) inside `outer`.
    fn contains(&self, st: &WorldState, outer: usize, mut inner: usize) -> bool {
        for _ in 0..=self.objects.len() {
            match st.object_locations[inner] {
                Location::Inside(c) if c == outer => return true,
                Location::Inside(c) => inner = c,
                _ => return false,
            }
        }
        false
    }

    fn apply(&self, st: &mut WorldState, e: &Effect) {
        let set = |st: &mut WorldState, f: Option<usize>, v: bool| {
            if let Some(f) = f {
                st.flags[f] = v;
            }
        };
        match *e {
            Effect::Set(f) => st.flags[f] = true,
            Effect::Clear(f) => st.flags[f] = false,
            Effect::Place(o, r) => st.object_locations[o] = Location::Room(r),
            Effect::Give(o) => st.object_locations[o] = Location::Inventory,
            Effect::Remove(o) => st.object_locations[o] = Location::Nowhere,
            Effect::Put(o, c) => {
                if o != c && !self.contains(st, o, c) {
                    st.object_locations[o] = Location::Inside(c);
                }
            }
            Effect::Open(o) => set(st, self.open_flag[o], true),
            Effect::Close(o) => set(st, self.open_flag[o], false),
            Effect::Unlock(o) => set(st, self.locked_flag[o], false),
            Effect::Lock(o) => set(st, self.locked_flag[o], true),
            Effect::Light(o) => set(st, self.lit_flag[o], true),
            Effect::Extinguish(o) => set(st, self.lit_flag[o], false),
            Effect::Goto(r) => st.player_room = r,
            Effect::End => st.flags[self.game_over_flag] = true,
        }
    }
}

fn home_room(loc: &Location) -> usize {
    match loc {
        Location::Room(r) => *r,
        _ => usize::MAX,
    }
}

/// Enumerates the ways `parts` can cover `tokens[pos..]`, longer slot spans
/// first. `accept` returns true to stop the search.
fn match_parts(
    parts: &[Pattern],
    tokens: &[String],
    pos: usize,
    spans: &mut Vec<(usize, usize)>,
    accept: &mut dyn FnMut(&[(usize, usize)]) -> bool,
) -> bool {
    let Some((first, rest)) = parts.split_first() else {
        return pos == tokens.len() && accept(spans);
    };
    match first {
        Pattern::Word(w) => {
            pos < tokens.len() && tokens[pos] == *w && match_parts(rest, tokens, pos + 1, spans, accept)
        }
        Pattern::Slot => {
            // Leave at least one token for every later part.
            let reserved = rest.len();
            if tokens.len() < pos + 1 + reserved {
                return false;
            }
            for end in (pos + 1..=tokens.len() - reserved).rev() {
                spans.push((pos, end));
                let done = match_parts(rest, tokens, end, spans, accept);
                spans.pop();
                if done {
                    return true;
                }
            }
            false
        }
    }
}

fn with_article(display: &str) -> String {
    let lower = display.to_lowercase();
    if lower.starts_with("the ") || lower.starts_with("some ") || lower.starts_with("a ") {
        return display.to_string();
    }
    let vowel = lower.starts_with(['a', 'e', 'i', 'o', 'u']);
    format!("{} {display}", if vowel { "an" } else { "a" })
}

fn points(v: f64) -> String {
    let unit = if (v - 1.0).abs() < 1e-12 { "point" } else { "points" };
    if v.fract() == 0.0 {
        format!("{} {unit}", v as i64)
    } else {
        format!("{v} {unit}")
    }
}
