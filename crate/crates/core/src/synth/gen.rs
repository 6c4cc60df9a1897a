//! Procedurally generated games sharing one lexicon, used as the source of
//! training transcripts.

use std::fmt::Write as _;

use calm_tensor::Rng;

use crate::game::{solve_with, GameError, GameSpec};

const ROOMS: [(&str, &str); 24] = [
    ("kitchen", "Pots and pans hang above an old stove."),
    ("hallway", "A long hallway with faded wallpaper."),
    ("cellar", "Stone walls glisten with damp."),
    ("attic", "Dust drifts through thin beams of light."),
    ("garden", "Weeds choke the flower beds."),
    ("shed", "Tools hang crookedly on the walls."),
    ("library", "Shelves of mouldy books reach the ceiling."),
    ("study", "A cold fireplace faces a worn armchair."),
    ("pantry", "Empty shelves line the walls."),
    ("yard", "Mud and puddles everywhere."),
    ("porch", "The boards creak underfoot."),
    ("tower", "Wind howls through narrow windows."),
    ("bedroom", "A four-poster bed dominates the room."),
    ("bathroom", "A cracked mirror hangs over the sink."),
    ("forest", "Tall pines block out the sky."),
    ("clearing", "Sunlight falls on soft grass."),
    ("cave", "Water drips somewhere in the gloom."),
    ("barn", "Hay is scattered across the floor."),
    ("chapel", "Rows of broken pews face a bare altar."),
    ("gallery", "Empty frames hang on the walls."),
    ("stable", "It smells of horses, though none remain."),
    ("workshop", "Sawdust covers every surface."),
    ("lobby", "A dusty reception desk stands unattended."),
    ("balcony", "The view stretches for miles."),
];

const ADJECTIVES: [&str; 10] = [
    "dusty", "cold", "narrow", "bright", "cluttered", "quiet", "damp", "gloomy", "small", "grand",
];

const CONTAINERS: [&str; 13] = [
    "chest", "box", "safe", "cabinet", "crate", "trunk", "drawer", "cupboard", "locker", "desk", "toolbox", "mailbox",
    "jar",
];
const DEPOSITS: [&str; 7] = ["case", "basket", "bowl", "barrel", "pot", "machine", "tray"];
const TREASURES: [&str; 19] = [
    "coin", "gem", "ring", "crown", "necklace", "medal", "pearl", "idol", "vase", "egg", "watch", "locket",
    "diamond", "ruby", "emerald", "scroll", "bottle", "seed", "gear",
];
const LIGHTS: [&str; 4] = ["lamp", "lantern", "torch", "candle"];
const JUNK: [&str; 19] = [
    "apple", "bread", "rope", "knife", "sword", "spoon", "cup", "hat", "boot", "stick", "hammer", "pencil",
    "letter", "towel", "blanket", "bucket", "spade", "book", "bench",
];
/// Fixtures that hide something, with the verb that reveals it.
const HIDERS: [(&str, &str); 6] = [
    ("rug", "move"),
    ("painting", "move"),
    ("bed", "search"),
    ("mat", "lift"),
    ("pile", "search"),
    ("cushion", "lift"),
];
/// Mechanisms that open a way onward, with their verb.
const MECHANISMS: [(&str, &str); 4] = [("lever", "pull"), ("button", "push"), ("handle", "turn"), ("chain", "pull")];
/// Fixtures that end the game, with the verb that triggers them.
const TRAPS: [(&str, &str, &str); 4] = [
    ("well", "climb", "You slip and fall into the well."),
    ("mushroom", "eat", "The mushroom was poisonous."),
    ("wire", "touch", "A fierce shock knocks you out."),
    ("potion", "drink", "The potion burns like fire."),
];
const DOORS: [&str; 3] = ["door", "gate", "hatch"];
const CUSTOM_VERBS: [&str; 10] = ["move", "search", "lift", "pull", "push", "turn", "climb", "eat", "touch", "drink"];

/// (direction, opposite) pairs used to connect rooms.
const LINKS: [(&str, &str); 5] = [
    ("north", "south"),
    ("east", "west"),
    ("up", "down"),
    ("northeast", "southwest"),
    ("northwest", "southeast"),
];

/// The verb block every generated game shares.
pub const STANDARD_VERBS: &str = "\
[verb take _]
aliases: get _, pick up _
kind: take

[verb drop _]
kind: drop

[verb open _]
kind: open

[verb close _]
kind: close

[verb unlock _ with _]
kind: unlock

[verb lock _ with _]
kind: lock

[verb put _ in _]
kind: put_in

[verb turn on _]
aliases: light _
kind: light

[verb turn off _]
kind: extinguish

[verb examine _]
aliases: x _
kind: examine

[verb look]
aliases: l
kind: look

[verb inventory]
aliases: i
kind: inventory

[verb wait]
aliases: z
kind: wait
";

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub min_rooms: usize,
    pub max_rooms: usize,
    pub min_puzzles: usize,
    pub max_puzzles: usize,
    pub trap_probability: f64,
    /// Planner depth used to derive and check the walkthrough.
    pub search_depth: usize,
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            min_rooms: 3,
            max_rooms: 5,
            min_puzzles: 2,
            max_puzzles: 3,
            trap_probability: 0.4,
            search_depth: 14,
            max_attempts: 20,
        }
    }
}

struct RoomB {
    id: String,
    name: String,
    description: String,
    dark: bool,
    exits: Vec<String>,
    used_dirs: Vec<&'static str>,
    notes: Vec<String>,
}

struct ObjB {
    id: String,
    display: String,
    location: String,
    attributes: Vec<&'static str>,
    initially: Vec<&'static str>,
    locked_by: Option<String>,
    description: String,
}

struct Builder {
    rng: Rng,
    rooms: Vec<RoomB>,
    objects: Vec<ObjB>,
    rules: Vec<String>,
    rewards: Vec<(String, u32)>,
    flag_counter: usize,
    has_key: bool,
    has_dark: bool,
}

impl Builder {
    fn fresh<'a>(&mut self, pool: &[&'a str]) -> Option<&'a str> {
        let free: Vec<&'a str> = pool
            .iter()
            .copied()
            .filter(|n| !self.objects.iter().any(|o| o.id == *n) && !self.rooms.iter().any(|r| r.id == *n))
            .collect();
        self.rng.choose(&free).copied()
    }

    fn random_room(&mut self) -> usize {
        self.rng.below(self.rooms.len())
    }

    fn object(&mut self, id: &str, location: String) -> &mut ObjB {
        let adjective = ADJECTIVES[self.rng.below(ADJECTIVES.len())];
        self.objects.push(ObjB {
            id: id.to_string(),
            display: format!("{adjective} {id}"),
            location,
            attributes: Vec::new(),
            initially: Vec::new(),
            locked_by: None,
            description: String::new(),
        });
        self.objects.last_mut().unwrap()
    }

    fn flag(&mut self, stem: &str) -> String {
        self.flag_counter += 1;
        format!("{stem}_{}", self.flag_counter)
    }

    fn reward(&mut self, when: String, lo: u32, hi: u32) {
        let v = lo + self.rng.below((hi - lo + 1) as usize) as u32;
        self.rewards.push((when, v));
    }

    fn connect(&mut self, from: usize, to: usize, guard: Option<&str>, via: Option<&str>) -> Option<&'static str> {
        let options: Vec<(&'static str, &'static str)> = LINKS
            .iter()
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .filter(|(d, back)| !self.rooms[from].used_dirs.contains(d) && !self.rooms[to].used_dirs.contains(back))
            .collect();
        let &(dir, back) = self.rng.choose(&options)?;
        let via_text = via.map(|v| format!(" via {v}")).unwrap_or_default();
        let guard_text = guard.map(|g| format!(" if flag {g}")).unwrap_or_default();
        let to_id = self.rooms[to].id.clone();
        let from_id = self.rooms[from].id.clone();
        self.rooms[from].exits.push(format!("{dir} -> {to_id}{via_text}{guard_text}"));
        self.rooms[from].used_dirs.push(dir);
        self.rooms[to].exits.push(format!("{back} -> {from_id}{via_text}"));
        self.rooms[to].used_dirs.push(back);
        Some(dir)
    }

    /// Somewhere to leave a small item: a floor, usually.
    fn item_spot(&mut self) -> String {
        let r = self.random_room();
        self.rooms[r].id.clone()
    }

    fn place_key(&mut self) {
        let spot = self.rng.below(4);
        if spot == 0 {
            if let Some(c) = self.fresh(&CONTAINERS) {
                let loc = self.item_spot();
                let o = self.object(c, loc);
                o.attributes = vec!["openable", "container"];
                self.object("key", format!("in {c}")).attributes = vec!["takeable"];
                return;
            }
        }
        if spot == 1 && self.hide("key") {
            return;
        }
        let loc = self.item_spot();
        self.object("key", loc).attributes = vec!["takeable"];
    }

    /// Hides `item` under a fixture; false if no fixture name is free.
    fn hide(&mut self, item: &str) -> bool {
        let free: Vec<(&str, &str)> = HIDERS
            .iter()
            .copied()
            .filter(|(n, _)| !self.objects.iter().any(|o| o.id == *n))
            .collect();
        let Some(&(fixture, verb)) = self.rng.choose(&free) else {
            return false;
        };
        let r = self.random_room();
        let room = self.rooms[r].id.clone();
        self.object(fixture, room.clone());
        self.object(item, "nowhere".into()).attributes = vec!["takeable"];
        let flag = self.flag("found");
        self.rules.push(format!(
            "[rule]\nverb: {verb} _\nargs: {fixture}\nif: not flag {flag}\ndo: set {flag}, place {item} {room}\nsay: You find a {item}.\n"
        ));
        true
    }

    fn treasure(&mut self) -> Option<&'static str> {
        self.fresh(&TREASURES)
    }

    fn puzzle_locked_container(&mut self) -> Option<String> {
        if self.has_key {
            return None;
        }
        let c = self.fresh(&CONTAINERS)?;
        let t = self.treasure()?;
        self.has_key = true;
        let loc = self.item_spot();
        let o = self.object(c, loc);
        o.attributes = vec!["openable", "container"];
        o.initially = vec!["locked"];
        o.locked_by = Some("key".into());
        self.object(t, format!("in {c}")).attributes = vec!["takeable"];
        self.place_key();
        self.reward(format!("not locked {c}"), 1, 3);
        self.reward(format!("carrying {t}"), 2, 5);
        Some(t.to_string())
    }

    fn puzzle_closed_container(&mut self) -> Option<String> {
        let c = self.fresh(&CONTAINERS)?;
        let t = self.treasure()?;
        let loc = self.item_spot();
        self.object(c, loc).attributes = vec!["openable", "container"];
        self.object(t, format!("in {c}")).attributes = vec!["takeable"];
        self.reward(format!("carrying {t}"), 2, 5);
        Some(t.to_string())
    }

    fn puzzle_dark_room(&mut self) -> Option<String> {
        if self.has_dark || self.rooms.len() < 2 {
            return None;
        }
        let l = self.fresh(&LIGHTS)?;
        let t = self.treasure()?;
        self.has_dark = true;
        let dark = 1 + self.rng.below(self.rooms.len() - 1);
        self.rooms[dark].dark = true;
        let mut lit_room = self.random_room();
        while lit_room == dark {
            lit_room = self.random_room();
        }
        let lit_id = self.rooms[lit_room].id.clone();
        self.object(l, lit_id).attributes = vec!["takeable", "light"];
        let dark_id = self.rooms[dark].id.clone();
        self.object(t, dark_id).attributes = vec!["takeable"];
        self.reward(format!("lit {l}"), 1, 2);
        self.reward(format!("carrying {t}"), 2, 5);
        Some(t.to_string())
    }

    fn puzzle_hidden(&mut self) -> Option<String> {
        let t = self.treasure()?;
        if !self.hide(t) {
            return None;
        }
        self.reward(format!("carrying {t}"), 2, 5);
        Some(t.to_string())
    }

    fn puzzle_mechanism(&mut self) -> Option<String> {
        let free: Vec<(&str, &str)> = MECHANISMS
            .iter()
            .copied()
            .filter(|(n, _)| !self.objects.iter().any(|o| o.id == *n))
            .collect();
        let &(mech, verb) = self.rng.choose(&free)?;
        let (name, desc) = *self.rng.choose(
            &ROOMS
                .iter()
                .copied()
                .filter(|(n, _)| !self.rooms.iter().any(|r| r.id == *n))
                .collect::<Vec<_>>(),
        )?;
        let t = self.treasure()?;
        let from = self.random_room();
        let flag = self.flag("opened");
        self.rooms.push(new_room(name, desc, &mut self.rng));
        let to = self.rooms.len() - 1;
        let dir = self.connect(from, to, Some(&flag), None)?;
        self.rooms[from].notes.push(format!("A gate blocks the way {dir}."));
        let from_id = self.rooms[from].id.clone();
        self.object(mech, from_id);
        self.rules.push(format!(
            "[rule]\nverb: {verb} _\nargs: {mech}\nif: not flag {flag}\ndo: set {flag}\nsay: With a groan, a gate swings open.\n"
        ));
        self.object(t, name.to_string()).attributes = vec!["takeable"];
        self.reward(format!("flag {flag}"), 1, 1);
        self.reward(format!("carrying {t}"), 2, 5);
        Some(t.to_string())
    }

    fn add_door(&mut self) {
        if self.rooms.len() < 2 {
            return;
        }
        let Some(door) = self.fresh(&DOORS) else { return };
        let a = self.random_room();
        let mut b = self.random_room();
        while b == a {
            b = self.random_room();
        }
        // Only rooms not yet linked to each other.
        let b_id = self.rooms[b].id.clone();
        if self.rooms[a].exits.iter().any(|e| e.contains(&format!("-> {b_id}"))) {
            return;
        }
        if self.connect(a, b, None, Some(door)).is_none() {
            return;
        }
        let loc = format!("{}, {}", self.rooms[a].id, b_id);
        self.object(door, loc).attributes = vec!["openable"];
    }

    fn add_trap(&mut self) {
        let &(fixture, verb, say) = self.rng.choose(&TRAPS).unwrap();
        if self.objects.iter().any(|o| o.id == fixture) {
            return;
        }
        let loc = self.item_spot();
        self.object(fixture, loc);
        self.rules
            .push(format!("[rule]\nverb: {verb} _\nargs: {fixture}\ndo: end\nsay: {say}\n"));
    }

    fn render(&self, id: &str, seed: u64, walkthrough: &[String]) -> String {
        let max: u32 = self.rewards.iter().map(|(_, v)| v).sum();
        let mut s = String::new();
        let _ = writeln!(s, "# Generated game, seed {seed}.\n");
        let _ = writeln!(
            s,
            "[meta]\nname: {id}\nstart: {}\nmax_score: {max}\nintro: Treasure is hidden somewhere nearby.\n",
            self.rooms[0].id
        );
        for r in &self.rooms {
            let mut desc = r.description.clone();
            for n in &r.notes {
                desc.push(' ');
                desc.push_str(n);
            }
            let dirs: Vec<&str> = r.used_dirs.clone();
            desc.push_str(&format!(" Exits lead {}.", join_words(&dirs)));
            let _ = writeln!(s, "[room {}]\nname: {}\ndescription: {desc}", r.id, r.name);
            if r.dark {
                s.push_str("dark: true\n");
            }
            for e in &r.exits {
                let _ = writeln!(s, "exit: {e}");
            }
            s.push('\n');
        }
        for o in &self.objects {
            let _ = writeln!(s, "[object {}]\nname: {}\nlocation: {}", o.id, o.display, o.location);
            if !o.attributes.is_empty() {
                let _ = writeln!(s, "attributes: {}", o.attributes.join(", "));
            }
            if !o.initially.is_empty() {
                let _ = writeln!(s, "initially: {}", o.initially.join(", "));
            }
            if let Some(k) = &o.locked_by {
                let _ = writeln!(s, "locked_by: {k}");
            }
            if !o.description.is_empty() {
                let _ = writeln!(s, "description: {}", o.description);
            }
            s.push('\n');
        }
        s.push_str(STANDARD_VERBS);
        for v in CUSTOM_VERBS {
            let _ = writeln!(s, "\n[verb {v} _]\nkind: custom");
        }
        s.push('\n');
        for r in &self.rules {
            let _ = writeln!(s, "{r}");
        }
        for (when, v) in &self.rewards {
            let _ = writeln!(s, "[reward]\nwhen: {when}\nvalue: {v}\n");
        }
        s.push_str("[walkthrough]\n");
        for a in walkthrough {
            let _ = writeln!(s, "{a}");
        }
        s
    }
}

fn new_room(name: &str, desc: &str, rng: &mut Rng) -> RoomB {
    let adjective = ADJECTIVES[rng.below(ADJECTIVES.len())];
    let mut title = name.to_string();
    title[..1].make_ascii_uppercase();
    RoomB {
        id: name.to_string(),
        name: title,
        description: format!("A {adjective} {name}. {desc}"),
        dark: false,
        exits: Vec::new(),
        used_dirs: Vec::new(),
        notes: Vec::new(),
    }
}

fn join_words(words: &[&str]) -> String {
    match words {
        [] => "nowhere".into(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Actions the walkthrough planner may use; dropping, closing and locking
/// never help in generated games and only widen the search.
pub fn planner_allows(action: &str) -> bool {
    let first = action.split(' ').next().unwrap_or("");
    !matches!(first, "drop" | "close" | "lock") && !action.starts_with("turn off")
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("no solvable game after {0} attempts")]
    Exhausted(usize),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Builds a solvable game. Returns the spec source and the parsed spec.
pub fn generate_game(id: &str, seed: u64, cfg: &GenConfig) -> Result<(String, GameSpec), GenError> {
    for attempt in 0..cfg.max_attempts {
        let mut rng = Rng::derive(seed, attempt as u64);
        let n_rooms = cfg.min_rooms + rng.below(cfg.max_rooms - cfg.min_rooms + 1);
        let mut b = Builder {
            rng,
            rooms: Vec::new(),
            objects: Vec::new(),
            rules: Vec::new(),
            rewards: Vec::new(),
            flag_counter: 0,
            has_key: false,
            has_dark: false,
        };
        let mut names: Vec<(&str, &str)> = ROOMS.to_vec();
        b.rng.shuffle(&mut names);
        for &(name, desc) in names.iter().take(n_rooms) {
            let room = new_room(name, desc, &mut b.rng);
            b.rooms.push(room);
        }
        let mut linked = true;
        for i in 1..n_rooms {
            let parent = b.rng.below(i);
            linked &= b.connect(parent, i, None, None).is_some();
        }
        if !linked {
            continue;
        }
        let n_puzzles = cfg.min_puzzles + b.rng.below(cfg.max_puzzles - cfg.min_puzzles + 1);
        let mut treasures = Vec::new();
        let mut tries = 0;
        while treasures.len() < n_puzzles && tries < 20 {
            tries += 1;
            let t = match b.rng.weighted(&[3.0, 2.0, 2.0, 2.0, 1.5]) {
                0 => b.puzzle_locked_container(),
                1 => b.puzzle_closed_container(),
                2 => b.puzzle_dark_room(),
                3 => b.puzzle_hidden(),
                _ => b.puzzle_mechanism(),
            };
            treasures.extend(t);
        }
        if b.rng.chance(0.4) {
            if let Some(d) = b.fresh(&DEPOSITS) {
                let loc = b.item_spot();
                b.object(d, loc).attributes = vec!["container"];
                for t in treasures.clone() {
                    b.reward(format!("inside {t} {d}"), 2, 5);
                }
            }
        }
        if b.rng.chance(0.3) {
            b.add_door();
        }
        if b.rng.chance(cfg.trap_probability) {
            b.add_trap();
        }
        let n_junk = 1 + b.rng.below(3);
        for _ in 0..n_junk {
            if let Some(j) = b.fresh(&JUNK) {
                let loc = b.item_spot();
                b.object(j, loc).attributes = vec!["takeable"];
            }
        }
        if b.rewards.is_empty() {
            continue;
        }
        let draft = b.render(id, seed, &[]);
        let spec = match GameSpec::from_text_unchecked(&draft) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let Some(walkthrough) = solve_with(&spec, cfg.search_depth, &planner_allows) else {
            continue;
        };
        let source = b.render(id, seed, &walkthrough);
        let spec = GameSpec::from_text(&source)?;
        return Ok((source, spec));
    }
    Err(GenError::Exhausted(cfg.max_attempts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_games_are_valid_and_reproducible() {
        let cfg = GenConfig::default();
        for seed in 0..8 {
            let (a, spec) = generate_game("g", seed, &cfg).unwrap();
            let (b, _) = generate_game("g", seed, &cfg).unwrap();
            assert_eq!(a, b);
            assert!(spec.max_score > 0.0);
            assert!(!spec.walkthrough.is_empty());
        }
    }
}
