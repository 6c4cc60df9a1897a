//! Declarative game definitions and the plain-text spec format.
//!
//! The format is documented in `docs/game-format.md`.

use std::collections::{BTreeSet, HashMap};

use crate::text::tokenize;

use super::GameError;

/// The thirteen one-word movement commands.
pub const DIRECTIONS: [&str; 13] = [
    "north",
    "south",
    "east",
    "west",
    "northeast",
    "northwest",
    "southeast",
    "southwest",
    "up",
    "down",
    "enter",
    "exit",
    "out",
];

pub(crate) const GAME_OVER_FLAG: &str = "game.over";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    Room(usize),
    Inventory,
    Inside(usize),
    /// Not in play until a rule places it.
    Nowhere,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Condition {
    At(usize),
    Carrying(usize),
    Here(usize),
    Located(usize, usize),
    Inside(usize, usize),
    Open(usize),
    Locked(usize),
    Lit(usize),
    Flag(usize),
    Not(Box<Condition>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Set(usize),
    Clear(usize),
    Place(usize, usize),
    Give(usize),
    Remove(usize),
    Put(usize, usize),
    Open(usize),
    Close(usize),
    Unlock(usize),
    Lock(usize),
    Light(usize),
    Extinguish(usize),
    Goto(usize),
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerbKind {
    Take,
    Drop,
    Open,
    Close,
    Unlock,
    Lock,
    PutIn,
    Light,
    Extinguish,
    Examine,
    Look,
    Inventory,
    Wait,
    Custom,
    /// Movement; the payload indexes [`DIRECTIONS`].
    Go(usize),
}

impl VerbKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "take" => Self::Take,
            "drop" => Self::Drop,
            "open" => Self::Open,
            "close" => Self::Close,
            "unlock" => Self::Unlock,
            "lock" => Self::Lock,
            "put_in" => Self::PutIn,
            "light" => Self::Light,
            "extinguish" => Self::Extinguish,
            "examine" => Self::Examine,
            "look" => Self::Look,
            "inventory" => Self::Inventory,
            "wait" => Self::Wait,
            "custom" => Self::Custom,
            _ => return None,
        })
    }

    fn arity(self) -> Option<usize> {
        match self {
            Self::Take
            | Self::Drop
            | Self::Open
            | Self::Close
            | Self::Light
            | Self::Extinguish
            | Self::Examine => Some(1),
            Self::Unlock | Self::Lock | Self::PutIn => Some(2),
            Self::Look | Self::Inventory | Self::Wait | Self::Go(_) => Some(0),
            Self::Custom => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    Word(String),
    Slot,
}

/// A command shape such as `unlock _ with _`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub parts: Vec<Pattern>,
}

impl Template {
    pub fn parse(text: &str) -> Self {
        let parts = text
            .split_whitespace()
            .map(|w| {
                if w == "_" {
                    Pattern::Slot
                } else {
                    Pattern::Word(w.to_lowercase())
                }
            })
            .collect();
        Self { parts }
    }

    pub fn arity(&self) -> usize {
        self.parts.iter().filter(|p| **p == Pattern::Slot).count()
    }

    /// Renders the template with the slots filled in order.
    pub fn render(&self, fillers: &[&str]) -> String {
        let mut it = fillers.iter();
        self.parts
            .iter()
            .map(|p| match p {
                Pattern::Word(w) => w.as_str(),
                Pattern::Slot => it.next().copied().unwrap_or("_"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn text(&self) -> String {
        self.render(&[])
    }
}

#[derive(Clone, Debug)]
pub struct Verb {
    /// The first template is canonical and is the one the admissibility
    /// oracle enumerates.
    pub templates: Vec<Template>,
    pub kind: VerbKind,
}

impl Verb {
    pub fn canonical(&self) -> &Template {
        &self.templates[0]
    }

    pub fn arity(&self) -> usize {
        self.templates[0].arity()
    }
}

#[derive(Clone, Debug)]
pub struct Exit {
    pub direction: usize,
    pub target: usize,
    pub via: Option<usize>,
    pub guard: Vec<Condition>,
}

#[derive(Clone, Debug)]
pub struct Room {
    pub id: String,
    pub name: String,
    pub description: String,
    pub dark: bool,
    pub exits: Vec<Exit>,
}

#[derive(Clone, Debug)]
pub struct Object {
    pub id: String,
    pub display: String,
    /// Synonyms as token sequences; the first one is canonical.
    pub names: Vec<Vec<String>>,
    pub description: String,
    pub takeable: bool,
    pub openable: bool,
    pub container: bool,
    pub light: bool,
    pub initially_open: bool,
    pub initially_locked: bool,
    pub initially_lit: bool,
    pub locked_by: Option<usize>,
    pub location: Location,
    /// Extra rooms a fixed object (a door, say) is visible from.
    pub also_in: Vec<usize>,
}

impl Object {
    pub fn canonical_name(&self) -> String {
        self.names[0].join(" ")
    }
}

#[derive(Clone, Debug)]
pub struct Rule {
    pub verb: usize,
    pub args: Vec<usize>,
    pub conditions: Vec<Condition>,
    pub effects: Vec<Effect>,
    pub say: String,
}

#[derive(Clone, Debug)]
pub struct Reward {
    pub conditions: Vec<Condition>,
    pub value: f64,
    pub once: bool,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct GameSpec {
    pub name: String,
    pub intro: String,
    pub start: usize,
    pub max_score: f64,
    /// Marks games small enough that an agent is expected to solve them.
    pub learnable: bool,
    pub rooms: Vec<Room>,
    pub objects: Vec<Object>,
    pub verbs: Vec<Verb>,
    pub rules: Vec<Rule>,
    pub rewards: Vec<Reward>,
    pub walkthrough: Vec<String>,
    pub vocabulary: BTreeSet<String>,
    /// Flag names; object state lives here as `<object>.open` and so on.
    pub flags: Vec<String>,
    pub(crate) flag_index: HashMap<String, usize>,
    pub(crate) open_flag: Vec<Option<usize>>,
    pub(crate) locked_flag: Vec<Option<usize>>,
    pub(crate) lit_flag: Vec<Option<usize>>,
    pub(crate) game_over_flag: usize,
}

impl GameSpec {
    pub fn room_index(&self, id: &str) -> Option<usize> {
        self.rooms.iter().position(|r| r.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn flag(&self, name: &str) -> Option<usize> {
        self.flag_index.get(name).copied()
    }

    /// Longest verb template, in tokens, with slots counted as one token.
    pub fn max_template_len(&self) -> usize {
        self.verbs
            .iter()
            .flat_map(|v| v.templates.iter())
            .map(|t| t.parts.len())
            .max()
            .unwrap_or(0)
    }

    /// Object names that appear in the vocabulary, longest first.
    pub fn object_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .objects
            .iter()
            .flat_map(|o| o.names.iter().map(|n| n.join(" ")))
            .collect();
        names.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        names.dedup();
        names
    }

    pub fn from_text(source: &str) -> Result<Self, GameError> {
        let spec = Self::from_text_unchecked(source)?;
        super::validate::validate(&spec)?;
        Ok(spec)
    }

    /// Parses and resolves references without the whole-game invariants
    /// (walkthrough replay in particular).
    pub fn from_text_unchecked(source: &str) -> Result<Self, GameError> {
        build(parse_sections(source)?)
    }
}

struct Section {
    line: usize,
    kind: String,
    arg: String,
    entries: Vec<(usize, String, String)>,
    lines: Vec<(usize, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
        self.entries
            .iter()
            .filter(move |(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    fn require(&self, key: &str) -> Result<(usize, &str), GameError> {
        self.get(key).ok_or_else(|| GameError::Parse {
            line: self.line,
            message: format!("[{}] section is missing `{key}`", self.kind),
        })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> GameError {
    GameError::Parse {
        line,
        message: message.into(),
    }
}

const KNOWN_SECTIONS: [&str; 7] = ["meta", "room", "object", "verb", "rule", "reward", "walkthrough"];

fn parse_sections(source: &str) -> Result<Vec<Section>, GameError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw_line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            let inner = line
                .strip_prefix('[')
                .and_then(|l| l.strip_suffix(']'))
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            let mut parts = inner.trim().splitn(2, char::is_whitespace);
            let kind = parts.next().unwrap_or("").to_string();
            if !KNOWN_SECTIONS.contains(&kind.as_str()) {
                return Err(parse_err(line_no, format!("unknown section `{kind}`")));
            }
            let arg = parts.next().unwrap_or("").trim().to_string();
            sections.push(Section {
                line: line_no,
                kind,
                arg,
                entries: Vec::new(),
                lines: Vec::new(),
            });
            continue;
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| parse_err(line_no, "content before the first section header"))?;
        if section.kind == "walkthrough" {
            section.lines.push((line_no, line.to_string()));
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| parse_err(line_no, "expected `key: value`"))?;
        section
            .entries
            .push((line_no, key.trim().to_lowercase(), value.trim().to_string()));
    }
    Ok(sections)
}

fn parse_bool(line: usize, v: &str) -> Result<bool, GameError> {
    match v {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        _ => Err(parse_err(line, format!("expected true or false, found `{v}`"))),
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

struct Ids {
    rooms: HashMap<String, usize>,
    objects: HashMap<String, usize>,
    flags: Vec<String>,
    flag_index: HashMap<String, usize>,
}

impl Ids {
    fn room(&self, line: usize, id: &str) -> Result<usize, GameError> {
        self.rooms
            .get(id)
            .copied()
            .ok_or_else(|| GameError::Invalid(format!("line {line}: unknown room `{id}`")))
    }

    fn object(&self, line: usize, id: &str) -> Result<usize, GameError> {
        self.objects
            .get(id)
            .copied()
            .ok_or_else(|| GameError::Invalid(format!("line {line}: unknown object `{id}`")))
    }

    fn flag(&mut self, line: usize, name: &str) -> Result<usize, GameError> {
        if name.contains('.') {
            return Err(parse_err(line, format!("flag names may not contain `.`: `{name}`")));
        }
        Ok(self.intern(name))
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.flag_index.get(name) {
            return i;
        }
        self.flags.push(name.to_string());
        self.flag_index.insert(name.to_string(), self.flags.len() - 1);
        self.flags.len() - 1
    }
}

fn words(line: usize, text: &str, expected: usize, what: &str) -> Result<Vec<String>, GameError> {
    let w: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if w.len() != expected {
        return Err(parse_err(
            line,
            format!("`{what}` takes {} argument(s): `{text}`", expected - 1),
        ));
    }
    Ok(w)
}

fn parse_condition(ids: &mut Ids, line: usize, text: &str) -> Result<Condition, GameError> {
    let text = text.trim();
    if let Some(rest) = text.strip_prefix("not ") {
        return Ok(Condition::Not(Box::new(parse_condition(ids, line, rest)?)));
    }
    let head = text.split_whitespace().next().unwrap_or("");
    Ok(match head {
        "at" => Condition::At(ids.room(line, &words(line, text, 2, head)?[1])?),
        "carrying" => Condition::Carrying(ids.object(line, &words(line, text, 2, head)?[1])?),
        "here" => Condition::Here(ids.object(line, &words(line, text, 2, head)?[1])?),
        "open" => Condition::Open(ids.object(line, &words(line, text, 2, head)?[1])?),
        "locked" => Condition::Locked(ids.object(line, &words(line, text, 2, head)?[1])?),
        "lit" => Condition::Lit(ids.object(line, &words(line, text, 2, head)?[1])?),
        "flag" => Condition::Flag(ids.flag(line, &words(line, text, 2, head)?[1])?),
        "located" => {
            let w = words(line, text, 3, head)?;
            Condition::Located(ids.object(line, &w[1])?, ids.room(line, &w[2])?)
        }
        "inside" => {
            let w = words(line, text, 3, head)?;
            Condition::Inside(ids.object(line, &w[1])?, ids.object(line, &w[2])?)
        }
        _ => return Err(parse_err(line, format!("unknown condition `{text}`"))),
    })
}

fn parse_effect(ids: &mut Ids, line: usize, text: &str) -> Result<Effect, GameError> {
    let text = text.trim();
    let head = text.split_whitespace().next().unwrap_or("");
    let one = |ids: &Ids| -> Result<usize, GameError> {
        ids.object(line, &words(line, text, 2, head)?[1])
    };
    Ok(match head {
        "set" => Effect::Set(ids.flag(line, &words(line, text, 2, head)?[1])?),
        "clear" => Effect::Clear(ids.flag(line, &words(line, text, 2, head)?[1])?),
        "give" => Effect::Give(one(ids)?),
        "remove" => Effect::Remove(one(ids)?),
        "open" => Effect::Open(one(ids)?),
        "close" => Effect::Close(one(ids)?),
        "unlock" => Effect::Unlock(one(ids)?),
        "lock" => Effect::Lock(one(ids)?),
        "light" => Effect::Light(one(ids)?),
        "extinguish" => Effect::Extinguish(one(ids)?),
        "goto" => Effect::Goto(ids.room(line, &words(line, text, 2, head)?[1])?),
        "place" => {
            let w = words(line, text, 3, head)?;
            Effect::Place(ids.object(line, &w[1])?, ids.room(line, &w[2])?)
        }
        "put" => {
            let w = words(line, text, 3, head)?;
            Effect::Put(ids.object(line, &w[1])?, ids.object(line, &w[2])?)
        }
        "end" if text == "end" => Effect::End,
        _ => return Err(parse_err(line, format!("unknown effect `{text}`"))),
    })
}

fn build(sections: Vec<Section>) -> Result<GameSpec, GameError> {
    let metas: Vec<&Section> = sections.iter().filter(|s| s.kind == "meta").collect();
    let meta = match metas.as_slice() {
        [m] => *m,
        [] => return Err(GameError::Invalid("missing [meta] section".into())),
        [_, second, ..] => return Err(parse_err(second.line, "duplicate [meta] section")),
    };

    // First pass: ids, so later references can be resolved in any order.
    let mut ids = Ids {
        rooms: HashMap::new(),
        objects: HashMap::new(),
        flags: Vec::new(),
        flag_index: HashMap::new(),
    };
    for s in &sections {
        let table = match s.kind.as_str() {
            "room" => &mut ids.rooms,
            "object" => &mut ids.objects,
            _ => continue,
        };
        if s.arg.is_empty() || s.arg.contains(char::is_whitespace) {
            return Err(parse_err(s.line, format!("[{}] needs a single-word id", s.kind)));
        }
        let next = table.len();
        if table.insert(s.arg.clone(), next).is_some() {
            return Err(parse_err(s.line, format!("duplicate {} id `{}`", s.kind, s.arg)));
        }
    }

    let mut rooms = Vec::new();
    for s in sections.iter().filter(|s| s.kind == "room") {
        let mut exits = Vec::new();
        for (line, text) in s.all("exit") {
            exits.push(parse_exit(&mut ids, line, text)?);
        }
        let dark = match s.get("dark") {
            Some((l, v)) => parse_bool(l, v)?,
            None => false,
        };
        rooms.push(Room {
            id: s.arg.clone(),
            name: s.get("name").map(|(_, v)| v.to_string()).unwrap_or_else(|| title_case(&s.arg)),
            description: s.get("description").map(|(_, v)| v.to_string()).unwrap_or_default(),
            dark,
            exits,
        });
    }

    let mut objects = Vec::new();
    for s in sections.iter().filter(|s| s.kind == "object") {
        objects.push(parse_object(&ids, s)?);
    }

    let mut verbs: Vec<Verb> = Vec::new();
    for s in sections.iter().filter(|s| s.kind == "verb") {
        let mut templates = vec![Template::parse(&s.arg)];
        if let Some((_, v)) = s.get("aliases") {
            templates.extend(list(v).map(Template::parse));
        }
        let (kline, kind) = s.require("kind")?;
        let kind =
            VerbKind::parse(kind).ok_or_else(|| parse_err(kline, format!("unknown verb kind `{kind}`")))?;
        if templates.iter().any(|t| t.parts.is_empty() || t.arity() > 2) {
            return Err(parse_err(s.line, "verb templates need 1+ words and at most 2 slots"));
        }
        let arity = templates[0].arity();
        if templates.iter().any(|t| t.arity() != arity) {
            return Err(parse_err(s.line, "all aliases of a verb must share its arity"));
        }
        if let Some(expected) = kind.arity() {
            if expected != arity {
                return Err(parse_err(
                    s.line,
                    format!("verb kind `{kind:?}` needs {expected} slot(s)"),
                ));
            }
        }
        verbs.push(Verb { templates, kind });
    }
    // Movement commands come from the exits actually used.
    let mut used_dirs: Vec<usize> = rooms
        .iter()
        .flat_map(|r| r.exits.iter().map(|e| e.direction))
        .collect();
    used_dirs.sort_unstable();
    used_dirs.dedup();
    for d in used_dirs {
        verbs.push(Verb {
            templates: vec![Template::parse(DIRECTIONS[d])],
            kind: VerbKind::Go(d),
        });
    }

    let mut rules = Vec::new();
    for s in sections.iter().filter(|s| s.kind == "rule") {
        let (vline, vtext) = s.require("verb")?;
        let template = Template::parse(vtext);
        let verb = verbs
            .iter()
            .position(|v| v.templates.contains(&template))
            .ok_or_else(|| GameError::Invalid(format!("line {vline}: rule uses unknown verb `{vtext}`")))?;
        let mut args = Vec::new();
        if let Some((l, v)) = s.get("args") {
            for id in list(v) {
                args.push(ids.object(l, id)?);
            }
        }
        if args.len() != verbs[verb].arity() {
            return Err(GameError::Invalid(format!(
                "line {}: rule for `{vtext}` needs {} argument(s)",
                s.line,
                verbs[verb].arity()
            )));
        }
        let mut conditions = Vec::new();
        if let Some((l, v)) = s.get("if") {
            for c in list(v) {
                conditions.push(parse_condition(&mut ids, l, c)?);
            }
        }
        let mut effects = Vec::new();
        if let Some((l, v)) = s.get("do") {
            for e in list(v) {
                effects.push(parse_effect(&mut ids, l, e)?);
            }
        }
        rules.push(Rule {
            verb,
            args,
            conditions,
            effects,
            say: s.get("say").map(|(_, v)| v.to_string()).unwrap_or_default(),
        });
    }

    let mut rewards = Vec::new();
    for s in sections.iter().filter(|s| s.kind == "reward") {
        let (wline, when) = s.require("when")?;
        let mut conditions = Vec::new();
        for c in list(when) {
            conditions.push(parse_condition(&mut ids, wline, c)?);
        }
        let (vline, value) = s.require("value")?;
        let value: f64 = value
            .parse()
            .map_err(|_| parse_err(vline, format!("bad reward value `{value}`")))?;
        let once = match s.get("once") {
            Some((l, v)) => parse_bool(l, v)?,
            None => true,
        };
        rewards.push(Reward {
            conditions,
            value,
            once,
            label: s.get("label").map(|(_, v)| v.to_string()).unwrap_or_default(),
        });
    }

    let walkthrough: Vec<String> = sections
        .iter()
        .filter(|s| s.kind == "walkthrough")
        .flat_map(|s| s.lines.iter().map(|(_, l)| l.to_lowercase()))
        .collect();

    let (sline, start) = meta.require("start")?;
    let start = ids.room(sline, start)?;
    let (mline, max_score) = meta.require("max_score")?;
    let max_score: f64 = max_score
        .parse()
        .map_err(|_| parse_err(mline, format!("bad max_score `{max_score}`")))?;
    let learnable = match meta.get("learnable") {
        Some((l, v)) => parse_bool(l, v)?,
        None => false,
    };

    // Object state flags follow the user flags.
    let mut open_flag = vec![None; objects.len()];
    let mut locked_flag = vec![None; objects.len()];
    let mut lit_flag = vec![None; objects.len()];
    for (i, o) in objects.iter().enumerate() {
        if o.openable {
            open_flag[i] = Some(ids.intern(&format!("{}.open", o.id)));
        }
        if o.locked_by.is_some() {
            locked_flag[i] = Some(ids.intern(&format!("{}.locked", o.id)));
        }
        if o.light {
            lit_flag[i] = Some(ids.intern(&format!("{}.lit", o.id)));
        }
    }
    let game_over_flag = ids.intern(GAME_OVER_FLAG);

    let mut vocabulary = BTreeSet::new();
    for v in &verbs {
        for t in &v.templates {
            for p in &t.parts {
                if let Pattern::Word(w) = p {
                    vocabulary.extend(tokenize(w));
                }
            }
        }
    }
    for o in &objects {
        for n in &o.names {
            vocabulary.extend(n.iter().cloned());
        }
    }
    if let Some((_, extra)) = meta.get("vocabulary") {
        vocabulary.extend(extra.split([',', ' ']).filter(|s| !s.is_empty()).map(str::to_lowercase));
    }

    let spec = GameSpec {
        name: meta.get("name").map(|(_, v)| v.to_string()).unwrap_or_default(),
        intro: meta.get("intro").map(|(_, v)| v.to_string()).unwrap_or_default(),
        start,
        max_score,
        learnable,
        rooms,
        objects,
        verbs,
        rules,
        rewards,
        walkthrough,
        vocabulary,
        flags: ids.flags,
        flag_index: ids.flag_index,
        open_flag,
        locked_flag,
        lit_flag,
        game_over_flag,
    };
    Ok(spec)
}

fn parse_exit(ids: &mut Ids, line: usize, text: &str) -> Result<Exit, GameError> {
    let (dir, rest) = text
        .split_once("->")
        .ok_or_else(|| parse_err(line, "exit needs `direction -> room`"))?;
    let dir = dir.trim().to_lowercase();
    let direction = DIRECTIONS
        .iter()
        .position(|d| *d == dir)
        .ok_or_else(|| parse_err(line, format!("unknown direction `{dir}`")))?;
    let (head, guard_text) = match rest.split_once(" if ") {
        Some((h, g)) => (h, Some(g)),
        None => (rest, None),
    };
    let mut head = head.split_whitespace();
    let target_id = head.next().ok_or_else(|| parse_err(line, "exit has no target room"))?;
    let target = ids
        .rooms
        .get(target_id)
        .copied()
        .ok_or_else(|| GameError::Invalid(format!("line {line}: exit targets unknown room `{target_id}`")))?;
    let via = match (head.next(), head.next(), head.next()) {
        (None, _, _) => None,
        (Some("via"), Some(obj), None) => Some(ids.object(line, obj)?),
        _ => return Err(parse_err(line, format!("malformed exit `{text}`"))),
    };
    let mut guard = Vec::new();
    if let Some(g) = guard_text {
        for c in list(g) {
            guard.push(parse_condition(ids, line, c)?);
        }
    }
    Ok(Exit {
        direction,
        target,
        via,
        guard,
    })
}

fn parse_object(ids: &Ids, s: &Section) -> Result<Object, GameError> {
    let mut names: Vec<Vec<String>> = match s.get("names") {
        Some((_, v)) => list(v).map(tokenize).filter(|n| !n.is_empty()).collect(),
        None => Vec::new(),
    };
    if names.is_empty() {
        names.push(tokenize(&s.arg.replace('_', " ")));
    }
    let mut obj = Object {
        id: s.arg.clone(),
        display: s
            .get("name")
            .map(|(_, v)| v.to_string())
            .unwrap_or_else(|| names[0].join(" ")),
        names,
        description: s.get("description").map(|(_, v)| v.to_string()).unwrap_or_default(),
        takeable: false,
        openable: false,
        container: false,
        light: false,
        initially_open: false,
        initially_locked: false,
        initially_lit: false,
        locked_by: None,
        location: Location::Nowhere,
        also_in: Vec::new(),
    };
    if let Some((l, v)) = s.get("attributes") {
        for a in list(v) {
            match a {
                "takeable" => obj.takeable = true,
                "openable" => obj.openable = true,
                "container" => obj.container = true,
                "light" => obj.light = true,
                _ => return Err(parse_err(l, format!("unknown attribute `{a}`"))),
            }
        }
    }
    if let Some((l, v)) = s.get("initially") {
        for a in list(v) {
            match a {
                "open" => obj.initially_open = true,
                "locked" => obj.initially_locked = true,
                "lit" => obj.initially_lit = true,
                _ => return Err(parse_err(l, format!("unknown initial state `{a}`"))),
            }
        }
    }
    if let Some((l, v)) = s.get("locked_by") {
        obj.locked_by = Some(ids.object(l, v)?);
    }
    if let Some((l, v)) = s.get("location") {
        let mut parts = list(v);
        let first = parts.next().unwrap_or("nowhere");
        obj.location = match first.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["inventory"] => Location::Inventory,
            ["nowhere"] => Location::Nowhere,
            ["in", container] => Location::Inside(ids.object(l, container)?),
            [room] => Location::Room(ids.room(l, room)?),
            _ => return Err(parse_err(l, format!("malformed location `{v}`"))),
        };
        for extra in parts {
            obj.also_in.push(ids.room(l, extra)?);
        }
    }
    Ok(obj)
}

fn title_case(id: &str) -> String {
    id.split('_')
        .map(|w| {
            let mut c = w.chars();
            match c.next() {
                Some(f) => f.to_uppercase().chain(c).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
