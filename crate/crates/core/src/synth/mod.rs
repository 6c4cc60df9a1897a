//! Synthetic training data: generated games played by a noisy scripted
//! player, written out as raw transcripts.

pub mod gen;

use std::collections::VecDeque;
use std::fmt::Write as _;

use calm_tensor::Rng;
use serde::{Deserialize, Serialize};

use crate::game::{plan_next_reward_with, GameSpec, WorldState};

pub use gen::{generate_game, GenConfig, GenError};

const CHAT: [&str; 8] = [
    "<ada> maybe we should look around first",
    "<bo> i think the key goes somewhere",
    "<ada> try the other room",
    "<cyd> did anyone read the description?",
    "* bo waves",
    "<bo> lol",
    "<cyd> we need light down there",
    "<ada> brb",
];

const GIBBERISH: [&str; 8] = ["dance", "xyzzy", "sing", "hello floyd", "plugh", "think", "jump around", "kiss floyd"];

const EXTRA_NOUNS: [&str; 10] = ["wall", "floor", "ceiling", "window", "sky", "dust", "shadow", "door", "tree", "table"];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlayerConfig {
    /// Probability of a detour instead of the planned move.
    pub noise: f64,
    pub meta_probability: f64,
    pub chat_probability: f64,
    pub abbreviation_probability: f64,
    /// Chance of undoing a losing move rather than stopping.
    pub undo_after_death: f64,
    pub search_depth: usize,
    pub max_turns: usize,
}

impl Default for PlayerConfig {
    fn default() -> Self {
        Self {
            noise: 0.3,
            meta_probability: 0.04,
            chat_probability: 0.06,
            abbreviation_probability: 0.4,
            undo_after_death: 0.7,
            search_depth: 14,
            max_turns: 60,
        }
    }
}

/// Abbreviated spelling a player might type for a canonical command.
fn abbreviate(action: &str, rng: &mut Rng) -> String {
    let short = match action {
        "north" => "n",
        "south" => "s",
        "east" => "e",
        "west" => "w",
        "northeast" => "ne",
        "northwest" => "nw",
        "southeast" => "se",
        "southwest" => "sw",
        "up" => "u",
        "down" => "d",
        "look" => "l",
        "inventory" => "i",
        "wait" => "z",
        _ => {
            if let Some(rest) = action.strip_prefix("examine ") {
                return format!("x {rest}");
            }
            if let Some(rest) = action.strip_prefix("take ") {
                if rng.chance(0.5) {
                    return format!("get {rest}");
                }
            }
            return action.to_string();
        }
    };
    short.to_string()
}

enum Move {
    Plan,
    Detour,
    Examine,
    Failed,
    Gibberish,
    Meta,
}

/// Plays `spec` once and returns the raw log.
pub fn noisy_transcript(spec: &GameSpec, transcript_id: &str, game_id: &str, seed: u64, cfg: &PlayerConfig) -> String {
    let mut rng = Rng::seed(seed);
    let mut log = format!("@transcript {transcript_id}\n@game {game_id}\n");
    let (mut state, obs) = spec.reset();
    push_text(&mut log, &obs);
    let mut plan: VecDeque<String> = VecDeque::new();
    let mut history: Vec<WorldState> = Vec::new();
    let mut saved: Option<WorldState> = None;
    let names: Vec<String> = spec.objects.iter().map(|o| o.canonical_name()).collect();
    let allow = |a: &str| gen::planner_allows(a);

    for _ in 0..cfg.max_turns {
        if spec.is_done(&state) {
            if state.score < spec.max_score - 1e-9 && rng.chance(cfg.undo_after_death) {
                if let Some(prev) = history.pop() {
                    state = prev;
                    plan.clear();
                    let _ = writeln!(log, "> undo\n[Previous turn undone.]");
                    continue;
                }
            }
            break;
        }
        if rng.chance(cfg.chat_probability) {
            let _ = writeln!(log, "{}", CHAT[rng.below(CHAT.len())]);
        }
        let r = rng.next_f64();
        let mv = if r < cfg.meta_probability {
            Move::Meta
        } else if r < cfg.meta_probability + cfg.noise {
            match rng.below(8) {
                0..=2 => Move::Detour,
                3 | 4 => Move::Examine,
                5 | 6 => Move::Failed,
                _ => Move::Gibberish,
            }
        } else {
            Move::Plan
        };

        let action: String = match mv {
            Move::Meta => {
                let (cmd, reply) = match rng.below(5) {
                    0 => {
                        saved = Some(state.clone());
                        ("save", "Ok.".to_string())
                    }
                    1 => match &saved {
                        Some(s) => {
                            state = s.clone();
                            plan.clear();
                            ("restore", format!("Ok.\n{}", spec.look(&state)))
                        }
                        None => ("restore", "Restore failed.".to_string()),
                    },
                    2 => match history.pop() {
                        Some(prev) => {
                            state = prev;
                            plan.clear();
                            ("undo", "[Previous turn undone.]".to_string())
                        }
                        None => ("undo", "[You can't undo any further.]".to_string()),
                    },
                    3 => (
                        "score",
                        format!("You have scored {} out of a possible {}.", state.score, spec.max_score),
                    ),
                    _ => ("hint", "Sorry, no hints are available.".to_string()),
                };
                let _ = writeln!(log, "> {cmd}\n{reply}");
                continue;
            }
            Move::Gibberish => GIBBERISH[rng.below(GIBBERISH.len())].to_string(),
            Move::Examine => match rng.below(3) {
                0 => "look".into(),
                1 => "inventory".into(),
                _ => {
                    let scope = spec.scope(&state);
                    let visible: Vec<&String> = names.iter().enumerate().filter(|(i, _)| scope[*i]).map(|(_, n)| n).collect();
                    match rng.choose(&visible) {
                        Some(n) => format!("examine {n}"),
                        None => "look".into(),
                    }
                }
            },
            Move::Failed => failed_attempt(spec, &names, &mut rng),
            Move::Detour => {
                let adm: Vec<String> = spec.admissible_actions(&state).into_iter().collect();
                match rng.choose(&adm) {
                    Some(a) => a.clone(),
                    None => "wait".into(),
                }
            }
            Move::Plan => {
                if plan.is_empty() {
                    match plan_next_reward_with(spec, &state, cfg.search_depth, &allow) {
                        Some(p) => plan = p.into(),
                        None => break,
                    }
                }
                plan.pop_front().unwrap()
            }
        };

        let typed = if rng.chance(cfg.abbreviation_probability) {
            abbreviate(&action, &mut rng)
        } else {
            action.clone()
        };
        let (next, result) = spec.step(&state, &action);
        if result.state_changed {
            history.push(state.clone());
            if !matches!(mv, Move::Plan) {
                plan.clear();
            }
        } else if matches!(mv, Move::Plan) {
            plan.clear();
        }
        state = next;
        let _ = writeln!(log, "> {typed}");
        push_text(&mut log, &result.observation);
    }
    log
}

/// A plausible command that the game rejects or ignores.
fn failed_attempt(spec: &GameSpec, names: &[String], rng: &mut Rng) -> String {
    let verbs: Vec<&crate::game::Verb> = spec.verbs.iter().filter(|v| v.arity() > 0).collect();
    let Some(verb) = rng.choose(&verbs) else {
        return "wait".into();
    };
    let noun = |rng: &mut Rng| -> String {
        if rng.chance(0.6) {
            names[rng.below(names.len())].clone()
        } else {
            EXTRA_NOUNS[rng.below(EXTRA_NOUNS.len())].to_string()
        }
    };
    let t = verb.canonical();
    if t.arity() == 2 && rng.chance(0.5) {
        // The second object is often forgotten: "unlock chest".
        let first = t.text().split(' ').next().unwrap_or("").to_string();
        return format!("{first} {}", noun(rng));
    }
    let a = noun(rng);
    let b = noun(rng);
    t.render(&[&a, &b])
}

fn push_text(log: &mut String, text: &str) {
    for line in text.lines() {
        let line = line.trim();
        if !line.is_empty() {
            log.push_str(line);
            log.push('\n');
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub games: usize,
    pub transcripts_per_game: usize,
    /// Also record noisy plays of these bundled games (tagged with their ids).
    pub suite_games: Vec<String>,
    pub suite_transcripts_per_game: usize,
    #[serde(skip)]
    pub gen: GenConfig,
    pub player: PlayerConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            games: 120,
            transcripts_per_game: 2,
            suite_games: Vec::new(),
            suite_transcripts_per_game: 3,
            gen: GenConfig::default(),
            player: PlayerConfig::default(),
        }
    }
}

pub struct SynthOutput {
    /// Concatenated raw logs.
    pub raw: String,
    /// `(game id, spec source)` for every generated game.
    pub games: Vec<(String, String)>,
}

pub fn synthesize(cfg: &SynthConfig) -> Result<SynthOutput, crate::game::GameError> {
    let mut raw = String::new();
    let mut games = Vec::new();
    for g in 0..cfg.games {
        let id = format!("gen{:04}", g);
        let game_seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(g as u64);
        let (source, spec) = match generate_game(&id, game_seed, &cfg.gen) {
            Ok(x) => x,
            Err(GenError::Exhausted(_)) => continue,
            Err(GenError::Game(e)) => return Err(e),
        };
        for t in 0..cfg.transcripts_per_game {
            let tid = format!("{id}-t{t}");
            raw.push_str(&noisy_transcript(&spec, &tid, &id, game_seed ^ ((t as u64 + 1) << 32), &cfg.player));
        }
        games.push((id, source));
    }
    for id in &cfg.suite_games {
        let spec = crate::suite::load_bundled(id)?;
        for t in 0..cfg.suite_transcripts_per_game {
            let tid = format!("{id}-t{t}");
            let seed = cfg.seed ^ fnv(id) ^ (t as u64);
            raw.push_str(&noisy_transcript(&spec, &tid, id, seed, &cfg.player));
        }
    }
    Ok(SynthOutput { raw, games })
}

/// Prose from generated games (intros, room and object descriptions) with no
/// commands in it; a generic corpus for pretraining.
pub fn generic_text(seed: u64, games: usize) -> Vec<String> {
    let mut out = Vec::new();
    let gen_cfg = GenConfig::default();
    for g in 0..games {
        let game_seed = seed.wrapping_mul(7_000_003).wrapping_add(g as u64);
        let Ok((_, spec)) = generate_game(&format!("txt{g:04}"), game_seed, &gen_cfg) else {
            continue;
        };
        out.push(spec.intro.clone());
        out.extend(spec.rooms.iter().map(|r| r.description.clone()));
        out.extend(spec.objects.iter().map(|o| o.description.clone()));
    }
    out.retain(|t| !t.trim().is_empty());
    out
}

pub(crate) fn fnv(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
