//! Gameplay transcripts: cleaning, windowed examples and splits.
//!
//! Raw logs are line oriented:
//!
//! ```text
//! @transcript <id>
//! @game <game-id>
//! observation text...
//! > player command
//! observation text...
//! ```
//!
//! A later `@game` line inside the same transcript starts a new game; each
//! game becomes its own [`Transcript`]. Lines of the form `<nick> ...` or
//! `* ...` are chat and are discarded.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize_action, tokenize, Context};

/// Abbreviations expanded when they are the first word of a command (or the
/// word after `go`).
pub const ABBREVIATIONS: [(&str, &str); 16] = [
    ("n", "north"),
    ("s", "south"),
    ("e", "east"),
    ("w", "west"),
    ("ne", "northeast"),
    ("nw", "northwest"),
    ("se", "southeast"),
    ("sw", "southwest"),
    ("u", "up"),
    ("d", "down"),
    ("x", "examine"),
    ("l", "look"),
    ("i", "inventory"),
    ("g", "again"),
    ("z", "wait"),
    ("inv", "inventory"),
];

/// First words that mark an out-of-world command.
pub const META_ACTIONS: [&str; 22] = [
    "save", "restore", "restart", "undo", "oops", "script", "unscript", "transcript", "quit", "q", "verbose",
    "brief", "superbrief", "notify", "version", "about", "credits", "help", "hint", "hints", "menu", "score",
];

/// Responses showing the game's parser rejected a command.
pub const UNRECOGNIZED_MARKERS: [&str; 4] = [
    "That's not a verb I recognise.",
    "I didn't understand that sentence.",
    "I don't know the word",
    "You used the word",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed log at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no examples to split")]
    Empty,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    /// Text shown before the player typed `action`.
    pub observation: String,
    pub action: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub game: String,
    pub turns: Vec<Turn>,
    /// Text after the last command.
    pub epilogue: String,
}

impl Transcript {
    /// Renders back to the raw log format.
    pub fn to_raw(&self) -> String {
        let mut out = format!("@transcript {}\n@game {}\n", self.id, self.game);
        for t in &self.turns {
            push_block(&mut out, &t.observation);
            out.push_str("> ");
            out.push_str(&t.action);
            out.push('\n');
        }
        push_block(&mut out, &self.epilogue);
        out
    }
}

fn push_block(out: &mut String, text: &str) {
    if !text.is_empty() {
        out.push_str(text);
        out.push('\n');
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CleanOptions {
    /// Prefix of a player-command line.
    pub prompt: char,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self { prompt: '>' }
    }
}

/// Lowercases, collapses whitespace and expands abbreviations.
pub fn normalize_command(raw: &str) -> String {
    let norm = normalize_action(raw);
    let mut words: Vec<String> = norm.split(' ').map(str::to_string).collect();
    let expand = |w: &mut String| {
        if let Some((_, full)) = ABBREVIATIONS.iter().find(|(a, _)| *a == w.as_str()) {
            *w = full.to_string();
        }
    };
    if let Some(first) = words.first_mut() {
        expand(first);
    }
    if words.len() > 1 && words[0] == "go" {
        expand(&mut words[1]);
    }
    words.join(" ")
}

pub fn is_meta_action(action: &str) -> bool {
    let first = action.split_whitespace().next().unwrap_or("");
    META_ACTIONS.contains(&first) || (!first.is_empty() && first.chars().all(|c| c.is_ascii_digit()))
}

pub fn is_unrecognized(response: &str) -> bool {
    let r = response.trim_start();
    UNRECOGNIZED_MARKERS.iter().any(|m| r.starts_with(m))
}

fn is_chat(line: &str) -> bool {
    (line.starts_with('<') && line.contains('>')) || line.starts_with("* ")
}

struct Segment {
    id: String,
    game: String,
    opening: Vec<String>,
    exchanges: Vec<(String, Vec<String>)>,
}

/// Splits a raw log into transcripts, one per game, applying the cleaning
/// rules. Segments left with no turns are dropped.
pub fn clean_transcript(raw: &str, opts: CleanOptions) -> Result<Vec<Transcript>, CorpusError> {
    let mut segments: Vec<Segment> = Vec::new();
    let mut current_id: Option<String> = None;
    let mut games_in_transcript = 0usize;
    for (i, line) in raw.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("@transcript") {
            let id = rest.trim();
            if id.is_empty() {
                return Err(malformed(line_no, "`@transcript` needs an id"));
            }
            current_id = Some(id.to_string());
            games_in_transcript = 0;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("@game") {
            let id = current_id
                .as_ref()
                .ok_or_else(|| malformed(line_no, "`@game` before any `@transcript`"))?;
            let game = rest.trim();
            if game.is_empty() {
                return Err(malformed(line_no, "`@game` needs an id"));
            }
            games_in_transcript += 1;
            let seg_id = if games_in_transcript == 1 {
                id.clone()
            } else {
                format!("{id}.{games_in_transcript}")
            };
            segments.push(Segment {
                id: seg_id,
                game: game.to_string(),
                opening: Vec::new(),
                exchanges: Vec::new(),
            });
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let seg = match (current_id.is_some(), games_in_transcript, segments.last_mut()) {
            (true, n, Some(seg)) if n > 0 => seg,
            _ => return Err(malformed(line_no, "text before `@transcript` and `@game` headers")),
        };
        if let Some(cmd) = trimmed.strip_prefix(opts.prompt) {
            let cmd = cmd.trim();
            if cmd.is_empty() {
                return Err(malformed(line_no, "empty command"));
            }
            seg.exchanges.push((cmd.to_string(), Vec::new()));
        } else if !is_chat(trimmed) {
            match seg.exchanges.last_mut() {
                Some((_, resp)) => resp.push(trimmed.to_string()),
                None => seg.opening.push(trimmed.to_string()),
            }
        }
    }
    if segments.is_empty() && current_id.is_some() {
        return Err(malformed(raw.lines().count(), "transcript without a `@game` line"));
    }

    let mut out = Vec::new();
    for seg in segments {
        let mut observation = seg.opening.join("\n");
        let mut turns = Vec::new();
        for (cmd, resp) in seg.exchanges {
            let action = normalize_command(&cmd);
            let response = resp.join("\n");
            if action.is_empty() || is_meta_action(&action) || is_unrecognized(&response) {
                // The exchange is dropped whole; the observation in force
                // before it carries over to the next command.
                continue;
            }
            turns.push(Turn {
                observation: std::mem::replace(&mut observation, response),
                action,
            });
        }
        if !turns.is_empty() {
            out.push(Transcript {
                id: seg.id,
                game: seg.game,
                turns,
                epilogue: observation,
            });
        }
    }
    Ok(out)
}

fn malformed(line: usize, message: &str) -> CorpusError {
    CorpusError::Malformed {
        line,
        message: message.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub source: String,
    pub game: String,
    pub context: Context,
    pub action: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_context_tokens: usize,
    pub max_action_tokens: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_context_tokens: 256,
            max_action_tokens: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub emitted: usize,
    pub dropped_long_context: usize,
    pub dropped_long_action: usize,
}

impl BuildStats {
    pub fn merge(&mut self, other: BuildStats) {
        self.emitted += other.emitted;
        self.dropped_long_context += other.dropped_long_context;
        self.dropped_long_action += other.dropped_long_action;
    }
}

/// One example per turn; the first turn is padded with the journey-start
/// context. Examples over either token limit are dropped and counted.
pub fn build_examples(t: &Transcript, limits: Limits) -> (Vec<Example>, BuildStats) {
    let mut stats = BuildStats::default();
    let mut out = Vec::new();
    for (j, turn) in t.turns.iter().enumerate() {
        let context = match j {
            0 => Context::initial(turn.observation.clone()),
            _ => {
                let prev = &t.turns[j - 1];
                Context::new(prev.observation.clone(), prev.action.clone(), turn.observation.clone())
            }
        };
        if tokenize(&turn.action).len() > limits.max_action_tokens {
            stats.dropped_long_action += 1;
        } else if context.token_count() > limits.max_context_tokens {
            stats.dropped_long_context += 1;
        } else {
            stats.emitted += 1;
            out.push(Example {
                source: t.id.clone(),
                game: t.game.clone(),
                context,
                action: turn.action.clone(),
            });
        }
    }
    (out, stats)
}

/// Drops excluded games, keeps the given order, and puts the first
/// ⌊train_frac·N⌋ examples in the training set.
pub fn split(
    examples: &[Example],
    train_frac: f64,
    exclude_games: &[String],
) -> Result<(Vec<Example>, Vec<Example>), CorpusError> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(CorpusError::BadFraction(train_frac));
    }
    let kept: Vec<Example> = examples
        .iter()
        .filter(|e| !exclude_games.contains(&e.game))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(CorpusError::Empty);
    }
    let n_train = (train_frac * kept.len() as f64).floor() as usize;
    let mut train = kept;
    let val = train.split_off(n_train);
    Ok((train, val))
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> Result<(), CorpusError> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| CorpusError::Json { line: 0, source: e })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| CorpusError::Json { line: i + 1, source: e })?);
    }
    Ok(out)
}
