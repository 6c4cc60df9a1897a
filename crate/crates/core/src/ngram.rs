//! Count-based action language model with additive smoothing.
//!
//! The model ignores the context when scoring; the observation only decides
//! which nouns are combined with the harvested verb phrases.
//!
//! `p(w | h) = (cnt(h·w) + α) / (cnt(h) + α·|V|)`
//!
//! where `cnt(h)` counts how often `h` preceded a predicted token, so the
//! conditional distributions are normalized over `V` for every history.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::game::DIRECTIONS;
use crate::model::ActionModel;
use crate::text::{tokenize, Context};

/// End-of-action marker; part of `V`.
pub const END: &str = "</s>";
/// Stand-in for tokens never seen in training; part of `V`.
pub const UNK: &str = "<unk>";
/// Start padding; never predicted, so not part of `V`.
pub const BOS: &str = "<s>";

/// Most candidates kept for any single noun.
pub const MAX_PER_OBJECT: usize = 4;

const CHECKPOINT_MAGIC: &str = "calm-ngram v1";
const INTERP_MAGIC: &str = "calm-ngram-interp v1";

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("cannot fit an n-gram model to an empty corpus")]
    EmptyCorpus,
    #[error("cannot evaluate on an empty action list")]
    EmptyEval,
    #[error("n-gram order must be at least 1")]
    BadOrder,
    #[error("smoothing constant must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("interpolation weights must be non-negative and sum to 1, got {0:?}")]
    BadWeights(Vec<f64>),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that assigns a log-probability to a tokenized action and knows
/// the verb and noun lexicons to build candidates from.
pub trait ActionScorer: Send + Sync {
    /// Natural-log probability of `tokens` followed by the end marker.
    fn action_logprob(&self, tokens: &[String]) -> f64;
    fn verbs(&self) -> &BTreeSet<String>;
    fn nouns(&self) -> &BTreeSet<String>;
}

#[derive(Clone, Debug)]
pub struct NgramModel {
    n: usize,
    alpha: f64,
    /// Sorted; contains [`END`] and [`UNK`].
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// Windows of length `1..=n` ending at a predicted token.
    counts: HashMap<Vec<u32>, u64>,
    /// Histories of length `0..n` preceding a predicted token.
    histories: HashMap<Vec<u32>, u64>,
    verbs: BTreeSet<String>,
    nouns: BTreeSet<String>,
}

fn check_hyper(n: usize, alpha: f64) -> Result<(), NgramError> {
    if n == 0 {
        return Err(NgramError::BadOrder);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(NgramError::BadAlpha(alpha));
    }
    Ok(())
}

/// Verb phrase and noun contributed by one action, if any.
///
/// Two-word actions give `(first, second)`, three-word actions give
/// `(first two, third)`. Directions are never nouns.
pub fn harvest(tokens: &[String]) -> Option<(String, String)> {
    if !tokens.iter().all(|t| t.chars().all(|c| c.is_alphanumeric() || c == '_')) {
        return None;
    }
    let (verb, noun) = match tokens.len() {
        2 => (tokens[0].clone(), &tokens[1]),
        3 => (format!("{} {}", tokens[0], tokens[1]), &tokens[2]),
        _ => return None,
    };
    if DIRECTIONS.contains(&noun.as_str()) {
        return None;
    }
    Some((verb, noun.clone()))
}

impl NgramModel {
    pub fn fit<S: AsRef<str>>(actions: &[S], n: usize, alpha: f64) -> Result<Self, NgramError> {
        check_hyper(n, alpha)?;
        if actions.is_empty() {
            return Err(NgramError::EmptyCorpus);
        }
        let tokenized: Vec<Vec<String>> = actions.iter().map(|a| tokenize(a.as_ref())).collect();
        let mut vocab: BTreeSet<String> = tokenized.iter().flatten().cloned().collect();
        vocab.insert(END.to_string());
        vocab.insert(UNK.to_string());
        vocab.remove(BOS);
        let mut model = Self::empty(n, alpha, vocab.into_iter().collect());
        for tokens in &tokenized {
            let ids = model.padded(tokens);
            for i in (n - 1)..ids.len() {
                for len in 1..=n {
                    let window = &ids[i + 1 - len..=i];
                    *model.counts.entry(window.to_vec()).or_default() += 1;
                    *model.histories.entry(window[..len - 1].to_vec()).or_default() += 1;
                }
            }
            if let Some((verb, noun)) = harvest(tokens) {
                model.verbs.insert(verb);
                model.nouns.insert(noun);
            }
        }
        Ok(model)
    }

    fn empty(n: usize, alpha: f64, vocab: Vec<String>) -> Self {
        let index = vocab.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self {
            n,
            alpha,
            vocab,
            index,
            counts: HashMap::new(),
            histories: HashMap::new(),
            verbs: BTreeSet::new(),
            nouns: BTreeSet::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `|V|`, counting the end marker and UNK.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Same counts under a different smoothing constant.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self, NgramError> {
        check_hyper(self.n, alpha)?;
        Ok(Self { alpha, ..self.clone() })
    }

    fn bos(&self) -> u32 {
        self.vocab.len() as u32
    }

    fn id(&self, token: &str) -> u32 {
        if token == BOS {
            return self.bos();
        }
        match self.index.get(token) {
            Some(&i) => i,
            None => self.index[UNK],
        }
    }

    /// `n - 1` start markers, the tokens, and the end marker.
    fn padded(&self, tokens: &[String]) -> Vec<u32> {
        let mut ids = vec![self.bos(); self.n - 1];
        ids.extend(tokens.iter().map(|t| self.id(t)));
        ids.push(self.id(END));
        ids
    }

    /// Count of a token window; `<s>` may appear as padding.
    pub fn count(&self, window: &[&str]) -> u64 {
        let ids: Vec<u32> = window.iter().map(|t| self.id(t)).collect();
        self.counts.get(&ids).copied().unwrap_or(0)
    }

    /// How often `history` preceded a predicted token.
    pub fn history_count(&self, history: &[&str]) -> u64 {
        let ids: Vec<u32> = history.iter().map(|t| self.id(t)).collect();
        self.histories.get(&ids).copied().unwrap_or(0)
    }

    /// Probability under the order-`order` estimate (`order <= n`), with the
    /// history given as ids of everything before the token.
    fn prob_ids(&self, order: usize, before: &[u32], w: u32) -> f64 {
        let h_len = order - 1;
        let mut window = Vec::with_capacity(order);
        let missing = h_len.saturating_sub(before.len());
        window.extend(std::iter::repeat_n(self.bos(), missing));
        window.extend_from_slice(&before[before.len() - (h_len - missing)..]);
        let c_h = self.histories.get(&window).copied().unwrap_or(0) as f64;
        window.push(w);
        let c_hw = self.counts.get(&window).copied().unwrap_or(0) as f64;
        (c_hw + self.alpha) / (c_h + self.alpha * self.vocab.len() as f64)
    }

    /// `p(token | history)`; the history is truncated to its last `n - 1`
    /// tokens and padded with `<s>` when shorter.
    pub fn token_prob(&self, token: &str, history: &[&str]) -> f64 {
        let ids: Vec<u32> = history.iter().map(|t| self.id(t)).collect();
        self.prob_ids(self.n, &ids, self.id(token))
    }

    fn logprob_at_order(&self, order: usize, tokens: &[String]) -> f64 {
        let ids = self.padded(tokens);
        let start = self.n - 1;
        (start..ids.len()).map(|i| self.prob_ids(order, &ids[..i], ids[i]).ln()).sum()
    }

    /// Exponentiated negative mean per-action log-probability.
    pub fn perplexity<S: AsRef<str>>(&self, actions: &[S]) -> Result<f64, NgramError> {
        perplexity_of(self, actions)
    }

    /// Candidates for `context` with extra nouns (typically the current
    /// game's object names) allowed alongside the harvested ones.
    pub fn generate_with(&self, context: &Context, k: usize, extra_nouns: &BTreeSet<String>) -> Vec<String> {
        generate_candidates(self, context, k, extra_nouns)
    }

    pub fn generate(&self, context: &Context, k: usize) -> Vec<String> {
        generate_candidates(self, context, k, &BTreeSet::new())
    }

    pub fn save(&self, mut w: impl Write) -> Result<(), NgramError> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "n {}", self.n)?;
        writeln!(w, "alpha {}", self.alpha)?;
        writeln!(w, "vocab {}", self.vocab.len())?;
        for t in &self.vocab {
            writeln!(w, "{t}")?;
        }
        for (label, set) in [("verbs", &self.verbs), ("nouns", &self.nouns)] {
            writeln!(w, "{label} {}", set.len())?;
            for v in set {
                writeln!(w, "{v}")?;
            }
        }
        for (label, table) in [("counts", &self.counts), ("histories", &self.histories)] {
            let sorted: BTreeMap<String, u64> = table.iter().map(|(k, &c)| (self.render_ids(k), c)).collect();
            writeln!(w, "{label} {}", sorted.len())?;
            for (k, c) in sorted {
                writeln!(w, "{c}\t{k}")?;
            }
        }
        Ok(())
    }

    fn render_ids(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| if i == self.bos() { BOS } else { self.vocab[i as usize].as_str() })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn load(r: impl BufRead) -> Result<Self, NgramError> {
        let mut lines = Lines::new(r);
        lines.expect_exact(CHECKPOINT_MAGIC)?;
        Self::load_body(&mut lines)
    }

    fn load_body<R: BufRead>(lines: &mut Lines<R>) -> Result<Self, NgramError> {
        let n: usize = lines.header("n")?;
        let alpha: f64 = lines.header("alpha")?;
        check_hyper(n, alpha).map_err(|e| lines.error(&e.to_string()))?;
        let size: usize = lines.header("vocab")?;
        let mut vocab = Vec::with_capacity(size);
        for _ in 0..size {
            vocab.push(lines.next_line()?);
        }
        if !vocab.windows(2).all(|p| p[0] < p[1]) || !vocab.iter().any(|t| t == END) || !vocab.iter().any(|t| t == UNK) {
            return Err(lines.error("vocabulary must be sorted and contain the end and unknown markers"));
        }
        let mut model = Self::empty(n, alpha, vocab);
        for label in ["verbs", "nouns"] {
            let count: usize = lines.header(label)?;
            for _ in 0..count {
                let v = lines.next_line()?;
                if label == "verbs" {
                    model.verbs.insert(v);
                } else {
                    model.nouns.insert(v);
                }
            }
        }
        for label in ["counts", "histories"] {
            let count: usize = lines.header(label)?;
            for _ in 0..count {
                let line = lines.next_line()?;
                let (c, window) = line.split_once('\t').ok_or_else(|| lines.error("expected `count<TAB>tokens`"))?;
                let c: u64 = c.parse().map_err(|_| lines.error("bad count"))?;
                let mut ids = Vec::new();
                for t in window.split(' ').filter(|t| !t.is_empty()) {
                    if t != BOS && !model.index.contains_key(t) {
                        return Err(lines.error(&format!("token `{t}` is not in the vocabulary")));
                    }
                    ids.push(model.id(t));
                }
                let table = if label == "counts" { &mut model.counts } else { &mut model.histories };
                table.insert(ids, c);
            }
        }
        Ok(model)
    }
}

impl ActionScorer for NgramModel {
    fn action_logprob(&self, tokens: &[String]) -> f64 {
        self.logprob_at_order(self.n, tokens)
    }

    fn verbs(&self) -> &BTreeSet<String> {
        &self.verbs
    }

    fn nouns(&self) -> &BTreeSet<String> {
        &self.nouns
    }
}

/// Perplexity of any scorer; see [`NgramModel::perplexity`].
pub fn perplexity_of<M: ActionScorer + ?Sized, S: AsRef<str>>(m: &M, actions: &[S]) -> Result<f64, NgramError> {
    if actions.is_empty() {
        return Err(NgramError::EmptyEval);
    }
    let total: f64 = actions.iter().map(|a| m.action_logprob(&tokenize(a.as_ref()))).sum();
    Ok((-total / actions.len() as f64).exp())
}

/// Outcome of a hyperparameter search.
#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    pub n: usize,
    pub alpha: f64,
    pub perplexity: f64,
    /// `(n, alpha, validation perplexity)` for every grid point.
    pub grid: Vec<(usize, f64, f64)>,
}

/// Fits every grid point on `train` and keeps the lowest validation
/// perplexity; ties go to the smaller order, then the smaller α.
pub fn tune<S: AsRef<str>>(train: &[S], val: &[S], n_grid: &[usize], alpha_grid: &[f64]) -> Result<TuneResult, NgramError> {
    if n_grid.is_empty() || alpha_grid.is_empty() {
        return Err(NgramError::EmptyGrid);
    }
    let mut grid = Vec::new();
    let mut best: Option<(f64, usize, f64)> = None;
    for &n in n_grid {
        let base = NgramModel::fit(train, n, alpha_grid[0])?;
        for &alpha in alpha_grid {
            let ppl = base.with_alpha(alpha)?.perplexity(val)?;
            grid.push((n, alpha, ppl));
            let better = match best {
                None => true,
                Some((bp, bn, ba)) => ppl < bp || (ppl == bp && (n < bn || (n == bn && alpha < ba))),
            };
            if better {
                best = Some((ppl, n, alpha));
            }
        }
    }
    let (perplexity, n, alpha) = best.expect("grid is non-empty");
    Ok(TuneResult { n, alpha, perplexity, grid })
}

/// Linear mixture of the order-1 to order-4 estimates.
#[derive(Clone, Debug)]
pub struct InterpolatedModel {
    base: NgramModel,
    weights: [f64; 4],
}

impl InterpolatedModel {
    /// `base` must be of order 4.
    pub fn new(base: NgramModel, weights: [f64; 4]) -> Result<Self, NgramError> {
        if base.n != 4 {
            return Err(NgramError::BadOrder);
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(NgramError::BadWeights(weights.to_vec()));
        }
        Ok(Self { base, weights })
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn base(&self) -> &NgramModel {
        &self.base
    }

    pub fn token_prob(&self, token: &str, history: &[&str]) -> f64 {
        let ids: Vec<u32> = history.iter().map(|t| self.base.id(t)).collect();
        let w = self.base.id(token);
        (1..=4).map(|o| self.weights[o - 1] * self.base.prob_ids(o, &ids, w)).sum()
    }

    pub fn perplexity<S: AsRef<str>>(&self, actions: &[S]) -> Result<f64, NgramError> {
        perplexity_of(self, actions)
    }

    pub fn generate_with(&self, context: &Context, k: usize, extra_nouns: &BTreeSet<String>) -> Vec<String> {
        generate_candidates(self, context, k, extra_nouns)
    }

    pub fn save(&self, mut w: impl Write) -> Result<(), NgramError> {
        writeln!(w, "{INTERP_MAGIC}")?;
        let ws: Vec<String> = self.weights.iter().map(|x| x.to_string()).collect();
        writeln!(w, "weights {}", ws.join(" "))?;
        self.base.save(w)
    }

    pub fn load(r: impl BufRead) -> Result<Self, NgramError> {
        let mut lines = Lines::new(r);
        lines.expect_exact(INTERP_MAGIC)?;
        let raw: String = lines.header("weights")?;
        let ws: Vec<f64> = raw
            .split(' ')
            .map(|x| x.parse().map_err(|_| lines.error("bad weight")))
            .collect::<Result<_, _>>()?;
        let weights: [f64; 4] = ws.try_into().map_err(|_| lines.error("expected four weights"))?;
        lines.expect_exact(CHECKPOINT_MAGIC)?;
        let base = NgramModel::load_body(&mut lines)?;
        Self::new(base, weights)
    }
}

impl ActionScorer for InterpolatedModel {
    fn action_logprob(&self, tokens: &[String]) -> f64 {
        let ids = self.base.padded(tokens);
        let start = self.base.n - 1;
        (start..ids.len())
            .map(|i| {
                (1..=4)
                    .map(|o| self.weights[o - 1] * self.base.prob_ids(o, &ids[..i], ids[i]))
                    .sum::<f64>()
                    .ln()
            })
            .sum()
    }

    fn verbs(&self) -> &BTreeSet<String> {
        &self.base.verbs
    }

    fn nouns(&self) -> &BTreeSet<String> {
        &self.base.nouns
    }
}

/// Every weight vector on the 4-simplex with step 0.1, in lexicographic order.
pub fn simplex_grid() -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for a in 0..=10u32 {
        for b in 0..=(10 - a) {
            for c in 0..=(10 - a - b) {
                let d = 10 - a - b - c;
                out.push([a, b, c, d].map(|x| x as f64 / 10.0));
            }
        }
    }
    out
}

/// Fits order-4 counts on `train` and picks mixture weights from `grid` by
/// validation perplexity (first minimum wins).
pub fn fit_interpolated_on_grid<S: AsRef<str>>(
    train: &[S],
    val: &[S],
    alpha: f64,
    grid: &[[f64; 4]],
) -> Result<InterpolatedModel, NgramError> {
    if grid.is_empty() {
        return Err(NgramError::EmptyGrid);
    }
    if val.is_empty() {
        return Err(NgramError::EmptyEval);
    }
    let base = NgramModel::fit(train, 4, alpha)?;
    // Component probabilities of every validation token, grouped per action.
    let components: Vec<Vec<[f64; 4]>> = val
        .iter()
        .map(|a| {
            let ids = base.padded(&tokenize(a.as_ref()));
            (3..ids.len())
                .map(|i| [1, 2, 3, 4].map(|o| base.prob_ids(o, &ids[..i], ids[i])))
                .collect()
        })
        .collect();
    let mut best: Option<(f64, [f64; 4])> = None;
    for w in grid {
        let total: f64 = components
            .iter()
            .map(|toks| {
                toks.iter()
                    .map(|p| (w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + w[3] * p[3]).ln())
                    .sum::<f64>()
            })
            .sum();
        let ppl = (-total / val.len() as f64).exp();
        if best.is_none_or(|(b, _)| ppl < b) {
            best = Some((ppl, *w));
        }
    }
    InterpolatedModel::new(base, best.expect("grid is non-empty").1)
}

pub fn fit_interpolated<S: AsRef<str>>(train: &[S], val: &[S], alpha: f64) -> Result<InterpolatedModel, NgramError> {
    fit_interpolated_on_grid(train, val, alpha, &simplex_grid())
}

/// Nouns mentioned in `observation`: known pairs of adjacent tokens first,
/// then single tokens. Returned in order of first mention, deduplicated.
pub fn detect_nouns(observation: &str, lexicon: &BTreeSet<String>, extra: &BTreeSet<String>) -> Vec<String> {
    let known = |s: &str| lexicon.contains(s) || extra.contains(s);
    let tokens = tokenize(observation);
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() {
            let pair = format!("{} {}", tokens[i], tokens[i + 1]);
            if known(&pair) {
                if !out.contains(&pair) {
                    out.push(pair);
                }
                i += 2;
                continue;
            }
        }
        if known(&tokens[i]) && !DIRECTIONS.contains(&tokens[i].as_str()) && !out.contains(&tokens[i]) {
            out.push(tokens[i].clone());
        }
        i += 1;
    }
    out
}

fn by_score_then_text(a: &(f64, String), b: &(f64, String)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
}

/// Scores `verbs × nouns(o_t)`, keeping at most [`MAX_PER_OBJECT`] per noun,
/// and the directions, then alternates between the two ranked lists (object
/// actions first) and returns the first `k`. One-word moves always outscore
/// two-word actions, so a single ranking would spend every small `k` on them.
fn generate_candidates<M: ActionScorer + ?Sized>(
    m: &M,
    context: &Context,
    k: usize,
    extra_nouns: &BTreeSet<String>,
) -> Vec<String> {
    if k == 0 {
        return Vec::new();
    }
    let nouns = detect_nouns(&context.observation, m.nouns(), extra_nouns);
    let mut objects: Vec<(f64, String)> = Vec::new();
    for noun in &nouns {
        let mut per_noun: Vec<(f64, String)> = m
            .verbs()
            .iter()
            .map(|verb| {
                let action = format!("{verb} {noun}");
                (m.action_logprob(&tokenize(&action)), action)
            })
            .collect();
        per_noun.sort_by(by_score_then_text);
        per_noun.truncate(MAX_PER_OBJECT);
        objects.extend(per_noun);
    }
    objects.sort_by(by_score_then_text);
    let mut moves: Vec<(f64, String)> =
        DIRECTIONS.iter().map(|d| (m.action_logprob(&[d.to_string()]), d.to_string())).collect();
    moves.sort_by(by_score_then_text);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let (mut objects, mut moves) = (objects.into_iter(), moves.into_iter());
    loop {
        let (a, b) = (objects.next(), moves.next());
        if a.is_none() && b.is_none() {
            break;
        }
        for (_, action) in a.into_iter().chain(b) {
            if seen.insert(action.clone()) {
                out.push(action);
            }
        }
    }
    out.truncate(k);
    out
}

/// An n-gram scorer bound to one game's object names.
#[derive(Clone)]
pub struct NgramCalm<M = NgramModel> {
    model: Arc<M>,
    object_names: BTreeSet<String>,
}

impl<M: ActionScorer> NgramCalm<M> {
    pub fn new(model: Arc<M>) -> Self {
        Self {
            model,
            object_names: BTreeSet::new(),
        }
    }

    pub fn with_object_names(mut self, names: impl IntoIterator<Item = String>) -> Self {
        self.object_names = names.into_iter().collect();
        self
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

impl<M: ActionScorer> ActionModel for NgramCalm<M> {
    fn generate(&self, context: &Context, k: usize) -> Vec<String> {
        generate_candidates(&*self.model, context, k, &self.object_names)
    }

    fn name(&self) -> &str {
        "ngram"
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self { inner: r.lines(), line: 0 }
    }

    fn error(&self, message: &str) -> NgramError {
        NgramError::Checkpoint {
            line: self.line,
            message: message.to_string(),
        }
    }

    fn next_line(&mut self) -> Result<String, NgramError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.error("unexpected end of checkpoint")),
        }
    }

    fn expect_exact(&mut self, want: &str) -> Result<(), NgramError> {
        let got = self.next_line()?;
        if got != want {
            return Err(self.error(&format!("expected `{want}`")));
        }
        Ok(())
    }

    fn header<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, NgramError> {
        let line = self.next_line()?;
        let value = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.error(&format!("expected `{key} <value>`")))?;
        value.parse().map_err(|_| self.error(&format!("bad value for `{key}`")))
    }
}
