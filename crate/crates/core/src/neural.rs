//! Contextual action language model: a GRU encoder over the context window
//! and a GRU decoder that spells out the action one token at a time.
//!
//! The context is serialized as
//! `[OBS] o_{t-1} [ACTION] a_{t-1} [OBS] o_t` and truncated from the left to
//! `max_context` tokens. The decoder starts from the encoder's final states;
//! every decoder input is the previous token's embedding next to the final
//! top-layer encoder state and the mean of the top-layer states.
//!
//! The output layer has a copy term: a two-way gate computed from the
//! decoder state adds to the logit of every token that occurs in the current
//! observation (first gate) or earlier in the window (second gate).

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use calm_tensor::{Adam, AdamConfig, Graph, GruCell, Linear, ParamId, ParamStore, Rng, Tensor, TensorError, Var};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Example;
use crate::model::ActionModel;
use crate::text::{tokenize, Context};

pub const UNK: &str = "<unk>";
pub const OBS: &str = "[OBS]";
pub const ACTION: &str = "[ACTION]";
pub const START: &str = "<s>";
pub const END: &str = "</s>";
const SPECIALS: [&str; 5] = [UNK, OBS, ACTION, START, END];
const UNK_ID: u32 = 0;
const START_ID: u32 = 3;
const END_ID: u32 = 4;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("no training examples")]
    EmptyDataset,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token table; the five special tokens come first, the rest are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Tokens seen at least `min_count` times, most frequent first up to
    /// `max_size` (including the specials), then sorted.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize, max_size: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && !SPECIALS.contains(t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_size.saturating_sub(SPECIALS.len()));
        let kept: BTreeSet<&str> = ranked.into_iter().map(|(t, _)| t).collect();
        Self::from_tokens(SPECIALS.iter().copied().chain(kept).map(String::from).collect())
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, index }
    }

    /// Vocabulary covering the contexts and actions of `examples`.
    pub fn from_examples(examples: &[Example], min_count: usize, max_size: usize) -> Self {
        let mut all: Vec<String> = Vec::new();
        for e in examples {
            all.extend(tokenize(&e.context.prev_observation));
            all.extend(tokenize(&e.context.prev_action));
            all.extend(tokenize(&e.context.observation));
            all.extend(tokenize(&e.action));
        }
        Self::build(all.iter().map(String::as_str), min_count, max_size)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line; the line number is the index.
    pub fn save(&self, mut w: impl Write) -> std::io::Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn load(r: impl BufRead) -> Result<Self, NeuralError> {
        let tokens: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(NeuralError::Checkpoint("vocabulary must start with the special tokens".into()));
        }
        Ok(Self::from_tokens(tokens))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralConfig {
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
    pub max_context: usize,
    /// Action tokens before the end marker.
    pub max_action: usize,
    pub beam_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_steps: u64,
    pub max_grad_norm: f64,
    pub min_count: usize,
    pub max_vocab: usize,
    pub seed: u64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            embed: 32,
            hidden: 64,
            layers: 2,
            max_context: 256,
            max_action: 7,
            beam_width: 40,
            epochs: 3,
            batch_size: 16,
            learning_rate: 3e-3,
            warmup_steps: 50,
            max_grad_norm: 1.0,
            min_count: 1,
            max_vocab: 4000,
            seed: 0,
        }
    }
}

impl NeuralConfig {
    pub fn adam(&self, total_steps: Option<u64>) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            warmup_steps: self.warmup_steps,
            total_steps,
            max_grad_norm: Some(self.max_grad_norm),
            ..AdamConfig::default()
        }
    }
}

/// Context and target already mapped to ids; the target ends with `</s>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub context: Vec<u32>,
    pub action: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-token loss over the pass, measured before each update.
    pub train_loss: f64,
    /// Mean per-token loss on the validation set after the pass.
    pub val_loss: Option<f64>,
}

/// Completed beam hypotheses, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamOutput {
    pub actions: Vec<(String, f64)>,
    /// How many of the requested `k` could not be filled.
    pub shortfall: usize,
}

#[derive(Clone, Debug)]
pub struct NeuralCalm {
    config: NeuralConfig,
    vocab: Vocab,
    store: ParamStore,
    embedding: ParamId,
    encoder: Vec<GruCell>,
    decoder: Vec<GruCell>,
    output: Linear,
    copy: Linear,
    label: String,
}

/// Per-layer hidden states.
type State = Vec<Vec<f64>>;

/// Encoder summary fed to every decoder step.
struct Encoding {
    ctx: Vec<f64>,
    mask: Tensor,
}

impl NeuralCalm {
    pub fn new(config: NeuralConfig, vocab: Vocab) -> Self {
        let mut rng = Rng::derive(config.seed, 0x6e65_7572);
        let mut store = ParamStore::new();
        let (e, h) = (config.embed, config.hidden);
        let embedding = store.add_uniform("embedding", &[vocab.len(), e], e, &mut rng);
        let encoder = (0..config.layers)
            .map(|l| GruCell::new(&mut store, &format!("encoder.{l}"), if l == 0 { e } else { h }, h, &mut rng))
            .collect();
        let decoder = (0..config.layers)
            .map(|l| GruCell::new(&mut store, &format!("decoder.{l}"), if l == 0 { e + 2 * h } else { h }, h, &mut rng))
            .collect();
        let output = Linear::new(&mut store, "output", h, vocab.len(), &mut rng);
        let copy = Linear::new(&mut store, "copy", h, 2, &mut rng);
        Self {
            config,
            vocab,
            store,
            embedding,
            encoder,
            decoder,
            output,
            copy,
            label: "neural".into(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    /// Serialized, truncated context ids.
    pub fn encode_context(&self, context: &Context) -> Vec<u32> {
        let mut ids = vec![self.vocab.id(OBS)];
        ids.extend(tokenize(&context.prev_observation).iter().map(|t| self.vocab.id(t)));
        ids.push(self.vocab.id(ACTION));
        ids.extend(tokenize(&context.prev_action).iter().map(|t| self.vocab.id(t)));
        ids.push(self.vocab.id(OBS));
        ids.extend(tokenize(&context.observation).iter().map(|t| self.vocab.id(t)));
        if ids.len() > self.config.max_context {
            ids.drain(..ids.len() - self.config.max_context);
        }
        ids
    }

    /// Action ids followed by `</s>`, cut to `max_action` tokens.
    pub fn encode_action(&self, action: &str) -> Vec<u32> {
        let mut ids: Vec<u32> = tokenize(action).iter().map(|t| self.vocab.id(t)).collect();
        ids.truncate(self.config.max_action);
        ids.push(END_ID);
        ids
    }

    pub fn encode_example(&self, e: &Example) -> Encoded {
        Encoded {
            context: self.encode_context(&e.context),
            action: self.encode_action(&e.action),
        }
    }

    /// Row 0 marks tokens of the current observation, row 1 tokens seen
    /// earlier in the window. Specials are never marked.
    fn copy_mask(&self, context: &[u32]) -> Tensor {
        let v = self.vocab.len();
        let mut mask = Tensor::zeros(&[2, v]);
        let obs = self.vocab.id(OBS);
        let split = context.iter().rposition(|&t| t == obs).unwrap_or(0);
        for (i, &t) in context.iter().enumerate() {
            if (t as usize) < SPECIALS.len() {
                continue;
            }
            let row = if i > split { 0 } else { 1 };
            mask.data_mut()[row * v + t as usize] = 1.0;
        }
        mask
    }

    /// Sum of per-token cross-entropies for one example, recorded on `g`.
    fn loss_graph(&self, g: &mut Graph, ex: &Encoded) -> Result<Var, NeuralError> {
        let table = g.param(self.embedding);
        let zero = Tensor::zeros(&[1, self.config.hidden]);
        let mut hs: Vec<Var> = (0..self.config.layers).map(|_| g.constant(zero.clone())).collect();
        let mut tops = Vec::with_capacity(ex.context.len());
        for &tok in &ex.context {
            let mut x = g.embedding(table, tok as usize)?;
            for (l, cell) in self.encoder.iter().enumerate() {
                hs[l] = cell.step(g, x, hs[l])?;
                x = hs[l];
            }
            tops.push(x);
        }
        let last = *hs.last().expect("at least one layer");
        let total = g.add_all(&tops)?;
        let mean = g.scale(total, 1.0 / tops.len() as f64);
        let ctx = g.concat(&[last, mean])?;
        let mask = g.constant(self.copy_mask(&ex.context));
        let mut prev = START_ID;
        let mut terms = Vec::with_capacity(ex.action.len());
        for &target in &ex.action {
            let emb = g.embedding(table, prev as usize)?;
            let mut x = g.concat(&[emb, ctx])?;
            for (l, cell) in self.decoder.iter().enumerate() {
                hs[l] = cell.step(g, x, hs[l])?;
                x = hs[l];
            }
            let base = self.output.forward(g, x)?;
            let gate = self.copy.forward(g, x)?;
            let bonus = g.matmul(gate, mask)?;
            let logits = g.add(base, bonus)?;
            terms.push(g.cross_entropy(logits, target as usize)?);
            prev = target;
        }
        Ok(g.add_all(&terms)?)
    }

    /// Summed loss and its gradients for one example, evaluated against
    /// `store` (which must share this model's layout).
    pub fn loss_and_grads(&self, store: &ParamStore, ex: &Encoded) -> Result<(f64, calm_tensor::Gradients), NeuralError> {
        let mut g = Graph::new(store);
        let loss = self.loss_graph(&mut g, ex)?;
        let value = g.value(loss).item();
        Ok((value, g.backward(loss)?))
    }

    /// Summed loss for one example via the tape-free path.
    pub fn loss_with(&self, store: &ParamStore, ex: &Encoded) -> f64 {
        let (mut state, ctx) = self.encode_with(store, &ex.context);
        let mut prev = START_ID;
        let mut total = 0.0;
        for &target in &ex.action {
            let lp = self.decode_step_with(store, &mut state, prev, &ctx);
            total -= lp[target as usize];
            prev = target;
        }
        total
    }

    fn encode_with(&self, store: &ParamStore, ids: &[u32]) -> (State, Encoding) {
        let table = store.value(self.embedding);
        let h = self.config.hidden;
        let mut state: State = vec![vec![0.0; h]; self.config.layers];
        let mut sum = vec![0.0; h];
        for &tok in ids {
            let mut x = table.row_slice(tok as usize).to_vec();
            for (l, cell) in self.encoder.iter().enumerate() {
                state[l] = cell.apply(store, &x, &state[l]);
                x.clone_from(&state[l]);
            }
            sum.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
        }
        let mut ctx = state.last().expect("at least one layer").clone();
        let scale = 1.0 / ids.len().max(1) as f64;
        ctx.extend(sum.iter().map(|s| s * scale));
        let mask = self.copy_mask(ids);
        (state, Encoding { ctx, mask })
    }

    /// Advances `state` by feeding `prev` and returns log-probabilities of
    /// the next token.
    fn decode_step_with(&self, store: &ParamStore, state: &mut State, prev: u32, enc: &Encoding) -> Vec<f64> {
        let table = store.value(self.embedding);
        let mut x = table.row_slice(prev as usize).to_vec();
        x.extend_from_slice(&enc.ctx);
        for (l, cell) in self.decoder.iter().enumerate() {
            state[l] = cell.apply(store, &x, &state[l]);
            x.clone_from(&state[l]);
        }
        let mut logits = self.output.apply(store, &x);
        let gate = self.copy.apply(store, &x);
        let v = logits.len();
        let mask = enc.mask.data();
        for (i, l) in logits.iter_mut().enumerate() {
            *l += gate[0] * mask[i] + gate[1] * mask[v + i];
        }
        log_softmax(&logits)
    }

    /// `log p(next token | prefix, context)` over the whole vocabulary.
    pub fn next_token_logprobs(&self, context: &Context, prefix: &str) -> Vec<f64> {
        let (mut state, ctx) = self.encode_with(&self.store, &self.encode_context(context));
        let mut prev = START_ID;
        let mut lp = Vec::new();
        let prefix_ids: Vec<u32> = tokenize(prefix).iter().map(|t| self.vocab.id(t)).collect();
        for &tok in prefix_ids.iter().chain(std::iter::once(&u32::MAX)) {
            lp = self.decode_step_with(&self.store, &mut state, prev, &ctx);
            prev = tok;
        }
        lp
    }

    /// `log p(action | context)`: the sum of the token log-probabilities,
    /// end marker included.
    pub fn action_logprob(&self, context: &Context, action: &str) -> f64 {
        let ex = Encoded {
            context: self.encode_context(context),
            action: self.encode_action(action),
        };
        -self.loss_with(&self.store, &ex)
    }

    /// Mean per-token loss over `data`.
    pub fn mean_loss(&self, data: &[Encoded]) -> f64 {
        let mut total = 0.0;
        let mut tokens = 0usize;
        for ex in data {
            total += self.loss_with(&self.store, ex);
            tokens += ex.action.len();
        }
        total / tokens.max(1) as f64
    }

    /// One shuffled pass of teacher-forced training, one optimizer step per
    /// batch with gradients averaged per token.
    pub fn train_epoch(
        &mut self,
        train: &[Encoded],
        val: &[Encoded],
        adam: &mut Adam,
        rng: &mut Rng,
        epoch: usize,
    ) -> Result<EpochStats, NeuralError> {
        if train.is_empty() {
            return Err(NeuralError::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut tokens = 0usize;
        for batch in order.chunks(self.config.batch_size.max(1)) {
            self.store.zero_grads();
            let mut batch_tokens = 0usize;
            for &i in batch {
                let (loss, grads) = self.loss_and_grads(&self.store, &train[i])?;
                self.store.accumulate(&grads);
                total += loss;
                batch_tokens += train[i].action.len();
            }
            tokens += batch_tokens;
            self.store.scale_grads(1.0 / batch_tokens as f64);
            adam.step(&mut self.store);
        }
        let val_loss = (!val.is_empty()).then(|| self.mean_loss(val));
        Ok(EpochStats {
            epoch,
            train_loss: total / tokens as f64,
            val_loss,
        })
    }

    /// Trains for `config.epochs` passes with a fresh optimizer whose
    /// schedule spans the whole run.
    pub fn fit(&mut self, train: &[Example], val: &[Example]) -> Result<Vec<EpochStats>, NeuralError> {
        self.fit_with(train, val, |_| {})
    }

    pub fn fit_with(
        &mut self,
        train: &[Example],
        val: &[Example],
        on_epoch: impl FnMut(&EpochStats),
    ) -> Result<Vec<EpochStats>, NeuralError> {
        self.fit_epochs(train, val, self.config.epochs, on_epoch)
    }

    /// Like [`fit_with`](Self::fit_with) with an explicit epoch count; used
    /// for the pretraining phase.
    pub fn fit_epochs(
        &mut self,
        train: &[Example],
        val: &[Example],
        epochs: usize,
        mut on_epoch: impl FnMut(&EpochStats),
    ) -> Result<Vec<EpochStats>, NeuralError> {
        if train.is_empty() {
            return Err(NeuralError::EmptyDataset);
        }
        let train: Vec<Encoded> = train.iter().map(|e| self.encode_example(e)).collect();
        let val: Vec<Encoded> = val.iter().map(|e| self.encode_example(e)).collect();
        let batches = train.len().div_ceil(self.config.batch_size.max(1)) as u64;
        let mut adam = Adam::new(self.config.adam(Some(batches * epochs as u64)), &self.store);
        let mut rng = Rng::derive(self.config.seed, 0x7472_6169);
        let mut out = Vec::new();
        for epoch in 1..=epochs {
            let stats = self.train_epoch(&train, &val, &mut adam, &mut rng, epoch)?;
            on_epoch(&stats);
            out.push(stats);
        }
        Ok(out)
    }

    /// Beam search to the end marker without length normalization. Returns
    /// the `k` best completed hypotheses; ties go to the lexicographically
    /// smaller token sequence.
    pub fn beam_generate(&self, context: &Context, beam_width: usize, k: usize) -> BeamOutput {
        let width = beam_width.max(1);
        let (state, ctx) = self.encode_with(&self.store, &self.encode_context(context));
        struct Hyp {
            tokens: Vec<u32>,
            logp: f64,
            state: State,
        }
        let mut live = vec![Hyp {
            tokens: Vec::new(),
            logp: 0.0,
            state,
        }];
        let mut done: Vec<(Vec<u32>, f64)> = Vec::new();
        let first_word = SPECIALS.len() as u32;
        for step in 0..=self.config.max_action {
            // (score, parent, token)
            let mut expansions: Vec<(f64, usize, u32)> = Vec::new();
            let mut next_states = Vec::with_capacity(live.len());
            for (pi, h) in live.iter().enumerate() {
                let mut st = h.state.clone();
                let prev = h.tokens.last().copied().unwrap_or(START_ID);
                let lp = self.decode_step_with(&self.store, &mut st, prev, &ctx);
                next_states.push(st);
                expansions.push((h.logp + lp[END_ID as usize], pi, END_ID));
                if step < self.config.max_action {
                    for w in first_word..self.vocab.len() as u32 {
                        expansions.push((h.logp + lp[w as usize], pi, w));
                    }
                }
            }
            let cmp = |a: &(f64, usize, u32), b: &(f64, usize, u32)| -> Ordering {
                b.0.total_cmp(&a.0).then_with(|| {
                    let ta = live[a.1].tokens.iter().chain(std::iter::once(&a.2));
                    let tb = live[b.1].tokens.iter().chain(std::iter::once(&b.2));
                    compare_tokens(&self.vocab, ta, tb)
                })
            };
            if expansions.len() > width {
                expansions.select_nth_unstable_by(width - 1, cmp);
                expansions.truncate(width);
            }
            expansions.sort_by(cmp);
            let mut next_live = Vec::new();
            for (score, pi, w) in expansions {
                let mut tokens = live[pi].tokens.clone();
                if w == END_ID {
                    done.push((tokens, score));
                } else {
                    tokens.push(w);
                    next_live.push(Hyp {
                        tokens,
                        logp: score,
                        state: next_states[pi].clone(),
                    });
                }
            }
            live = next_live;
            if live.is_empty() {
                break;
            }
        }
        done.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| compare_tokens(&self.vocab, a.0.iter(), b.0.iter())));
        let actions: Vec<(String, f64)> = done
            .into_iter()
            .take(k)
            .map(|(t, s)| (t.iter().map(|&i| self.vocab.token(i)).collect::<Vec<_>>().join(" "), s))
            .collect();
        BeamOutput {
            shortfall: k.saturating_sub(actions.len()),
            actions,
        }
    }

    /// Top `k` distinct actions from a beam of the configured width (widened
    /// to `k` if needed); empty actions and ones containing UNK are skipped.
    pub fn generate_ranked(&self, context: &Context, k: usize) -> Vec<(String, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let width = self.config.beam_width.max(k);
        let beam = self.beam_generate(context, width, width);
        let mut seen = BTreeSet::new();
        beam.actions
            .into_iter()
            .filter(|(a, _)| !a.is_empty() && !a.split(' ').any(|t| t == UNK) && seen.insert(a.clone()))
            .take(k)
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<(), NeuralError> {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("params.txt"))?);
        self.store.save(&mut w)?;
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join("vocab.txt"))?);
        self.vocab.save(&mut w)?;
        w.flush()?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)? + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, NeuralError> {
        let config: NeuralConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
        let vocab = Vocab::load(BufReader::new(File::open(dir.join("vocab.txt"))?))?;
        let store = ParamStore::load(BufReader::new(File::open(dir.join("params.txt"))?))?;
        let mut model = Self::new(config, vocab);
        let same_layout = model.store.len() == store.len()
            && model
                .store
                .ids()
                .all(|id| store.id(model.store.name(id)) == Some(id) && store.value(id).shape() == model.store.value(id).shape());
        if !same_layout {
            return Err(NeuralError::Checkpoint("parameters do not match the configuration".into()));
        }
        model.store.copy_values_from(&store);
        Ok(model)
    }
}

fn compare_tokens<'a>(vocab: &Vocab, a: impl Iterator<Item = &'a u32>, b: impl Iterator<Item = &'a u32>) -> Ordering {
    a.map(|&i| vocab.token(i)).cmp(b.map(|&i| vocab.token(i)))
}

/// Next-phrase examples cut from plain prose, for pretraining: every
/// sentence of two or more tokens is split in half, the first half (after the
/// previous sentence) is the context and up to `max_action` tokens of the
/// second half are the target.
pub fn text_examples(texts: &[String], max_action: usize) -> Vec<Example> {
    let mut out = Vec::new();
    for (i, text) in texts.iter().enumerate() {
        let mut prev: Vec<String> = Vec::new();
        let mut sentence: Vec<String> = Vec::new();
        for tok in tokenize(text) {
            let end = matches!(tok.as_str(), "." | "!" | "?");
            sentence.push(tok);
            if !end {
                continue;
            }
            let words = &sentence[..sentence.len() - 1];
            if words.len() >= 2 {
                let cut = words.len() / 2;
                let target = &words[cut..(cut + max_action.max(1)).min(words.len())];
                out.push(Example {
                    source: format!("text-{i}"),
                    game: String::new(),
                    context: Context::new(prev.join(" "), "", words[..cut].join(" ")),
                    action: target.join(" "),
                });
            }
            prev = std::mem::take(&mut sentence);
        }
    }
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

impl ActionModel for NeuralCalm {
    fn generate(&self, context: &Context, k: usize) -> Vec<String> {
        self.generate_ranked(context, k).into_iter().map(|(a, _)| a).collect()
    }

    fn name(&self) -> &str {
        &self.label
    }
}
