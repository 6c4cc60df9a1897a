//! `Q(o, a) = g(f_o(o), f_a(a))` with GRU encoders and a one-hidden-layer
//! head.
//!
//! Tokens are embedded through a hashed table (FNV-1a of the token, modulo
//! the bucket count), so the network needs no vocabulary and never meets an
//! unknown word.

use std::collections::HashMap;

use calm_tensor::{Adam, Gradients, Graph, GruCell, Linear, ParamId, ParamStore, Rng, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::{DrrnError, Experience};
use crate::text::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QDims {
    pub embed: usize,
    pub hidden: usize,
    pub buckets: usize,
}

impl Default for QDims {
    fn default() -> Self {
        Self {
            embed: 16,
            hidden: 32,
            buckets: 2048,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QNetwork {
    dims: QDims,
    store: ParamStore,
    embedding: ParamId,
    f_o: GruCell,
    f_a: GruCell,
    hidden: Linear,
    out: Linear,
}

fn fnv1a(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl QNetwork {
    pub fn new(dims: QDims, seed: u64) -> Self {
        let mut rng = Rng::derive(seed, 0x716e_6574);
        let mut store = ParamStore::new();
        let (e, h) = (dims.embed, dims.hidden);
        let embedding = store.add_uniform("embedding", &[dims.buckets, e], e, &mut rng);
        let f_o = GruCell::new(&mut store, "f_o", e, h, &mut rng);
        let f_a = GruCell::new(&mut store, "f_a", e, h, &mut rng);
        let hidden = Linear::new(&mut store, "g.hidden", 2 * h, h, &mut rng);
        let out = Linear::new(&mut store, "g.out", h, 1, &mut rng);
        Self {
            dims,
            store,
            embedding,
            f_o,
            f_a,
            hidden,
            out,
        }
    }

    pub fn dims(&self) -> QDims {
        self.dims
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Embedding rows used for `text`, in order.
    pub fn token_rows(&self, text: &str) -> Vec<usize> {
        tokenize(text)
            .iter()
            .map(|t| (fnv1a(t) % self.dims.buckets as u64) as usize)
            .collect()
    }

    fn encode_with(&self, store: &ParamStore, cell: &GruCell, text: &str) -> Vec<f64> {
        let table = store.value(self.embedding);
        let mut h = vec![0.0; self.dims.hidden];
        for row in self.token_rows(text) {
            h = cell.apply(store, table.row_slice(row), &h);
        }
        h
    }

    /// `f_o(o)`: final GRU state over the observation tokens.
    pub fn encode_observation(&self, store: &ParamStore, obs: &str) -> Vec<f64> {
        self.encode_with(store, &self.f_o, obs)
    }

    /// `f_a(a)`: final GRU state over the action tokens.
    pub fn encode_action(&self, store: &ParamStore, action: &str) -> Vec<f64> {
        self.encode_with(store, &self.f_a, action)
    }

    /// `g(h_o, h_a)`.
    pub fn head(&self, store: &ParamStore, h_o: &[f64], h_a: &[f64]) -> f64 {
        let mut x = h_o.to_vec();
        x.extend_from_slice(h_a);
        let hid: Vec<f64> = self.hidden.apply(store, &x).into_iter().map(f64::tanh).collect();
        self.out.apply(store, &hid)[0]
    }

    /// One Q-value per candidate; the observation is encoded once.
    pub fn q_values(&self, obs: &str, candidates: &[String]) -> Result<Vec<f64>, DrrnError> {
        self.q_values_with(&self.store, obs, candidates)
    }

    pub fn q_values_with(&self, store: &ParamStore, obs: &str, candidates: &[String]) -> Result<Vec<f64>, DrrnError> {
        if candidates.is_empty() {
            return Err(DrrnError::NoCandidates);
        }
        let h_o = self.encode_observation(store, obs);
        let mut seen: HashMap<&str, f64> = HashMap::new();
        Ok(candidates
            .iter()
            .map(|a| {
                *seen
                    .entry(a.as_str())
                    .or_insert_with(|| self.head(store, &h_o, &self.encode_action(store, a)))
            })
            .collect())
    }

    /// Samples an index from `softmax(Q / temperature)`.
    pub fn select_action(
        &self,
        obs: &str,
        candidates: &[String],
        temperature: f64,
        rng: &mut Rng,
    ) -> Result<usize, DrrnError> {
        let q = self.q_values(obs, candidates)?;
        Ok(rng.weighted(&action_probabilities(&q, temperature)))
    }

    /// Bootstrapped targets `r + γ max_{a'} Q(o', a')`, or `r` at terminal
    /// transitions, evaluated with `store`.
    pub fn td_targets_with(&self, store: &ParamStore, batch: &[&Experience], gamma: f64) -> Vec<f64> {
        let mut obs_cache: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut act_cache: HashMap<&str, Vec<f64>> = HashMap::new();
        batch
            .iter()
            .map(|e| {
                if e.done || e.next_candidates.is_empty() {
                    return e.reward;
                }
                let h_o = obs_cache
                    .entry(e.next_obs.as_str())
                    .or_insert_with(|| self.encode_observation(store, &e.next_obs))
                    .clone();
                let best = e
                    .next_candidates
                    .iter()
                    .map(|a| {
                        let h_a = act_cache
                            .entry(a.as_str())
                            .or_insert_with(|| self.encode_action(store, a));
                        self.head(store, &h_o, h_a)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                e.reward + gamma * best
            })
            .collect()
    }

    pub fn td_targets(&self, batch: &[&Experience], gamma: f64) -> Vec<f64> {
        self.td_targets_with(&self.store, batch, gamma)
    }

    /// `mean (target - Q(o, a))²` via the tape-free path.
    pub fn td_loss_with(&self, store: &ParamStore, batch: &[&Experience], targets: &[f64]) -> f64 {
        let total: f64 = batch
            .iter()
            .zip(targets)
            .map(|(e, t)| {
                let h_o = self.encode_observation(store, &e.obs);
                let h_a = self.encode_action(store, &e.action);
                let d = self.head(store, &h_o, &h_a) - t;
                d * d
            })
            .sum();
        total / batch.len().max(1) as f64
    }

    /// Final GRU states for several texts at once, one row each. Sequences
    /// are left-padded; a row is held at zero until its first token.
    fn encode_graph(&self, g: &mut Graph, table: Var, cell: &GruCell, texts: &[&str]) -> Result<Var, DrrnError> {
        let rows: Vec<Vec<usize>> = texts.iter().map(|t| self.token_rows(t)).collect();
        let n = texts.len();
        let width = self.dims.hidden;
        let longest = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut h = g.constant(Tensor::zeros(&[n, width]));
        for step in 0..longest {
            let offset = |r: &Vec<usize>| (step + r.len()).checked_sub(longest);
            let ids: Vec<usize> = rows.iter().map(|r| offset(r).map_or(0, |i| r[i])).collect();
            let x = g.gather(table, &ids)?;
            let next = cell.step(g, x, h)?;
            if rows.iter().all(|r| offset(r).is_some()) {
                h = next;
                continue;
            }
            let mut on = Tensor::zeros(&[n, width]);
            for (i, r) in rows.iter().enumerate() {
                if offset(r).is_some() {
                    on.data_mut()[i * width..(i + 1) * width].fill(1.0);
                }
            }
            let off = calm_tensor::tensor::map(&on, |v| 1.0 - v);
            let (on, off) = (g.constant(on), g.constant(off));
            let a = g.mul(on, next)?;
            let b = g.mul(off, h)?;
            h = g.add(a, b)?;
        }
        Ok(h)
    }

    /// TD loss with fixed `targets`, and its gradients. Each distinct
    /// observation and action in the batch is encoded once.
    pub fn td_loss_and_grads(
        &self,
        store: &ParamStore,
        batch: &[&Experience],
        targets: &[f64],
    ) -> Result<(f64, Gradients), DrrnError> {
        if batch.is_empty() {
            return Err(DrrnError::EmptyBatch);
        }
        fn index<'a>(texts: impl Iterator<Item = &'a str>) -> (Vec<&'a str>, Vec<usize>) {
            let mut unique = Vec::new();
            let mut seen: HashMap<&str, usize> = HashMap::new();
            let idx = texts
                .map(|t| {
                    *seen.entry(t).or_insert_with(|| {
                        unique.push(t);
                        unique.len() - 1
                    })
                })
                .collect();
            (unique, idx)
        }
        let (obs, obs_idx) = index(batch.iter().map(|e| e.obs.as_str()));
        let (acts, act_idx) = index(batch.iter().map(|e| e.action.as_str()));
        let mut g = Graph::new(store);
        let table = g.param(self.embedding);
        let h_obs = self.encode_graph(&mut g, table, &self.f_o, &obs)?;
        let h_act = self.encode_graph(&mut g, table, &self.f_a, &acts)?;
        let h_o = g.gather(h_obs, &obs_idx)?;
        let h_a = g.gather(h_act, &act_idx)?;
        let x = g.concat(&[h_o, h_a])?;
        let hid = self.hidden.forward(&mut g, x)?;
        let hid = g.tanh(hid);
        let q = self.out.forward(&mut g, hid)?;
        let t = g.constant(Tensor::new(vec![batch.len(), 1], targets[..batch.len()].to_vec())?);
        let diff = g.sub(q, t)?;
        let sq = g.mul(diff, diff)?;
        let total = g.sum(sq);
        let loss = g.scale(total, 1.0 / batch.len() as f64);
        let value = g.value(loss).item();
        Ok((value, g.backward(loss)?))
    }

    /// Saves the parameters in the tensor checkpoint format after a
    /// `dims` header line.
    pub fn save(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "calm-qnet v1 {} {} {}", self.dims.embed, self.dims.hidden, self.dims.buckets)?;
        self.store.save(w)
    }

    pub fn load(r: impl std::io::BufRead) -> Result<Self, DrrnError> {
        let mut r = r;
        let mut header = String::new();
        r.read_line(&mut header).map_err(|e| DrrnError::Checkpoint(e.to_string()))?;
        let nums: Vec<usize> = header
            .trim()
            .strip_prefix("calm-qnet v1 ")
            .ok_or_else(|| DrrnError::Checkpoint("not a Q-network checkpoint".into()))?
            .split(' ')
            .map(|s| s.parse().map_err(|_| DrrnError::Checkpoint(format!("bad header `{}`", header.trim()))))
            .collect::<Result<_, _>>()?;
        let [embed, hidden, buckets] = nums[..] else {
            return Err(DrrnError::Checkpoint("bad header".into()));
        };
        let mut net = Self::new(QDims { embed, hidden, buckets }, 0);
        let store = ParamStore::load(r).map_err(|e| DrrnError::Checkpoint(e.to_string()))?;
        if store.len() != net.store.len()
            || net.store.ids().any(|id| store.value(id).shape() != net.store.value(id).shape())
        {
            return Err(DrrnError::Checkpoint("parameters do not match the header".into()));
        }
        net.store = store;
        Ok(net)
    }
}

/// `softmax(q / temperature)`; a temperature of zero or below puts all the
/// mass on the first maximum.
pub fn action_probabilities(q: &[f64], temperature: f64) -> Vec<f64> {
    if q.is_empty() {
        return Vec::new();
    }
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if temperature <= 0.0 {
        let best = q.iter().position(|&v| v == max).unwrap_or(0);
        return (0..q.len()).map(|i| if i == best { 1.0 } else { 0.0 }).collect();
    }
    let exps: Vec<f64> = q.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// One optimizer step on the TD loss. Targets come from `target` when given
/// (a frozen copy) and from the live network otherwise, and carry no
/// gradient either way.
pub fn td_update(
    net: &mut QNetwork,
    adam: &mut Adam,
    batch: &[&Experience],
    gamma: f64,
    target: Option<&ParamStore>,
) -> Result<f64, DrrnError> {
    if batch.is_empty() {
        return Err(DrrnError::EmptyBatch);
    }
    let targets = net.td_targets_with(target.unwrap_or(&net.store), batch, gamma);
    let (loss, grads) = net.td_loss_and_grads(&net.store, batch, &targets)?;
    net.store.zero_grads();
    net.store.accumulate(&grads);
    adam.step(&mut net.store);
    Ok(loss)
}
