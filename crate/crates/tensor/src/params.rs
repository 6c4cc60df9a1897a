//! Named parameter storage, gradient accumulation and the text checkpoint format.
//!
//! Checkpoint layout (UTF-8, one record per parameter):
//!
//! ```text
//! calm-params v1
//! param <name> <dim>x<dim>...
//! <value> <value> ...
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! reload reproduces every bit.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Result, TensorError};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

const HEADER: &str = "calm-params v1";

#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    index: HashMap<String, ParamId>,
}

/// Gradients produced by one backward pass.
///
/// Embedding tables receive sparse row updates so a large table is not
/// densified for every example.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    pub dense: BTreeMap<ParamId, Tensor>,
    pub rows: BTreeMap<ParamId, BTreeMap<usize, Vec<f64>>>,
}

impl Gradients {
    pub fn is_empty(&self) -> bool {
        self.dense.is_empty() && self.rows.is_empty()
    }

    /// Dense view of the gradient for `id`, shaped like `like`.
    pub fn to_dense(&self, id: ParamId, like: &Tensor) -> Tensor {
        let mut out = self
            .dense
            .get(&id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape()));
        if let Some(rows) = self.rows.get(&id) {
            let cols = like.cols();
            for (r, g) in rows {
                for (o, v) in out.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(g) {
                    *o += v;
                }
            }
        }
        out
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.values.len());
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    /// Adds a parameter initialised uniformly in `±1/√fan_in`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Tensor::from_fn(shape, |_| rng.uniform(-bound, bound));
        self.add(name, value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in &grads.dense {
            for (o, v) in self.grads[id.0].data_mut().iter_mut().zip(g.data()) {
                *o += v;
            }
        }
        for (id, rows) in &grads.rows {
            let cols = self.grads[id.0].cols();
            let buf = self.grads[id.0].data_mut();
            for (r, g) in rows {
                for (o, v) in buf[r * cols..(r + 1) * cols].iter_mut().zip(g) {
                    *o += v;
                }
            }
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads.iter().map(Tensor::norm_sq).sum::<f64>().sqrt()
    }

    /// Copies values (not gradients) from a store with the same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        assert_eq!(self.names, other.names, "parameter layouts differ");
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            dst.data_mut().copy_from_slice(src.data());
        }
    }

    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{HEADER}")?;
        for (name, value) in self.names.iter().zip(&self.values) {
            let dims: Vec<String> = value.shape().iter().map(|d| d.to_string()).collect();
            writeln!(w, "param {} {}", name, dims.join("x"))?;
            let vals: Vec<String> = value.data().iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", vals.join(" "))?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| TensorError::Checkpoint(m);
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty checkpoint".into()))?
            .map_err(|e| bad(e.to_string()))?;
        if header.trim() != HEADER {
            return Err(bad(format!("unknown header {header:?}")));
        }
        let mut store = ParamStore::new();
        while let Some(line) = lines.next() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            if parts.next() != Some("param") {
                return Err(bad(format!("expected param record, got {line:?}")));
            }
            let name = parts
                .next()
                .ok_or_else(|| bad("missing parameter name".into()))?;
            let dims = parts
                .next()
                .ok_or_else(|| bad(format!("missing shape for {name}")))?;
            let shape = dims
                .split('x')
                .map(|d| d.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("shape of {name}: {e}")))?;
            let values_line = lines
                .next()
                .ok_or_else(|| bad(format!("missing values for {name}")))?
                .map_err(|e| bad(e.to_string()))?;
            let data = values_line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("values of {name}: {e}")))?;
            store.add(name, Tensor::new(shape, data)?);
        }
        Ok(store)
    }
}
