//! GRU cell and affine layer built from tape ops.

use crate::error::Result;
use crate::graph::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::{sigmoid_scalar, Tensor};

/// `x W + b` for row inputs; `x` may stack several rows.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut Rng) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), &[input, output], input, rng);
        let bias = store.add_uniform(format!("{name}.bias"), &[1, output], input, rng);
        Self {
            weight,
            bias,
            input,
            output,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let xw = g.matmul(x, w)?;
        g.add_row(xw, b)
    }

    /// Tape-free `x W + b` for inference.
    pub fn apply(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let mut out = store.value(self.bias).data().to_vec();
        vec_mat_acc(x, store.value(self.weight), &mut out);
        out
    }
}

/// `out += x M` for a row vector `x`.
pub fn vec_mat_acc(x: &[f64], m: &Tensor, out: &mut [f64]) {
    let cols = m.cols();
    let data = m.data();
    for (p, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        let row = &data[p * cols..(p + 1) * cols];
        for (o, mv) in out.iter_mut().zip(row) {
            *o += xv * mv;
        }
    }
}

/// Parameters of one GRU cell.
///
/// ```text
/// r  = σ(x W_r + h U_r + b_r)
/// z  = σ(x W_z + h U_z + b_z)
/// n  = tanh(x W_n + (r ⊙ h) U_n + b_n)
/// h' = (1 − z) ⊙ h + z ⊙ n
/// ```
#[derive(Clone, Debug)]
pub struct GruCell {
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_n: ParamId,
    pub u_n: ParamId,
    pub b_n: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Self {
        // PyTorch-style: every GRU tensor uses bound 1/√hidden
        let mut mk = |suffix: &str, shape: &[usize]| {
            store.add_uniform(format!("{name}.{suffix}"), shape, hidden, rng)
        };
        Self {
            w_r: mk("w_r", &[input, hidden]),
            u_r: mk("u_r", &[hidden, hidden]),
            b_r: mk("b_r", &[1, hidden]),
            w_z: mk("w_z", &[input, hidden]),
            u_z: mk("u_z", &[hidden, hidden]),
            b_z: mk("b_z", &[1, hidden]),
            w_n: mk("w_n", &[input, hidden]),
            u_n: mk("u_n", &[hidden, hidden]),
            b_n: mk("b_n", &[1, hidden]),
            input,
            hidden,
        }
    }

    pub fn zero_state(&self) -> Tensor {
        Tensor::zeros(&[1, self.hidden])
    }

    pub fn step(&self, g: &mut Graph, x: Var, h: Var) -> Result<Var> {
        gru_cell(g, x, h, self)
    }

    /// Tape-free update for inference; same arithmetic as [`gru_cell`].
    pub fn apply(&self, store: &ParamStore, x: &[f64], h: &[f64]) -> Vec<f64> {
        let pre = |w: ParamId, u: ParamId, b: ParamId, hh: &[f64]| {
            let mut out = store.value(b).data().to_vec();
            vec_mat_acc(x, store.value(w), &mut out);
            vec_mat_acc(hh, store.value(u), &mut out);
            out
        };
        let r: Vec<f64> = pre(self.w_r, self.u_r, self.b_r, h).into_iter().map(sigmoid_scalar).collect();
        let z: Vec<f64> = pre(self.w_z, self.u_z, self.b_z, h).into_iter().map(sigmoid_scalar).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
        let n = pre(self.w_n, self.u_n, self.b_n, &rh);
        (0..self.hidden)
            .map(|i| (1.0 - z[i]) * h[i] + z[i] * n[i].tanh())
            .collect()
    }
}

fn gate(g: &mut Graph, x: Var, h: Var, w: ParamId, u: ParamId, b: ParamId) -> Result<Var> {
    let w = g.param(w);
    let u = g.param(u);
    let b = g.param(b);
    let xw = g.matmul(x, w)?;
    let hu = g.matmul(h, u)?;
    let s = g.add(xw, hu)?;
    g.add_row(s, b)
}

/// One GRU update `h' = GRU(x, h)` recorded on the tape. `x` and `h` may
/// hold several rows, one sequence each.
pub fn gru_cell(g: &mut Graph, x: Var, h: Var, p: &GruCell) -> Result<Var> {
    let r_pre = gate(g, x, h, p.w_r, p.u_r, p.b_r)?;
    let r = g.sigmoid(r_pre);
    let z_pre = gate(g, x, h, p.w_z, p.u_z, p.b_z)?;
    let z = g.sigmoid(z_pre);
    let rh = g.mul(r, h)?;
    let n_pre = gate(g, x, rh, p.w_n, p.u_n, p.b_n)?;
    let n = g.tanh(n_pre);
    let keep = g.one_minus(z);
    let old = g.mul(keep, h)?;
    let new = g.mul(z, n)?;
    g.add(old, new)
}
