//! Central finite differences for verifying tape gradients.
//!
//! The numeric side only evaluates the loss; it never touches the tape, so
//! it stays independent of the code it checks.

use crate::params::{Gradients, ParamStore};
use crate::tensor::Tensor;

/// `∂loss/∂θ ≈ (loss(θ + h) − loss(θ − h)) / 2h` for every scalar in the store.
pub fn numerical_gradients(
    store: &ParamStore,
    h: f64,
    loss: impl Fn(&ParamStore) -> f64,
) -> Vec<Tensor> {
    let mut work = store.clone();
    let mut out = Vec::with_capacity(store.len());
    for id in store.ids() {
        let mut grad = Tensor::zeros(store.value(id).shape());
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data()[i];
            work.value_mut(id).data_mut()[i] = orig + h;
            let up = loss(&work);
            work.value_mut(id).data_mut()[i] = orig - h;
            let down = loss(&work);
            work.value_mut(id).data_mut()[i] = orig;
            grad.data_mut()[i] = (up - down) / (2.0 * h);
        }
        out.push(grad);
    }
    out
}

/// `‖a − n‖₂ / max(‖a‖₂ + ‖n‖₂, 1e-8)`; zero when both vanish.
pub fn relative_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    let diff: f64 = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let scale = analytic.norm_sq().sqrt() + numeric.norm_sq().sqrt();
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(1e-8)
    }
}

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub per_param: Vec<(String, f64)>,
}

impl GradCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    }
}

/// Compares tape gradients against central differences, parameter by parameter.
pub fn check_gradients(
    store: &ParamStore,
    analytic: &Gradients,
    h: f64,
    loss: impl Fn(&ParamStore) -> f64,
) -> GradCheck {
    let numeric = numerical_gradients(store, h, loss);
    let per_param = store
        .ids()
        .zip(numeric)
        .map(|(id, n)| {
            let a = analytic.to_dense(id, store.value(id));
            (store.name(id).to_string(), relative_error(&a, &n))
        })
        .collect();
    GradCheck { per_param }
}
