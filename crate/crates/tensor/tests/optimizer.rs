use calm_tensor::{Adam, AdamConfig, Graph, GruCell, Linear, ParamStore, Rng, Tensor};
use proptest::prelude::*;

/// Textbook Adam on one scalar with the same schedule and no clipping.
fn hand_rolled(config: &AdamConfig, start: f64, grads: &[f64]) -> Vec<f64> {
    let (mut m, mut v, mut p) = (0.0, 0.0, start);
    let mut out = Vec::new();
    for (t, g) in grads.iter().enumerate() {
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g * g;
        let lr = config.learning_rate * config.schedule(t as u64);
        let m_hat = m / (1.0 - config.beta1.powi(t as i32 + 1));
        let v_hat = v / (1.0 - config.beta2.powi(t as i32 + 1));
        p -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
        out.push(p);
    }
    out
}

#[test]
fn scalar_trajectory_matches_recurrence() {
    let config = AdamConfig {
        learning_rate: 0.05,
        warmup_steps: 3,
        total_steps: Some(12),
        max_grad_norm: None,
        ..AdamConfig::default()
    };
    let grads = [0.3, -1.2, 0.8, 0.05, 2.0, -0.4, 0.0, 0.9, -0.1, 0.6];
    let expected = hand_rolled(&config, 1.5, &grads);
    let mut store = ParamStore::new();
    let id = store.add("p", Tensor::scalar(1.5));
    let mut adam = Adam::new(config, &store);
    for (g, want) in grads.iter().zip(expected) {
        store.grad_mut(id).data_mut()[0] = *g;
        adam.step(&mut store);
        assert!((store.value(id).item() - want).abs() < 1e-15);
        assert_eq!(store.grad(id).item(), 0.0);
    }
}

fn train_run(seed: u64) -> Vec<f64> {
    let mut rng = Rng::seed(seed);
    let mut store = ParamStore::new();
    let emb = store.add_uniform("emb", &[6, 4], 4, &mut rng);
    let cell = GruCell::new(&mut store, "gru", 4, 5, &mut rng);
    let out = Linear::new(&mut store, "out", 5, 6, &mut rng);
    let mut adam = Adam::new(AdamConfig::with_lr(1e-2), &store);
    let seq = [1usize, 4, 2, 5, 0, 3];
    for _ in 0..20 {
        let mut g = Graph::new(&store);
        let t = g.param(emb);
        let mut h = g.constant(cell.zero_state());
        let mut losses = Vec::new();
        for w in seq.windows(2) {
            let x = g.embedding(t, w[0]).unwrap();
            h = cell.step(&mut g, x, h).unwrap();
            let logits = out.forward(&mut g, h).unwrap();
            losses.push(g.cross_entropy(logits, w[1]).unwrap());
        }
        let loss = g.add_all(&losses).unwrap();
        let grads = g.backward(loss).unwrap();
        store.accumulate(&grads);
        adam.step(&mut store);
    }
    store.ids().flat_map(|id| store.value(id).data().to_vec()).collect()
}

#[test]
fn fixed_seed_training_is_bit_reproducible() {
    let a = train_run(42);
    let b = train_run(42);
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_ne!(a, train_run(43));
}

proptest! {
    #[test]
    fn clipped_norm_never_exceeds_limit(
        grads in proptest::collection::vec(-1e3f64..1e3, 1..40),
        limit in 0.01f64..5.0,
    ) {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::zeros(&[1, grads.len()]));
        store.grad_mut(id).data_mut().copy_from_slice(&grads);
        let mut adam = Adam::new(
            AdamConfig { max_grad_norm: Some(limit), ..AdamConfig::with_lr(1e-3) },
            &store,
        );
        let info = adam.step(&mut store);
        prop_assert!(info.clipped_norm <= limit + 1e-12);
    }

    #[test]
    fn schedule_stays_in_unit_interval(
        warmup in 0u64..50, extra in 1u64..500, step in 0u64..1000,
    ) {
        let config = AdamConfig {
            warmup_steps: warmup,
            total_steps: Some(warmup + extra),
            ..AdamConfig::default()
        };
        let f = config.schedule(step);
        prop_assert!((0.0..=1.0).contains(&f));
    }
}
