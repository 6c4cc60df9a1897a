use calm_core::drrn::{
    action_probabilities, filter_candidates, labeled_responses, play, td_update, train, AgentConfig, DrrnError,
    Experience, FilterMode, Policy, QDims, QNetwork, ReplayBuffers, ResponseClassifier, Source,
};
use calm_core::game::GameSpec;
use calm_core::model::ActionModel;
use calm_core::suite::load_bundled;
use calm_core::text::Context;
use calm_tensor::check::check_gradients;
use calm_tensor::{Adam, AdamConfig, Rng};
use proptest::prelude::*;

fn zeroed(dims: QDims) -> QNetwork {
    let mut net = QNetwork::new(dims, 0);
    let store = net.params_mut();
    for id in store.ids().collect::<Vec<_>>() {
        store.value_mut(id).data_mut().fill(0.0);
    }
    net
}

fn set(net: &mut QNetwork, name: &str, values: &[f64]) {
    let store = net.params_mut();
    let id = store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
    store.value_mut(id).data_mut().copy_from_slice(values);
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Width-1 network whose Q-value depends only on token counts:
/// with every weight zero except `b_n`, each GRU step halves the state and
/// adds `tanh(b_n) / 2`.
fn hand_set() -> QNetwork {
    let mut net = zeroed(QDims {
        embed: 1,
        hidden: 1,
        buckets: 4,
    });
    set(&mut net, "f_o.b_n", &[1.0]);
    set(&mut net, "f_a.b_n", &[-1.0]);
    set(&mut net, "g.hidden.weight", &[1.0, 2.0]);
    set(&mut net, "g.out.weight", &[3.0]);
    set(&mut net, "g.out.bias", &[0.5]);
    net
}

fn hand_q(obs_tokens: i32, action_tokens: i32) -> f64 {
    let t = 1f64.tanh();
    let h_o = t * (1.0 - 0.5f64.powi(obs_tokens));
    let h_a = -t * (1.0 - 0.5f64.powi(action_tokens));
    3.0 * (h_o + 2.0 * h_a).tanh() + 0.5
}

#[test]
fn hand_set_network_matches_manual_forward_pass() {
    let net = hand_set();
    let cands = strings(&["north", "take the key", "open box", "x"]);
    let q = net.q_values("a dark room .", &cands).unwrap();
    let want = [hand_q(4, 1), hand_q(4, 3), hand_q(4, 2), hand_q(4, 1)];
    for (got, want) in q.iter().zip(want) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn q_values_are_per_candidate_and_order_free() {
    let net = QNetwork::new(QDims::default(), 3);
    let obs = "You are in a shed. You can see a box here.";
    let cands = strings(&["open box", "north", "open box", "take key"]);
    let q = net.q_values(obs, &cands).unwrap();
    assert_eq!(q.len(), 4);
    assert_eq!(q[0], q[2]);
    let rev: Vec<String> = cands.iter().rev().cloned().collect();
    let qr = net.q_values(obs, &rev).unwrap();
    assert_eq!(q.iter().rev().copied().collect::<Vec<_>>(), qr);
    assert!(matches!(net.q_values(obs, &[]), Err(DrrnError::NoCandidates)));
    let mut rng = Rng::seed(0);
    assert!(matches!(net.select_action(obs, &[], 1.0, &mut rng), Err(DrrnError::NoCandidates)));
}

#[test]
fn softmax_probabilities() {
    let p = action_probabilities(&[2f64.ln(), 0.0], 1.0);
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(action_probabilities(&[0.1, 0.7, 0.7], 0.0), vec![0.0, 1.0, 0.0]);
    let cold = action_probabilities(&[0.1, 0.7, 0.2], 1e-3);
    assert!(cold[1] > 1.0 - 1e-12);
    let mut rng = Rng::seed(1);
    let probs = action_probabilities(&[2f64.ln(), 0.0], 1.0);
    let n = 10_000;
    let first = (0..n).filter(|_| rng.weighted(&probs) == 0).count() as f64 / n as f64;
    // Three standard deviations of a binomial proportion.
    assert!((first - 2.0 / 3.0).abs() < 3.0 * (2.0f64 / 9.0 / n as f64).sqrt(), "{first}");
}

#[test]
fn equal_q_values_sample_uniformly() {
    // All-zero weights give every candidate the same value.
    let net = zeroed(QDims::default());
    let cands = strings(&["a", "b", "c", "d"]);
    let mut rng = Rng::seed(2);
    let mut counts = [0usize; 4];
    let n = 10_000;
    for _ in 0..n {
        counts[net.select_action("obs", &cands, 1.0, &mut rng).unwrap()] += 1;
    }
    let expected = n as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 3 degrees of freedom, p = 0.001.
    assert!(chi2 < 16.27, "{counts:?} chi2 {chi2}");
}

#[test]
fn zero_temperature_picks_the_argmax() {
    let net = hand_set();
    let cands = strings(&["take the key", "north", "open box"]);
    let q = net.q_values("room", &cands).unwrap();
    let best = (0..3).max_by(|&a, &b| q[a].total_cmp(&q[b])).unwrap();
    let mut rng = Rng::seed(3);
    for _ in 0..20 {
        assert_eq!(net.select_action("room", &cands, 0.0, &mut rng).unwrap(), best);
    }
}

fn exp(obs: &str, action: &str, reward: f64, next: &str, cands: &[&str], done: bool) -> Experience {
    Experience {
        obs: obs.into(),
        action: action.into(),
        reward,
        next_obs: next.into(),
        next_candidates: strings(cands),
        done,
    }
}

#[test]
fn td_loss_zero_at_the_target() {
    let mut net = zeroed(QDims::default());
    set(&mut net, "g.out.bias", &[2.5]);
    let batch = [
        exp("a", "go", 2.5, "b", &[], true),
        exp("b c", "wait here", 2.5, "a", &["go"], true),
    ];
    let refs: Vec<&Experience> = batch.iter().collect();
    let targets = net.td_targets(&refs, 0.9);
    assert_eq!(targets, vec![2.5, 2.5]);
    let (loss, grads) = net.td_loss_and_grads(net.params(), &refs, &targets).unwrap();
    assert_eq!(loss, 0.0);
    for id in net.params().ids() {
        assert!(grads.to_dense(id, net.params().value(id)).data().iter().all(|&g| g == 0.0));
    }
}

#[test]
fn terminal_transition_loss_is_squared_error() {
    let mut net = zeroed(QDims::default());
    set(&mut net, "g.out.bias", &[3.0]);
    let batch = [exp("a", "go", 5.0, "b", &["go"], true)];
    let refs: Vec<&Experience> = batch.iter().collect();
    let targets = net.td_targets(&refs, 0.9);
    let (loss, _) = net.td_loss_and_grads(net.params(), &refs, &targets).unwrap();
    assert!((loss - 4.0).abs() < 1e-12);
    let mut adam = Adam::new(AdamConfig::with_lr(1e-3), net.params());
    assert!(matches!(td_update(&mut net, &mut adam, &[], 0.9, None), Err(DrrnError::EmptyBatch)));
}

#[test]
fn non_terminal_target_bootstraps_over_stored_candidates() {
    let net = hand_set();
    let batch = [exp("o", "a", 1.0, "x y", &["p", "q r s", "t u"], false)];
    let refs: Vec<&Experience> = batch.iter().collect();
    let best = [hand_q(2, 1), hand_q(2, 3), hand_q(2, 2)].into_iter().fold(f64::MIN, f64::max);
    let got = net.td_targets(&refs, 0.5)[0];
    assert!((got - (1.0 + 0.5 * best)).abs() < 1e-12);
}

#[test]
fn td_gradients_match_finite_differences() {
    for seed in 0..5u64 {
        let net = QNetwork::new(
            QDims {
                embed: 3,
                hidden: 4,
                buckets: 16,
            },
            seed,
        );
        let batch = [
            exp("a dark room", "go north", 0.0, "a hall", &["look", "go south"], false),
            exp("a hall", "look", 1.0, "a hall", &["look"], false),
            exp("a dark room", "take the small key", 2.0, "done", &[], true),
            exp("", "", 0.5, "a", &["x"], false),
        ];
        let refs: Vec<&Experience> = batch.iter().collect();
        let targets = net.td_targets(&refs, 0.9);
        let (loss, grads) = net.td_loss_and_grads(net.params(), &refs, &targets).unwrap();
        assert!((loss - net.td_loss_with(net.params(), &refs, &targets)).abs() < 1e-12);
        let report = check_gradients(net.params(), &grads, 1e-5, |s| net.td_loss_with(s, &refs, &targets));
        assert!(report.max_relative_error() < 1e-4, "{:?}", report.worst());
    }
}

#[test]
fn two_state_chain_converges_to_discounted_returns() {
    // a -go-> b with reward 0, b -go-> a with reward 1, forever.
    let gamma = 0.5;
    let q_b = 1.0 / (1.0 - gamma * gamma);
    let q_a = gamma * q_b;
    let batch = [
        exp("room a", "go", 0.0, "room b", &["go"], false),
        exp("room b", "go", 1.0, "room a", &["go"], false),
    ];
    let refs: Vec<&Experience> = batch.iter().collect();
    let mut net = QNetwork::new(QDims { embed: 4, hidden: 8, buckets: 64 }, 7);
    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: 3e-3,
            max_grad_norm: None,
            ..AdamConfig::default()
        },
        net.params(),
    );
    for _ in 0..3000 {
        td_update(&mut net, &mut adam, &refs, gamma, None).unwrap();
    }
    let got_a = net.q_values("room a", &strings(&["go"])).unwrap()[0];
    let got_b = net.q_values("room b", &strings(&["go"])).unwrap()[0];
    assert!((got_a - q_a).abs() < 1e-2, "{got_a} vs {q_a}");
    assert!((got_b - q_b).abs() < 1e-2, "{got_b} vs {q_b}");
}

#[test]
fn oracle_filter_keeps_admissible_and_falls_back() {
    let spec = load_bundled("lockbox").unwrap();
    let (state, _) = spec.reset();
    let admissible = spec.admissible_actions(&state);
    let cands = strings(&["north", "south", "open box", "dance", "unlock box", "take box"]);
    let kept = filter_candidates(&cands, FilterMode::Oracle, &spec, &state, None);
    assert!(!kept.is_empty());
    assert!(kept.iter().all(|a| admissible.contains(a)), "{kept:?}");
    let junk = strings(&["south", "dance"]);
    assert_eq!(filter_candidates(&junk, FilterMode::Oracle, &spec, &state, None), junk);
    assert_eq!(filter_candidates(&cands, FilterMode::None, &spec, &state, None), cands);
}

fn trained_classifier() -> (ResponseClassifier, Vec<(String, bool)>) {
    let mut rng = Rng::seed(11);
    let mut data = Vec::new();
    for id in ["toyzork", "cellar", "vault", "garden", "workshop", "lockbox"] {
        data.extend(labeled_responses(&load_bundled(id).unwrap(), 600, &mut rng));
    }
    rng.shuffle(&mut data);
    let cut = data.len() * 4 / 5;
    let test = data.split_off(cut);
    (ResponseClassifier::fit(&data, 10, 0.1, 0), test)
}

#[test]
fn textual_classifier_is_accurate_on_held_out_responses() {
    let (c, test) = trained_classifier();
    let failures = test.iter().filter(|(_, y)| *y).count();
    assert!(failures > 0 && failures < test.len());
    let acc = c.accuracy(&test);
    assert!(acc >= 0.95, "accuracy {acc}");
    assert!(c.is_failure("You can't go that way."));
    assert!(!c.is_failure("Taken."));
}

#[test]
fn textual_filter_drops_failed_commands() {
    let (c, _) = trained_classifier();
    let spec = load_bundled("lockbox").unwrap();
    let (state, _) = spec.reset();
    let kept = filter_candidates(&strings(&["south", "north", "west"]), FilterMode::Textual, &spec, &state, Some(&c));
    assert_eq!(kept, vec!["north"]);
}

struct Fixed(Vec<String>);

impl ActionModel for Fixed {
    fn generate(&self, _: &Context, k: usize) -> Vec<String> {
        self.0.iter().take(k).cloned().collect()
    }
}

const BUTTON: &str = "\
[meta]
name: Button
start: hall
max_score: 1
intro: There is a button here.

[room hall]
name: Hall
description: A bare hall. A study lies east.
exit: east -> study

[room study]
name: Study
description: A quiet study. The hall is west.
exit: west -> hall

[object button]
names: button
name: red button
location: hall

[verb push _]
kind: custom

[verb look]
kind: look

[rule]
verb: push _
args: button
do: set pressed
say: Click.

[reward]
when: flag pressed
value: 1

[walkthrough]
push button
";

fn quick(steps: usize, seed: u64) -> AgentConfig {
    AgentConfig {
        total_steps: steps,
        seed,
        actors: 2,
        warmup_steps: 50,
        batch_size: 16,
        update_every: 2,
        deterministic: true,
        net: QDims {
            embed: 8,
            hidden: 16,
            buckets: 256,
        },
        ..AgentConfig::default()
    }
}

#[test]
fn one_rewarded_action_among_five_is_learned() {
    let spec = GameSpec::from_text(BUTTON).unwrap();
    let model = Fixed(strings(&["east", "west", "look", "push button", "push hall"]));
    let (report, _) = train(&quick(5000, 1), &spec, "button", Source::Model(&model), None).unwrap();
    assert_eq!(report.summary.final_avg_100, spec.max_score);
    assert_eq!(report.summary.max_seen, spec.max_score);
    let steps: usize = report.episodes.iter().map(|e| e.steps).sum();
    assert!(steps <= 5000);
}

#[test]
fn zero_steps_and_bad_configs() {
    let spec = GameSpec::from_text(BUTTON).unwrap();
    let model = Fixed(strings(&["push button"]));
    let (report, _) = train(&quick(0, 0), &spec, "button", Source::Model(&model), None).unwrap();
    assert!(report.episodes.is_empty());
    assert_eq!(report.summary.final_avg_100, 0.0);
    for cfg in [
        AgentConfig { k: 0, ..quick(10, 0) },
        AgentConfig { gamma: 1.5, ..quick(10, 0) },
        AgentConfig { gamma: -0.1, ..quick(10, 0) },
        AgentConfig { temperature: -1.0, ..quick(10, 0) },
    ] {
        assert!(matches!(train(&cfg, &spec, "button", Source::Model(&model), None), Err(DrrnError::Config(_))));
    }
}

#[test]
fn empty_model_falls_back_to_a_default_action() {
    let spec = GameSpec::from_text(BUTTON).unwrap();
    let (report, _) = train(&quick(30, 0), &spec, "button", Source::Model(&calm_core::model::EmptyModel), None).unwrap();
    assert_eq!(report.summary.max_seen, 0.0);
}

#[test]
fn deterministic_runs_are_identical() {
    let spec = load_bundled("lockbox").unwrap();
    let run = || {
        let (r, _) = train(&quick(600, 4), &spec, "lockbox", Source::Admissible, None).unwrap();
        serde_json::to_string(&r).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn threaded_actors_cover_the_step_budget() {
    let spec = load_bundled("lockbox").unwrap();
    let cfg = AgentConfig {
        deterministic: false,
        actors: 3,
        ..quick(400, 5)
    };
    let (report, _) = train(&cfg, &spec, "lockbox", Source::Admissible, None).unwrap();
    let steps: usize = report.episodes.iter().map(|e| e.steps).sum();
    assert!(steps <= 400);
    assert!(!report.episodes.is_empty());
    assert!(report.summary.updates > 0);
}

#[test]
fn random_policy_never_updates() {
    let spec = load_bundled("lockbox").unwrap();
    let cfg = AgentConfig {
        policy: Policy::Random,
        ..quick(300, 6)
    };
    let (report, _) = train(&cfg, &spec, "lockbox", Source::Admissible, None).unwrap();
    assert_eq!(report.summary.updates, 0);
    assert!(report.episodes.len() > 1);
}

#[test]
fn oracle_filtered_play_only_takes_state_changing_actions() {
    let spec = load_bundled("lockbox").unwrap();
    let model = Fixed(strings(&["north", "south", "take key", "unlock box", "open box", "take coin", "dance", "east"]));
    let cfg = AgentConfig {
        filter: FilterMode::Oracle,
        ..quick(0, 8)
    };
    let (_, steps) = play(None, &spec, Source::Model(&model), &cfg, None).unwrap();
    let (mut state, _) = spec.reset();
    for s in &steps {
        let (next, result) = spec.step(&state, &s.action);
        assert!(result.state_changed, "{}", s.action);
        state = next;
    }
}

#[test]
fn checkpoint_roundtrip() {
    let net = QNetwork::new(QDims { embed: 3, hidden: 5, buckets: 32 }, 9);
    let mut buf = Vec::new();
    net.save(&mut buf).unwrap();
    let back = QNetwork::load(&buf[..]).unwrap();
    let cands = strings(&["open box", "north"]);
    assert_eq!(net.q_values("a shed", &cands).unwrap(), back.q_values("a shed", &cands).unwrap());
    assert!(QNetwork::load(&b"calm-qnet v1 3 5\n"[..]).is_err());
}

proptest! {
    #[test]
    fn permuting_candidates_permutes_values(
        words in prop::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,2}", 1..8),
        seed in 0u64..4,
    ) {
        let net = QNetwork::new(QDims { embed: 4, hidden: 6, buckets: 32 }, seed);
        let q = net.q_values("an obs", &words).unwrap();
        let mut order: Vec<usize> = (0..words.len()).collect();
        Rng::seed(seed).shuffle(&mut order);
        let shuffled: Vec<String> = order.iter().map(|&i| words[i].clone()).collect();
        let qs = net.q_values("an obs", &shuffled).unwrap();
        for (j, &i) in order.iter().enumerate() {
            prop_assert_eq!(qs[j], q[i]);
        }
        let p = action_probabilities(&q, 1.0);
        let ps = action_probabilities(&qs, 1.0);
        for (j, &i) in order.iter().enumerate() {
            prop_assert!((ps[j] - p[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn best_buffer_score_never_decreases(scores in prop::collection::vec(0u8..6, 1..40)) {
        let mut b = ReplayBuffers::new(50, 0.5);
        let mut last = None;
        for s in scores {
            b.end_episode(&[exp("o", "a", 0.0, "o", &["a"], false)], s as f64);
            let now = b.best_score();
            prop_assert!(now >= last);
            last = now;
        }
    }
}
