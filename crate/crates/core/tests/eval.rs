use std::collections::HashMap;

use calm_core::eval::{
    average_normalized, compare_report, evaluate, evaluate_suite, normalized_score, Curves, EvalError, MetricCurves,
    ScoreTable,
};
use calm_core::game::TrajectoryStep;
use calm_core::model::{ActionModel, EmptyModel};
use calm_core::suite::load_suite;
use calm_core::text::Context;
use proptest::prelude::*;

/// Returns a fixed list per observation, truncated to `k`.
#[derive(Debug)]
struct Table(HashMap<String, Vec<String>>);

impl ActionModel for Table {
    fn generate(&self, context: &Context, k: usize) -> Vec<String> {
        let list = self.0.get(&context.observation).cloned().unwrap_or_default();
        list.into_iter().take(k).collect()
    }
}

fn step(i: usize, gold: &str, admissible: &[&str]) -> TrajectoryStep {
    TrajectoryStep {
        step: i + 1,
        context: Context::new("", "", format!("state {i}")),
        gold: gold.into(),
        admissible: admissible.iter().map(|s| s.to_string()).collect(),
    }
}

fn table(lists: &[&[&str]]) -> Table {
    Table(
        lists
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("state {i}"), l.iter().map(|s| s.to_string()).collect()))
            .collect(),
    )
}

fn norm(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Naive reimplementation: a fresh `generate(c, k)` call per k, linear-scan
/// membership, duplicates dropped by hand.
fn oracle(model: &dyn ActionModel, traj: &[TrajectoryStep], k_max: usize) -> Curves {
    let l = traj.len() as f64;
    let mut c = Curves::default();
    for k in 1..=k_max {
        let (mut p, mut r, mut g) = (0.0, 0.0, 0.0);
        for s in traj {
            let mut admissible: Vec<String> = Vec::new();
            for a in &s.admissible {
                if !admissible.contains(&norm(a)) {
                    admissible.push(norm(a));
                }
            }
            let mut lm: Vec<String> = Vec::new();
            for a in model.generate(&s.context, k).iter().take(k) {
                if !lm.contains(&norm(a)) {
                    lm.push(norm(a));
                }
            }
            let inter = lm.iter().filter(|a| admissible.contains(a)).count() as f64;
            p += inter / k as f64;
            if !admissible.is_empty() {
                r += inter / admissible.len() as f64;
            }
            if lm.contains(&norm(&s.gold)) {
                g += 1.0;
            }
        }
        c.prec_a.push(p / l);
        c.rec_a.push(r / l);
        c.rec_g.push(g / l);
    }
    c
}

#[test]
fn hand_built_three_step_trajectory() {
    let traj = [
        step(0, "a1", &["a1", "a2"]),
        step(1, "b9", &["b1", "b2", "b3"]),
        step(2, "c1", &["c1", "c2", "c3", "c4"]),
    ];
    // Overlaps at k=2 are 1, 2 and 0; the gold action is hit only at step 0.
    let model = table(&[&["a1", "zz"], &["b2", "b1", "b9"], &["x", "y", "c1"]]);
    let got = evaluate(&model, "hand", &traj, 3).unwrap();
    let c = &got.curves;
    assert!((c.prec_a[1] - 0.5).abs() < 1e-15);
    assert!((c.rec_a[1] - 7.0 / 18.0).abs() < 1e-15);
    assert!((c.rec_g[1] - 1.0 / 3.0).abs() < 1e-15);
    assert!((c.rec_g[2] - 1.0).abs() < 1e-15);
    assert_eq!(got.curves, oracle(&model, &traj, 3));
    assert_eq!(got.underfull, vec![0, 0, 1]);
}

#[test]
fn exact_admissible_lists_score_one() {
    let traj = [step(0, "a", &["a", "b"]), step(1, "c", &["c", "d", "e"])];
    let model = table(&[&["a", "b"], &["c", "d", "e"]]);
    let c = evaluate(&model, "g", &traj, 3).unwrap().curves;
    // k = |A_t| for step 0 at k=2 and step 1 at k=3.
    assert_eq!(c.rec_a[2], 1.0);
    assert_eq!(c.rec_g[0], 1.0);
    let same = [step(0, "a", &["a", "b"]), step(1, "c", &["c", "d"])];
    let c = evaluate(&table(&[&["a", "b"], &["c", "d"]]), "g", &same, 2).unwrap().curves;
    assert_eq!((c.prec_a[1], c.rec_a[1], c.rec_g[1]), (1.0, 1.0, 1.0));
}

#[test]
fn garbage_scores_zero() {
    let traj = [step(0, "a", &["a", "b"]), step(1, "c", &["c"])];
    let model = table(&[&["q", "r"], &["s"]]);
    let c = evaluate(&model, "g", &traj, 4).unwrap().curves;
    assert!(c.prec_a.iter().chain(&c.rec_a).chain(&c.rec_g).all(|&v| v == 0.0));
}

#[test]
fn normalization_matches_case_and_spacing() {
    let traj = [step(0, "Open  Box", &["open box", "north"])];
    let model = table(&[&["OPEN box", "  north "]]);
    let c = evaluate(&model, "g", &traj, 2).unwrap().curves;
    assert_eq!(c.rec_a[1], 1.0);
    assert_eq!(c.rec_g[0], 1.0);
}

#[test]
fn errors_and_empty_admissible_steps() {
    assert_eq!(
        evaluate(&EmptyModel, "g", &[], 3),
        Err(EvalError::EmptyTrajectory("g".into()))
    );
    assert_eq!(evaluate(&EmptyModel, "g", &[step(0, "a", &["a"])], 0), Err(EvalError::ZeroK));
    let traj = [step(0, "a", &["a"]), step(1, "b", &[])];
    let got = evaluate(&table(&[&["a"], &["b"]]), "g", &traj, 1).unwrap();
    assert_eq!(got.empty_admissible, 1);
    assert_eq!(got.curves.rec_a, vec![0.5]);
    assert_eq!(got.curves.rec_g, vec![1.0]);
}

#[test]
fn comparison_deltas() {
    let traj = vec![step(0, "a", &["a", "b"]), step(1, "c", &["c"])];
    let model = table(&[&["a", "b"], &["c"]]);
    let set = vec![("g".to_string(), traj)];
    let full = evaluate_suite(&model, &set, 3).unwrap();
    let empty = evaluate_suite(&EmptyModel, &set, 3).unwrap();

    let same = compare_report(&[full.clone(), full.clone()], &["a", "b"]).unwrap();
    for (_, d) in &same.deltas[0] {
        assert!(d.prec_a.iter().chain(&d.rec_a).chain(&d.rec_g).all(|&v| v == 0.0));
    }
    let cmp = compare_report(&[empty, full.clone()], &["empty", "oracle"]).unwrap();
    assert_eq!(cmp.deltas[0][0].1, full.games[0].curves);
    assert_eq!(cmp.deltas[0][1], ("mean".to_string(), full.mean.clone()));
    let csv = cmp.to_csv();
    assert!(csv.starts_with("model,game,k,prec_a,rec_a,rec_g\n"));
    assert!(csv.contains("oracle-empty,g,1,"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2 + 3 * 2);

    assert_eq!(
        compare_report(&[full.clone()], &["a", "b"]).unwrap_err(),
        EvalError::LabelMismatch { labels: 2, curves: 1 }
    );
}

#[test]
fn suite_aggregates_and_csv() {
    let suite = load_suite().unwrap();
    let trajectories: Vec<(String, Vec<TrajectoryStep>)> = suite
        .iter()
        .map(|(id, spec)| (id.clone(), spec.walkthrough_trajectory().unwrap()))
        .collect();
    // Admissible oracle: recalls everything once k covers |A_t|.
    let mut map = HashMap::new();
    for (_, t) in &trajectories {
        for s in t {
            map.insert(s.context.observation.clone(), s.admissible.clone());
        }
    }
    let model = Table(map);
    let curves = evaluate_suite(&model, &trajectories, 40).unwrap();
    assert_eq!(curves.games.len(), 6);
    for g in &curves.games {
        let (_, t) = trajectories.iter().find(|(id, _)| *id == g.game).unwrap();
        assert_eq!(g.curves, oracle(&model, t, 40));
    }
    assert!(curves.mean.rec_g[39] > 0.99);
    let n = curves.games.len() as f64;
    let mean: f64 = curves.games.iter().map(|g| g.curves.rec_a[4]).sum::<f64>() / n;
    let var: f64 = curves.games.iter().map(|g| (g.curves.rec_a[4] - mean).powi(2)).sum::<f64>() / n;
    assert!((curves.mean.rec_a[4] - mean).abs() < 1e-12);
    assert!((curves.std.rec_a[4] - var.sqrt()).abs() < 1e-12);
    assert_eq!(curves.curves_csv().lines().count(), 1 + 6 * 40);
    assert_eq!(curves.summary_csv().lines().count(), 1 + 2 * 40);
}

#[test]
fn score_table_matches_recomputation() {
    let mut t = ScoreTable::new(vec!["calm".into(), "random".into()]);
    let rows = [("alpha", 10.0, 9.0, 2.0), ("beta", 4.0, 1.0, 0.0), ("gamma", 360.0, 289.7, 0.0)];
    for (g, max, a, b) in rows {
        t.insert(g, max, vec![a, b]).unwrap();
    }
    let avg = t.avg_norm().unwrap();
    let by_hand = (0.9 + 0.25 + 289.7 / 360.0) / 3.0;
    assert!((avg[0] - by_hand).abs() < 1e-12);
    assert!((avg[1] - 0.2 / 3.0).abs() < 1e-12);
    assert_eq!(t.norm_deltas(1, 0)[0], ("alpha".to_string(), 0.7));
    let csv = t.to_csv().unwrap();
    assert!(csv.starts_with("game,max_score,calm,random\n"));
    assert!(csv.lines().last().unwrap().starts_with("avg. norm,,"));
    assert!(t.insert("bad", 0.0, vec![1.0, 1.0]).is_err());
    assert!(t.insert("bad", 1.0, vec![1.0]).is_err());
    assert_eq!(average_normalized(&[]), Err(EvalError::NoGames));
    assert_eq!(normalized_score(5.0, 5.0), Ok(1.0));
}

#[test]
fn mismatched_k_is_rejected() {
    let set = vec![("g".to_string(), vec![step(0, "a", &["a"])])];
    let a = evaluate_suite(&EmptyModel, &set, 2).unwrap();
    let b = evaluate_suite(&EmptyModel, &set, 3).unwrap();
    assert!(compare_report(&[a.clone(), b.clone()], &["a", "b"]).is_err());
    let games = vec![a.games[0].clone(), b.games[0].clone()];
    assert!(MetricCurves::from_games(games).is_err());
}

const POOL: [&str; 10] = ["north", "south", "take key", "Take  Key", "open box", "drop key", "look", "x", "y", "z"];

fn trajectory_strategy() -> impl Strategy<Value = (Vec<TrajectoryStep>, Table)> {
    let step_s = (
        prop::collection::vec(0..POOL.len(), 0..6),
        0..POOL.len(),
        prop::collection::vec(0..POOL.len(), 0..8),
    );
    prop::collection::vec(step_s, 1..8).prop_map(|steps| {
        let mut traj = Vec::new();
        let mut map = HashMap::new();
        for (i, (adm, gold, gen)) in steps.into_iter().enumerate() {
            let adm: Vec<&str> = adm.into_iter().map(|j| POOL[j]).collect();
            let s = step(i, POOL[gold], &adm);
            map.insert(s.context.observation.clone(), gen.into_iter().map(|j| POOL[j].to_string()).collect());
            traj.push(s);
        }
        (traj, Table(map))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]
    #[test]
    fn matches_brute_force_and_is_monotone((traj, model) in trajectory_strategy(), k_max in 1usize..10) {
        let got = evaluate(&model, "p", &traj, k_max).unwrap();
        prop_assert_eq!(&got.curves, &oracle(&model, &traj, k_max));
        let c = &got.curves;
        for w in c.rec_a.windows(2).chain(c.rec_g.windows(2)) {
            prop_assert!(w[0] <= w[1]);
        }
        for v in c.prec_a.iter().chain(&c.rec_a).chain(&c.rec_g) {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }
}
