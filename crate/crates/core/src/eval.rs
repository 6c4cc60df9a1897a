//! Walkthrough evaluation: how well a generator's top-k covers the
//! admissible and gold actions along a walkthrough, and score normalization.
//!
//! For a trajectory of `l` steps with admissible sets `A_t`, gold actions
//! `g_t` and generated lists `L_t(k)`:
//!
//! - `prec_a(k) = 1/l Σ |A_t ∩ L_t(k)| / k`
//! - `rec_a(k)  = 1/l Σ |A_t ∩ L_t(k)| / |A_t|` (0 when `A_t` is empty)
//! - `rec_g(k)  = 1/l Σ [g_t ∈ L_t(k)]`
//!
//! `L_t(k)` is the first `k` entries of one `generate(context, k_max)` call,
//! so the curves are non-decreasing in `k` for recall by construction; that
//! is checked anyway. Precision divides by `k` even when the generator
//! returned fewer; such steps are counted in `underfull`. Duplicates in the
//! generated list count once. Strings are compared after
//! [`normalize_action`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::TrajectoryStep;
use crate::model::ActionModel;
use crate::text::normalize_action;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("trajectory for `{0}` is empty")]
    EmptyTrajectory(String),
    #[error("k_max must be at least 1")]
    ZeroK,
    #[error("max score must be positive, got {0}")]
    NonPositiveMax(f64),
    #[error("{labels} labels for {curves} curve sets")]
    LabelMismatch { labels: usize, curves: usize },
    #[error("curve sets disagree on {0}")]
    Incompatible(String),
    #[error("no games to aggregate")]
    NoGames,
    #[error("{metric} decreases at k={k} on `{game}`")]
    NotMonotone { game: String, metric: &'static str, k: usize },
}

/// `values[k-1]` for k = 1..=k_max.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub prec_a: Vec<f64>,
    pub rec_a: Vec<f64>,
    pub rec_g: Vec<f64>,
}

impl Curves {
    fn zeros(k_max: usize) -> Self {
        Self {
            prec_a: vec![0.0; k_max],
            rec_a: vec![0.0; k_max],
            rec_g: vec![0.0; k_max],
        }
    }

    pub fn k_max(&self) -> usize {
        self.prec_a.len()
    }

    fn map2(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
        Self {
            prec_a: zip(&self.prec_a, &other.prec_a),
            rec_a: zip(&self.rec_a, &other.rec_a),
            rec_g: zip(&self.rec_g, &other.rec_g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameCurves {
    pub game: String,
    pub steps: usize,
    /// Steps with an empty admissible set.
    pub empty_admissible: usize,
    /// `underfull[k-1]`: steps where fewer than `k` distinct actions came back.
    pub underfull: Vec<usize>,
    pub curves: Curves,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricCurves {
    pub k_max: usize,
    pub games: Vec<GameCurves>,
    /// Unweighted mean over games.
    pub mean: Curves,
    /// Population standard deviation over games.
    pub std: Curves,
}

/// Curves for one game's walkthrough.
pub fn evaluate(
    model: &dyn ActionModel,
    game: &str,
    trajectory: &[TrajectoryStep],
    k_max: usize,
) -> Result<GameCurves, EvalError> {
    if k_max == 0 {
        return Err(EvalError::ZeroK);
    }
    if trajectory.is_empty() {
        return Err(EvalError::EmptyTrajectory(game.to_string()));
    }
    let mut sums = Curves::zeros(k_max);
    let mut underfull = vec![0; k_max];
    let mut empty_admissible = 0;
    for step in trajectory {
        let admissible: BTreeSet<String> = step.admissible.iter().map(|a| normalize_action(a)).collect();
        let gold = normalize_action(&step.gold);
        if admissible.is_empty() {
            empty_admissible += 1;
        }
        let mut seen = BTreeSet::new();
        let generated: Vec<String> = model
            .generate(&step.context, k_max)
            .iter()
            .take(k_max)
            .map(|a| normalize_action(a))
            .collect();
        let (mut hits, mut gold_hit) = (0usize, false);
        for k in 1..=k_max {
            if let Some(a) = generated.get(k - 1) {
                if seen.insert(a.clone()) {
                    hits += admissible.contains(a) as usize;
                    gold_hit |= *a == gold;
                }
            }
            if seen.len() < k {
                underfull[k - 1] += 1;
            }
            sums.prec_a[k - 1] += hits as f64 / k as f64;
            if !admissible.is_empty() {
                sums.rec_a[k - 1] += hits as f64 / admissible.len() as f64;
            }
            sums.rec_g[k - 1] += gold_hit as u8 as f64;
        }
    }
    let l = trajectory.len() as f64;
    let curves = sums.map2(&sums, |x, _| x / l);
    for (metric, values) in [("rec_a", &curves.rec_a), ("rec_g", &curves.rec_g)] {
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(EvalError::NotMonotone {
                game: game.to_string(),
                metric,
                k: i + 2,
            });
        }
    }
    Ok(GameCurves {
        game: game.to_string(),
        steps: trajectory.len(),
        empty_admissible,
        underfull,
        curves,
    })
}

impl MetricCurves {
    pub fn from_games(games: Vec<GameCurves>) -> Result<Self, EvalError> {
        let first = games.first().ok_or(EvalError::NoGames)?;
        let k_max = first.curves.k_max();
        if games.iter().any(|g| g.curves.k_max() != k_max) {
            return Err(EvalError::Incompatible("k_max".into()));
        }
        let n = games.len() as f64;
        let mut mean = Curves::zeros(k_max);
        for g in &games {
            mean = mean.map2(&g.curves, |m, x| m + x / n);
        }
        let mut var = Curves::zeros(k_max);
        for g in &games {
            let d = g.curves.map2(&mean, |x, m| (x - m) * (x - m) / n);
            var = var.map2(&d, |v, x| v + x);
        }
        let std = var.map2(&var, |v, _| v.sqrt());
        Ok(Self { k_max, games, mean, std })
    }

    pub fn game(&self, name: &str) -> Option<&GameCurves> {
        self.games.iter().find(|g| g.game == name)
    }

    /// Columns `game,k,prec_a,rec_a,rec_g`; one row per game and k.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("game,k,prec_a,rec_a,rec_g\n");
        for g in &self.games {
            push_rows(&mut out, &[&g.game], &g.curves);
        }
        out
    }

    /// Columns `stat,k,prec_a,rec_a,rec_g`; `mean` rows then `std` rows.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("stat,k,prec_a,rec_a,rec_g\n");
        push_rows(&mut out, &["mean"], &self.mean);
        push_rows(&mut out, &["std"], &self.std);
        out
    }
}

/// Evaluates every `(game, trajectory)` pair and aggregates.
pub fn evaluate_suite(
    model: &dyn ActionModel,
    trajectories: &[(String, Vec<TrajectoryStep>)],
    k_max: usize,
) -> Result<MetricCurves, EvalError> {
    let games = trajectories
        .iter()
        .map(|(g, t)| evaluate(model, g, t, k_max))
        .collect::<Result<Vec<_>, _>>()?;
    MetricCurves::from_games(games)
}

fn push_rows(out: &mut String, keys: &[&str], c: &Curves) {
    for k in 0..c.k_max() {
        for key in keys {
            let _ = write!(out, "{key},");
        }
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", k + 1, c.prec_a[k], c.rec_a[k], c.rec_g[k]);
    }
}

pub fn normalized_score(raw: f64, max_score: f64) -> Result<f64, EvalError> {
    if !(max_score > 0.0) {
        return Err(EvalError::NonPositiveMax(max_score));
    }
    Ok(raw / max_score)
}

/// Unweighted mean of per-game normalized scores.
pub fn average_normalized(scores: &[(f64, f64)]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::NoGames);
    }
    let mut total = 0.0;
    for &(raw, max) in scores {
        total += normalized_score(raw, max)?;
    }
    Ok(total / scores.len() as f64)
}

/// Curves of several labelled models side by side, plus each model's
/// difference from the first.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub curves: Vec<MetricCurves>,
    /// `deltas[i-1]` is model `i` minus model 0, per game and for the mean.
    pub deltas: Vec<Vec<(String, Curves)>>,
}

pub fn compare_report(curves: &[MetricCurves], labels: &[&str]) -> Result<Comparison, EvalError> {
    if curves.len() != labels.len() || curves.is_empty() {
        return Err(EvalError::LabelMismatch {
            labels: labels.len(),
            curves: curves.len(),
        });
    }
    let base = &curves[0];
    let names: Vec<&str> = base.games.iter().map(|g| g.game.as_str()).collect();
    let mut deltas = Vec::new();
    for other in &curves[1..] {
        if other.k_max != base.k_max {
            return Err(EvalError::Incompatible("k_max".into()));
        }
        if other.games.iter().map(|g| g.game.as_str()).collect::<Vec<_>>() != names {
            return Err(EvalError::Incompatible("games".into()));
        }
        let mut rows: Vec<(String, Curves)> = base
            .games
            .iter()
            .zip(&other.games)
            .map(|(a, b)| (a.game.clone(), b.curves.map2(&a.curves, |x, y| x - y)))
            .collect();
        rows.push(("mean".into(), other.mean.map2(&base.mean, |x, y| x - y)));
        deltas.push(rows);
    }
    Ok(Comparison {
        labels: labels.iter().map(|s| s.to_string()).collect(),
        curves: curves.to_vec(),
        deltas,
    })
}

impl Comparison {
    /// Columns `model,game,k,prec_a,rec_a,rec_g`. Cross-game means use game
    /// `mean`; differences use model `<label>-<first label>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,game,k,prec_a,rec_a,rec_g\n");
        for (label, c) in self.labels.iter().zip(&self.curves) {
            for g in &c.games {
                push_rows(&mut out, &[label, &g.game], &g.curves);
            }
            push_rows(&mut out, &[label, "mean"], &c.mean);
        }
        for (label, rows) in self.labels[1..].iter().zip(&self.deltas) {
            let name = format!("{label}-{}", self.labels[0]);
            for (game, c) in rows {
                push_rows(&mut out, &[&name, game], c);
            }
        }
        out
    }
}

/// Final scores of several variants on several games, laid out one game per
/// row with an `avg. norm` row at the bottom.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub variants: Vec<String>,
    /// game -> (max score, score per variant)
    pub rows: BTreeMap<String, (f64, Vec<f64>)>,
}

impl ScoreTable {
    pub fn new(variants: Vec<String>) -> Self {
        Self {
            variants,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, game: &str, max_score: f64, scores: Vec<f64>) -> Result<(), EvalError> {
        if scores.len() != self.variants.len() {
            return Err(EvalError::LabelMismatch {
                labels: self.variants.len(),
                curves: scores.len(),
            });
        }
        normalized_score(0.0, max_score)?;
        self.rows.insert(game.to_string(), (max_score, scores));
        Ok(())
    }

    /// Average normalized score of each variant.
    pub fn avg_norm(&self) -> Result<Vec<f64>, EvalError> {
        (0..self.variants.len())
            .map(|v| {
                let pairs: Vec<(f64, f64)> = self.rows.values().map(|(max, s)| (s[v], *max)).collect();
                average_normalized(&pairs)
            })
            .collect()
    }

    /// Per-game normalized score of variant `b` minus variant `a`.
    pub fn norm_deltas(&self, a: usize, b: usize) -> Vec<(String, f64)> {
        self.rows
            .iter()
            .map(|(g, (max, s))| (g.clone(), (s[b] - s[a]) / max))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut out = format!("game,max_score,{}\n", self.variants.join(","));
        for (game, (max, scores)) in &self.rows {
            let cells: Vec<String> = scores.iter().map(|s| format!("{s:.3}")).collect();
            let _ = writeln!(out, "{game},{max},{}", cells.join(","));
        }
        let avg: Vec<String> = self.avg_norm()?.iter().map(|a| format!("{:.4}", a)).collect();
        let _ = writeln!(out, "avg. norm,,{}", avg.join(","));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detective_normalization() {
        let r = normalized_score(289.7, 360.0).unwrap();
        assert!((r - 0.8047).abs() < 5e-5);
        assert_eq!(normalized_score(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(normalized_score(1.0, 0.0), Err(EvalError::NonPositiveMax(0.0)));
        assert_eq!(normalized_score(1.0, -2.0), Err(EvalError::NonPositiveMax(-2.0)));
    }

    #[test]
    fn std_of_one_game_is_zero() {
        let g = GameCurves {
            game: "a".into(),
            steps: 1,
            empty_admissible: 0,
            underfull: vec![0],
            curves: Curves {
                prec_a: vec![0.5],
                rec_a: vec![0.25],
                rec_g: vec![1.0],
            },
        };
        let m = MetricCurves::from_games(vec![g.clone()]).unwrap();
        assert_eq!(m.mean, g.curves);
        assert_eq!(m.std, Curves::zeros(1));
        assert_eq!(MetricCurves::from_games(vec![]), Err(EvalError::NoGames));
    }
}
