//! Experiment presets: every (cell, game, seed) combination trained and
//! summarised into per-game and per-cell score tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use calm_core::drrn::{train, AgentConfig, FilterMode, Policy, ResponseClassifier, TrainingReport};
use calm_core::eval::ScoreTable;
use calm_core::synth::{synthesize, SynthConfig};
use calm_core::VERSION;
use serde::{Deserialize, Serialize};

use crate::lm::{build_lm, load_corpus, load_games, sibling_classifier, CorpusSettings, Lm, LmSettings, Variant};
use crate::output::{write_table, Format};

/// One column of the ablation grid; unset fields take the experiment's.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellOverrides {
    pub name: String,
    pub variant: Option<Variant>,
    pub fraction: Option<f64>,
    pub k: Option<usize>,
    pub include_eval_games: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bundled game ids or `.game` paths; the whole bundled suite when empty.
    pub games: Vec<String>,
    pub variant: Variant,
    /// Share of transcripts the language model is trained on.
    pub fraction: f64,
    pub k: usize,
    pub include_eval_games: bool,
    pub seeds: Vec<u64>,
    pub output: String,
    pub format: Format,
    pub corpus: CorpusSettings,
    pub lm: LmSettings,
    pub agent: AgentConfig,
    /// Extra columns; the base settings alone form one column when empty.
    pub ablation: Vec<CellOverrides>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            games: Vec::new(),
            variant: Variant::Ngram,
            fraction: 1.0,
            k: 30,
            include_eval_games: false,
            seeds: vec![0],
            output: "results".into(),
            format: Format::Csv,
            corpus: CorpusSettings::default(),
            lm: LmSettings::default(),
            agent: AgentConfig {
                total_steps: 5000,
                batch_size: 32,
                update_every: 2,
                filter: FilterMode::Textual,
                ..AgentConfig::default()
            },
            ablation: Vec::new(),
        }
    }
}

/// A fully resolved column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub variant: Variant,
    pub fraction: f64,
    pub k: usize,
    pub include_eval_games: bool,
}

impl ExperimentConfig {
    /// Parses a TOML file laid over the defaults, table by table, so a
    /// partial `[agent]` section keeps the other agent defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text)?;
        let mut merged = toml::Table::try_from(Self::default())?;
        merge(&mut merged, user);
        Ok(merged.try_into()?)
    }

    pub fn game_ids(&self) -> Vec<String> {
        if self.games.is_empty() {
            calm_core::suite::BUNDLED.iter().map(|(id, _)| id.to_string()).collect()
        } else {
            self.games.clone()
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        let base = Cell {
            name: self.variant.name().to_string(),
            variant: self.variant,
            fraction: self.fraction,
            k: self.k,
            include_eval_games: self.include_eval_games,
        };
        if self.ablation.is_empty() {
            return vec![base];
        }
        self.ablation
            .iter()
            .map(|o| {
                let variant = o.variant.unwrap_or(base.variant);
                Cell {
                    name: if o.name.is_empty() { variant.name().to_string() } else { o.name.clone() },
                    variant,
                    fraction: o.fraction.unwrap_or(base.fraction),
                    k: o.k.unwrap_or(base.k),
                    include_eval_games: o.include_eval_games.unwrap_or(base.include_eval_games),
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("seeds must not be empty");
        }
        let cells = self.cells();
        let mut names: Vec<&str> = cells.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != cells.len() {
            bail!("ablation names must be distinct");
        }
        for c in &cells {
            if !(c.fraction > 0.0 && c.fraction <= 1.0) {
                bail!("cell `{}`: fraction must lie in (0, 1]", c.name);
            }
            if c.name.contains(['/', ',', '\\']) {
                bail!("cell `{}`: names may not contain `/`, `\\` or `,`", c.name);
            }
        }
        AgentConfig { k: 1, ..self.agent.clone() }.validate()?;
        for c in &cells {
            AgentConfig { k: c.k, ..self.agent.clone() }.validate()?;
        }
        load_games(&self.game_ids())?;
        if let Some(path) = &self.corpus.examples {
            if !Path::new(path).exists() {
                bail!("corpus file {path} does not exist");
            }
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub cell: String,
    pub game: String,
    pub seed: u64,
    pub ok: bool,
    /// Report path relative to the output directory.
    pub report: Option<String>,
    pub error: Option<String>,
    pub final_avg_100: Option<f64>,
    pub max_seen: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunEntry>,
}

/// One row per cell: average normalized final and best-seen scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub avg_norm: f64,
    pub max_seen_avg_norm: f64,
    pub runs_ok: usize,
    pub runs_failed: usize,
}

pub struct ExperimentResult {
    pub manifest: Manifest,
    /// Mean final score per game, one column per cell.
    pub scores: ScoreTable,
    /// Mean best-seen score per game, one column per cell.
    pub max_seen: ScoreTable,
    pub cells: Vec<CellSummary>,
    pub reports: Vec<TrainingReport>,
}

impl ExperimentResult {
    pub fn failed(&self) -> usize {
        self.manifest.runs.iter().filter(|r| !r.ok).count()
    }

    pub fn cell(&self, name: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell.name == name)
    }

    /// Mean final score of `cell` on `game` over its successful seeds.
    pub fn score(&self, cell: &str, game: &str) -> Option<f64> {
        let v = self.scores.variants.iter().position(|c| c == cell)?;
        self.scores.rows.get(game).map(|(_, s)| s[v])
    }
}

/// Language models are shared by every cell that needs the same one.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct LmKey {
    kind: u8,
    fraction: u64,
    include: bool,
}

fn lm_key(c: &Cell) -> LmKey {
    let kind = match c.variant {
        Variant::Ngram | Variant::RandomAgent => 0,
        Variant::Neural => 1,
        Variant::NeuralNoPretrain => 2,
        Variant::Admissible => 3,
    };
    LmKey {
        kind,
        fraction: c.fraction.to_bits(),
        include: c.include_eval_games,
    }
}

/// Trains and summarises every cell. Failed runs are recorded in the
/// manifest and left out of the averages; everything is written under
/// `config.output` when `write` is set.
pub fn run_experiment(config: &ExperimentConfig, write: bool, mut log: impl FnMut(&str)) -> Result<ExperimentResult> {
    config.validate()?;
    let ids = config.game_ids();
    let games = load_games(&ids)?;
    let names: Vec<String> = games.iter().map(|(n, _)| n.clone()).collect();
    let cells = config.cells();
    let out_dir = PathBuf::from(&config.output);
    if write {
        std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    }

    let classifier: Option<ResponseClassifier> = if config.agent.filter == FilterMode::Textual {
        let out = synthesize(&SynthConfig {
            seed: config.corpus.synth_seed,
            games: config.lm.classifier_games,
            transcripts_per_game: 0,
            ..SynthConfig::default()
        })?;
        Some(sibling_classifier(&out.games, config.lm.classifier_games, config.corpus.synth_seed)?)
    } else {
        None
    };

    let mut lms: BTreeMap<LmKey, Lm> = BTreeMap::new();
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    let mut finals: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut bests: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();

    for cell in &cells {
        let key = lm_key(cell);
        if !lms.contains_key(&key) {
            log(&format!("training {} language model for cell {}", cell.variant, cell.name));
            let corpus = load_corpus(&config.corpus, cell.fraction, cell.include_eval_games, &names)?;
            let lm = build_lm(cell.variant, &corpus, &config.lm, &mut log)?;
            lms.insert(key, lm);
        }
        let lm = &lms[&key];
        if write {
            std::fs::create_dir_all(out_dir.join(&cell.name))?;
        }
        for (game, spec) in &games {
            let game_lm = lm.for_game(spec);
            for &seed in &config.seeds {
                let agent = AgentConfig {
                    k: cell.k,
                    seed,
                    policy: if cell.variant == Variant::RandomAgent { Policy::Random } else { Policy::Learned },
                    ..config.agent.clone()
                };
                let result = train(&agent, spec, game, game_lm.source(), classifier.as_ref());
                let mut entry = RunEntry {
                    cell: cell.name.clone(),
                    game: game.clone(),
                    seed,
                    ok: false,
                    report: None,
                    error: None,
                    final_avg_100: None,
                    max_seen: None,
                };
                match result {
                    Ok((report, _)) => {
                        log(&format!(
                            "{} {} seed {}: final {:.3} max seen {:.3}",
                            cell.name, game, seed, report.summary.final_avg_100, report.summary.max_seen
                        ));
                        entry.ok = true;
                        entry.final_avg_100 = Some(report.summary.final_avg_100);
                        entry.max_seen = Some(report.summary.max_seen);
                        let k = (cell.name.clone(), game.clone());
                        finals.entry(k.clone()).or_default().push(report.summary.final_avg_100);
                        bests.entry(k).or_default().push(report.summary.max_seen);
                        if write {
                            let rel = format!("{}/{}-seed{}.{}", cell.name, game, seed, config.format.extension());
                            crate::output::write_report(&out_dir.join(&rel), &report, config.format)?;
                            entry.report = Some(rel);
                        }
                        reports.push(report);
                    }
                    Err(e) => {
                        log(&format!("{} {} seed {}: failed: {e}", cell.name, game, seed));
                        entry.error = Some(e.to_string());
                    }
                }
                runs.push(entry);
            }
        }
    }

    let labels: Vec<String> = cells.iter().map(|c| c.name.clone()).collect();
    let mut scores = ScoreTable::new(labels.clone());
    let mut max_seen = ScoreTable::new(labels);
    let mean = |m: &BTreeMap<(String, String), Vec<f64>>, c: &str, g: &str| {
        m.get(&(c.to_string(), g.to_string()))
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .unwrap_or(0.0)
    };
    for (game, spec) in &games {
        let f: Vec<f64> = cells.iter().map(|c| mean(&finals, &c.name, game)).collect();
        let b: Vec<f64> = cells.iter().map(|c| mean(&bests, &c.name, game)).collect();
        scores.insert(game, spec.max_score, f)?;
        max_seen.insert(game, spec.max_score, b)?;
    }
    let avg = scores.avg_norm()?;
    let avg_best = max_seen.avg_norm()?;
    let summaries: Vec<CellSummary> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| CellSummary {
            cell: c.clone(),
            avg_norm: avg[i],
            max_seen_avg_norm: avg_best[i],
            runs_ok: runs.iter().filter(|r: &&RunEntry| r.cell == c.name && r.ok).count(),
            runs_failed: runs.iter().filter(|r: &&RunEntry| r.cell == c.name && !r.ok).count(),
        })
        .collect();

    let manifest = Manifest {
        version: VERSION.to_string(),
        config: config.clone(),
        runs,
    };
    let result = ExperimentResult {
        manifest,
        scores,
        max_seen,
        cells: summaries,
        reports,
    };
    if write {
        write_outputs(&out_dir, config, &result)?;
    }
    Ok(result)
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, r: &ExperimentResult) -> Result<()> {
    let echo = serde_json::to_value(config)?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&r.manifest)? + "\n")?;
    let ext = config.format.extension();
    write_table(&dir.join(format!("scores.{ext}")), &r.scores.to_csv()?, &echo, config.format)?;
    write_table(&dir.join(format!("max_seen.{ext}")), &r.max_seen.to_csv()?, &echo, config.format)?;
    let mut ablation = String::from("cell,variant,fraction,k,include_eval_games,avg_norm,max_seen_avg_norm,runs_ok,runs_failed\n");
    for s in &r.cells {
        let c = &s.cell;
        let _ = writeln!(
            ablation,
            "{},{},{},{},{},{:.4},{:.4},{},{}",
            c.name, c.variant, c.fraction, c.k, c.include_eval_games, s.avg_norm, s.max_seen_avg_norm, s.runs_ok, s.runs_failed
        );
    }
    write_table(&dir.join(format!("ablation.{ext}")), &ablation, &echo, config.format)?;
    Ok(())
}
