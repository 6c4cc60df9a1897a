//! Building the candidate generators the agents use: the synthetic corpus,
//! the n-gram and neural models, and the response classifier.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};
use calm_core::corpus::{build_examples, clean_transcript, read_jsonl, split, CleanOptions, Example, Limits};
use calm_core::drrn::{labeled_responses, ResponseClassifier, Source};
use calm_core::game::{load_game_spec, GameSpec};
use calm_core::model::ActionModel;
use calm_core::neural::{text_examples, NeuralCalm, NeuralConfig, Vocab};
use calm_core::ngram::{NgramCalm, NgramModel};
use calm_core::synth::{generic_text, synthesize, SynthConfig};
use calm_tensor::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Bigram model over harvested verbs and nouns.
    #[default]
    Ngram,
    /// GRU encoder-decoder, pretrained on generic prose first.
    Neural,
    /// GRU encoder-decoder trained on transcripts only.
    NeuralNoPretrain,
    /// Uniform choice among n-gram candidates; nothing is learned.
    RandomAgent,
    /// The engine's admissible set instead of a language model.
    Admissible,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ngram => "ngram",
            Self::Neural => "neural",
            Self::NeuralNoPretrain => "neural-no-pretrain",
            Self::RandomAgent => "random-agent",
            Self::Admissible => "admissible",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Ngram, Self::Neural, Self::NeuralNoPretrain, Self::RandomAgent, Self::Admissible]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (ngram, neural, neural-no-pretrain, random-agent, admissible)"))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the transcripts come from and how much of them to use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    /// Examples JSONL from `build-corpus`; synthesized in memory when unset.
    pub examples: Option<String>,
    pub synth_seed: u64,
    pub synth_games: usize,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        Self {
            examples: None,
            synth_seed: 1,
            synth_games: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmSettings {
    pub ngram_n: usize,
    pub ngram_alpha: f64,
    pub neural: NeuralConfig,
    /// Games of generic prose for the pretraining phase.
    pub pretrain_games: usize,
    pub pretrain_epochs: usize,
    /// Synthetic games whose responses train the textual filter.
    pub classifier_games: usize,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            ngram_n: 2,
            ngram_alpha: 0.01,
            neural: NeuralConfig {
                hidden: 32,
                layers: 1,
                ..NeuralConfig::default()
            },
            pretrain_games: 40,
            pretrain_epochs: 2,
            classifier_games: 20,
        }
    }
}

/// Transcript examples plus the generated games they came from.
pub struct Corpus {
    pub examples: Vec<Example>,
    pub games: Vec<(String, String)>,
}

/// Transcripts with the evaluated games removed, unless `include_eval_games`
/// asks for noisy plays of them to be added; then `fraction` of what is left,
/// picked by transcript.
pub fn load_corpus(
    settings: &CorpusSettings,
    fraction: f64,
    include_eval_games: bool,
    eval_games: &[String],
) -> Result<Corpus> {
    let mut examples = match &settings.examples {
        Some(path) => read_examples(Path::new(path))?,
        None => Vec::new(),
    };
    let synth_games = if settings.examples.is_some() { 0 } else { settings.synth_games };
    let suite_games = if include_eval_games {
        eval_games.to_vec()
    } else {
        Vec::new()
    };
    let out = synthesize(&SynthConfig {
        seed: settings.synth_seed,
        games: synth_games,
        suite_games,
        ..SynthConfig::default()
    })?;
    for t in clean_transcript(&out.raw, CleanOptions::default())? {
        examples.extend(build_examples(&t, Limits::default()).0);
    }
    if !include_eval_games {
        examples.retain(|e| !eval_games.contains(&e.game));
    }
    let examples = subsample(&examples, fraction, settings.synth_seed)?;
    Ok(Corpus {
        examples,
        games: out.games,
    })
}

pub fn read_examples(path: &Path) -> Result<Vec<Example>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_jsonl(std::io::BufReader::new(f))?)
}

/// Keeps `ceil(fraction · T)` of the `T` transcripts, picked by a seeded
/// shuffle, in their original order.
pub fn subsample(examples: &[Example], fraction: f64, seed: u64) -> Result<Vec<Example>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        bail!("data fraction must lie in (0, 1], got {fraction}");
    }
    if fraction == 1.0 {
        return Ok(examples.to_vec());
    }
    let mut sources: Vec<&str> = Vec::new();
    for e in examples {
        if sources.last() != Some(&e.source.as_str()) && !sources.contains(&e.source.as_str()) {
            sources.push(&e.source);
        }
    }
    let keep = (fraction * sources.len() as f64).ceil() as usize;
    Rng::derive(seed, 0x6672_6163).shuffle(&mut sources);
    sources.truncate(keep);
    Ok(examples.iter().filter(|e| sources.contains(&e.source.as_str())).cloned().collect())
}

pub fn fit_ngram(examples: &[Example], n: usize, alpha: f64) -> Result<NgramModel> {
    let actions: Vec<&str> = examples.iter().map(|e| e.action.as_str()).collect();
    Ok(NgramModel::fit(&actions, n, alpha)?)
}

/// Trains a neural model on `train`, after a pretraining phase on generic
/// prose when `pretrain` is set. The vocabulary covers both.
pub fn fit_neural(
    train: &[Example],
    val: &[Example],
    settings: &LmSettings,
    pretrain: bool,
    mut log: impl FnMut(&str),
) -> Result<NeuralCalm> {
    let cfg = settings.neural.clone();
    let prose = if pretrain {
        text_examples(&generic_text(cfg.seed ^ 0x5052, settings.pretrain_games), cfg.max_action)
    } else {
        Vec::new()
    };
    let all: Vec<Example> = train.iter().chain(&prose).cloned().collect();
    let vocab = Vocab::from_examples(&all, cfg.min_count, cfg.max_vocab);
    let mut model = NeuralCalm::new(cfg, vocab);
    if !prose.is_empty() {
        model.fit_epochs(&prose, &[], settings.pretrain_epochs, |s| {
            log(&format!("pretrain epoch {} loss {:.4}", s.epoch, s.train_loss))
        })?;
    }
    model.fit_with(train, val, |s| match s.val_loss {
        Some(v) => log(&format!("epoch {} train {:.4} val {:.4}", s.epoch, s.train_loss, v)),
        None => log(&format!("epoch {} train {:.4}", s.epoch, s.train_loss)),
    })?;
    Ok(model)
}

/// Labels responses from the first `n_games` generated games; none of them
/// is an evaluation game.
pub fn sibling_classifier(games: &[(String, String)], n_games: usize, seed: u64) -> Result<ResponseClassifier> {
    let mut rng = Rng::derive(seed, 0x636c_6173);
    let mut samples = Vec::new();
    for (_, src) in games.iter().take(n_games) {
        samples.extend(labeled_responses(&load_game_spec(src)?, 300, &mut rng));
    }
    if samples.is_empty() {
        bail!("no generated games to train the response classifier on");
    }
    Ok(ResponseClassifier::fit(&samples, 10, 0.1, seed))
}

/// A trained candidate generator, shared across games.
#[derive(Clone)]
pub enum Lm {
    Ngram(Arc<NgramModel>),
    Neural(Arc<NeuralCalm>),
    Admissible,
}

/// The generator specialised to one game.
pub enum GameLm {
    Ngram(NgramCalm),
    Neural(Arc<NeuralCalm>),
    Admissible,
}

impl Lm {
    pub fn for_game(&self, spec: &GameSpec) -> GameLm {
        match self {
            Self::Ngram(m) => GameLm::Ngram(NgramCalm::new(m.clone()).with_object_names(spec.object_names())),
            Self::Neural(m) => GameLm::Neural(m.clone()),
            Self::Admissible => GameLm::Admissible,
        }
    }

    /// Reads `ngram:PATH`, `neural:DIR` or `admissible`.
    pub fn load(arg: &str) -> Result<Self> {
        match arg.split_once(':') {
            _ if arg == "admissible" => Ok(Self::Admissible),
            Some(("ngram", path)) => {
                let f = std::fs::File::open(path).with_context(|| format!("opening {path}"))?;
                Ok(Self::Ngram(Arc::new(NgramModel::load(std::io::BufReader::new(f))?)))
            }
            Some(("neural", dir)) => Ok(Self::Neural(Arc::new(NeuralCalm::load(Path::new(dir))?))),
            _ => bail!("expected `admissible`, `ngram:PATH` or `neural:DIR`, got `{arg}`"),
        }
    }
}

impl GameLm {
    pub fn source(&self) -> Source<'_> {
        match self {
            Self::Ngram(m) => Source::Model(m),
            Self::Neural(m) => Source::Model(&**m),
            Self::Admissible => Source::Admissible,
        }
    }

    pub fn model(&self) -> Option<&dyn ActionModel> {
        match self {
            Self::Ngram(m) => Some(m),
            Self::Neural(m) => Some(&**m),
            Self::Admissible => None,
        }
    }
}

/// Trains the generator a variant needs on `corpus`.
pub fn build_lm(variant: Variant, corpus: &Corpus, settings: &LmSettings, log: impl FnMut(&str)) -> Result<Lm> {
    Ok(match variant {
        Variant::Admissible => Lm::Admissible,
        Variant::Ngram | Variant::RandomAgent => {
            Lm::Ngram(Arc::new(fit_ngram(&corpus.examples, settings.ngram_n, settings.ngram_alpha)?))
        }
        Variant::Neural | Variant::NeuralNoPretrain => {
            let (train, val) = split(&corpus.examples, 0.9, &[])?;
            Lm::Neural(Arc::new(fit_neural(&train, &val, settings, variant == Variant::Neural, log)?))
        }
    })
}

/// Games by id, in the given order: bundled ids or paths to `.game` files.
pub fn load_games(ids: &[String]) -> Result<Vec<(String, GameSpec)>> {
    let mut out = Vec::new();
    for id in ids {
        let spec = if Path::new(id).extension().is_some_and(|e| e == "game") {
            calm_core::game::load_game_file(Path::new(id))?
        } else {
            calm_core::suite::load_bundled(id)?
        };
        out.push((game_name(id), spec));
    }
    Ok(out)
}

/// Id used in reports: the file stem for paths, the id otherwise.
pub fn game_name(id: &str) -> String {
    Path::new(id)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| id.to_string())
}
