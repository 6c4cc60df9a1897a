use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context as _, Result};
use calm_cli::experiment::{run_experiment, ExperimentConfig};
use calm_cli::lm::{
    fit_neural, fit_ngram, game_name, load_corpus, load_games, read_examples, sibling_classifier, CorpusSettings, Lm,
    LmSettings,
};
use calm_cli::output::{render_report, render_table, write_report, Format};
use calm_core::corpus::{build_examples, clean_transcript, split, write_jsonl, BuildStats, CleanOptions, Limits};
use calm_core::drrn::{play, train, AgentConfig, FilterMode, Policy, QNetwork, ResponseClassifier};
use calm_core::eval::evaluate_suite;
use calm_core::game::GameSpec;
use calm_core::ngram::{tune, NgramModel};
use calm_core::synth::{synthesize, SynthConfig};
use calm_core::text::{Context, PAD_ACTION, PAD_OBSERVATION};
use calm_core::VERSION;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "calm", version, about = "Contextual action language models and agents for text games")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded, interleaved actors; reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(long, global = true, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Generate games and noisy play logs in the raw transcript format.
    SynthTranscripts(SynthArgs),
    /// Clean raw logs into train/validation example files.
    BuildCorpus(CorpusArgs),
    /// Fit an n-gram action model.
    TrainNgram(NgramArgs),
    /// Train the neural action model.
    TrainLm(LmArgs),
    /// Print candidate actions for one context.
    Generate(GenerateArgs),
    /// Train a DRRN agent on one game.
    TrainRl(RlArgs),
    /// Precision/recall curves of a generator along walkthroughs.
    EvalWalkthrough(EvalArgs),
    /// Play one episode and print the transcript.
    Play(PlayArgs),
    /// Run an experiment grid from a TOML file.
    RunExperiment(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 120)]
    games: usize,
    #[arg(long, default_value_t = 2)]
    transcripts_per_game: usize,
    /// Bundled games to add noisy plays of.
    #[arg(long, value_delimiter = ',')]
    suite_games: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Also write each generated game as `<id>.game` here.
    #[arg(long)]
    games_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CorpusArgs {
    /// Raw transcript logs.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    exclude_games: Vec<String>,
    #[arg(long, default_value_t = 0.9)]
    train_frac: f64,
    #[arg(long, default_value_t = 256)]
    max_obs_tokens: usize,
    #[arg(long, default_value_t = 7)]
    max_action_tokens: usize,
    #[arg(long, default_value_t = '>')]
    prompt: char,
}

#[derive(Args)]
struct NgramArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Pick n and alpha by validation perplexity over a small grid.
    #[arg(long, requires = "val")]
    tune: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LmArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    embed: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 3e-3)]
    lr: f64,
    /// Skip the pretraining phase on generic prose.
    #[arg(long)]
    no_pretrain: bool,
    #[arg(long, default_value_t = 40)]
    pretrain_games: usize,
}

/// `admissible`, `ngram:PATH`, `neural:DIR`, or `synth` for an n-gram model
/// fitted on synthetic transcripts that leave out the evaluated games.
#[derive(Args, Clone)]
struct LmChoice {
    #[arg(long, default_value = "synth")]
    lm: String,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    lm: LmChoice,
    /// Game whose object names the n-gram model may use.
    #[arg(long)]
    game: Option<String>,
    #[arg(long)]
    observation: String,
    #[arg(long, default_value = PAD_OBSERVATION)]
    prev_observation: String,
    #[arg(long, default_value = PAD_ACTION)]
    prev_action: String,
    #[arg(long, default_value_t = 30)]
    k: usize,
}

#[derive(Args, Clone)]
struct AgentArgs {
    #[command(flatten)]
    lm: LmChoice,
    #[arg(long, default_value = "lockbox")]
    game: String,
    /// TOML file with agent settings; flags below override it.
    #[arg(long)]
    agent_config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    filter: Option<FilterMode>,
    #[arg(long)]
    actors: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    update_every: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Choose uniformly among candidates instead of learning.
    #[arg(long)]
    random_agent: bool,
}

#[derive(Args)]
struct RlArgs {
    #[command(flatten)]
    agent: AgentArgs,
    /// Report file; stdout when unset.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    save_net: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    lm: LmChoice,
    /// Bundled ids or `.game` paths; the bundled suite when empty.
    #[arg(long, value_delimiter = ',')]
    games: Vec<String>,
    #[arg(long, default_value_t = 40)]
    k_max: usize,
    /// Writes curves and summary here; the summary goes to stdout otherwise.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    agent: AgentArgs,
    /// Q-network checkpoint from `train-rl --save-net`; random choice when unset.
    #[arg(long = "agent")]
    net: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
}

/// Marks errors caused by bad input rather than a failed run.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow!(ConfigError(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = cli.global;
    match cli.command {
        Command::SynthTranscripts(a) => synth_transcripts(&g, a)?,
        Command::BuildCorpus(a) => build_corpus(a)?,
        Command::TrainNgram(a) => train_ngram(a)?,
        Command::TrainLm(a) => train_lm(&g, a)?,
        Command::Generate(a) => generate(a)?,
        Command::TrainRl(a) => train_rl(&g, a)?,
        Command::EvalWalkthrough(a) => eval_walkthrough(&g, a)?,
        Command::Play(a) => play_episode(&g, a)?,
        Command::RunExperiment(a) => return experiment(&g, a),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn synth_transcripts(g: &Global, a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: g.seed.unwrap_or(1),
        games: a.games,
        transcripts_per_game: a.transcripts_per_game,
        suite_games: a.suite_games,
        ..SynthConfig::default()
    };
    let out = synthesize(&cfg).map_err(config_error)?;
    std::fs::write(&a.out, &out.raw).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(dir) = &a.games_dir {
        std::fs::create_dir_all(dir)?;
        for (id, src) in &out.games {
            std::fs::write(dir.join(format!("{id}.game")), src)?;
        }
    }
    log(&format!("{} games, {} bytes of transcripts", out.games.len(), out.raw.len()));
    write_json(
        &a.out.with_extension("meta.json"),
        &json!({ "version": VERSION, "config": cfg, "games": out.games.iter().map(|(id, _)| id).collect::<Vec<_>>() }),
    )
}

fn build_corpus(a: CorpusArgs) -> Result<()> {
    let limits = Limits {
        max_context_tokens: a.max_obs_tokens,
        max_action_tokens: a.max_action_tokens,
    };
    let mut examples = Vec::new();
    let mut stats = BuildStats::default();
    let mut transcripts = 0;
    for path in &a.input {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cleaned = clean_transcript(&raw, CleanOptions { prompt: a.prompt }).map_err(config_error)?;
        transcripts += cleaned.len();
        for t in &cleaned {
            let (ex, s) = build_examples(t, limits);
            examples.extend(ex);
            stats.merge(s);
        }
    }
    let (train, val) = split(&examples, a.train_frac, &a.exclude_games).map_err(config_error)?;
    std::fs::create_dir_all(&a.out_dir)?;
    write_jsonl(std::io::BufWriter::new(std::fs::File::create(a.out_dir.join("train.jsonl"))?), &train)?;
    write_jsonl(std::io::BufWriter::new(std::fs::File::create(a.out_dir.join("val.jsonl"))?), &val)?;
    log(&format!("{} transcripts, {} train / {} validation examples", transcripts, train.len(), val.len()));
    write_json(
        &a.out_dir.join("stats.json"),
        &json!({
            "version": VERSION,
            "config": {
                "input": a.input, "exclude_games": a.exclude_games, "train_frac": a.train_frac,
                "max_obs_tokens": a.max_obs_tokens, "max_action_tokens": a.max_action_tokens, "prompt": a.prompt.to_string(),
            },
            "transcripts": transcripts, "train": train.len(), "val": val.len(), "stats": stats,
        }),
    )
}

fn actions(path: &Path) -> Result<Vec<String>> {
    Ok(read_examples(path)?.into_iter().map(|e| e.action).collect())
}

fn train_ngram(a: NgramArgs) -> Result<()> {
    let train = actions(&a.train)?;
    let val = match &a.val {
        Some(p) => actions(p)?,
        None => Vec::new(),
    };
    let (n, alpha) = if a.tune {
        let r = tune(&train, &val, &[1, 2, 3, 4], &[0.001, 0.01, 0.1, 1.0]).map_err(config_error)?;
        (r.n, r.alpha)
    } else {
        (a.n, a.alpha)
    };
    let model = NgramModel::fit(&train, n, alpha).map_err(config_error)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&a.out)?);
    model.save(&mut w)?;
    w.flush()?;
    let ppl = if val.is_empty() { None } else { Some(model.perplexity(&val)?) };
    let report = json!({
        "version": VERSION,
        "config": { "train": a.train, "val": a.val, "n": n, "alpha": alpha, "tune": a.tune },
        "vocab": model.vocab_size(), "val_perplexity": ppl,
    });
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn train_lm(g: &Global, a: LmArgs) -> Result<()> {
    let train = read_examples(&a.train)?;
    let val = match &a.val {
        Some(p) => read_examples(p)?,
        None => Vec::new(),
    };
    let mut settings = LmSettings::default();
    settings.neural.embed = a.embed;
    settings.neural.hidden = a.hidden;
    settings.neural.layers = a.layers;
    settings.neural.epochs = a.epochs;
    settings.neural.learning_rate = a.lr;
    settings.neural.seed = g.seed.unwrap_or(0);
    settings.pretrain_games = a.pretrain_games;
    if train.is_empty() {
        return Err(config_error("training file has no examples"));
    }
    let mut lines = Vec::new();
    let model = fit_neural(&train, &val, &settings, !a.no_pretrain, |m| {
        log(m);
        lines.push(m.to_string());
    })?;
    model.save(&a.out)?;
    write_json(
        &a.out.join("report.json"),
        &json!({
            "version": VERSION,
            "config": { "train": a.train, "val": a.val, "pretrain": !a.no_pretrain, "lm": settings },
            "params": model.num_params(), "vocab": model.vocab().len(), "log": lines,
        }),
    )
}

/// Resolves `--lm`; `synth` fits an n-gram model on synthetic transcripts
/// with `exclude` left out.
fn resolve_lm(choice: &str, exclude: &[String]) -> Result<Lm> {
    if choice == "synth" {
        let corpus = load_corpus(&CorpusSettings::default(), 1.0, false, exclude)?;
        let s = LmSettings::default();
        return Ok(Lm::Ngram(Arc::new(fit_ngram(&corpus.examples, s.ngram_n, s.ngram_alpha)?)));
    }
    Lm::load(choice).map_err(config_error)
}

fn one_game(id: &str) -> Result<(String, GameSpec)> {
    let mut games = load_games(&[id.to_string()]).map_err(config_error)?;
    Ok(games.remove(0))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let exclude: Vec<String> = a.game.iter().map(|g| game_name(g)).collect();
    let lm = resolve_lm(&a.lm.lm, &exclude)?;
    let spec = match &a.game {
        Some(id) => Some(one_game(id)?.1),
        None => None,
    };
    let context = Context::new(a.prev_observation, a.prev_action, a.observation);
    let cands = match (&lm, &spec) {
        (Lm::Admissible, _) => bail!(ConfigError("`admissible` needs a game state; use play instead".into())),
        (_, Some(spec)) => lm.for_game(spec).model().map(|m| m.generate(&context, a.k)).unwrap_or_default(),
        (Lm::Ngram(m), None) => m.generate(&context, a.k),
        (Lm::Neural(m), None) => calm_core::model::ActionModel::generate(&**m, &context, a.k),
    };
    for c in cands {
        println!("{c}");
    }
    Ok(())
}

fn agent_config(g: &Global, a: &AgentArgs) -> Result<AgentConfig> {
    let mut cfg = match &a.agent_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).map_err(config_error)?
        }
        None => AgentConfig {
            total_steps: 5000,
            batch_size: 32,
            update_every: 2,
            filter: FilterMode::Textual,
            ..AgentConfig::default()
        },
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    cfg.deterministic |= g.deterministic;
    macro_rules! set {
        ($($field:ident = $flag:ident),*) => {$( if let Some(v) = a.$flag { cfg.$field = v; } )*};
    }
    set!(total_steps = steps, k = k, filter = filter, actors = actors, batch_size = batch_size,
        update_every = update_every, gamma = gamma, learning_rate = lr, temperature = temperature);
    if a.random_agent {
        cfg.policy = Policy::Random;
    }
    cfg.validate().map_err(config_error)?;
    Ok(cfg)
}

/// Classifier for the textual filter, trained on generated games only.
fn classifier_for(cfg: &AgentConfig) -> Result<Option<ResponseClassifier>> {
    if cfg.filter != FilterMode::Textual {
        return Ok(None);
    }
    let s = LmSettings::default();
    let seed = CorpusSettings::default().synth_seed;
    let out = synthesize(&SynthConfig {
        seed,
        games: s.classifier_games,
        transcripts_per_game: 0,
        ..SynthConfig::default()
    })?;
    Ok(Some(sibling_classifier(&out.games, s.classifier_games, seed)?))
}

fn train_rl(g: &Global, a: RlArgs) -> Result<()> {
    let cfg = agent_config(g, &a.agent)?;
    let (game, spec) = one_game(&a.agent.game)?;
    let lm = resolve_lm(&a.agent.lm.lm, &[game.clone()])?;
    let classifier = classifier_for(&cfg)?;
    let game_lm = lm.for_game(&spec);
    let (report, net) = train(&cfg, &spec, &game, game_lm.source(), classifier.as_ref())?;
    match &a.out {
        Some(p) => write_report(p, &report, g.format)?,
        None => print!("{}", render_report(&report, g.format)?),
    }
    if let Some(p) = &a.save_net {
        let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
        net.save(&mut w)?;
        w.flush()?;
    }
    let s = &report.summary;
    log(&format!(
        "{game}: {} episodes, final avg {:.3}, max seen {:.3} of {}",
        s.episodes, s.final_avg_100, s.max_seen, report.max_score
    ));
    Ok(())
}

fn eval_walkthrough(g: &Global, a: EvalArgs) -> Result<()> {
    let ids = if a.games.is_empty() {
        calm_core::suite::BUNDLED.iter().map(|(id, _)| id.to_string()).collect()
    } else {
        a.games.clone()
    };
    let games = load_games(&ids).map_err(config_error)?;
    let names: Vec<String> = games.iter().map(|(n, _)| n.clone()).collect();
    let lm = resolve_lm(&a.lm.lm, &names)?;
    let mut games_curves = Vec::new();
    for (name, spec) in &games {
        let traj = spec.walkthrough_trajectory()?;
        let game_lm = lm.for_game(spec);
        let model = game_lm
            .model()
            .ok_or_else(|| config_error("walkthrough evaluation needs a language model"))?;
        let one = evaluate_suite(model, &[(name.clone(), traj)], a.k_max).map_err(config_error)?;
        games_curves.extend(one.games);
    }
    let curves = calm_core::eval::MetricCurves::from_games(games_curves)?;
    let echo = json!({ "lm": a.lm.lm, "games": ids, "k_max": a.k_max });
    let summary = render_table(&curves.summary_csv(), &echo, g.format);
    match &a.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let ext = g.format.extension();
            std::fs::write(dir.join(format!("curves.{ext}")), render_table(&curves.curves_csv(), &echo, g.format))?;
            std::fs::write(dir.join(format!("summary.{ext}")), summary)?;
        }
        None => print!("{summary}"),
    }
    for gc in &curves.games {
        let under = gc.underfull.last().copied().unwrap_or(0);
        if under > 0 {
            log(&format!("{}: {under} of {} steps had fewer than {} candidates", gc.game, gc.steps, a.k_max));
        }
    }
    Ok(())
}

fn play_episode(g: &Global, a: PlayArgs) -> Result<()> {
    let cfg = agent_config(g, &a.agent)?;
    let (game, spec) = one_game(&a.agent.game)?;
    let lm = resolve_lm(&a.agent.lm.lm, &[game])?;
    let net = match &a.net {
        Some(p) => {
            let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(QNetwork::load(std::io::BufReader::new(f)).map_err(config_error)?)
        }
        None => None,
    };
    let classifier = classifier_for(&cfg)?;
    let game_lm = lm.for_game(&spec);
    let (opening, steps) = play(net.as_ref(), &spec, game_lm.source(), &cfg, classifier.as_ref())?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{opening}")?;
    for s in &steps {
        writeln!(out, "\n> {}\n{}", s.action, s.observation)?;
        if s.reward != 0.0 {
            writeln!(out, "[reward {} | score {}]", s.reward, s.score)?;
        }
    }
    let score = steps.last().map_or(0.0, |s| s.score);
    writeln!(out, "\n[final score {score} of {}]", spec.max_score)?;
    Ok(())
}

fn experiment(g: &Global, a: ExperimentArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| config_error(format!("{}: {e}", a.config.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(config_error)?;
    if let Some(s) = g.seed {
        cfg.seeds = vec![s];
    }
    cfg.agent.deterministic |= g.deterministic;
    if g.format != Format::Csv {
        cfg.format = g.format;
    }
    if let Some(o) = a.output {
        cfg.output = o;
    }
    if let Some(s) = a.steps {
        cfg.agent.total_steps = s;
    }
    cfg.validate().map_err(config_error)?;
    let result = run_experiment(&cfg, true, log)?;
    for c in &result.cells {
        println!(
            "{}: avg norm {:.4}, max seen avg norm {:.4} ({} ok, {} failed)",
            c.cell.name, c.avg_norm, c.max_seen_avg_norm, c.runs_ok, c.runs_failed
        );
    }
    Ok(if result.failed() > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
