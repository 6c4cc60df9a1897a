//! Actor and learner loops.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use calm_tensor::{Adam, AdamConfig, ParamStore, Rng};
use serde::{Deserialize, Serialize};

use super::filter::{filter_candidates, labeled_responses, FilterMode, ResponseClassifier};
use super::qnet::{td_update, QNetwork};
use super::{AgentConfig, DrrnError, Experience, Policy};
use crate::game::{GameSpec, WorldState};
use crate::model::ActionModel;
use crate::text::Context;

/// Played when the candidate source proposes nothing at all.
pub const FALLBACK_ACTION: &str = "look";

const CACHE_LIMIT: usize = 200_000;

/// Where candidate actions come from.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Model(&'a dyn ActionModel),
    /// The engine's admissible set (the handicap oracle), untruncated.
    Admissible,
}

impl Source<'_> {
    pub fn name(&self) -> String {
        match self {
            Source::Model(m) => m.name().to_string(),
            Source::Admissible => "admissible".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Mean score of the last 100 finished episodes (all of them if fewer).
    pub final_avg_100: f64,
    /// Best score reached during exploration, finished episode or not.
    pub max_seen: f64,
    pub final_avg_100_norm: f64,
    pub max_seen_norm: f64,
    pub episodes: usize,
    pub env_steps: usize,
    pub updates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub version: String,
    pub game: String,
    pub source: String,
    pub seed: u64,
    pub max_score: f64,
    pub config: AgentConfig,
    pub episodes: Vec<EpisodeRecord>,
    pub summary: Summary,
}

/// Memoizes `generate` per context; the model is a pure function of it.
struct Env<'a> {
    spec: &'a GameSpec,
    source: Source<'a>,
    config: &'a AgentConfig,
    classifier: Option<&'a ResponseClassifier>,
    cache: Mutex<HashMap<Context, Vec<String>>>,
}

impl Env<'_> {
    fn propose(&self, context: &Context, state: &WorldState) -> Vec<String> {
        let raw = match self.source {
            Source::Admissible => self.spec.admissible_actions(state).into_iter().collect(),
            Source::Model(m) => {
                let hit = self.cache.lock().expect("cache lock").get(context).cloned();
                match hit {
                    Some(c) => c,
                    None => {
                        let c = m.generate(context, self.config.k);
                        let mut cache = self.cache.lock().expect("cache lock");
                        if cache.len() >= CACHE_LIMIT {
                            cache.clear();
                        }
                        cache.insert(context.clone(), c.clone());
                        c
                    }
                }
            }
        };
        let mut kept = filter_candidates(&raw, self.config.filter, self.spec, state, self.classifier);
        if kept.is_empty() {
            kept.push(FALLBACK_ACTION.to_string());
        }
        kept
    }
}

struct EpisodeEnd {
    steps: usize,
    score: f64,
    trajectory: Vec<Experience>,
}

struct StepOut {
    exp: Experience,
    score: f64,
    end: Option<EpisodeEnd>,
}

struct Actor {
    rng: Rng,
    net: Arc<QNetwork>,
    state: WorldState,
    context: Context,
    obs: String,
    candidates: Vec<String>,
    steps: usize,
    trajectory: Vec<Experience>,
}

impl Actor {
    fn new(env: &Env, rng: Rng, net: Arc<QNetwork>) -> Self {
        let (state, obs) = env.spec.reset();
        let context = Context::initial(obs.clone());
        let candidates = env.propose(&context, &state);
        Self {
            rng,
            net,
            state,
            context,
            obs,
            candidates,
            steps: 0,
            trajectory: Vec::new(),
        }
    }

    fn restart(&mut self, env: &Env) {
        let (state, obs) = env.spec.reset();
        self.context = Context::initial(obs.clone());
        self.candidates = env.propose(&self.context, &state);
        self.state = state;
        self.obs = obs;
        self.steps = 0;
    }

    fn choose(&mut self, env: &Env) -> Result<usize, DrrnError> {
        match env.config.policy {
            Policy::Random => Ok(self.rng.below(self.candidates.len())),
            Policy::Learned => {
                self.net
                    .select_action(&self.obs, &self.candidates, env.config.temperature, &mut self.rng)
            }
        }
    }

    fn step(&mut self, env: &Env) -> Result<StepOut, DrrnError> {
        let idx = self.choose(env)?;
        let action = self.candidates[idx].clone();
        let (next, result) = env.spec.step(&self.state, &action);
        self.steps += 1;
        let context = self.context.advance(&action, result.observation.clone());
        let next_candidates = if result.done {
            Vec::new()
        } else {
            env.propose(&context, &next)
        };
        let exp = Experience {
            obs: std::mem::replace(&mut self.obs, result.observation.clone()),
            action,
            reward: result.reward,
            next_obs: result.observation,
            next_candidates: next_candidates.clone(),
            done: result.done,
        };
        self.trajectory.push(exp.clone());
        self.state = next;
        self.context = context;
        self.candidates = next_candidates;
        let score = self.state.score;
        let end = (result.done || self.steps >= env.config.max_episode_steps).then(|| {
            let end = EpisodeEnd {
                steps: self.steps,
                score,
                trajectory: std::mem::take(&mut self.trajectory),
            };
            self.restart(env);
            end
        });
        Ok(StepOut { exp, score, end })
    }
}

struct Learner<'a> {
    config: &'a AgentConfig,
    net: QNetwork,
    adam: Adam,
    target: Option<ParamStore>,
    buffers: super::ReplayBuffers,
    rng: Rng,
    updates: usize,
    episodes: Vec<EpisodeRecord>,
    max_seen: f64,
    stale: bool,
}

impl Learner<'_> {
    fn observe(&mut self, out: StepOut, t: usize) -> Result<bool, DrrnError> {
        self.max_seen = self.max_seen.max(out.score);
        self.buffers.push(out.exp);
        let ended = out.end.is_some();
        if let Some(end) = out.end {
            self.buffers.end_episode(&end.trajectory, end.score);
            self.episodes.push(EpisodeRecord {
                episode: self.episodes.len() + 1,
                steps: end.steps,
                score: end.score,
            });
        }
        let cfg = self.config;
        if cfg.policy == Policy::Learned && t >= cfg.warmup_steps && t % cfg.update_every == 0 {
            let batch = self.buffers.sample(cfg.batch_size, &mut self.rng);
            td_update(&mut self.net, &mut self.adam, &batch, cfg.gamma, self.target.as_ref())?;
            self.updates += 1;
            self.stale = true;
            if let (Some(every), Some(target)) = (cfg.target_sync, self.target.as_mut()) {
                if self.updates % every == 0 {
                    target.copy_values_from(self.net.params());
                }
            }
        }
        Ok(ended)
    }

    /// A fresh snapshot if parameters moved since the last one.
    fn snapshot(&mut self, current: &Arc<QNetwork>) -> Arc<QNetwork> {
        if self.stale {
            self.stale = false;
            Arc::new(self.net.clone())
        } else {
            current.clone()
        }
    }
}

/// Trains a DRRN agent on `spec` with candidates from `source`.
///
/// With `config.filter == Textual` and no classifier given, one is fitted on
/// responses collected from `spec` itself.
pub fn train(
    config: &AgentConfig,
    spec: &GameSpec,
    game: &str,
    source: Source,
    classifier: Option<&ResponseClassifier>,
) -> Result<(TrainingReport, QNetwork), DrrnError> {
    config.validate()?;
    let own_classifier;
    let classifier = match (config.filter, classifier) {
        (FilterMode::Textual, None) => {
            let mut rng = Rng::derive(config.seed, 0x7465_7874);
            own_classifier = ResponseClassifier::fit(&labeled_responses(spec, 4000, &mut rng), 10, 0.1, config.seed);
            Some(&own_classifier)
        }
        (_, c) => c,
    };
    let env = Env {
        spec,
        source,
        config,
        classifier,
        cache: Mutex::new(HashMap::new()),
    };
    let net = QNetwork::new(config.net, config.seed);
    let adam = Adam::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            max_grad_norm: config.max_grad_norm,
            ..AdamConfig::default()
        },
        net.params(),
    );
    let mut learner = Learner {
        config,
        target: config.target_sync.map(|_| net.params().clone()),
        net,
        adam,
        buffers: super::ReplayBuffers::new(config.buffer_capacity, config.best_ratio),
        rng: Rng::derive(config.seed, 0x6c65_6172),
        updates: 0,
        episodes: Vec::new(),
        max_seen: 0.0,
        stale: false,
    };
    let snapshot = Arc::new(learner.net.clone());
    if config.deterministic || config.actors == 1 {
        run_interleaved(&env, &mut learner, snapshot)?;
    } else {
        run_threaded(&env, &mut learner, snapshot)?;
    }
    let finished = &learner.episodes;
    let tail = &finished[finished.len().saturating_sub(100)..];
    let final_avg_100 = if tail.is_empty() {
        0.0
    } else {
        tail.iter().map(|e| e.score).sum::<f64>() / tail.len() as f64
    };
    let summary = Summary {
        final_avg_100,
        max_seen: learner.max_seen,
        final_avg_100_norm: final_avg_100 / spec.max_score,
        max_seen_norm: learner.max_seen / spec.max_score,
        episodes: finished.len(),
        env_steps: config.total_steps,
        updates: learner.updates,
    };
    let report = TrainingReport {
        version: crate::VERSION.to_string(),
        game: game.to_string(),
        source: source.name(),
        seed: config.seed,
        max_score: spec.max_score,
        config: config.clone(),
        episodes: learner.episodes,
        summary,
    };
    Ok((report, learner.net))
}

fn actor_rng(seed: u64, i: usize) -> Rng {
    Rng::derive(seed, 0x6163_0000 + i as u64)
}

fn run_interleaved(env: &Env, learner: &mut Learner, mut snapshot: Arc<QNetwork>) -> Result<(), DrrnError> {
    let n = env.config.actors;
    let mut actors: Vec<Actor> = (0..n)
        .map(|i| Actor::new(env, actor_rng(env.config.seed, i), snapshot.clone()))
        .collect();
    for t in 1..=env.config.total_steps {
        let actor = &mut actors[(t - 1) % n];
        let out = actor.step(env)?;
        if learner.observe(out, t)? {
            snapshot = learner.snapshot(&snapshot);
            actor.net = snapshot.clone();
        }
    }
    Ok(())
}

enum Msg {
    Step(StepOut),
    Failed(String),
}

fn run_threaded(env: &Env, learner: &mut Learner, snapshot: Arc<QNetwork>) -> Result<(), DrrnError> {
    let total = env.config.total_steps;
    let claimed = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let shared = RwLock::new(snapshot);
    let (tx, rx) = crossbeam_channel::bounded::<Msg>(256);
    std::thread::scope(|s| {
        for i in 0..env.config.actors {
            let tx = tx.clone();
            let (claimed, stop, shared) = (&claimed, &stop, &shared);
            s.spawn(move || {
                let net = shared.read().expect("snapshot lock").clone();
                let mut actor = Actor::new(env, actor_rng(env.config.seed, i), net);
                while !stop.load(Ordering::Relaxed) && claimed.fetch_add(1, Ordering::SeqCst) < total {
                    match actor.step(env) {
                        Ok(out) => {
                            let ended = out.end.is_some();
                            if tx.send(Msg::Step(out)).is_err() {
                                break;
                            }
                            if ended {
                                actor.net = shared.read().expect("snapshot lock").clone();
                            }
                        }
                        Err(e) => {
                            let _ = tx.send(Msg::Failed(e.to_string()));
                            break;
                        }
                    }
                }
            });
        }
        drop(tx);
        let mut t = 0;
        let mut result = Ok(());
        for msg in rx {
            if result.is_err() {
                continue;
            }
            match msg {
                Msg::Step(out) => {
                    t += 1;
                    match learner.observe(out, t) {
                        Ok(true) => {
                            let mut guard = shared.write().expect("snapshot lock");
                            *guard = learner.snapshot(&guard);
                        }
                        Ok(false) => {}
                        Err(e) => {
                            stop.store(true, Ordering::Relaxed);
                            result = Err(e);
                        }
                    }
                }
                Msg::Failed(e) => {
                    stop.store(true, Ordering::Relaxed);
                    result = Err(DrrnError::Actor(e));
                }
            }
        }
        result
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayStep {
    pub action: String,
    pub observation: String,
    pub reward: f64,
    pub score: f64,
}

/// Plays one episode: softmax over `net`'s Q-values at
/// `config.temperature`, or uniformly at random without a network. Returns
/// the opening observation and the steps taken.
pub fn play(
    net: Option<&QNetwork>,
    spec: &GameSpec,
    source: Source,
    config: &AgentConfig,
    classifier: Option<&ResponseClassifier>,
) -> Result<(String, Vec<PlayStep>), DrrnError> {
    let mut cfg = config.clone();
    if net.is_none() {
        cfg.policy = Policy::Random;
    }
    let env = Env {
        spec,
        source,
        config: &cfg,
        classifier,
        cache: Mutex::new(HashMap::new()),
    };
    let net = Arc::new(net.cloned().unwrap_or_else(|| QNetwork::new(cfg.net, cfg.seed)));
    let mut actor = Actor::new(&env, Rng::derive(cfg.seed, 0x706c_6179), net);
    let opening = actor.obs.clone();
    let mut steps = Vec::new();
    loop {
        let out = actor.step(&env)?;
        steps.push(PlayStep {
            action: out.exp.action,
            observation: out.exp.next_obs,
            reward: out.exp.reward,
            score: out.score,
        });
        if out.end.is_some() {
            break;
        }
    }
    Ok((opening, steps))
}
