//! Feedback-driven policy updates: imitation fine-tuning on lifted
//! trajectories mixed with source-domain replay, run stage by stage
//! (continual) or once on the union of several users' feedback (hybrid),
//! plus an entropy-minimization comparator.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::envgraph::{EnvGraph, GeoTable};
use crate::error::{Error, Result};
use crate::feedback::{
    EndpointKind, FeedbackCollector, FeedbackSample, FeedbackStats, LengthFilter, Outcome, Provenance,
};
use crate::membank::MemoryBank;
use crate::metrics::{episode_metrics, matched_path_rate, MetricsReport};
use crate::policy::{
    candidates, mean_entropy_grad, nll_grad, CandidateSet, EpisodeContext, FeatureSpace, NavAction, NavState, PairKey,
    PolicyParams, Progress, TrainingPair,
};
use crate::rollout::{run_episode, Episode, Mode};
use crate::seeds::{derive_seed, rng_for};
use crate::synthlang::{generate_corpus, Instruction, StyleMap, DEFAULT_LEN_RANGE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptMode {
    Continual,
    Hybrid,
    #[serde(alias = "entropy")]
    EntropyBaseline,
    /// Frozen policy, evaluation only.
    None,
}

impl std::str::FromStr for AdaptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continual" => Ok(AdaptMode::Continual),
            "hybrid" => Ok(AdaptMode::Hybrid),
            "entropy" | "entropy-baseline" => Ok(AdaptMode::EntropyBaseline),
            "none" | "frozen" => Ok(AdaptMode::None),
            other => Err(Error::InvalidArgument(format!("unknown adaptation mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for AdaptMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdaptMode::Continual => "continual",
            AdaptMode::Hybrid => "hybrid",
            AdaptMode::EntropyBaseline => "entropy",
            AdaptMode::None => "none",
        })
    }
}

/// Expert-mixing probability, either fixed or decaying geometrically per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSchedule {
    Fixed(f64),
    Decay { start: f64, decay: f64 },
}

impl BetaSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        match *self {
            BetaSchedule::Fixed(b) => b,
            BetaSchedule::Decay { start, decay } => start * decay.powi(epoch as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Source trajectories replayed per feedback sample.
    pub replay_ratio: f64,
    pub dagger_beta: BetaSchedule,
    pub mode: AdaptMode,
    /// Seeds batch shuffling and replay draws.
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            alpha: 0.5,
            epochs: 10,
            batch_size: 32,
            replay_ratio: 1.0,
            dagger_beta: BetaSchedule::Fixed(0.5),
            mode: AdaptMode::Continual,
            seed: 0,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.replay_ratio >= 0.0 && self.replay_ratio.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "replay_ratio must be non-negative, got {}",
                self.replay_ratio
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Training pairs from a set of lifted trajectories, with the number of
/// steps whose oracle action was missing from the state's action space.
#[derive(Debug, Clone, Default)]
pub struct Expansion {
    pub pairs: Vec<TrainingPair>,
    pub dropped: usize,
}

impl Expansion {
    pub fn extend(&mut self, other: Expansion) {
        self.pairs.extend(other.pairs);
        self.dropped += other.dropped;
    }
}

/// Replays one `τ⁺` from its start: the state at `τ⁺[t]` is labelled
/// `MOVE(τ⁺[t+1])`, the last one `STOP`. `bank` is cloned and every node
/// of `τ⁺` is observed on arrival, as during a rollout.
pub fn expand_sample(
    sample: &FeedbackSample,
    env: &EnvGraph,
    fs: &FeatureSpace,
    style: &StyleMap,
    bank: &MemoryBank,
) -> Result<Expansion> {
    let tau = &sample.tau_plus;
    let Some(&first) = tau.first() else {
        return Err(Error::InvalidArgument(format!(
            "empty corrected path for `{}`",
            sample.instruction.id
        )));
    };
    let ctx = EpisodeContext::new(env, fs, &sample.instruction, style)?;
    if first != ctx.start {
        return Err(Error::InvalidArgument(format!(
            "corrected path for `{}` does not begin at the instruction start",
            sample.instruction.id
        )));
    }
    let mut bank = bank.clone();
    bank.observe(env, first)?;
    let mut progress = Progress::start(&ctx);
    let mut out = Expansion::default();
    for t in 0..tau.len() {
        let target = match tau.get(t + 1) {
            Some(&next) => NavAction::Move(next),
            None => NavAction::Stop,
        };
        let cands = candidates(
            &NavState {
                ctx: &ctx,
                bank: &bank,
                progress: &progress,
            },
            fs,
        );
        if cands.position(target).is_some() {
            out.pairs.push(TrainingPair {
                key: PairKey {
                    style: sample.instruction.style.clone(),
                    instr_id: sample.instruction.id.clone(),
                    step: t,
                },
                candidates: cands,
                target,
            });
        } else {
            out.dropped += 1;
        }
        if let NavAction::Move(next) = target {
            progress.arrive(&ctx, next);
            bank.observe(env, next)?;
        }
    }
    Ok(out)
}

/// Expands every sample against the same bank snapshot.
pub fn expand_to_pairs(
    samples: &[FeedbackSample],
    env: &EnvGraph,
    fs: &FeatureSpace,
    style: &StyleMap,
    bank: &MemoryBank,
) -> Result<Expansion> {
    let mut out = Expansion::default();
    for s in samples {
        out.extend(expand_sample(s, env, fs, style, bank)?);
    }
    Ok(out)
}

/// Sorts pairs by `(style, instruction, step)`.
pub fn canonical_sort(pairs: &mut [TrainingPair]) {
    pairs.sort_by(|a, b| a.key.cmp(&b.key));
}

/// Full-data loss before training and after each epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub losses: Vec<f64>,
}

/// Mini-batch gradient descent on the imitation loss. Each epoch visits the
/// pairs in an order shuffled from `(cfg.seed, epoch)`; the input is left
/// untouched.
pub fn il_update(
    params: &PolicyParams,
    pairs: &[TrainingPair],
    cfg: &AdaptConfig,
) -> Result<(PolicyParams, LossTrace)> {
    if !(cfg.alpha >= 0.0 && cfg.alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be non-negative, got {}",
            cfg.alpha
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    let mut out = params.clone();
    let mut trace = LossTrace::default();
    if pairs.is_empty() {
        return Ok((out, trace));
    }
    trace.losses.push(nll_grad(&out.theta, pairs)?.0);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng_for(cfg.seed, &format!("il-epoch/{epoch}")));
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainingPair> = chunk.iter().map(|&k| pairs[k].clone()).collect();
            let (_, grad) = nll_grad(&out.theta, &batch)?;
            for (w, g) in out.theta.iter_mut().zip(grad) {
                *w -= cfg.alpha * g;
            }
        }
        trace.losses.push(nll_grad(&out.theta, pairs)?.0);
    }
    Ok((out, trace))
}

/// One gradient step lowering the mean action entropy over `states`,
/// applied to the cross-feature block only.
pub fn entropy_step(params: &PolicyParams, states: &[CandidateSet], alpha: f64) -> PolicyParams {
    let mut out = params.clone();
    if states.is_empty() {
        return out;
    }
    let (_, grad) = mean_entropy_grad(&out.theta, states);
    for k in out.feature_space.cross_block() {
        out.theta[k] -= alpha * grad[k];
    }
    out
}

/// Applies one entropy step per episode, in order, on the states along each
/// executed trajectory.
pub fn entropy_baseline(params: &PolicyParams, episodes: &[Episode], cfg: &AdaptConfig) -> PolicyParams {
    let mut out = params.clone();
    for ep in episodes {
        let states: Vec<CandidateSet> = ep.decisions.iter().map(|d| d.candidates.clone()).collect();
        out = entropy_step(&out, &states, cfg.alpha);
    }
    out
}

/// The pretraining domain kept for mixed replay.
#[derive(Debug, Clone)]
pub struct SourceDomain {
    pub env: EnvGraph,
    pub style: StyleMap,
    pub corpus: Vec<Instruction>,
}

impl SourceDomain {
    /// `count` corpus trajectories (ground-truth routes) drawn without
    /// replacement, cycling once the corpus is exhausted, expanded on a cold
    /// bank each.
    pub fn replay_pairs(&self, fs: &FeatureSpace, count: usize, seed: u64, label: &str) -> Result<Expansion> {
        let mut out = Expansion::default();
        if count == 0 || self.corpus.is_empty() {
            return Ok(out);
        }
        let mut rng = rng_for(seed, &format!("replay/{label}"));
        let mut order: Vec<usize> = Vec::new();
        while order.len() < count {
            let mut round: Vec<usize> = (0..self.corpus.len()).collect();
            round.shuffle(&mut rng);
            order.extend(round);
        }
        let cold = MemoryBank::new(&self.env);
        for &k in &order[..count] {
            let instr = &self.corpus[k];
            let sample = FeedbackSample {
                instruction: instr.clone(),
                tau_plus: self.env.indices_of(&instr.gt_path)?,
                kind: EndpointKind::Confirmed,
                provenance: Provenance {
                    session: "source".into(),
                    style: instr.style.clone(),
                    episode: k,
                },
            };
            out.extend(expand_sample(&sample, &self.env, fs, &self.style, &cold)?);
        }
        Ok(out)
    }
}

/// Fixed settings of a deployment environment.
#[derive(Debug, Clone, Copy)]
pub struct Deployment<'a> {
    pub env: &'a EnvGraph,
    pub geo: &'a GeoTable,
    pub t_max: usize,
    pub d_th: f64,
    pub filter: LengthFilter,
}

/// Greedy rollouts over `items`, sharing one bank that starts from `bank`.
pub fn evaluate(
    params: &PolicyParams,
    items: &[(&Instruction, &StyleMap)],
    dep: &Deployment,
    mut bank: MemoryBank,
) -> Result<MetricsReport> {
    let mut report = MetricsReport::default();
    for (instr, style) in items {
        let ep = run_episode(params, instr, style, dep.env, &mut bank, dep.t_max, Mode::Greedy)?;
        let gt = dep.env.indices_of(&instr.gt_path)?;
        let goal = dep.env.index_of(&instr.goal)?;
        report.push(episode_metrics(dep.env, dep.geo, &ep.trajectory, &gt, goal, dep.d_th)?);
    }
    Ok(report)
}

/// One user's deployment: instruction counts and the style they speak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub style: StyleMap,
    /// Stage-1 instructions executed.
    pub n_instr: usize,
    /// Kept feedback samples used for the update (the first ones collected).
    pub n_feedback: usize,
    /// Held-out instructions for evaluation.
    pub n_eval: usize,
    pub seed: u64,
}

impl StageSpec {
    pub fn stage1_corpus(&self, env: &EnvGraph) -> Result<Vec<Instruction>> {
        generate_corpus(
            env,
            &self.style,
            derive_seed(self.seed, "stage1"),
            "stage1",
            self.n_instr,
            DEFAULT_LEN_RANGE,
        )
    }

    pub fn heldout_corpus(&self, env: &EnvGraph) -> Result<Vec<Instruction>> {
        generate_corpus(
            env,
            &self.style,
            derive_seed(self.seed, "test"),
            "test",
            self.n_eval,
            DEFAULT_LEN_RANGE,
        )
    }
}

/// What a Stage-1 session produced.
#[derive(Debug, Clone)]
pub struct Collection {
    pub episodes: Vec<Episode>,
    pub stats: FeedbackStats,
    /// Kept samples, at most `n_feedback`.
    pub samples: Vec<FeedbackSample>,
    pub expansion: Expansion,
    /// Coverage right after each episode's first observation.
    pub coverage: Vec<f64>,
    pub bank: MemoryBank,
}

/// Runs `instructions` greedily in order, lifting each episode's feedback
/// against the bank as it stands at the end of that episode and expanding
/// kept samples on the same snapshot.
pub fn collect_feedback(
    params: &PolicyParams,
    instructions: &[Instruction],
    style: &StyleMap,
    n_feedback: usize,
    dep: &Deployment,
    mut bank: MemoryBank,
    session: &str,
) -> Result<Collection> {
    let mut collector = FeedbackCollector::new(session, dep.filter);
    let mut expansion = Expansion::default();
    let mut episodes = Vec::with_capacity(instructions.len());
    let mut coverage = Vec::with_capacity(instructions.len());
    for instr in instructions {
        let start = dep.env.index_of(&instr.start)?;
        bank.observe(dep.env, start)?;
        coverage.push(bank.coverage(dep.env));
        let ep = run_episode(params, instr, style, dep.env, &mut bank, dep.t_max, Mode::Greedy)?;
        let outcome = collector.process(dep.env, &ep, &bank)?;
        if matches!(outcome, Outcome::Kept(_)) && collector.dataset.len() <= n_feedback {
            let sample = collector.dataset.samples().last().expect("just kept");
            expansion.extend(expand_sample(sample, dep.env, &params.feature_space, style, &bank)?);
        }
        episodes.push(ep);
    }
    let samples = collector.dataset.truncated(n_feedback).samples().to_vec();
    Ok(Collection {
        episodes,
        stats: collector.stats,
        samples,
        expansion,
        coverage,
        bank,
    })
}

/// Per-stage record of an adaptation run.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub style: String,
    pub stats: FeedbackStats,
    pub n_samples: usize,
    pub n_pairs: usize,
    pub n_replay_pairs: usize,
    pub dropped: usize,
    pub matched_path_rate: f64,
    pub final_coverage: f64,
    pub losses: LossTrace,
    pub eval: MetricsReport,
}

fn replay_count(cfg: &AdaptConfig, n_feedback: usize) -> usize {
    (cfg.replay_ratio * n_feedback as f64).round() as usize
}

/// Sequential adaptation: each stage collects feedback with the current
/// policy, updates it once and evaluates on that stage's held-out split.
/// Every stage deploys on a cold bank.
pub fn run_continual(
    params0: &PolicyParams,
    stages: &[StageSpec],
    cfg: &AdaptConfig,
    dep: &Deployment,
    source: &SourceDomain,
) -> Result<(PolicyParams, Vec<StageReport>)> {
    let mut params = params0.clone();
    let mut reports = Vec::with_capacity(stages.len());
    for (k, stage) in stages.iter().enumerate() {
        let instructions = stage.stage1_corpus(dep.env)?;
        let session = format!("stage{k}/{}", stage.style.id);
        let col = collect_feedback(
            &params,
            &instructions,
            &stage.style,
            stage.n_feedback,
            dep,
            MemoryBank::new(dep.env),
            &session,
        )?;
        let replay = source.replay_pairs(
            &params.feature_space,
            replay_count(cfg, col.samples.len()),
            cfg.seed,
            &format!("stage{k}"),
        )?;
        let mut pairs = col.expansion.pairs.clone();
        pairs.extend(replay.pairs.iter().cloned());
        canonical_sort(&mut pairs);
        let stage_cfg = AdaptConfig {
            seed: derive_seed(cfg.seed, &format!("stage{k}")),
            ..cfg.clone()
        };
        let (next, losses) = il_update(&params, &pairs, &stage_cfg)?;
        params = next;
        let heldout = stage.heldout_corpus(dep.env)?;
        let items: Vec<_> = heldout.iter().map(|i| (i, &stage.style)).collect();
        let eval = evaluate(&params, &items, dep, MemoryBank::new(dep.env))?;
        reports.push(StageReport {
            style: stage.style.id.clone(),
            stats: col.stats,
            n_samples: col.samples.len(),
            n_pairs: col.expansion.pairs.len(),
            n_replay_pairs: replay.pairs.len(),
            dropped: col.expansion.dropped + replay.dropped,
            matched_path_rate: matched_path_rate(dep.env, &col.samples),
            final_coverage: col.bank.coverage(dep.env),
            losses,
            eval,
        });
    }
    Ok((params, reports))
}

/// Held-out instructions of several users, each with its own style.
pub fn mixed_split<'a>(
    users: &'a [StageSpec],
    heldout: &'a [Vec<Instruction>],
) -> Vec<(&'a Instruction, &'a StyleMap)> {
    users
        .iter()
        .zip(heldout)
        .flat_map(|(u, h)| h.iter().map(move |i| (i, &u.style)))
        .collect()
}

/// Aggregated adaptation: every user deploys the initial policy on an
/// independent cold bank; the union of their pairs is sorted canonically
/// and used for a single update, evaluated on the mixed-user split.
pub fn run_hybrid(
    params0: &PolicyParams,
    users: &[StageSpec],
    cfg: &AdaptConfig,
    dep: &Deployment,
    source: &SourceDomain,
) -> Result<(PolicyParams, StageReport)> {
    let mut pairs = Vec::new();
    let mut stats = FeedbackStats::default();
    let mut samples = Vec::new();
    let mut dropped = 0;
    let mut coverage = 0.0;
    for user in users {
        let instructions = user.stage1_corpus(dep.env)?;
        let col = collect_feedback(
            params0,
            &instructions,
            &user.style,
            user.n_feedback,
            dep,
            MemoryBank::new(dep.env),
            &format!("user/{}", user.style.id),
        )?;
        stats.confirmed += col.stats.confirmed;
        stats.corrected += col.stats.corrected;
        stats.infeasible += col.stats.infeasible;
        stats.rejected += col.stats.rejected;
        dropped += col.expansion.dropped;
        coverage += col.bank.coverage(dep.env) / users.len().max(1) as f64;
        pairs.extend(col.expansion.pairs);
        samples.extend(col.samples);
    }
    let n_user_pairs = pairs.len();
    // Same replay draw and shuffling seed as the first continual stage, so a
    // single user reduces to single-step fine-tuning.
    let replay = source.replay_pairs(
        &params0.feature_space,
        replay_count(cfg, samples.len()),
        cfg.seed,
        "stage0",
    )?;
    dropped += replay.dropped;
    let n_replay_pairs = replay.pairs.len();
    pairs.extend(replay.pairs);
    canonical_sort(&mut pairs);
    let update_cfg = AdaptConfig {
        seed: derive_seed(cfg.seed, "stage0"),
        ..cfg.clone()
    };
    let (params, losses) = il_update(params0, &pairs, &update_cfg)?;
    let heldout: Vec<Vec<Instruction>> = users.iter().map(|u| u.heldout_corpus(dep.env)).collect::<Result<_>>()?;
    let eval = evaluate(&params, &mixed_split(users, &heldout), dep, MemoryBank::new(dep.env))?;
    Ok((
        params,
        StageReport {
            style: users.iter().map(|u| u.style.id.as_str()).collect::<Vec<_>>().join("+"),
            stats,
            n_samples: samples.len(),
            n_pairs: n_user_pairs,
            n_replay_pairs,
            dropped,
            matched_path_rate: matched_path_rate(dep.env, &samples),
            final_coverage: coverage,
            losses,
            eval,
        },
    ))
}

/// Online entropy minimization during Stage 1: one step after every episode,
/// then evaluation on the held-out split.
pub fn run_entropy(
    params0: &PolicyParams,
    stage: &StageSpec,
    cfg: &AdaptConfig,
    dep: &Deployment,
) -> Result<(PolicyParams, MetricsReport)> {
    let mut params = params0.clone();
    let mut bank = MemoryBank::new(dep.env);
    for instr in stage.stage1_corpus(dep.env)? {
        let ep = run_episode(
            &params,
            &instr,
            &stage.style,
            dep.env,
            &mut bank,
            dep.t_max,
            Mode::Greedy,
        )?;
        params = entropy_baseline(&params, std::slice::from_ref(&ep), cfg);
    }
    let heldout = stage.heldout_corpus(dep.env)?;
    let items: Vec<_> = heldout.iter().map(|i| (i, &stage.style)).collect();
    let eval = evaluate(&params, &items, dep, MemoryBank::new(dep.env))?;
    Ok((params, eval))
}
