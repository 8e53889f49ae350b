//! Experiment pipelines behind the command-line tool. Every command reads a
//! [`RunConfig`], writes its artifacts into the output directory and leaves a
//! `manifest.json` from which the same command can be replayed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapt::{
    collect_feedback, evaluate, mixed_split, run_continual, run_entropy, run_hybrid, AdaptConfig, AdaptMode,
    Deployment, SourceDomain, StageSpec,
};
use crate::envgraph::{default_landmark_vocab, generate_env, EnvGraph, GenModel, GeoTable};
use crate::error::{Error, Result};
use crate::feedback::LengthFilter;
use crate::jsonl;
use crate::membank::MemoryBank;
use crate::metrics::{
    episode_metrics, matched_path_rate, parse_results_csv, results_csv, MetricsReport, ResultRow,
    DEFAULT_SUCCESS_THRESHOLD, RESULTS_HEADER,
};
use crate::policy::{FeatureSpace, PolicyParams};
use crate::pretrain::{curve_csv, pretrain, EpochStat, PretrainConfig};
use crate::rollout::DEFAULT_T_MAX;
use crate::seeds::derive_seed;
use crate::synthlang::{basic_style, generate_corpus, instruction_vocab, make_style, StyleMap, DEFAULT_LEN_RANGE};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const POLICY_FILE: &str = "policy.json";
pub const ADAPTED_POLICY_FILE: &str = "policy_adapted.json";
pub const BANK_FILE: &str = "bank.json";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Path(PathBuf),
    Generate { seed: u64, n_nodes: usize, model: GenModel },
}

impl EnvSpec {
    pub fn build(&self, vocab: &[String]) -> Result<EnvGraph> {
        match self {
            EnvSpec::Path(p) => EnvGraph::load(p),
            EnvSpec::Generate { seed, n_nodes, model } => generate_env(*seed, *n_nodes, *model, vocab),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleSpec {
    pub id: String,
    pub seed: u64,
    pub synonym_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Counts {
    pub pretrain_instructions: usize,
    pub validation_instructions: usize,
    /// Stage-1 instructions per user or stage.
    pub n_instructions: usize,
    /// Feedback samples used per user or stage.
    pub n_feedback: usize,
    /// Held-out instructions per user or stage.
    pub n_eval: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Counts {
            pretrain_instructions: 300,
            validation_instructions: 100,
            n_instructions: 300,
            n_feedback: 300,
            n_eval: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationGrid {
    pub instructions: Vec<usize>,
    pub feedback: Vec<usize>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        AblationGrid {
            instructions: vec![100, 300, 500],
            feedback: vec![100, 300, 500],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Deployment environment.
    pub env: EnvSpec,
    /// Pretraining environment.
    pub source_env: EnvSpec,
    pub landmark_vocab: Vec<String>,
    /// User styles; adaptation stages and hybrid users follow this order.
    pub styles: Vec<StyleSpec>,
    pub counts: Counts,
    pub adapt: AdaptConfig,
    pub pretrain: PretrainConfig,
    pub ablation: AblationGrid,
    pub t_max: usize,
    pub d_th: f64,
    pub length_filter: LengthFilter,
    /// Pretrained policy; `<out>/policy.json` when absent.
    pub policy: Option<PathBuf>,
    /// Bank loaded before Stage 1.
    pub warm_start: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            env: EnvSpec::Generate {
                seed: 0,
                n_nodes: 60,
                model: GenModel::RandomGeometric,
            },
            source_env: EnvSpec::Generate {
                seed: 1000,
                n_nodes: 60,
                model: GenModel::RandomGeometric,
            },
            landmark_vocab: default_landmark_vocab(),
            styles: ["userA", "userB", "userC"]
                .iter()
                .enumerate()
                .map(|(k, id)| StyleSpec {
                    id: id.to_string(),
                    seed: 100 + k as u64,
                    synonym_rate: 0.8,
                })
                .collect(),
            counts: Counts::default(),
            adapt: AdaptConfig::default(),
            pretrain: PretrainConfig::default(),
            ablation: AblationGrid::default(),
            t_max: DEFAULT_T_MAX,
            d_th: DEFAULT_SUCCESS_THRESHOLD,
            length_filter: LengthFilter::default(),
            policy: None,
            warm_start: None,
            out: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    /// Reads a config file, or the config embedded in a run manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let value = match value.get("config") {
            Some(inner) if value.get("command").is_some() => inner.clone(),
            _ => value,
        };
        Ok(serde_json::from_value(value)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.adapt.validate()?;
        let c = &self.counts;
        for (name, v) in [
            ("pretrain_instructions", c.pretrain_instructions),
            ("validation_instructions", c.validation_instructions),
            ("n_instructions", c.n_instructions),
            ("n_feedback", c.n_feedback),
            ("n_eval", c.n_eval),
            ("t_max", self.t_max),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.d_th.is_nan() || self.d_th <= 0.0 {
            return Err(Error::InvalidArgument("d_th must be positive".into()));
        }
        if self.landmark_vocab.is_empty() {
            return Err(Error::EmptyLandmarks("landmark_vocab".into()));
        }
        for spec in [&self.env, &self.source_env] {
            if let EnvSpec::Path(p) = spec {
                if !p.exists() {
                    return Err(Error::InvalidArgument(format!(
                        "environment file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        for p in self.policy.iter().chain(&self.warm_start) {
            if !p.exists() {
                return Err(Error::InvalidArgument(format!("file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn feature_space(&self) -> FeatureSpace {
        FeatureSpace::new(instruction_vocab(&self.landmark_vocab), self.landmark_vocab.clone())
    }

    pub fn basic_style(&self) -> StyleMap {
        basic_style(&self.landmark_vocab)
    }

    /// Resolves a style id; `basic` is always available.
    pub fn style(&self, id: &str) -> Result<StyleMap> {
        if id == "basic" {
            return Ok(self.basic_style());
        }
        let spec = self
            .styles
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown style `{id}`")))?;
        make_style(&spec.id, spec.seed, &self.landmark_vocab, spec.synonym_rate)
    }

    pub fn user_styles(&self) -> Result<Vec<StyleMap>> {
        self.styles.iter().map(|s| self.style(&s.id)).collect()
    }

    pub fn source_domain(&self) -> Result<SourceDomain> {
        let env = self.source_env.build(&self.landmark_vocab)?;
        let style = self.basic_style();
        let corpus = generate_corpus(
            &env,
            &style,
            derive_seed(self.seed, "pretrain"),
            "pretrain",
            self.counts.pretrain_instructions,
            DEFAULT_LEN_RANGE,
        )?;
        Ok(SourceDomain { env, style, corpus })
    }

    pub fn stage(&self, style: StyleMap, n_instr: usize, n_feedback: usize) -> StageSpec {
        let seed = derive_seed(self.seed, &format!("stage/{}", style.id));
        StageSpec {
            style,
            n_instr,
            n_feedback,
            n_eval: self.counts.n_eval,
            seed,
        }
    }

    pub fn policy_path(&self) -> PathBuf {
        self.policy.clone().unwrap_or_else(|| self.out.join(POLICY_FILE))
    }

    pub fn deployment<'a>(&self, env: &'a EnvGraph, geo: &'a GeoTable) -> Deployment<'a> {
        Deployment {
            env,
            geo,
            t_max: self.t_max,
            d_th: self.d_th,
            filter: self.length_filter,
        }
    }

    /// Adaptation settings with the run-derived seed.
    pub fn adapt_cfg(&self) -> AdaptConfig {
        AdaptConfig {
            seed: derive_seed(self.seed, "adapt"),
            ..self.adapt.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

struct Sink {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Sink {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn finish(mut self, command: &str, config: &RunConfig) -> Result<Vec<String>> {
        self.outputs.sort();
        self.outputs.dedup();
        let mut config = config.clone();
        config.policy = Some(config.policy_path());
        let manifest = Manifest {
            command: command.to_string(),
            config,
            outputs: self.outputs.clone(),
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.outputs)
    }
}

fn load_policy(cfg: &RunConfig) -> Result<PolicyParams> {
    let params = PolicyParams::load(cfg.policy_path())?;
    if params.feature_space != cfg.feature_space() {
        return Err(Error::Schema(
            "policy feature space does not match the configured vocabulary".into(),
        ));
    }
    Ok(params)
}

/// Pretrains on the configured source domain; returns the policy, its
/// training curve and the domain kept for replay.
pub fn train_base(cfg: &RunConfig) -> Result<(PolicyParams, Vec<EpochStat>, SourceDomain)> {
    let source = cfg.source_domain()?;
    let validation = generate_corpus(
        &source.env,
        &source.style,
        derive_seed(cfg.seed, "validation"),
        "val",
        cfg.counts.validation_instructions,
        DEFAULT_LEN_RANGE,
    )?;
    let train_cfg = AdaptConfig {
        seed: derive_seed(cfg.seed, "pretrain"),
        ..cfg.adapt.clone()
    };
    let (params, curve) = pretrain(
        &source,
        &validation,
        cfg.feature_space(),
        &cfg.pretrain,
        &train_cfg,
        cfg.t_max,
        cfg.d_th,
    )?;
    Ok((params, curve, source))
}

/// Trains the base agent on the Basic-style corpus of the source environment.
pub fn cmd_pretrain(cfg: &RunConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut sink = Sink::new(&cfg.out)?;
    let (params, curve, source) = train_base(cfg)?;
    params.save(sink.path(POLICY_FILE))?;
    sink.text("training_curve.csv", &curve_csv(&curve))?;
    source.env.save(sink.path("source_env.json"))?;
    jsonl::write(sink.path("pretrain_corpus.jsonl"), &source.corpus)?;
    sink.finish("pretrain", cfg)
}

fn deploy_style(cfg: &RunConfig, style: Option<&str>) -> Result<StyleMap> {
    match style {
        Some(id) => cfg.style(id),
        None => match cfg.styles.first() {
            Some(s) => cfg.style(&s.id),
            None => Ok(cfg.basic_style()),
        },
    }
}

/// Stage 1: runs the frozen policy over a stream of instructions, persisting
/// the bank, episode logs, lifted feedback and the coverage trace.
pub fn cmd_deploy(cfg: &RunConfig, style: Option<&str>) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut sink = Sink::new(&cfg.out)?;
    let params = load_policy(cfg)?;
    let env = cfg.env.build(&cfg.landmark_vocab)?;
    let geo = GeoTable::new(&env);
    let style = deploy_style(cfg, style)?;
    let dep = cfg.deployment(&env, &geo);
    let bank = match &cfg.warm_start {
        Some(path) => MemoryBank::load(path, &env)?,
        None => MemoryBank::new(&env),
    };
    let stage = cfg.stage(style.clone(), cfg.counts.n_instructions, cfg.counts.n_feedback);
    let instructions = stage.stage1_corpus(&env)?;
    let col = collect_feedback(
        &params,
        &instructions,
        &style,
        stage.n_feedback,
        &dep,
        bank,
        &format!("deploy/{}", style.id),
    )?;

    col.bank.save(sink.path(BANK_FILE))?;
    let logs: Vec<_> = col.episodes.iter().map(|e| e.log(&env)).collect();
    jsonl::write(sink.path("episodes.jsonl"), &logs)?;
    let records: Vec<_> = col.samples.iter().map(|s| s.record(&env)).collect();
    jsonl::write(sink.path("feedback.jsonl"), &records)?;
    let mut trace = String::from("episode,coverage\n");
    for (k, c) in col.coverage.iter().enumerate() {
        trace.push_str(&format!("{k},{c:.6}\n"));
    }
    sink.text("coverage.csv", &trace)?;

    let mut report = MetricsReport::default();
    for (ep, instr) in col.episodes.iter().zip(&instructions) {
        let gt = env.indices_of(&instr.gt_path)?;
        report.push(episode_metrics(
            &env,
            &geo,
            &ep.trajectory,
            &gt,
            env.index_of(&instr.goal)?,
            cfg.d_th,
        )?);
    }
    let row = ResultRow::new(env.name(), "stage1:frozen", &style.id, &report);
    sink.text(METRICS_FILE, &results_csv(&[row]))?;
    let s = col.stats;
    sink.text(
        "feedback_stats.csv",
        &format!(
            "style,episodes,confirmed,corrected,infeasible,rejected,feasibility,matched_path,final_coverage\n{},{},{},{},{},{},{:.4},{:.4},{:.4}\n",
            style.id,
            s.episodes(),
            s.confirmed,
            s.corrected,
            s.infeasible,
            s.rejected,
            s.feasibility_rate(),
            matched_path_rate(&env, &col.samples),
            col.bank.coverage(&env)
        ),
    )?;
    sink.finish("deploy", cfg)
}

/// Adapts the pretrained policy with the configured mode and evaluates it
/// next to the frozen policy on every user's held-out split.
pub fn cmd_adapt(cfg: &RunConfig, mode: Option<AdaptMode>) -> Result<Vec<String>> {
    cfg.validate()?;
    let mode = mode.unwrap_or(cfg.adapt.mode);
    let mut sink = Sink::new(&cfg.out)?;
    let params = load_policy(cfg)?;
    let env = cfg.env.build(&cfg.landmark_vocab)?;
    let geo = GeoTable::new(&env);
    let dep = cfg.deployment(&env, &geo);
    let styles = cfg.user_styles()?;
    if styles.is_empty() {
        return Err(Error::InvalidArgument(
            "adaptation needs at least one user style".into(),
        ));
    }
    let stages: Vec<StageSpec> = styles
        .iter()
        .map(|s| cfg.stage(s.clone(), cfg.counts.n_instructions, cfg.counts.n_feedback))
        .collect();
    let heldout: Vec<_> = stages.iter().map(|s| s.heldout_corpus(&env)).collect::<Result<_>>()?;
    let adapt_cfg = cfg.adapt_cfg();
    let mut rows = Vec::new();
    let cold = || MemoryBank::new(&env);

    for (stage, test) in stages.iter().zip(&heldout) {
        let items: Vec<_> = test.iter().map(|i| (i, &stage.style)).collect();
        let eval = evaluate(&params, &items, &dep, cold())?;
        rows.push(ResultRow::new(env.name(), "test:frozen", &stage.style.id, &eval));
    }
    let mixed = mixed_split(&stages, &heldout);
    let frozen_mixed = evaluate(&params, &mixed, &dep, cold())?;
    rows.push(ResultRow::new(env.name(), "test:frozen", "mixed", &frozen_mixed));

    let mut stage_lines = String::from("stage,style,episodes,confirmed,corrected,infeasible,rejected,samples,pairs,replay_pairs,dropped,matched_path,coverage,final_loss\n");
    let mut push_stage = |k: usize, r: &crate::adapt::StageReport| {
        let s = r.stats;
        stage_lines.push_str(&format!(
            "{k},{},{},{},{},{},{},{},{},{},{},{:.4},{:.4},{:.6}\n",
            r.style,
            s.episodes(),
            s.confirmed,
            s.corrected,
            s.infeasible,
            s.rejected,
            r.n_samples,
            r.n_pairs,
            r.n_replay_pairs,
            r.dropped,
            r.matched_path_rate,
            r.final_coverage,
            r.losses.losses.last().copied().unwrap_or(0.0)
        ));
    };
    let adapted = match mode {
        AdaptMode::None => params.clone(),
        AdaptMode::Continual => {
            let (theta, reports) = run_continual(&params, &stages, &adapt_cfg, &dep, &cfg.source_domain()?)?;
            for (k, r) in reports.iter().enumerate() {
                push_stage(k, r);
                rows.push(ResultRow::new(
                    env.name(),
                    &format!("test:continual-stage{}", k + 1),
                    &r.style,
                    &r.eval,
                ));
            }
            theta
        }
        AdaptMode::Hybrid => {
            let (theta, report) = run_hybrid(&params, &stages, &adapt_cfg, &dep, &cfg.source_domain()?)?;
            push_stage(0, &report);
            theta
        }
        AdaptMode::EntropyBaseline => {
            let mut theta = params.clone();
            for stage in &stages {
                let (next, eval) = run_entropy(&theta, stage, &adapt_cfg, &dep)?;
                rows.push(ResultRow::new(env.name(), "test:entropy", &stage.style.id, &eval));
                theta = next;
            }
            theta
        }
    };
    if mode != AdaptMode::None {
        for (stage, test) in stages.iter().zip(&heldout) {
            let items: Vec<_> = test.iter().map(|i| (i, &stage.style)).collect();
            let eval = evaluate(&adapted, &items, &dep, cold())?;
            rows.push(ResultRow::new(
                env.name(),
                &format!("test:{mode}-final"),
                &stage.style.id,
                &eval,
            ));
        }
        let eval = evaluate(&adapted, &mixed, &dep, cold())?;
        rows.push(ResultRow::new(
            env.name(),
            &format!("test:{mode}-final"),
            "mixed",
            &eval,
        ));
        sink.text("stages.csv", &stage_lines)?;
    }
    adapted.save(sink.path(ADAPTED_POLICY_FILE))?;
    sink.text(METRICS_FILE, &results_csv(&rows))?;
    sink.finish("adapt", cfg)
}

/// Single-step adaptation on the first user style over an
/// instruction-count × feedback-count grid (cells with more feedback than
/// instructions are skipped).
pub fn cmd_ablate(cfg: &RunConfig, style: Option<&str>) -> Result<Vec<String>> {
    cfg.validate()?;
    let mut sink = Sink::new(&cfg.out)?;
    let params = load_policy(cfg)?;
    let env = cfg.env.build(&cfg.landmark_vocab)?;
    let geo = GeoTable::new(&env);
    let dep = cfg.deployment(&env, &geo);
    let style = deploy_style(cfg, style)?;
    let source = cfg.source_domain()?;
    let adapt_cfg = cfg.adapt_cfg();
    let base = cfg.stage(style.clone(), 1, 1);
    let heldout = base.heldout_corpus(&env)?;
    let items: Vec<_> = heldout.iter().map(|i| (i, &style)).collect();
    let frozen = evaluate(&params, &items, &dep, MemoryBank::new(&env))?.mean();
    let mut out =
        String::from("n_instructions,n_feedback,samples,matched_path,coverage,SR,SPL,nDTW,SDTW,CLS,delta_SR\n");
    out.push_str(&format!(
        "0,0,0,0.0000,0.0000,{:.2},{:.2},{:.2},{:.2},{:.2},0.00\n",
        frozen.sr * 100.0,
        frozen.spl * 100.0,
        frozen.ndtw * 100.0,
        frozen.sdtw * 100.0,
        frozen.cls * 100.0
    ));
    for &n_instr in &cfg.ablation.instructions {
        for &n_fb in &cfg.ablation.feedback {
            if n_fb > n_instr {
                continue;
            }
            let stage = StageSpec {
                n_instr,
                n_feedback: n_fb,
                ..base.clone()
            };
            let (_, reports) = run_continual(&params, &[stage], &adapt_cfg, &dep, &source)?;
            let r = &reports[0];
            let m = r.eval.mean();
            out.push_str(&format!(
                "{n_instr},{n_fb},{},{:.4},{:.4},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
                r.n_samples,
                r.matched_path_rate,
                r.final_coverage,
                m.sr * 100.0,
                m.spl * 100.0,
                m.ndtw * 100.0,
                m.sdtw * 100.0,
                m.cls * 100.0,
                (m.sr - frozen.sr) * 100.0
            ));
        }
    }
    sink.text("ablation.csv", &out)?;
    sink.finish("ablate", cfg)
}

/// Gathers every results CSV under `run_dir` and reports each adapted row
/// against the frozen row for the same environment, split and style.
pub fn cmd_report(run_dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    collect_csvs(run_dir, &mut files)?;
    files.sort();
    let mut rows = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
        if text.lines().next().map(str::trim) != Some(RESULTS_HEADER) {
            continue;
        }
        let rel = f.strip_prefix(run_dir).unwrap_or(f).display().to_string();
        for row in parse_results_csv(&text)? {
            rows.push((rel.clone(), row));
        }
    }
    let mut frozen: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    for (_, r) in &rows {
        if let Some((split, "frozen")) = r.split.split_once(':') {
            frozen.insert((r.env.clone(), split.to_string(), r.style.clone()), r.values[0]);
        }
    }
    let mut csv = String::from("source,env,split,method,style,episodes,SR,SPL,nDTW,SDTW,CLS,delta_SR\n");
    let mut table = format!(
        "{:<28} {:<24} {:<12} {:>8} {:>7} {:>7} {:>7} {:>8}\n",
        "method", "env", "style", "episodes", "SR", "SPL", "nDTW", "dSR"
    );
    for (src, r) in &rows {
        let (split, method) = r.split.split_once(':').unwrap_or((r.split.as_str(), ""));
        let delta = frozen
            .get(&(r.env.clone(), split.to_string(), r.style.clone()))
            .map(|f| r.values[0] - f);
        let delta_str = delta.map(|d| format!("{d:.2}")).unwrap_or_default();
        csv.push_str(&format!(
            "{src},{},{split},{method},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{delta_str}\n",
            r.env, r.style, r.episodes, r.values[0], r.values[2], r.values[6], r.values[7], r.values[8]
        ));
        table.push_str(&format!(
            "{:<28} {:<24} {:<12} {:>8} {:>7.2} {:>7.2} {:>7.2} {:>8}\n",
            format!("{split}:{method}"),
            r.env,
            r.style,
            r.episodes,
            r.values[0],
            r.values[2],
            r.values[6],
            delta_str
        ));
    }
    let mut outputs = Vec::new();
    for (name, text) in [("summary.csv", &csv), ("summary.txt", &table)] {
        let path = run_dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        outputs.push(name.to_string());
    }
    Ok(outputs)
}

fn collect_csvs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_csvs(&path, out)?;
        } else if path.extension().is_some_and(|x| x == "csv") && path.file_name().is_some_and(|n| n != "summary.csv") {
            out.push(path);
        }
    }
    Ok(())
}
