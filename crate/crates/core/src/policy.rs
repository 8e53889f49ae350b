//! Linear-softmax navigation policy over a local + global action space.
//!
//! Each valid action gets a sparse feature vector; the policy is a softmax
//! over `θ·φ(s, a)`. Move actions target either a direct neighbour or a
//! reachable frontier node of the memory bank (executed along the
//! discovered-graph shortest path). `STOP` is always available.

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envgraph::{dijkstra, EnvGraph, NodeIdx, Topology};
use crate::error::{Error, Result};
use crate::membank::MemoryBank;
use crate::synthlang::{instruction_vocab, Instruction, StyleMap};

pub const POLICY_VERSION: u64 = 1;

pub type SparseVec = Vec<(usize, f64)>;

/// Fixed index layout for `φ`: a `|W|×|Λ|` cross block followed by five
/// indicator features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "FeatureSpaceFile", into = "FeatureSpaceFile")]
pub struct FeatureSpace {
    instruction_vocab: Vec<String>,
    landmark_vocab: Vec<String>,
    word_index: HashMap<String, usize>,
    landmark_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct FeatureSpaceFile {
    instruction_vocab: Vec<String>,
    landmark_vocab: Vec<String>,
}

impl From<FeatureSpaceFile> for FeatureSpace {
    fn from(f: FeatureSpaceFile) -> Self {
        FeatureSpace::new(f.instruction_vocab, f.landmark_vocab)
    }
}

impl From<FeatureSpace> for FeatureSpaceFile {
    fn from(fs: FeatureSpace) -> Self {
        FeatureSpaceFile {
            instruction_vocab: fs.instruction_vocab,
            landmark_vocab: fs.landmark_vocab,
        }
    }
}

impl FeatureSpace {
    pub fn new(mut instruction_vocab: Vec<String>, mut landmark_vocab: Vec<String>) -> Self {
        instruction_vocab.sort();
        instruction_vocab.dedup();
        landmark_vocab.sort();
        landmark_vocab.dedup();
        let word_index = instruction_vocab
            .iter()
            .enumerate()
            .map(|(k, w)| (w.clone(), k))
            .collect();
        let landmark_index = landmark_vocab.iter().enumerate().map(|(k, w)| (w.clone(), k)).collect();
        FeatureSpace {
            instruction_vocab,
            landmark_vocab,
            word_index,
            landmark_index,
        }
    }

    /// Feature space whose instruction vocabulary covers every style that can
    /// be built over `landmarks`.
    pub fn for_landmarks(landmarks: &[String]) -> Self {
        FeatureSpace::new(instruction_vocab(landmarks), landmarks.to_vec())
    }

    pub fn instruction_vocab(&self) -> &[String] {
        &self.instruction_vocab
    }

    pub fn landmark_vocab(&self) -> &[String] {
        &self.landmark_vocab
    }

    pub fn word(&self, token: &str) -> Option<usize> {
        self.word_index.get(token).copied()
    }

    pub fn landmark(&self, token: &str) -> Option<usize> {
        self.landmark_index.get(token).copied()
    }

    pub fn cross(&self, word: usize, landmark: usize) -> usize {
        word * self.landmark_vocab.len() + landmark
    }

    pub fn cross_block(&self) -> Range<usize> {
        0..self.instruction_vocab.len() * self.landmark_vocab.len()
    }

    pub fn revisit(&self) -> usize {
        self.cross_block().end
    }

    pub fn move_bias(&self) -> usize {
        self.revisit() + 1
    }

    pub fn stop_bias(&self) -> usize {
        self.revisit() + 2
    }

    pub fn stop_all_consumed(&self) -> usize {
        self.revisit() + 3
    }

    pub fn stop_goal_match(&self) -> usize {
        self.revisit() + 4
    }

    pub fn dim(&self) -> usize {
        self.revisit() + 5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub feature_space: FeatureSpace,
    pub theta: Vec<f64>,
    pub alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    version: u64,
    feature_space: FeatureSpace,
    theta: Vec<f64>,
    alpha: f64,
}

impl PolicyParams {
    pub fn zeros(feature_space: FeatureSpace, alpha: f64) -> Self {
        let theta = vec![0.0; feature_space.dim()];
        PolicyParams {
            feature_space,
            theta,
            alpha,
        }
    }

    pub fn to_json(&self) -> String {
        let file = PolicyFile {
            version: POLICY_VERSION,
            feature_space: self.feature_space.clone(),
            theta: self.theta.clone(),
            alpha: self.alpha,
        };
        let mut s = serde_json::to_string(&file).expect("policy serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolicyFile = serde_json::from_str(text)?;
        if file.version != POLICY_VERSION {
            return Err(Error::VersionMismatch {
                found: file.version,
                expected: POLICY_VERSION,
            });
        }
        if file.theta.len() != file.feature_space.dim() {
            return Err(Error::Schema(format!(
                "theta has {} entries, feature space needs {}",
                file.theta.len(),
                file.feature_space.dim()
            )));
        }
        if file.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Schema("theta contains non-finite entries".into()));
        }
        Ok(PolicyParams {
            feature_space: file.feature_space,
            theta: file.theta,
            alpha: file.alpha,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Everything about an episode that stays fixed while it runs: the
/// instruction resolved against the environment and the feature space.
#[derive(Debug, Clone)]
pub struct EpisodeContext<'a> {
    pub env: &'a EnvGraph,
    pub instruction: &'a Instruction,
    pub start: NodeIdx,
    pub goal: NodeIdx,
    token_words: Vec<Option<usize>>,
    node_landmarks: Vec<Vec<usize>>,
    /// `token_match[k][v]`: token `k` names one of `v`'s landmarks under the
    /// instruction's style.
    token_match: Vec<Vec<bool>>,
}

impl<'a> EpisodeContext<'a> {
    pub fn new(env: &'a EnvGraph, fs: &FeatureSpace, instruction: &'a Instruction, style: &StyleMap) -> Result<Self> {
        if instruction.tokens.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "instruction `{}` has no tokens",
                instruction.id
            )));
        }
        let start = env.index_of(&instruction.start)?;
        let goal = env.index_of(&instruction.goal)?;
        let token_words = instruction.tokens.iter().map(|t| fs.word(t)).collect();
        let node_landmarks = env
            .nodes()
            .iter()
            .map(|v| v.landmarks.iter().filter_map(|lm| fs.landmark(lm)).collect())
            .collect();
        let token_match = instruction
            .tokens
            .iter()
            .map(|tok| {
                env.nodes()
                    .iter()
                    .map(|v| v.landmarks.iter().any(|lm| style.translate(lm) == Some(tok.as_str())))
                    .collect()
            })
            .collect();
        Ok(EpisodeContext {
            env,
            instruction,
            start,
            goal,
            token_words,
            node_landmarks,
            token_match,
        })
    }

    pub fn len(&self) -> usize {
        self.token_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_words.is_empty()
    }

    pub fn token_matches(&self, k: usize, v: NodeIdx) -> bool {
        self.token_match[k][v]
    }
}

/// Position along the instruction: the trajectory so far and the index of
/// the next unconsumed token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Progress {
    pub pointer: usize,
    pub trajectory: Vec<NodeIdx>,
}

impl Progress {
    /// The start node consumes the first token when it matches, like every
    /// later arrival.
    pub fn start(ctx: &EpisodeContext) -> Self {
        let mut p = Progress {
            pointer: 0,
            trajectory: Vec::new(),
        };
        p.arrive(ctx, ctx.start);
        p
    }

    pub fn current(&self) -> NodeIdx {
        *self.trajectory.last().expect("trajectory starts non-empty")
    }

    /// Appends `v` and advances the pointer if the next token matches it.
    pub fn arrive(&mut self, ctx: &EpisodeContext, v: NodeIdx) {
        self.trajectory.push(v);
        if self.pointer < ctx.len() && ctx.token_matches(self.pointer, v) {
            self.pointer += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NavAction {
    Move(NodeIdx),
    Stop,
}

pub struct NavState<'a> {
    pub ctx: &'a EpisodeContext<'a>,
    pub bank: &'a MemoryBank,
    pub progress: &'a Progress,
}

/// Valid actions in a state with their feature vectors. For moves, `routes`
/// holds the nodes that get appended (the target last).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub actions: Vec<NavAction>,
    pub routes: Vec<Vec<NodeIdx>>,
    pub features: Vec<SparseVec>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn position(&self, action: NavAction) -> Option<usize> {
        self.actions.iter().position(|&a| a == action)
    }
}

/// `φ(s, a)`.
pub fn features(state: &NavState, fs: &FeatureSpace, action: NavAction) -> SparseVec {
    let ctx = state.ctx;
    let pointer = state.progress.pointer;
    let mut phi = SparseVec::new();
    match action {
        NavAction::Move(target) => {
            // Cached bags and panoramic observations carry the same landmark
            // set here, so the ground-truth tags serve both cases.
            if let Some(Some(word)) = ctx.token_words.get(pointer) {
                for &lm in &ctx.node_landmarks[target] {
                    phi.push((fs.cross(*word, lm), 1.0));
                }
            }
            if state.progress.trajectory.contains(&target) {
                phi.push((fs.revisit(), 1.0));
            }
            phi.push((fs.move_bias(), 1.0));
        }
        NavAction::Stop => {
            phi.push((fs.stop_bias(), 1.0));
            if pointer == ctx.len() {
                phi.push((fs.stop_all_consumed(), 1.0));
            }
            if ctx.token_matches(ctx.len() - 1, state.progress.current()) {
                phi.push((fs.stop_goal_match(), 1.0));
            }
        }
    }
    phi
}

/// Enumerates `𝒜(s)`: neighbours of the current node (sorted), then reachable
/// frontier nodes that are not neighbours (sorted), then `STOP`.
pub fn candidates(state: &NavState, fs: &FeatureSpace) -> CandidateSet {
    let env = state.ctx.env;
    let current = state.progress.current();
    let mut actions = Vec::new();
    let mut routes = Vec::new();
    for &(n, _) in env.neighbors(current) {
        actions.push(NavAction::Move(n));
        routes.push(vec![n]);
    }
    let frontier = state.bank.frontier();
    if !frontier.is_empty() && state.bank.contains(current) {
        let tree = dijkstra(state.bank, current);
        for &f in frontier {
            if f == current || env.has_edge(current, f) {
                continue;
            }
            if let Some(path) = tree.path_to(f) {
                actions.push(NavAction::Move(f));
                routes.push(path[1..].to_vec());
            }
        }
    }
    actions.push(NavAction::Stop);
    routes.push(Vec::new());
    let features = actions.iter().map(|&a| features(state, fs, a)).collect();
    CandidateSet {
        actions,
        routes,
        features,
    }
}

/// Appends every node of `route` in order, applying the pointer rule at each.
pub fn step_semantics(ctx: &EpisodeContext, progress: &Progress, route: &[NodeIdx]) -> Progress {
    let mut next = progress.clone();
    for &v in route {
        next.arrive(ctx, v);
    }
    next
}

pub fn dot(theta: &[f64], phi: &[(usize, f64)]) -> f64 {
    phi.iter().map(|&(k, x)| theta[k] * x).sum()
}

pub fn logits(theta: &[f64], cands: &CandidateSet) -> Vec<f64> {
    cands.features.iter().map(|phi| dot(theta, phi)).collect()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn action_dist(theta: &[f64], cands: &CandidateSet) -> Vec<f64> {
    softmax(&logits(theta, cands))
}

/// Index of the first maximal entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Identifies a training pair: canonical sort key for batching.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub style: String,
    pub instr_id: String,
    pub step: usize,
}

/// A state (as its candidate set) labelled with the oracle action.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub key: PairKey,
    pub candidates: CandidateSet,
    pub target: NavAction,
}

/// Mean negative log-likelihood of the target actions and its gradient.
pub fn nll_grad(theta: &[f64], batch: &[TrainingPair]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; theta.len()];
    if batch.is_empty() {
        return Ok((0.0, grad));
    }
    let mut loss = 0.0;
    for pair in batch {
        let target = pair
            .candidates
            .position(pair.target)
            .ok_or_else(|| Error::InvalidAction {
                state: format!("{}@{}", pair.key.instr_id, pair.key.step),
                action: format!("{:?}", pair.target),
            })?;
        let z = logits(theta, &pair.candidates);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= z[target] - log_norm;
        for (phi, zk) in pair.candidates.features.iter().zip(&z) {
            let p = (zk - log_norm).exp();
            for &(k, x) in phi {
                grad[k] += p * x;
            }
        }
        for &(k, x) in &pair.candidates.features[target] {
            grad[k] -= x;
        }
    }
    let n = batch.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Shannon entropy of the action distribution, in nats.
pub fn entropy(theta: &[f64], cands: &CandidateSet) -> f64 {
    let probs = action_dist(theta, cands);
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Gradient of the entropy: `∇H = −Σ_a p_a (ln p_a + H) φ_a`.
pub fn entropy_grad(theta: &[f64], cands: &CandidateSet, grad: &mut [f64]) -> f64 {
    let z = logits(theta, cands);
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let log_p: Vec<f64> = z.iter().map(|v| v - log_norm).collect();
    let h: f64 = -log_p.iter().map(|lp| lp.exp() * lp).sum::<f64>();
    for (phi, lp) in cands.features.iter().zip(&log_p) {
        let coef = -lp.exp() * (lp + h);
        for &(k, x) in phi {
            grad[k] += coef * x;
        }
    }
    h
}

/// Mean entropy over `states` and its gradient.
pub fn mean_entropy_grad(theta: &[f64], states: &[CandidateSet]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; theta.len()];
    if states.is_empty() {
        return (0.0, grad);
    }
    let total: f64 = states.iter().map(|s| entropy_grad(theta, s, &mut grad)).sum();
    let n = states.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (total / n, grad)
}
