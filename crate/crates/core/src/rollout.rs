//! Episode execution: runs a policy until `STOP` or the step budget, keeps
//! the memory bank up to date, and records every decision.
//!
//! Steps are counted per node transition. A frontier move that crosses `k`
//! edges uses `k` steps of the budget; when the budget runs out the episode
//! ends at the node reached so far. With `T_max` steps the trajectory holds
//! at most `T_max` nodes and the last recorded action is always `STOP`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envgraph::{dijkstra, EnvGraph, NodeIdx, Topology};
use crate::error::{Error, Result};
use crate::membank::MemoryBank;
use crate::policy::{
    action_dist, argmax, candidates, sample_index, CandidateSet, EpisodeContext, NavAction, NavState, PairKey,
    PolicyParams, Progress, TrainingPair,
};
use crate::seeds::rng_for;
use crate::synthlang::{Instruction, StyleMap};

pub const DEFAULT_T_MAX: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Greedy,
    Sample(u64),
}

/// Picks an action index from a candidate set.
pub trait Chooser {
    fn choose(&mut self, state: &NavState, cands: &CandidateSet) -> usize;
}

impl<F: FnMut(&NavState, &CandidateSet) -> usize> Chooser for F {
    fn choose(&mut self, state: &NavState, cands: &CandidateSet) -> usize {
        self(state, cands)
    }
}

pub fn episode_rng(seed: u64, instr_id: &str) -> ChaCha8Rng {
    rng_for(seed, &format!("episode/{instr_id}"))
}

/// `π_θ` acting greedily or by sampling.
pub struct LinearActor<'p> {
    params: &'p PolicyParams,
    rng: Option<ChaCha8Rng>,
}

impl<'p> LinearActor<'p> {
    pub fn new(params: &'p PolicyParams, mode: Mode, instr_id: &str) -> Self {
        let rng = match mode {
            Mode::Greedy => None,
            Mode::Sample(seed) => Some(episode_rng(seed, instr_id)),
        };
        LinearActor { params, rng }
    }
}

impl Chooser for LinearActor<'_> {
    fn choose(&mut self, _state: &NavState, cands: &CandidateSet) -> usize {
        let probs = action_dist(&self.params.theta, cands);
        match &mut self.rng {
            None => argmax(&probs),
            Some(rng) => sample_index(&probs, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Primitive step index at which the decision was taken (1-based).
    pub step: usize,
    pub pointer: usize,
    pub candidates: CandidateSet,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub instruction: Instruction,
    pub trajectory: Vec<NodeIdx>,
    /// Primitive actions; `actions.len() == steps`.
    pub actions: Vec<NavAction>,
    pub decisions: Vec<Decision>,
    pub terminal: NodeIdx,
    pub steps: usize,
    pub truncated: bool,
}

impl Episode {
    pub fn start(&self) -> NodeIdx {
        self.trajectory[0]
    }

    /// Feedback trigger: fires at the terminal step and nowhere else.
    pub fn trigger(&self, t: usize) -> bool {
        t == self.steps
    }

    pub fn log(&self, env: &EnvGraph) -> EpisodeLog {
        EpisodeLog {
            instr_id: self.instruction.id.clone(),
            trajectory: env.ids_of(&self.trajectory),
            steps: self.steps,
            truncated: self.truncated,
            terminal: env.id(self.terminal).to_string(),
        }
    }
}

/// One line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub instr_id: String,
    pub trajectory: Vec<String>,
    #[serde(rename = "T")]
    pub steps: usize,
    pub truncated: bool,
    pub terminal: String,
}

/// Runs one episode with an arbitrary chooser, observing every visited node
/// into `bank`.
pub fn run_episode_with<C: Chooser>(
    chooser: &mut C,
    params: &PolicyParams,
    instr: &Instruction,
    style: &StyleMap,
    env: &EnvGraph,
    bank: &mut MemoryBank,
    t_max: usize,
) -> Result<Episode> {
    if t_max == 0 {
        return Err(Error::InvalidArgument("T_max must be positive".into()));
    }
    let fs = &params.feature_space;
    let ctx = EpisodeContext::new(env, fs, instr, style)?;
    bank.observe(env, ctx.start)?;
    let mut progress = Progress::start(&ctx);
    let mut actions = Vec::new();
    let mut decisions = Vec::new();
    let mut truncated = false;
    let mut t = 1;
    loop {
        if t == t_max {
            actions.push(NavAction::Stop);
            truncated = true;
            break;
        }
        let cands = {
            let state = NavState {
                ctx: &ctx,
                bank,
                progress: &progress,
            };
            let cands = candidates(&state, fs);
            let chosen = chooser.choose(&state, &cands);
            decisions.push(Decision {
                step: t,
                pointer: progress.pointer,
                candidates: cands,
                chosen,
            });
            decisions.last().expect("just pushed")
        };
        let chosen = cands.chosen;
        match cands.candidates.actions[chosen] {
            NavAction::Stop => {
                actions.push(NavAction::Stop);
                break;
            }
            NavAction::Move(_) => {
                let route = cands.candidates.routes[chosen].clone();
                for v in route {
                    if t == t_max {
                        break;
                    }
                    progress.arrive(&ctx, v);
                    bank.observe(env, v)?;
                    actions.push(NavAction::Move(v));
                    t += 1;
                }
            }
        }
    }
    let terminal = progress.current();
    Ok(Episode {
        instruction: instr.clone(),
        steps: actions.len(),
        trajectory: progress.trajectory,
        actions,
        decisions,
        terminal,
        truncated,
    })
}

/// Runs `π_θ` greedily or with a per-episode sampling stream derived from
/// `(seed, instruction id)`.
pub fn run_episode(
    params: &PolicyParams,
    instr: &Instruction,
    style: &StyleMap,
    env: &EnvGraph,
    bank: &mut MemoryBank,
    t_max: usize,
    mode: Mode,
) -> Result<Episode> {
    let mut actor = LinearActor::new(params, mode, &instr.id);
    run_episode_with(&mut actor, params, instr, style, env, bank, t_max)
}

/// Shortest-path expert toward a fixed target: next hop on a geodesic, or
/// `STOP` once there.
#[derive(Debug, Clone)]
pub struct Expert {
    target: NodeIdx,
    dist: Vec<f64>,
}

impl Expert {
    pub fn towards<G: Topology + ?Sized>(g: &G, target: NodeIdx) -> Self {
        Expert {
            target,
            dist: dijkstra(g, target).dist,
        }
    }

    pub fn target(&self) -> NodeIdx {
        self.target
    }

    pub fn action<G: Topology + ?Sized>(&self, g: &G, current: NodeIdx) -> Result<NavAction> {
        if current == self.target {
            return Ok(NavAction::Stop);
        }
        let mut best: Option<(f64, NodeIdx)> = None;
        for &(n, w) in g.neighbors(current) {
            let cost = w + self.dist[n];
            if cost.is_finite() && best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, n));
            }
        }
        best.map(|(_, n)| NavAction::Move(n)).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "target {} unreachable from {}",
                g.label(self.target),
                g.label(current)
            ))
        })
    }
}

struct DaggerChooser<'a> {
    params: &'a PolicyParams,
    env: &'a EnvGraph,
    expert: &'a Expert,
    beta: f64,
    coin: ChaCha8Rng,
    sampler: ChaCha8Rng,
    labels: Vec<(usize, NavAction, CandidateSet)>,
    error: Option<Error>,
}

impl Chooser for DaggerChooser<'_> {
    fn choose(&mut self, state: &NavState, cands: &CandidateSet) -> usize {
        let step = self.labels.len();
        let label = match self.expert.action(self.env, state.progress.current()) {
            Ok(a) => a,
            Err(e) => {
                self.error.get_or_insert(e);
                NavAction::Stop
            }
        };
        self.labels.push((step, label, cands.clone()));
        let use_expert = self.coin.gen::<f64>() < self.beta;
        if use_expert {
            cands.position(label).expect("expert moves along ground-truth edges")
        } else {
            sample_index(&action_dist(&self.params.theta, cands), &mut self.sampler)
        }
    }
}

/// DAgger rollout: at every decision the expert action is executed with
/// probability `beta`, otherwise a sample from `π_θ`; the expert label is
/// recorded for every visited state either way. With `beta = 0` the executed
/// trajectory equals `run_episode(.., Mode::Sample(seed))`.
#[allow(clippy::too_many_arguments)]
pub fn dagger_rollout(
    params: &PolicyParams,
    instr: &Instruction,
    style: &StyleMap,
    env: &EnvGraph,
    bank: &mut MemoryBank,
    beta: f64,
    expert: &Expert,
    seed: u64,
    t_max: usize,
) -> Result<(Episode, Vec<TrainingPair>)> {
    let mut chooser = DaggerChooser {
        params,
        env,
        expert,
        beta,
        coin: rng_for(seed, &format!("dagger/{}", instr.id)),
        sampler: episode_rng(seed, &instr.id),
        labels: Vec::new(),
        error: None,
    };
    let episode = run_episode_with(&mut chooser, params, instr, style, env, bank, t_max)?;
    if let Some(e) = chooser.error {
        return Err(e);
    }
    let pairs = chooser
        .labels
        .into_iter()
        .map(|(step, target, candidates)| TrainingPair {
            key: PairKey {
                style: instr.style.clone(),
                instr_id: instr.id.clone(),
                step,
            },
            candidates,
            target,
        })
        .collect();
    Ok((episode, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgraph::{default_landmark_vocab, generate_env, GenModel};
    use crate::policy::FeatureSpace;
    use crate::synthlang::{basic_style, generate_corpus};

    fn setup() -> (EnvGraph, PolicyParams, StyleMap, Vec<Instruction>) {
        let vocab = default_landmark_vocab();
        let env = generate_env(11, 40, GenModel::RandomGeometric, &vocab).unwrap();
        let params = PolicyParams::zeros(FeatureSpace::for_landmarks(&vocab), 0.1);
        let style = basic_style(&vocab);
        let corpus = generate_corpus(&env, &style, 3, "t", 10, (5, 7)).unwrap();
        (env, params, style, corpus)
    }

    #[test]
    fn always_stop_policy() {
        let (env, params, style, corpus) = setup();
        let mut bank = MemoryBank::new(&env);
        let mut stop = |_: &NavState, c: &CandidateSet| c.len() - 1;
        let ep = run_episode_with(&mut stop, &params, &corpus[0], &style, &env, &mut bank, 15).unwrap();
        assert_eq!(ep.steps, 1);
        assert_eq!(ep.trajectory, vec![env.index_of(&corpus[0].start).unwrap()]);
        assert!(!ep.truncated);
        assert_eq!((1..=ep.steps).filter(|&t| ep.trigger(t)).count(), 1);
    }

    #[test]
    fn never_stop_policy_truncates() {
        let (env, params, style, corpus) = setup();
        let mut bank = MemoryBank::new(&env);
        let mut wander = |_: &NavState, _: &CandidateSet| 0;
        let ep = run_episode_with(&mut wander, &params, &corpus[1], &style, &env, &mut bank, 15).unwrap();
        assert_eq!(ep.steps, 15);
        assert!(ep.truncated);
        assert_eq!(ep.actions.len(), ep.steps);
        assert_eq!(ep.trajectory.len(), 15);
        for w in ep.trajectory.windows(2) {
            assert!(env.has_edge(w[0], w[1]));
        }
    }

    #[test]
    fn scripted_oracle_follows_ground_truth() {
        let (env, params, style, corpus) = setup();
        for instr in &corpus {
            let gt = env.indices_of(&instr.gt_path).unwrap();
            let mut bank = MemoryBank::new(&env);
            let mut follow = |s: &NavState, c: &CandidateSet| {
                let k = s.progress.trajectory.len();
                let want = gt.get(k).map_or(NavAction::Stop, |&v| NavAction::Move(v));
                c.position(want).unwrap()
            };
            let ep = run_episode_with(&mut follow, &params, instr, &style, &env, &mut bank, 15).unwrap();
            assert_eq!(ep.trajectory, gt);
            assert_eq!(ep.terminal, env.index_of(&instr.goal).unwrap());
        }
    }

    #[test]
    fn dagger_beta_extremes() {
        let (env, mut params, style, corpus) = setup();
        for (k, t) in params.theta.iter_mut().enumerate() {
            *t = ((k * 37 % 11) as f64 - 5.0) * 0.2;
        }
        for instr in &corpus {
            let goal = env.index_of(&instr.goal).unwrap();
            let expert = Expert::towards(&env, goal);
            let gt = env.indices_of(&instr.gt_path).unwrap();

            let mut bank = MemoryBank::new(&env);
            let (ep, pairs) = dagger_rollout(&params, instr, &style, &env, &mut bank, 1.0, &expert, 5, 15).unwrap();
            assert_eq!(ep.trajectory, gt);
            let labels: Vec<NavAction> = pairs.iter().map(|p| p.target).collect();
            let mut want: Vec<NavAction> = gt[1..].iter().map(|&v| NavAction::Move(v)).collect();
            want.push(NavAction::Stop);
            assert_eq!(labels, want);

            let mut b1 = MemoryBank::new(&env);
            let (mixed, _) = dagger_rollout(&params, instr, &style, &env, &mut b1, 0.0, &expert, 5, 15).unwrap();
            let mut b2 = MemoryBank::new(&env);
            let sampled = run_episode(&params, instr, &style, &env, &mut b2, 15, Mode::Sample(5)).unwrap();
            assert_eq!(mixed.trajectory, sampled.trajectory);
            assert_eq!(b1, b2);
        }
    }
}
