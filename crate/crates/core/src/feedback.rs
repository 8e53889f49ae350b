//! Episode-level feedback and its lifting into trajectory supervision.
//!
//! After each episode the user either confirms the stop or names the
//! correct goal. The endpoint is connected to the episode start by A* on
//! the agent's discovered graph, and the resulting path is kept only when
//! its node count falls inside the configured bounds.

use serde::{Deserialize, Serialize};

use crate::envgraph::{astar_path, EnvGraph, NodeIdx};
use crate::error::Result;
use crate::membank::MemoryBank;
use crate::rollout::Episode;
use crate::synthlang::Instruction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    Corrected,
    Confirmed,
}

/// The user's answer: the true goal when the agent stopped elsewhere, the
/// agent's own stop otherwise.
pub fn feedback_fn(terminal: NodeIdx, goal: NodeIdx) -> (NodeIdx, EndpointKind) {
    if terminal != goal {
        (goal, EndpointKind::Corrected)
    } else {
        (terminal, EndpointKind::Confirmed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub session: String,
    pub style: String,
    pub episode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSample {
    pub instruction: Instruction,
    pub tau_plus: Vec<NodeIdx>,
    pub kind: EndpointKind,
    pub provenance: Provenance,
}

impl FeedbackSample {
    pub fn record(&self, env: &EnvGraph) -> FeedbackRecord {
        FeedbackRecord {
            instr_id: self.instruction.id.clone(),
            tokens: self.instruction.tokens.clone(),
            tau_plus: env.ids_of(&self.tau_plus),
            kind: self.kind,
            session: self.provenance.session.clone(),
            style: self.provenance.style.clone(),
        }
    }
}

/// One line of an adaptation-dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub instr_id: String,
    pub tokens: Vec<String>,
    pub tau_plus: Vec<String>,
    pub kind: EndpointKind,
    pub session: String,
    pub style: String,
}

/// Connects the episode start to `endpoint` on the discovered graph.
/// `Ok(None)` when the endpoint is undiscovered or unreachable there.
pub fn lift(ep: &Episode, endpoint: NodeIdx, kind: EndpointKind, bank: &MemoryBank) -> Result<Option<FeedbackSample>> {
    let path = astar_path(bank, ep.start(), endpoint)?;
    Ok(path.map(|tau_plus| FeedbackSample {
        instruction: ep.instruction.clone(),
        tau_plus,
        kind,
        provenance: Provenance {
            session: String::new(),
            style: ep.instruction.style.clone(),
            episode: 0,
        },
    }))
}

/// Node-count bounds for corrected trajectories, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LengthFilter {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for LengthFilter {
    fn default() -> Self {
        LengthFilter { min_len: 5, max_len: 7 }
    }
}

impl LengthFilter {
    pub fn keeps_len(&self, nodes: usize) -> bool {
        (self.min_len..=self.max_len).contains(&nodes)
    }

    pub fn keeps(&self, sample: &FeedbackSample) -> bool {
        self.keeps_len(sample.tau_plus.len())
    }
}

/// Append-only collection of lifted samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptDataset {
    samples: Vec<FeedbackSample>,
}

impl AdaptDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: FeedbackSample) {
        self.samples.push(sample);
    }

    pub fn samples(&self) -> &[FeedbackSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> AdaptDataset {
        AdaptDataset {
            samples: self.samples.iter().take(n).cloned().collect(),
        }
    }

    /// Union of several datasets in the given order.
    pub fn union<'a>(parts: impl IntoIterator<Item = &'a AdaptDataset>) -> AdaptDataset {
        AdaptDataset {
            samples: parts.into_iter().flat_map(|d| d.samples.iter().cloned()).collect(),
        }
    }

    pub fn records(&self, env: &EnvGraph) -> Vec<FeedbackRecord> {
        self.samples.iter().map(|s| s.record(env)).collect()
    }
}

/// Partition of processed episodes; the four counts sum to the episode count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackStats {
    pub confirmed: usize,
    pub corrected: usize,
    pub infeasible: usize,
    pub rejected: usize,
}

impl FeedbackStats {
    pub fn episodes(&self) -> usize {
        self.confirmed + self.corrected + self.infeasible + self.rejected
    }

    pub fn kept(&self) -> usize {
        self.confirmed + self.corrected
    }

    /// Rejected share of the successfully lifted samples.
    pub fn rejection_rate(&self) -> f64 {
        let lifted = self.kept() + self.rejected;
        if lifted == 0 {
            0.0
        } else {
            self.rejected as f64 / lifted as f64
        }
    }

    /// Share of episodes whose endpoint could be lifted at all.
    pub fn feasibility_rate(&self) -> f64 {
        let n = self.episodes();
        if n == 0 {
            0.0
        } else {
            (n - self.infeasible) as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Kept(EndpointKind),
    Infeasible,
    Rejected,
}

/// Streams episodes through feedback, lifting and filtering, one at a time,
/// against the bank as it stands when each episode ends.
#[derive(Debug, Clone)]
pub struct FeedbackCollector {
    pub filter: LengthFilter,
    pub session: String,
    pub dataset: AdaptDataset,
    pub stats: FeedbackStats,
}

impl FeedbackCollector {
    pub fn new(session: impl Into<String>, filter: LengthFilter) -> Self {
        FeedbackCollector {
            filter,
            session: session.into(),
            dataset: AdaptDataset::new(),
            stats: FeedbackStats::default(),
        }
    }

    pub fn process(&mut self, env: &EnvGraph, ep: &Episode, bank: &MemoryBank) -> Result<Outcome> {
        let goal = env.index_of(&ep.instruction.goal)?;
        let (endpoint, kind) = feedback_fn(ep.terminal, goal);
        let episode = self.stats.episodes();
        let outcome = match lift(ep, endpoint, kind, bank)? {
            None => {
                self.stats.infeasible += 1;
                Outcome::Infeasible
            }
            Some(sample) if !self.filter.keeps(&sample) => {
                self.stats.rejected += 1;
                Outcome::Rejected
            }
            Some(mut sample) => {
                match kind {
                    EndpointKind::Confirmed => self.stats.confirmed += 1,
                    EndpointKind::Corrected => self.stats.corrected += 1,
                }
                sample.provenance = Provenance {
                    session: self.session.clone(),
                    style: ep.instruction.style.clone(),
                    episode,
                };
                self.dataset.push(sample);
                Outcome::Kept(kind)
            }
        };
        Ok(outcome)
    }
}

/// Batch form: every episode is lifted against the same bank snapshot.
pub fn collect(
    env: &EnvGraph,
    episodes: &[Episode],
    bank: &MemoryBank,
    filter: LengthFilter,
    session: &str,
) -> Result<(AdaptDataset, FeedbackStats)> {
    let mut collector = FeedbackCollector::new(session, filter);
    for ep in episodes {
        collector.process(env, ep, bank)?;
    }
    Ok((collector.dataset, collector.stats))
}
