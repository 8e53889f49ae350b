//! The agent's environment memory: discovered topology, per-node observation
//! cache and candidate map, persisted as JSON for warm starts.
//!
//! Visiting a node caches its landmark bag and reveals all of its
//! ground-truth neighbours. Nodes that are discovered but never visited form
//! the frontier.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envgraph::{EnvGraph, NodeIdx, Topology};
use crate::error::{Error, Result};

pub const BANK_VERSION: u64 = 1;

/// Bag-of-landmarks observation of a visited viewpoint, over the
/// environment's landmark vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsDescriptor {
    pub bag: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    env_name: String,
    vocab: Vec<String>,
    ids: Vec<String>,
    positions: Vec<[f64; 3]>,
    discovered: Vec<bool>,
    adj: Vec<Vec<(NodeIdx, f64)>>,
    cache: BTreeMap<NodeIdx, ObsDescriptor>,
    candidates: BTreeMap<NodeIdx, BTreeSet<NodeIdx>>,
    frontier: BTreeSet<NodeIdx>,
}

#[derive(Serialize, Deserialize)]
struct BankNode {
    id: String,
    pos: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    version: u64,
    env_name: String,
    nodes: Vec<BankNode>,
    edges: Vec<(String, String)>,
    cache: BTreeMap<String, ObsDescriptor>,
    candidates: BTreeMap<String, Vec<String>>,
}

fn observation(env: &EnvGraph, vocab: &[String], v: NodeIdx) -> ObsDescriptor {
    let mut bag = vec![0; vocab.len()];
    for lm in &env.node(v).landmarks {
        if let Ok(k) = vocab.binary_search(lm) {
            bag[k] += 1;
        }
    }
    ObsDescriptor { bag }
}

impl MemoryBank {
    /// An empty bank bound to `env`.
    pub fn new(env: &EnvGraph) -> Self {
        let n = env.len();
        MemoryBank {
            env_name: env.name().to_string(),
            vocab: env.landmark_vocab(),
            ids: env.nodes().iter().map(|v| v.id.clone()).collect(),
            positions: env.nodes().iter().map(|v| v.pos).collect(),
            discovered: vec![false; n],
            adj: vec![Vec::new(); n],
            cache: BTreeMap::new(),
            candidates: BTreeMap::new(),
            frontier: BTreeSet::new(),
        }
    }

    /// A bank that has visited every node of `env`.
    pub fn fully_explored(env: &EnvGraph) -> Self {
        let mut bank = Self::new(env);
        for v in 0..env.len() {
            bank.observe(env, v).expect("same environment");
        }
        bank
    }

    fn check_env(&self, env: &EnvGraph) -> Result<()> {
        if env.name() != self.env_name || env.len() != self.ids.len() {
            return Err(Error::EnvMismatch {
                expected: env.name().to_string(),
                found: self.env_name.clone(),
            });
        }
        Ok(())
    }

    fn add_edge(&mut self, u: NodeIdx, v: NodeIdx, w: f64) {
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adj[a];
            if let Err(k) = list.binary_search_by_key(&b, |&(n, _)| n) {
                list.insert(k, (b, w));
            }
        }
    }

    /// Visits `v`: caches its observation and records every ground-truth
    /// neighbour and connecting edge.
    pub fn observe(&mut self, env: &EnvGraph, v: NodeIdx) -> Result<()> {
        self.check_env(env)?;
        if v >= env.len() {
            return Err(Error::UnknownNode(format!("#{v}")));
        }
        self.discovered[v] = true;
        self.cache.insert(v, observation(env, &self.vocab, v));
        self.frontier.remove(&v);
        let seen = self.candidates.entry(v).or_default();
        for &(u, _) in env.neighbors(v) {
            seen.insert(u);
        }
        for &(u, w) in env.neighbors(v) {
            self.discovered[u] = true;
            self.add_edge(v, u, w);
            if !self.cache.contains_key(&u) {
                self.frontier.insert(u);
            }
        }
        Ok(())
    }

    pub fn env_name(&self) -> &str {
        &self.env_name
    }

    pub fn is_discovered(&self, u: NodeIdx) -> bool {
        self.discovered.get(u).copied().unwrap_or(false)
    }

    pub fn is_visited(&self, u: NodeIdx) -> bool {
        self.cache.contains_key(&u)
    }

    pub fn discovered_count(&self) -> usize {
        self.discovered.iter().filter(|d| **d).count()
    }

    pub fn visited_count(&self) -> usize {
        self.cache.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Discovered edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(NodeIdx, NodeIdx)> {
        let mut out = Vec::new();
        for (u, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().filter(|&&(v, _)| v > u).map(|&(v, _)| (u, v)));
        }
        out
    }

    pub fn discovered_nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.discovered.iter().enumerate().filter(|(_, d)| **d).map(|(u, _)| u)
    }

    pub fn visited_nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.cache.keys().copied()
    }

    pub fn cached(&self, u: NodeIdx) -> Option<&ObsDescriptor> {
        self.cache.get(&u)
    }

    pub fn candidates_of(&self, u: NodeIdx) -> Option<&BTreeSet<NodeIdx>> {
        self.candidates.get(&u)
    }

    /// Discovered-but-unvisited nodes, maintained incrementally.
    pub fn frontier(&self) -> &BTreeSet<NodeIdx> {
        &self.frontier
    }

    pub fn frontier_ids(&self) -> Vec<String> {
        self.frontier.iter().map(|&u| self.ids[u].clone()).collect()
    }

    /// Frontier recomputed from scratch; always equals [`Self::frontier`].
    pub fn recompute_frontier(&self) -> BTreeSet<NodeIdx> {
        self.discovered_nodes()
            .filter(|u| !self.cache.contains_key(u))
            .collect()
    }

    /// Fraction of environment viewpoints that have been visited.
    pub fn coverage(&self, env: &EnvGraph) -> f64 {
        self.cache.len() as f64 / env.len() as f64
    }

    pub fn to_json(&self) -> String {
        let file = BankFile {
            version: BANK_VERSION,
            env_name: self.env_name.clone(),
            nodes: self
                .discovered_nodes()
                .map(|u| BankNode {
                    id: self.ids[u].clone(),
                    pos: self.positions[u],
                })
                .collect(),
            edges: self
                .edges()
                .into_iter()
                .map(|(u, v)| (self.ids[u].clone(), self.ids[v].clone()))
                .collect(),
            cache: self
                .cache
                .iter()
                .map(|(&u, obs)| (self.ids[u].clone(), obs.clone()))
                .collect(),
            candidates: self
                .candidates
                .iter()
                .map(|(&u, set)| (self.ids[u].clone(), set.iter().map(|&v| self.ids[v].clone()).collect()))
                .collect(),
        };
        let mut s = serde_json::to_string(&file).expect("bank serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Parses a bank file and validates it against the session environment.
    pub fn from_json(text: &str, env: &EnvGraph) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Schema("missing integer field `version`".into()))?;
        if version != BANK_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: BANK_VERSION,
            });
        }
        let file: BankFile = serde_json::from_value(raw).map_err(|e| Error::Schema(e.to_string()))?;
        if file.env_name != env.name() {
            return Err(Error::EnvMismatch {
                expected: env.name().to_string(),
                found: file.env_name,
            });
        }
        let mut bank = MemoryBank::new(env);
        let lookup = |id: &str| {
            env.index_of(id)
                .map_err(|_| Error::Schema(format!("unknown viewpoint `{id}`")))
        };
        for node in &file.nodes {
            let u = lookup(&node.id)?;
            if node.pos != env.node(u).pos {
                return Err(Error::Schema(format!(
                    "position of `{}` disagrees with environment",
                    node.id
                )));
            }
            bank.discovered[u] = true;
        }
        for (a, b) in &file.edges {
            let (u, v) = (lookup(a)?, lookup(b)?);
            let w = env
                .edge_weight(u, v)
                .ok_or_else(|| Error::Schema(format!("edge ({a}, {b}) not in environment")))?;
            if !bank.discovered[u] || !bank.discovered[v] {
                return Err(Error::Schema(format!("edge ({a}, {b}) has undiscovered endpoint")));
            }
            bank.add_edge(u, v, w);
        }
        for (id, obs) in &file.cache {
            let u = lookup(id)?;
            if !bank.discovered[u] {
                return Err(Error::Schema(format!("cache entry for undiscovered `{id}`")));
            }
            if obs.bag.len() != bank.vocab.len() || obs.bag.iter().all(|&c| c == 0) {
                return Err(Error::Schema(format!("malformed observation bag for `{id}`")));
            }
            bank.cache.insert(u, obs.clone());
        }
        for (id, seen) in &file.candidates {
            let u = lookup(id)?;
            let mut set = BTreeSet::new();
            for n in seen {
                let v = lookup(n)?;
                if !bank.discovered[v] {
                    return Err(Error::Schema(format!("candidate `{n}` of `{id}` is undiscovered")));
                }
                set.insert(v);
            }
            bank.candidates.insert(u, set);
        }
        bank.frontier = bank.recompute_frontier();
        Ok(bank)
    }

    pub fn load(path: impl AsRef<Path>, env: &EnvGraph) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, env)
    }
}

impl Topology for MemoryBank {
    fn index_bound(&self) -> usize {
        self.ids.len()
    }

    fn contains(&self, u: NodeIdx) -> bool {
        self.is_discovered(u)
    }

    fn position(&self, u: NodeIdx) -> [f64; 3] {
        self.positions[u]
    }

    fn neighbors(&self, u: NodeIdx) -> &[(NodeIdx, f64)] {
        &self.adj[u]
    }

    fn label(&self, u: NodeIdx) -> String {
        self.ids.get(u).cloned().unwrap_or_else(|| format!("#{u}"))
    }
}
