//! Ground-truth environment: a connectivity graph of viewpoints with metric
//! positions and landmark tags, plus geodesic distances and A* search.
//!
//! Viewpoints are stored sorted by id, so a node index order is the same as
//! the lexicographic id order. Every tie-break that is "by smaller id" is
//! therefore a tie-break by smaller index.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::rng_for;

pub type NodeIdx = usize;

/// Spacing between neighbouring grid viewpoints, in meters.
pub const GRID_SPACING: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub id: String,
    pub pos: [f64; 3],
    pub landmarks: Vec<String>,
}

/// Anything A* and Dijkstra can run on: the ground-truth environment or the
/// agent's discovered subgraph. Node indices are shared with the environment.
pub trait Topology {
    /// Upper bound (exclusive) of node indices.
    fn index_bound(&self) -> usize;
    fn contains(&self, u: NodeIdx) -> bool;
    fn position(&self, u: NodeIdx) -> [f64; 3];
    /// Neighbours sorted by index, with edge weights.
    fn neighbors(&self, u: NodeIdx) -> &[(NodeIdx, f64)];
    fn label(&self, u: NodeIdx) -> String;
}

pub fn euclidean(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvGraph {
    name: String,
    nodes: Vec<Viewpoint>,
    edges: Vec<(NodeIdx, NodeIdx)>,
    adj: Vec<Vec<(NodeIdx, f64)>>,
    index: HashMap<String, NodeIdx>,
}

#[derive(Serialize, Deserialize)]
struct EnvFile {
    name: String,
    nodes: Vec<Viewpoint>,
    edges: Vec<(String, String)>,
}

impl EnvGraph {
    /// Builds and validates a graph. Nodes may come in any order; edges may be
    /// listed in either direction and more than once.
    pub fn new(name: impl Into<String>, mut nodes: Vec<Viewpoint>, edges: &[(String, String)]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("environment has no viewpoints".into()));
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateId(pair[0].id.clone()));
            }
        }
        for node in &mut nodes {
            node.landmarks.sort();
            node.landmarks.dedup();
            if node.landmarks.is_empty() {
                return Err(Error::EmptyLandmarks(node.id.clone()));
            }
        }
        let index: HashMap<String, NodeIdx> = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();

        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop(a.clone()));
            }
            let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) else {
                return Err(Error::DanglingEdge(a.clone(), b.clone()));
            };
            let w = euclidean(nodes[i].pos, nodes[j].pos);
            if w.is_nan() || w <= 0.0 {
                return Err(Error::ZeroLengthEdge(a.clone(), b.clone()));
            }
            edge_set.insert((i.min(j), i.max(j)));
        }
        let edges: Vec<_> = edge_set.into_iter().collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for &(i, j) in &edges {
            let w = euclidean(nodes[i].pos, nodes[j].pos);
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }

        let g = EnvGraph {
            name: name.into(),
            nodes,
            edges,
            adj,
            index,
        };
        g.check_connected()?;
        Ok(g)
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(u) => Err(Error::Disconnected(self.nodes[u].id.clone(), self.nodes[0].id.clone())),
            None => Ok(()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnvFile = serde_json::from_str(text)?;
        EnvGraph::new(file.name, file.nodes, &file.edges)
    }

    /// Canonical serialization: nodes sorted by id, each edge once with the
    /// smaller id first.
    pub fn to_json(&self) -> String {
        let file = EnvFile {
            name: self.name.clone(),
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(i, j)| (self.nodes[i].id.clone(), self.nodes[j].id.clone()))
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("environment serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Viewpoint] {
        &self.nodes
    }

    pub fn node(&self, u: NodeIdx) -> &Viewpoint {
        &self.nodes[u]
    }

    pub fn id(&self, u: NodeIdx) -> &str {
        &self.nodes[u].id
    }

    pub fn index_of(&self, id: &str) -> Result<NodeIdx> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn ids_of(&self, path: &[NodeIdx]) -> Vec<String> {
        path.iter().map(|&u| self.nodes[u].id.clone()).collect()
    }

    pub fn indices_of(&self, ids: &[String]) -> Result<Vec<NodeIdx>> {
        ids.iter().map(|id| self.index_of(id)).collect()
    }

    /// Undirected edges as index pairs `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(NodeIdx, NodeIdx)] {
        &self.edges
    }

    pub fn edge_weight(&self, u: NodeIdx, v: NodeIdx) -> Option<f64> {
        self.adj[u]
            .binary_search_by_key(&v, |&(n, _)| n)
            .ok()
            .map(|k| self.adj[u][k].1)
    }

    pub fn has_edge(&self, u: NodeIdx, v: NodeIdx) -> bool {
        self.edge_weight(u, v).is_some()
    }

    /// Sum of edge weights along `path`, or `None` if it uses a non-edge.
    pub fn path_weight(&self, path: &[NodeIdx]) -> Option<f64> {
        path.windows(2)
            .map(|w| self.edge_weight(w[0], w[1]))
            .sum::<Option<f64>>()
    }

    /// Sorted union of all landmark tokens present in the environment.
    pub fn landmark_vocab(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.nodes.iter().flat_map(|n| n.landmarks.iter()).collect();
        set.into_iter().cloned().collect()
    }
}

impl Topology for EnvGraph {
    fn index_bound(&self) -> usize {
        self.nodes.len()
    }

    fn contains(&self, u: NodeIdx) -> bool {
        u < self.nodes.len()
    }

    fn position(&self, u: NodeIdx) -> [f64; 3] {
        self.nodes[u].pos
    }

    fn neighbors(&self, u: NodeIdx) -> &[(NodeIdx, f64)] {
        &self.adj[u]
    }

    fn label(&self, u: NodeIdx) -> String {
        self.nodes.get(u).map_or_else(|| format!("#{u}"), |n| n.id.clone())
    }
}

/// Layout used by [`generate_env`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenModel {
    Grid,
    RandomGeometric,
}

impl fmt::Display for GenModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenModel::Grid => f.write_str("grid"),
            GenModel::RandomGeometric => f.write_str("random-geometric"),
        }
    }
}

impl std::str::FromStr for GenModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(GenModel::Grid),
            "random-geometric" | "rgg" => Ok(GenModel::RandomGeometric),
            other => Err(Error::InvalidArgument(format!("unknown generator model `{other}`"))),
        }
    }
}

/// Household-flavoured landmark vocabulary used when none is supplied.
pub fn default_landmark_vocab() -> Vec<String> {
    [
        "armchair",
        "bathtub",
        "bed",
        "bookshelf",
        "cabinet",
        "chair",
        "clock",
        "couch",
        "desk",
        "door",
        "dresser",
        "fireplace",
        "fridge",
        "lamp",
        "mirror",
        "painting",
        "piano",
        "plant",
        "rug",
        "sink",
        "stairs",
        "table",
        "tv",
        "window",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Generates a connected synthetic environment. Identical arguments always
/// produce identical graphs.
///
/// * `Grid`: row-major grid with `ceil(sqrt(n))` columns, 4-neighbour edges,
///   [`GRID_SPACING`] meters apart.
/// * `RandomGeometric`: uniform positions in a square of side `2·sqrt(n)` m; a
///   random nearest-neighbour spanning tree first, then the `2n` shortest
///   pairs (mean degree about 4).
pub fn generate_env(seed: u64, n_nodes: usize, model: GenModel, landmark_vocab: &[String]) -> Result<EnvGraph> {
    if n_nodes < 2 {
        return Err(Error::InvalidArgument(format!("n_nodes must be >= 2, got {n_nodes}")));
    }
    if landmark_vocab.is_empty() {
        return Err(Error::InvalidArgument("landmark vocabulary is empty".into()));
    }
    let mut rng = rng_for(seed, &format!("env/{model}/{n_nodes}"));
    let width = (n_nodes - 1).to_string().len();
    let ids: Vec<String> = (0..n_nodes).map(|k| format!("v{k:0width$}")).collect();

    let (positions, edges) = match model {
        GenModel::Grid => {
            let cols = (n_nodes as f64).sqrt().ceil() as usize;
            let positions: Vec<[f64; 3]> = (0..n_nodes)
                .map(|k| [(k % cols) as f64 * GRID_SPACING, (k / cols) as f64 * GRID_SPACING, 0.0])
                .collect();
            let mut edges = Vec::new();
            for k in 0..n_nodes {
                if (k + 1) % cols != 0 && k + 1 < n_nodes {
                    edges.push((k, k + 1));
                }
                if k + cols < n_nodes {
                    edges.push((k, k + cols));
                }
            }
            (positions, edges)
        }
        GenModel::RandomGeometric => {
            let side = 2.0 * (n_nodes as f64).sqrt();
            let min_sep = 0.75;
            let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n_nodes);
            while positions.len() < n_nodes {
                let mut candidate = [0.0; 3];
                for _ in 0..1000 {
                    candidate = [rng.gen::<f64>() * side, rng.gen::<f64>() * side, 0.0];
                    if positions.iter().all(|&p| euclidean(p, candidate) >= min_sep) {
                        break;
                    }
                }
                positions.push(candidate);
            }
            let mut order: Vec<usize> = (0..n_nodes).collect();
            order.shuffle(&mut rng);
            let mut edges = BTreeSet::new();
            for k in 1..n_nodes {
                let u = order[k];
                let nearest = order[..k]
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        euclidean(positions[u], positions[a])
                            .total_cmp(&euclidean(positions[u], positions[b]))
                            .then(a.cmp(&b))
                    })
                    .expect("k >= 1");
                edges.insert((u.min(nearest), u.max(nearest)));
            }
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for i in 0..n_nodes {
                for j in i + 1..n_nodes {
                    pairs.push((euclidean(positions[i], positions[j]), i, j));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            for &(_, i, j) in pairs.iter().take(2 * n_nodes) {
                edges.insert((i, j));
            }
            (positions, edges.into_iter().collect())
        }
    };

    let max_landmarks = landmark_vocab.len().min(3);
    let nodes: Vec<Viewpoint> = ids
        .iter()
        .zip(&positions)
        .map(|(id, &pos)| {
            let k = rng.gen_range(1..=max_landmarks);
            let landmarks = landmark_vocab.choose_multiple(&mut rng, k).cloned().collect();
            Viewpoint {
                id: id.clone(),
                pos,
                landmarks,
            }
        })
        .collect();
    let edge_ids: Vec<(String, String)> = edges.iter().map(|&(i, j)| (ids[i].clone(), ids[j].clone())).collect();
    EnvGraph::new(format!("{model}-s{seed}-n{n_nodes}"), nodes, &edge_ids)
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    key: f64,
    node: NodeIdx,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // Reversed so that BinaryHeap pops the smallest key, then smallest index.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths. Unreachable nodes have distance `INFINITY`.
pub struct ShortestPaths {
    pub dist: Vec<f64>,
    pub pred: Vec<Option<NodeIdx>>,
}

impl ShortestPaths {
    /// Path from the source to `dst`, inclusive; `None` if unreachable.
    pub fn path_to(&self, dst: NodeIdx) -> Option<Vec<NodeIdx>> {
        if !self.dist.get(dst)?.is_finite() {
            return None;
        }
        let mut path = vec![dst];
        let mut cur = dst;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

pub fn dijkstra<G: Topology + ?Sized>(g: &G, src: NodeIdx) -> ShortestPaths {
    let n = g.index_bound();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut heap = BinaryHeap::new();
    if g.contains(src) {
        dist[src] = 0.0;
        heap.push(HeapEntry { key: 0.0, node: src });
    }
    while let Some(HeapEntry { key, node }) = heap.pop() {
        if key > dist[node] {
            continue;
        }
        for &(v, w) in g.neighbors(node) {
            let nd = key + w;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(node);
                heap.push(HeapEntry { key: nd, node: v });
            }
        }
    }
    ShortestPaths { dist, pred }
}

/// Minimum-weight path `src → dst` (inclusive) using the straight-line
/// distance to `dst` as heuristic. At equal f-score the smaller node id is
/// expanded first. Returns `Ok(None)` when `dst` is absent or unreachable.
pub fn astar_path<G: Topology + ?Sized>(g: &G, src: NodeIdx, dst: NodeIdx) -> Result<Option<Vec<NodeIdx>>> {
    if src >= g.index_bound() || !g.contains(src) {
        return Err(Error::UnknownNode(g.label(src)));
    }
    if dst >= g.index_bound() || !g.contains(dst) {
        return Ok(None);
    }
    let target = g.position(dst);
    let h = |u: NodeIdx| euclidean(g.position(u), target);

    let n = g.index_bound();
    let mut best = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<NodeIdx>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    best[src] = 0.0;
    heap.push(HeapEntry { key: h(src), node: src });
    while let Some(HeapEntry { key, node }) = heap.pop() {
        if key > best[node] + h(node) {
            continue;
        }
        if node == dst {
            let mut path = vec![dst];
            let mut cur = dst;
            while let Some(p) = pred[cur] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for &(v, w) in g.neighbors(node) {
            let cost = best[node] + w;
            if cost < best[v] {
                best[v] = cost;
                pred[v] = Some(node);
                heap.push(HeapEntry {
                    key: cost + h(v),
                    node: v,
                });
            }
        }
    }
    Ok(None)
}

/// All-pairs geodesic distances of an environment, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoTable {
    n: usize,
    dist: Vec<f64>,
}

impl GeoTable {
    pub fn new(g: &EnvGraph) -> Self {
        let n = g.len();
        let mut dist = vec![0.0; n * n];
        for u in 0..n {
            let sp = dijkstra(g, u);
            dist[u * n..(u + 1) * n].copy_from_slice(&sp.dist);
        }
        // Symmetrize: the two directions may differ in the last ulp.
        for u in 0..n {
            for v in u + 1..n {
                let d = dist[u * n + v].min(dist[v * n + u]);
                dist[u * n + v] = d;
                dist[v * n + u] = d;
            }
        }
        GeoTable { n, dist }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dist(&self, u: NodeIdx, v: NodeIdx) -> f64 {
        self.dist[u * self.n + v]
    }
}

/// Geodesic distance between two viewpoints given by id.
pub fn geodesic(g: &EnvGraph, u: &str, v: &str) -> Result<f64> {
    let (u, v) = (g.index_of(u)?, g.index_of(v)?);
    if u == v {
        return Ok(0.0);
    }
    Ok(dijkstra(g, u).dist[v])
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use super::*;

    /// Unit-spaced line a–b–c–… along the x axis.
    pub fn line(n: usize) -> EnvGraph {
        let ids: Vec<String> = (0..n).map(|k| ((b'a' + k as u8) as char).to_string()).collect();
        let nodes = ids
            .iter()
            .enumerate()
            .map(|(k, id)| Viewpoint {
                id: id.clone(),
                pos: [k as f64, 0.0, 0.0],
                landmarks: vec![format!("lm{}", k % 3)],
            })
            .collect();
        let edges: Vec<(String, String)> = ids.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        EnvGraph::new("line", nodes, &edges).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_graphs::line;
    use super::*;

    fn vp(id: &str, x: f64) -> Viewpoint {
        Viewpoint {
            id: id.into(),
            pos: [x, 0.0, 0.0],
            landmarks: vec!["door".into()],
        }
    }

    fn e(a: &str, b: &str) -> (String, String) {
        (a.into(), b.into())
    }

    #[test]
    fn loads_minimal_line() {
        let text = r#"{"name":"l","nodes":[
            {"id":"c","pos":[2,0,0],"landmarks":["sink"]},
            {"id":"a","pos":[0,0,0],"landmarks":["door"]},
            {"id":"b","pos":[1,0,0],"landmarks":["bed"]}],
            "edges":[["b","a"],["b","c"]]}"#;
        let g = EnvGraph::from_json(text).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.id(0), "a");
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let nodes = vec![vp("a", 0.0), vp("b", 1.0)];
        assert!(matches!(
            EnvGraph::new("x", nodes.clone(), &[e("a", "a")]),
            Err(Error::SelfLoop(id)) if id == "a"
        ));
        assert!(matches!(
            EnvGraph::new("x", nodes.clone(), &[e("a", "z")]),
            Err(Error::DanglingEdge(_, b)) if b == "z"
        ));
        assert!(matches!(
            EnvGraph::new("x", vec![vp("a", 0.0), vp("a", 1.0)], &[]),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            EnvGraph::new("x", nodes.clone(), &[]),
            Err(Error::Disconnected(_, _))
        ));
        assert!(matches!(
            EnvGraph::new("x", vec![vp("a", 0.0), vp("b", 0.0)], &[e("a", "b")]),
            Err(Error::ZeroLengthEdge(_, _))
        ));
        let mut bare = vp("c", 3.0);
        bare.landmarks.clear();
        assert!(matches!(
            EnvGraph::new("x", vec![vp("a", 0.0), bare], &[e("a", "c")]),
            Err(Error::EmptyLandmarks(_))
        ));
        assert!(matches!(EnvGraph::from_json("{not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn grid_counts_and_determinism() {
        let vocab = default_landmark_vocab();
        let g = generate_env(1, 9, GenModel::Grid, &vocab).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.edges().len(), 12);
        let again = generate_env(1, 9, GenModel::Grid, &vocab).unwrap();
        assert_eq!(g.to_json(), again.to_json());
        let other = generate_env(2, 9, GenModel::Grid, &vocab).unwrap();
        assert_ne!(g.to_json(), other.to_json());
        for n in g.nodes() {
            assert!((1..=3).contains(&n.landmarks.len()));
        }
    }

    #[test]
    fn random_geometric_is_connected_with_moderate_degree() {
        let vocab = default_landmark_vocab();
        for seed in 0..5 {
            let g = generate_env(seed, 60, GenModel::RandomGeometric, &vocab).unwrap();
            let mean_degree = 2.0 * g.edges().len() as f64 / g.len() as f64;
            assert!((3.5..=5.5).contains(&mean_degree), "mean degree {mean_degree}");
            let side = 2.0 * 60f64.sqrt();
            for n in g.nodes() {
                assert!(n.pos.iter().all(|&c| (0.0..=side).contains(&c)));
            }
        }
    }

    #[test]
    fn generator_preconditions() {
        let vocab = default_landmark_vocab();
        assert!(generate_env(1, 1, GenModel::Grid, &vocab).is_err());
        assert!(generate_env(1, 5, GenModel::Grid, &[]).is_err());
    }

    #[test]
    fn geodesic_on_line() {
        let g = line(3);
        assert_eq!(geodesic(&g, "a", "c").unwrap(), 2.0);
        assert_eq!(geodesic(&g, "a", "a").unwrap(), 0.0);
        assert!(matches!(geodesic(&g, "a", "q"), Err(Error::UnknownNode(_))));
        let geo = GeoTable::new(&g);
        assert_eq!(geo.dist(0, 2), 2.0);
    }

    #[test]
    fn astar_trivial_cases() {
        let g = line(4);
        assert_eq!(astar_path(&g, 1, 1).unwrap(), Some(vec![1]));
        assert_eq!(astar_path(&g, 0, 3).unwrap(), Some(vec![0, 1, 2, 3]));
        assert!(astar_path(&g, 9, 0).is_err());
        assert_eq!(astar_path(&g, 0, 9).unwrap(), None);
    }

    #[test]
    fn astar_breaks_ties_by_smaller_id() {
        // Square a-b-d, a-c-d with equal weights: both routes cost 2.
        let nodes = vec![
            Viewpoint {
                id: "a".into(),
                pos: [0.0, 0.0, 0.0],
                landmarks: vec!["x".into()],
            },
            Viewpoint {
                id: "b".into(),
                pos: [1.0, 0.0, 0.0],
                landmarks: vec!["x".into()],
            },
            Viewpoint {
                id: "c".into(),
                pos: [0.0, 1.0, 0.0],
                landmarks: vec!["x".into()],
            },
            Viewpoint {
                id: "d".into(),
                pos: [1.0, 1.0, 0.0],
                landmarks: vec!["x".into()],
            },
        ];
        let g = EnvGraph::new("sq", nodes, &[e("a", "b"), e("a", "c"), e("b", "d"), e("c", "d")]).unwrap();
        assert_eq!(astar_path(&g, 0, 3).unwrap(), Some(vec![0, 1, 3]));
        assert_eq!(astar_path(&g, 3, 0).unwrap(), Some(vec![3, 1, 0]));
    }

    #[test]
    fn json_round_trip_is_canonical() {
        let g = generate_env(4, 12, GenModel::RandomGeometric, &default_landmark_vocab()).unwrap();
        let text = g.to_json();
        let back = EnvGraph::from_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), text);
    }
}
