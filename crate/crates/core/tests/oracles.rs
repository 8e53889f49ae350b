//! Library results checked against independent brute-force computations.

use fbnav::envgraph::{
    astar_path, default_landmark_vocab, dijkstra, generate_env, geodesic, EnvGraph, GenModel, GeoTable, NodeIdx,
    Topology, Viewpoint,
};
use fbnav::feedback::{lift, EndpointKind};
use fbnav::membank::MemoryBank;
use fbnav::policy::{
    action_dist, argmax, candidates, entropy, features, logits, nll_grad, EpisodeContext, FeatureSpace, NavAction,
    NavState, PairKey, PolicyParams, Progress, TrainingPair,
};
use fbnav::rollout::{dagger_rollout, run_episode, Episode, Expert, Mode};
use fbnav::synthlang::{basic_style, generate_corpus, Instruction};

/// Floyd–Warshall all-pairs distances.
fn floyd(g: &EnvGraph) -> Vec<Vec<f64>> {
    let n = g.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = 0.0;
        for &(v, w) in g.neighbors(u) {
            row[v] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

fn vocab() -> Vec<String> {
    default_landmark_vocab()
}

#[test]
fn geodesics_match_all_pairs_oracle() {
    let g = generate_env(3, 20, GenModel::RandomGeometric, &vocab()).unwrap();
    let geo = GeoTable::new(&g);
    let oracle = floyd(&g);
    for (u, row) in oracle.iter().enumerate() {
        for (v, &d) in row.iter().enumerate() {
            assert!(close(geo.dist(u, v), d), "{u}->{v}");
            assert_eq!(geo.dist(u, v), geo.dist(v, u));
            assert!(close(geodesic(&g, g.id(u), g.id(v)).unwrap(), geo.dist(u, v)));
        }
    }
}

#[test]
fn astar_matches_dijkstra_weights() {
    let mut count = 0;
    for seed in 0..25u64 {
        let model = if seed % 5 == 0 {
            GenModel::Grid
        } else {
            GenModel::RandomGeometric
        };
        let g = generate_env(seed, 12 + (seed as usize * 7) % 40, model, &vocab()).unwrap();
        for k in 0..4 {
            let s = (seed as usize * 13 + k * 7) % g.len();
            let t = (seed as usize * 5 + k * 11 + 3) % g.len();
            let path = astar_path(&g, s, t).unwrap().unwrap();
            assert_eq!(g.path_weight(&path).unwrap(), dijkstra(&g, s).dist[t]);
            count += 1;
        }
    }
    assert_eq!(count, 100);
}

#[test]
fn grid_instructions_follow_shortest_paths() {
    let g = generate_env(1, 25, GenModel::Grid, &vocab()).unwrap();
    let oracle = floyd(&g);
    let style = basic_style(&vocab());
    let corpus = generate_corpus(&g, &style, 9, "grid", 500, (5, 7)).unwrap();
    for instr in &corpus {
        let path = g.indices_of(&instr.gt_path).unwrap();
        assert!((5..=7).contains(&path.len()));
        assert_eq!(instr.tokens.len(), path.len());
        let (s, t) = (path[0], *path.last().unwrap());
        assert!(close(g.path_weight(&path).unwrap(), oracle[s][t]));
        for (tok, &v) in instr.tokens.iter().zip(&path) {
            assert!(g.node(v).landmarks.contains(tok));
        }
    }
}

fn stub_episode(g: &EnvGraph, start: NodeIdx) -> Episode {
    Episode {
        instruction: Instruction {
            id: "stub".into(),
            style: "basic".into(),
            tokens: vec![g.node(start).landmarks[0].clone()],
            start: g.id(start).to_string(),
            goal: g.id(start).to_string(),
            gt_path: vec![g.id(start).to_string()],
        },
        trajectory: vec![start],
        actions: vec![NavAction::Stop],
        decisions: vec![],
        terminal: start,
        steps: 1,
        truncated: false,
    }
}

#[test]
fn lifting_on_explored_graph_is_a_shortest_path() {
    let g = generate_env(8, 30, GenModel::RandomGeometric, &vocab()).unwrap();
    let bank = MemoryBank::fully_explored(&g);
    let oracle = floyd(&g);
    for s in (0..g.len()).step_by(3) {
        let ep = stub_episode(&g, s);
        for (t, &d) in oracle[s].iter().enumerate() {
            let sample = lift(&ep, t, EndpointKind::Corrected, &bank).unwrap().unwrap();
            assert!(close(g.path_weight(&sample.tau_plus).unwrap(), d));
        }
    }
}

#[test]
fn lifting_is_optimal_on_the_discovered_graph() {
    let g = generate_env(12, 40, GenModel::RandomGeometric, &vocab()).unwrap();
    let mut bank = MemoryBank::new(&g);
    for v in [0, 5, 9, 14, 22, 31] {
        bank.observe(&g, v).unwrap();
    }
    let ep = stub_episode(&g, 0);
    let tree = dijkstra(&bank, 0);
    for t in 0..g.len() {
        match lift(&ep, t, EndpointKind::Corrected, &bank).unwrap() {
            Some(sample) => {
                let path = &sample.tau_plus;
                for w in path.windows(2) {
                    assert!(Topology::neighbors(&bank, w[0]).iter().any(|&(n, _)| n == w[1]));
                    assert!(g.has_edge(w[0], w[1]));
                }
                assert!(close(g.path_weight(path).unwrap(), tree.dist[t]));
            }
            None => assert!(tree.dist[t].is_infinite()),
        }
    }
}

/// a–b–c–d–e line plus a detour node f hanging off b.
fn five_plus_one() -> EnvGraph {
    let spots = [
        ("a", [0.0, 0.0], "door"),
        ("b", [1.0, 0.0], "sink"),
        ("c", [2.0, 0.0], "bed"),
        ("d", [3.0, 0.0], "lamp"),
        ("e", [4.0, 0.0], "door"),
        ("f", [1.0, 1.0], "lamp"),
    ];
    let nodes = spots
        .iter()
        .map(|&(id, [x, y], lm)| Viewpoint {
            id: id.into(),
            pos: [x, y, 0.0],
            landmarks: vec![lm.into()],
        })
        .collect();
    let edges: Vec<(String, String)> = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("b", "f")]
        .iter()
        .map(|&(a, b)| (a.to_string(), b.to_string()))
        .collect();
    EnvGraph::new("five", nodes, &edges).unwrap()
}

fn instruction(tokens: &[&str], start: &str, goal: &str) -> Instruction {
    Instruction {
        id: "i".into(),
        style: "basic".into(),
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        start: start.into(),
        goal: goal.into(),
        gt_path: vec![],
    }
}

#[test]
fn candidate_enumeration_matches_oracle() {
    let g = five_plus_one();
    let lms = g.landmark_vocab();
    let fs = FeatureSpace::for_landmarks(&lms);
    let style = basic_style(&lms);
    let instr = instruction(&["sink", "bed", "lamp"], "b", "d");
    let ctx = EpisodeContext::new(&g, &fs, &instr, &style).unwrap();
    let mut bank = MemoryBank::new(&g);
    for v in [0, 1, 2] {
        bank.observe(&g, v).unwrap();
    }
    let mut progress = Progress::start(&ctx);
    progress.arrive(&ctx, 2);
    let state = NavState {
        ctx: &ctx,
        bank: &bank,
        progress: &progress,
    };
    let cands = candidates(&state, &fs);
    // Oracle: neighbours of c, then discovered-unvisited nodes not adjacent
    // to c, then STOP.
    let mut expected: Vec<NavAction> = g.neighbors(2).iter().map(|&(n, _)| NavAction::Move(n)).collect();
    for u in 0..g.len() {
        if bank.is_discovered(u) && !bank.is_visited(u) && !g.has_edge(2, u) && u != 2 {
            expected.push(NavAction::Move(u));
        }
    }
    expected.push(NavAction::Stop);
    assert_eq!(cands.actions, expected);
    for (a, phi) in cands.actions.iter().zip(&cands.features) {
        assert_eq!(cands.actions.iter().filter(|b| *b == a).count(), 1);
        assert_eq!(phi, &features(&state, &fs, *a));
    }
    // f is reached through b: two nodes appended by the frontier move.
    let k = cands.position(NavAction::Move(5)).unwrap();
    assert_eq!(cands.routes[k], vec![1, 5]);
}

#[test]
fn frontier_move_through_two_intermediates() {
    let g = five_plus_one();
    let lms = g.landmark_vocab();
    let fs = FeatureSpace::for_landmarks(&lms);
    let style = basic_style(&lms);
    let instr = instruction(&["door", "lamp"], "a", "f");
    let ctx = EpisodeContext::new(&g, &fs, &instr, &style).unwrap();
    let mut bank = MemoryBank::new(&g);
    for v in [0, 1, 2, 3] {
        bank.observe(&g, v).unwrap();
    }
    let mut progress = Progress::start(&ctx);
    for v in [1, 2, 3] {
        progress.arrive(&ctx, v);
    }
    let state = NavState {
        ctx: &ctx,
        bank: &bank,
        progress: &progress,
    };
    let cands = candidates(&state, &fs);
    let k = cands.position(NavAction::Move(5)).unwrap();
    let next = fbnav::policy::step_semantics(&ctx, &progress, &cands.routes[k]);
    assert_eq!(next.trajectory.len(), progress.trajectory.len() + 3);
    assert_eq!(&next.trajectory[progress.trajectory.len()..], &[2, 1, 5]);
}

fn pair(cands: fbnav::policy::CandidateSet, target: NavAction, step: usize) -> TrainingPair {
    TrainingPair {
        key: PairKey {
            style: "basic".into(),
            instr_id: "i".into(),
            step,
        },
        candidates: cands,
        target,
    }
}

#[test]
fn loss_and_entropy_closed_forms() {
    let g = five_plus_one();
    let lms = g.landmark_vocab();
    let fs = FeatureSpace::for_landmarks(&lms);
    let style = basic_style(&lms);
    let instr = instruction(&["sink", "bed"], "a", "c");
    let ctx = EpisodeContext::new(&g, &fs, &instr, &style).unwrap();
    let bank = MemoryBank::fully_explored(&g);
    let progress = Progress::start(&ctx);
    let state = NavState {
        ctx: &ctx,
        bank: &bank,
        progress: &progress,
    };
    let cands = candidates(&state, &fs);
    let k = cands.len() as f64;
    let zero = vec![0.0; fs.dim()];
    let single = vec![pair(cands.clone(), NavAction::Move(1), 0)];
    let (loss, _) = nll_grad(&zero, &single).unwrap();
    assert!((loss - k.ln()).abs() < 1e-12);
    assert!((entropy(&zero, &cands) - k.ln()).abs() < 1e-12);

    let theta: Vec<f64> = (0..fs.dim()).map(|i| ((i * 37) % 11) as f64 / 7.0 - 0.5).collect();
    let doubled = vec![single[0].clone(), pair(cands.clone(), NavAction::Move(1), 1)];
    assert!((nll_grad(&theta, &single).unwrap().0 - nll_grad(&theta, &doubled).unwrap().0).abs() < 1e-12);

    let p = action_dist(&theta, &cands);
    let brute: f64 = -p.iter().map(|q| q * q.ln()).sum::<f64>();
    assert!((entropy(&theta, &cands) - brute).abs() < 1e-12);
    assert_eq!(argmax(&logits(&theta, &cands)), argmax(&p));

    // A 40-nat gap leaves essentially no entropy.
    let mut peaked = zero.clone();
    peaked[fs.stop_bias()] = 40.0;
    assert!(entropy(&peaked, &cands) <= 1e-6);
}

#[test]
fn expert_rollout_reproduces_ground_truth() {
    let g = generate_env(21, 40, GenModel::RandomGeometric, &vocab()).unwrap();
    let style = basic_style(&vocab());
    let params = PolicyParams::zeros(FeatureSpace::for_landmarks(&vocab()), 0.1);
    let corpus = generate_corpus(&g, &style, 4, "expert", 30, (5, 7)).unwrap();
    for instr in &corpus {
        let goal = g.index_of(&instr.goal).unwrap();
        let expert = Expert::towards(&g, goal);
        let mut bank = MemoryBank::new(&g);
        let (ep, labels) = dagger_rollout(&params, instr, &style, &g, &mut bank, 1.0, &expert, 5, 15).unwrap();
        let gt = g.indices_of(&instr.gt_path).unwrap();
        assert_eq!(ep.trajectory, gt);
        let expected: Vec<NavAction> = gt[1..]
            .iter()
            .map(|&v| NavAction::Move(v))
            .chain([NavAction::Stop])
            .collect();
        let got: Vec<NavAction> = labels.iter().map(|p| p.target).collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn episodes_are_determined_by_their_inputs() {
    let g = generate_env(2, 40, GenModel::RandomGeometric, &vocab()).unwrap();
    let style = basic_style(&vocab());
    let fs = FeatureSpace::for_landmarks(&vocab());
    let mut params = PolicyParams::zeros(fs.clone(), 0.1);
    for (k, w) in params.theta.iter_mut().enumerate() {
        *w = ((k * 7919) % 13) as f64 / 13.0 - 0.4;
    }
    let corpus = generate_corpus(&g, &style, 8, "det", 20, (5, 7)).unwrap();
    let mut bank = MemoryBank::new(&g);
    bank.observe(&g, 3).unwrap();
    for instr in &corpus {
        let mut b1 = bank.clone();
        let mut b2 = bank.clone();
        let e1 = run_episode(&params, instr, &style, &g, &mut b1, 15, Mode::Sample(3)).unwrap();
        let e2 = run_episode(&params, instr, &style, &g, &mut b2, 15, Mode::Sample(3)).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(b1, b2);
    }
}
