use proptest::prelude::*;

use fbnav::envgraph::{default_landmark_vocab, generate_env, EnvGraph, GenModel, GeoTable, NodeIdx, Topology};
use fbnav::feedback::{feedback_fn, EndpointKind};
use fbnav::membank::MemoryBank;
use fbnav::metrics::{dtw, episode_metrics, ndtw};
use fbnav::policy::{softmax, FeatureSpace, PolicyParams};
use fbnav::rollout::{run_episode, Mode};
use fbnav::synthlang::{generate_corpus, make_style};

fn env_for(seed: u64, n: usize, grid: bool) -> EnvGraph {
    let model = if grid {
        GenModel::Grid
    } else {
        GenModel::RandomGeometric
    };
    generate_env(seed, n, model, &default_landmark_vocab()).unwrap()
}

/// A random walk from `start` steered by `choices`.
fn walk(g: &EnvGraph, start: NodeIdx, choices: &[usize]) -> Vec<NodeIdx> {
    let mut path = vec![start % g.len()];
    for &c in choices {
        let nb = g.neighbors(*path.last().unwrap());
        path.push(nb[c % nb.len()].0);
    }
    path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bank_grows_monotonically_and_stays_sound(
        seed in 0u64..500,
        n in 8usize..50,
        grid in any::<bool>(),
        visits in prop::collection::vec(0usize..1000, 1..30),
    ) {
        let g = env_for(seed, n, grid);
        let mut bank = MemoryBank::new(&g);
        let mut prev = (0, 0, 0);
        for v in visits {
            bank.observe(&g, v % g.len()).unwrap();
            let now = (bank.visited_count(), bank.discovered_count(), bank.edge_count());
            prop_assert!(now.0 >= prev.0 && now.1 >= prev.1 && now.2 >= prev.2);
            prev = now;
            for (a, b) in bank.edges() {
                prop_assert!(g.has_edge(a, b));
                let w = Topology::neighbors(&bank, a).iter().find(|&&(n, _)| n == b).unwrap().1;
                prop_assert_eq!(Some(w), g.edge_weight(a, b));
            }
            prop_assert_eq!(bank.frontier(), &bank.recompute_frontier());
            for f in bank.frontier() {
                prop_assert!(bank.is_discovered(*f) && !bank.is_visited(*f));
            }
            let cov = bank.coverage(&g);
            prop_assert!((0.0..=1.0).contains(&cov));
        }
    }

    #[test]
    fn metrics_stay_in_range(
        seed in 0u64..300,
        start in 0usize..100,
        a in prop::collection::vec(0usize..8, 0..12),
        b in prop::collection::vec(0usize..8, 1..8),
    ) {
        let g = env_for(seed, 30, false);
        let geo = GeoTable::new(&g);
        let traj = walk(&g, start, &a);
        let gt = walk(&g, start, &b);
        let goal = *gt.last().unwrap();
        let m = episode_metrics(&g, &geo, &traj, &gt, goal, 3.0).unwrap();
        for v in [m.sr, m.osr, m.spl, m.ndtw, m.sdtw, m.cls] {
            prop_assert!((0.0..=1.0).contains(&v), "{:?}", m);
        }
        prop_assert!(m.ne >= 0.0 && m.oe >= 0.0 && m.pl >= 0.0);
        prop_assert!(m.oe <= m.ne);
        prop_assert!(m.sr <= m.osr);
        prop_assert!(m.sdtw <= m.ndtw);
        prop_assert!(m.spl <= m.sr);
        prop_assert_eq!(dtw(&gt, &gt, &geo), 0.0);
        prop_assert_eq!(ndtw(&gt, &gt, &geo, 3.0), 1.0);
    }

    #[test]
    fn softmax_normalizes_and_ignores_shifts(
        logits in prop::collection::vec(-50.0f64..50.0, 1..20),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        for (x, y) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn feedback_points_at_the_goal_and_is_idempotent(terminal in 0usize..100, goal in 0usize..100) {
        let (endpoint, kind) = feedback_fn(terminal, goal);
        prop_assert_eq!(endpoint, goal);
        prop_assert_eq!(kind == EndpointKind::Confirmed, terminal == goal);
        prop_assert_eq!(feedback_fn(endpoint, goal), (goal, EndpointKind::Confirmed));
    }

    #[test]
    fn geodesics_are_symmetric(seed in 0u64..1000, n in 2usize..40) {
        let g = env_for(seed, n, false);
        let geo = GeoTable::new(&g);
        for u in 0..g.len() {
            prop_assert_eq!(geo.dist(u, u), 0.0);
            for v in 0..g.len() {
                prop_assert_eq!(geo.dist(u, v), geo.dist(v, u));
                prop_assert!(geo.dist(u, v).is_finite());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episodes_respect_the_step_budget(
        seed in 0u64..200,
        theta_seed in 0u64..1000,
        t_max in 1usize..20,
        rate in 0.0f64..1.0,
    ) {
        let vocab = default_landmark_vocab();
        let g = env_for(seed, 40, false);
        let style = make_style("p", seed, &vocab, rate).unwrap();
        let mut params = PolicyParams::zeros(FeatureSpace::for_landmarks(&vocab), 0.1);
        for (k, w) in params.theta.iter_mut().enumerate() {
            *w = ((k as u64 * 2654435761 + theta_seed) % 97) as f64 / 24.0 - 2.0;
        }
        let corpus = generate_corpus(&g, &style, seed, "prop", 5, (5, 7)).unwrap();
        let mut bank = MemoryBank::new(&g);
        for instr in &corpus {
            let ep = run_episode(&params, instr, &style, &g, &mut bank, t_max, Mode::Sample(theta_seed)).unwrap();
            prop_assert!(ep.steps <= t_max);
            prop_assert_eq!(ep.actions.len(), ep.steps);
            prop_assert!(!ep.truncated || ep.steps == t_max);
            prop_assert!(ep.trajectory.iter().all(|&v| v < g.len()));
            for e in ep.trajectory.windows(2) {
                prop_assert!(g.has_edge(e[0], e[1]));
            }
            prop_assert_eq!(*ep.trajectory.last().unwrap(), ep.terminal);
            let triggers = (1..=ep.steps).filter(|&t| ep.trigger(t)).count();
            prop_assert_eq!(triggers, 1);
            prop_assert!(ep.trigger(ep.steps));
            for &v in &ep.trajectory {
                prop_assert!(bank.is_visited(v));
            }
        }
    }
}
