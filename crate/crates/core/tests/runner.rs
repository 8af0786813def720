use dqk::dnet::{mean_vector, AggregationRule, ClipReference, NodeRole, TopologyKind};
use dqk::learn::loss_grad;
use dqk::runner::{
    iteration_to_threshold, read_rounds, read_scores, report_dirs, run_centralized, run_decentralized,
    run_decentralized_on, run_local, write_outputs, CentralObjective, EvalRecord, ExperimentConfig, NoiseKind, Problem,
    RunLogs, ROUNDS_FILE, SCORES_FILE,
};
use dqk::Error;

/// 3 qubits, 2 layers, 48 points, 4-node ring.
fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 21;
    cfg.circuit.n_qubits = 3;
    cfg.circuit.layers = 2;
    cfg.data.points_per_cell = 3;
    cfg.train.budget = 6;
    cfg.train.eval_every = 3;
    cfg.train.batch = 4;
    cfg.train.grad_threshold = 0.0;
    cfg
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_step_keeps_parameters() {
    let mut cfg = small();
    cfg.train.eta = 0.0;
    let one = |cfg: &ExperimentConfig, f: fn(&ExperimentConfig) -> dqk::Result<dqk::runner::RunResult>| {
        let mut c = cfg.clone();
        c.train.budget = 1;
        f(&c).unwrap()
    };
    let start = one(&cfg, run_centralized);
    let r = run_centralized(&cfg).unwrap();
    assert_eq!(r.rounds_run, cfg.train.budget);
    assert!(!r.converged);
    assert_eq!(r.nodes[0].theta, start.nodes[0].theta);
    let norms: Vec<f64> = r.logs.rounds.iter().map(|l| l.param_norm).collect();
    assert!(norms.iter().all(|&v| v == norms[0]));

    // Gossip alone still mixes, but never moves the mean.
    let start = one(&cfg, run_decentralized);
    let r = run_decentralized(&cfg).unwrap();
    let mean = |r: &dqk::runner::RunResult| mean_vector(&r.honest_thetas()).unwrap();
    assert!(max_diff(&mean(&r), &mean(&start)) < 1e-12);
}

#[test]
fn identical_nodes_stay_in_consensus() {
    let mut cfg = small();
    cfg.network.topology = TopologyKind::Complete;
    cfg.data.partition = dqk::data::PartitionStrategy::HeterogeneousByRegion;
    cfg.train.shared_init = true;
    cfg.train.batch = 1000;
    let mut problem = Problem::prepare(&cfg).unwrap();
    for k in 0..4 {
        problem.node_train[k] = problem.node_train[0].clone();
    }
    let r = run_decentralized_on(&cfg, &problem).unwrap();
    for n in &r.nodes[1..] {
        assert_eq!(n.theta, r.nodes[0].theta);
    }
    assert!(r.logs.rounds.iter().all(|l| l.consensus_dist == 0.0));
}

#[test]
fn single_node_network_matches_centralized() {
    let mut cfg = small();
    cfg.network.nodes = 1;
    let a = run_decentralized(&cfg).unwrap();
    let b = run_centralized(&cfg).unwrap();
    assert_eq!(a.nodes[0].theta, b.nodes[0].theta);
    assert_eq!(a.logs, b.logs);
}

#[test]
fn mean_follows_averaged_gradient() {
    let mut cfg = small();
    cfg.train.init_scale = 0.0;
    cfg.train.batch = 1000;
    cfg.noise.kind = NoiseKind::Exact;
    let problem = Problem::prepare(&cfg).unwrap();
    let spec = problem.spec.clone();
    let noise = dqk::qkernel::NoiseModel::exact();
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; spec.n_params()]; 4];
    for budget in 1..=3 {
        cfg.train.budget = budget;
        let r = run_decentralized_on(&cfg, &problem).unwrap();
        let grads: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                loss_grad(&problem.node_train[i], &dqk::qkernel::ParameterVector(prev[i].clone()), &spec, &noise)
                    .unwrap()
            })
            .collect();
        let before = mean_vector(&prev).unwrap();
        let g = mean_vector(&grads).unwrap();
        let expected: Vec<f64> = before.iter().zip(&g).map(|(b, g)| b - cfg.train.eta * g).collect();
        let now: Vec<Vec<f64>> = r.nodes.iter().map(|n| n.theta.0.clone()).collect();
        assert!(max_diff(&mean_vector(&now).unwrap(), &expected) < 1e-12);
        prev = now;
    }
}

#[test]
fn robust_clip_contains_every_update() {
    let mut cfg = small();
    cfg.network.roles = Some(vec![NodeRole::Honest, NodeRole::SignFlipAttacker, NodeRole::Honest, NodeRole::Honest]);
    let tau = 0.05;
    cfg.aggregation.rule = AggregationRule::RobustClip {
        tau,
        reference: ClipReference::SelfCentered,
    };
    let problem = Problem::prepare(&cfg).unwrap();
    let mut prev = None;
    for budget in 1..=3 {
        cfg.train.budget = budget;
        let r = run_decentralized_on(&cfg, &problem).unwrap();
        if let Some(prev) = &prev {
            let prev: &Vec<Vec<f64>> = prev;
            for (i, n) in r.nodes.iter().enumerate() {
                if n.role.is_attacker() {
                    continue;
                }
                // The honest step moves by at most eta * |g|; aggregation by at most tau.
                let grad = r.logs.rounds.iter().find(|l| l.round == budget && l.node == i).unwrap();
                let moved: f64 = n.theta.0.iter().zip(&prev[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(moved <= cfg.train.eta * grad.grad_norm.unwrap() + tau + 1e-12);
            }
        }
        prev = Some(r.nodes.iter().map(|n| n.theta.0.clone()).collect::<Vec<_>>());
    }
}

#[test]
fn attackers_have_no_losses() {
    let mut cfg = small();
    cfg.network.roles = Some(vec![NodeRole::Honest, NodeRole::GaussianAttacker, NodeRole::Honest, NodeRole::Honest]);
    let r = run_decentralized(&cfg).unwrap();
    for l in &r.logs.rounds {
        assert_eq!(l.loss.is_none(), l.node == 1);
    }
    assert_eq!(r.logs.rounds.len(), 4 * cfg.train.budget);
    assert!(r.scores[1].report.is_none());
    assert_eq!(r.scores.iter().filter(|s| s.report.is_some()).count(), 3);
    cfg.network.roles = Some(vec![NodeRole::GaussianAttacker; 4]);
    assert!(matches!(run_decentralized(&cfg), Err(Error::Config(_))));
}

#[test]
fn same_seed_same_logs() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    write_outputs(&a, &cfg, &run_decentralized(&cfg).unwrap()).unwrap();
    write_outputs(&b, &cfg, &run_decentralized(&cfg).unwrap()).unwrap();
    let ra = std::fs::read(a.join(ROUNDS_FILE)).unwrap();
    assert_eq!(ra, std::fs::read(b.join(ROUNDS_FILE)).unwrap());
    let first = std::str::from_utf8(&ra).unwrap().lines().next().unwrap();
    for key in ["round", "node", "loss", "alignment", "grad_norm", "consensus_dist"] {
        assert!(first.contains(&format!("\"{key}\"")), "{first}");
    }
    assert_eq!(read_rounds(a.join(ROUNDS_FILE)).unwrap().len(), 4 * cfg.train.budget);
    let scores = read_scores(a.join(SCORES_FILE)).unwrap();
    assert_eq!(scores.seed, 21);
    assert_eq!(scores.config, cfg);
    let text = report_dirs(&[&a]).unwrap();
    assert!(text.contains("score3"));
}

#[test]
fn local_and_scores() {
    let mut cfg = small();
    cfg.output.gram_final = true;
    let r = run_local(&cfg).unwrap();
    assert_eq!(r.nodes.len(), 4);
    for s in &r.scores {
        let rep = s.report.as_ref().unwrap();
        for v in [rep.score1, rep.score2, rep.score3] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    let k = r.gram_final.unwrap();
    assert_eq!(k.nrows(), 32);
    cfg.network.nodes = 1;
    let r = run_decentralized(&cfg).unwrap();
    let rep = r.scores[0].report.as_ref().unwrap();
    assert_eq!(rep.score1, rep.score2);
    assert_eq!(rep.score2, rep.score3);
}

#[test]
fn centralized_full_batch_descends() {
    let mut cfg = small();
    cfg.noise.kind = NoiseKind::Exact;
    cfg.train.batch = 1000;
    cfg.train.eta = 0.05;
    cfg.train.budget = 50;
    cfg.train.eval_every = 50;
    let r = run_centralized(&cfg).unwrap();
    let losses: Vec<f64> = r.logs.rounds.iter().map(|l| l.loss.unwrap()).collect();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    cfg.train.central_objective = CentralObjective::NodeSum;
    cfg.train.budget = 2;
    assert!(run_centralized(&cfg).is_ok());
}

#[test]
fn threshold_lookup() {
    let logs = RunLogs {
        rounds: vec![],
        evals: vec![
            EvalRecord { round: 10, accuracy: 0.5 },
            EvalRecord { round: 20, accuracy: 0.92 },
        ],
    };
    assert_eq!(iteration_to_threshold(&logs, "test_accuracy", 0.0).unwrap(), Some(10));
    assert_eq!(iteration_to_threshold(&logs, "test_accuracy", 0.9).unwrap(), Some(20));
    assert_eq!(iteration_to_threshold(&logs, "test_accuracy", 1.01).unwrap(), None);
    assert!(matches!(iteration_to_threshold(&logs, "speed", 0.5), Err(Error::UnknownMetric(_))));
    assert!(iteration_to_threshold(&RunLogs::default(), "test_accuracy", 0.5).is_err());
}
