use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{CentralObjective, DataSource, ExperimentConfig};
use crate::data::{gen_checkerboard, load_csv, partition, train_test_split};
use crate::dnet::{
    attack_gaussian, attack_signflip, consensus_distance, mean_vector, AggregationRule, Messages, NodeRole,
    Topology, WeightMatrix,
};
use crate::learn::{fit_and_score, loss, loss_and_grad, LabeledDataset, ScoreReport};
use crate::qkernel::{FeatureMapSpec, KernelEngine, NoiseModel, ParameterVector};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Decentralized,
    Centralized,
    Local,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decentralized" => Ok(Mode::Decentralized),
            "centralized" => Ok(Mode::Centralized),
            "local" => Ok(Mode::Local),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Independent random streams, keyed by what they are used for.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Init = 1,
    Subsample = 2,
    Attack = 3,
    Eval = 4,
    Score = 5,
}

fn stream(seed: u64, purpose: Purpose, node: usize, round: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(node as u64).to_le_bytes());
    key[24..].copy_from_slice(&(round as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Data shared by every mode: the global split and its per-node partition.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: FeatureMapSpec,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub node_train: Vec<LabeledDataset>,
    pub node_test: Vec<LabeledDataset>,
}

impl Problem {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let data = match cfg.data.source {
            DataSource::Checkerboard => gen_checkerboard(&cfg.checkerboard())?,
            DataSource::Csv => load_csv(cfg.data.path.as_ref().expect("validated"))?,
        };
        // Partition first, then split each node's share, so every node's
        // test slice is stratified like its training data.
        let mut node_train = Vec::new();
        let mut node_test = Vec::new();
        for (k, part) in partition(&data, &cfg.partition_plan())?.iter().enumerate() {
            let (tr, te) = train_test_split(part, cfg.data.test_fraction, cfg.seed.wrapping_add(k as u64))?;
            node_train.push(tr);
            node_test.push(te);
        }
        Ok(Self {
            spec: cfg.feature_map()?,
            train: LabeledDataset::concat(&node_train),
            test: LabeledDataset::concat(&node_test),
            node_train,
            node_test,
        })
    }
}

/// One participant of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub role: NodeRole,
    /// Current parameters; for attackers, the last crafted message.
    pub theta: ParameterVector,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub noise: NoiseModel,
    pub eta: f64,
    pub batch: usize,
}

/// Per-node record for one round. Attackers have no loss or gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub node: usize,
    pub loss: Option<f64>,
    pub alignment: Option<f64>,
    pub grad_norm: Option<f64>,
    pub param_norm: f64,
    pub consensus_dist: f64,
}

/// Whole-test accuracy of the mean honest parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub round: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLogs {
    pub rounds: Vec<RoundLog>,
    pub evals: Vec<EvalRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub node: usize,
    pub role: NodeRole,
    #[serde(flatten)]
    pub report: Option<ScoreReport>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub mode: Mode,
    pub nodes: Vec<NodeState>,
    pub logs: RunLogs,
    pub scores: Vec<NodeScore>,
    pub rounds_run: usize,
    pub converged: bool,
    pub iteration_to_threshold: Option<usize>,
    /// Global-train Gram matrix at the mean honest parameters, when requested.
    pub gram_final: Option<DMatrix<f64>>,
}

impl RunResult {
    /// Mean report over honest nodes.
    pub fn average(&self) -> Option<ScoreReport> {
        let reports: Vec<&ScoreReport> = self.scores.iter().filter_map(|s| s.report.as_ref()).collect();
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&ScoreReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
        Some(ScoreReport {
            score1: avg(|r| r.score1),
            score2: avg(|r| r.score2),
            score3: avg(|r| r.score3),
            alignment: avg(|r| r.alignment),
            iterations: self.rounds_run,
        })
    }

    pub fn honest_thetas(&self) -> Vec<&[f64]> {
        self.nodes
            .iter()
            .filter(|n| !n.role.is_attacker())
            .map(|n| n.theta.as_slice())
            .collect()
    }
}

/// Training data a node's gradient is averaged over: usually its own split,
/// or several node blocks for the node-sum centralized objective.
#[derive(Debug, Clone)]
struct Block {
    stream: usize,
    data: LabeledDataset,
    batch: usize,
}

enum Exchange {
    Gossip {
        topology: Topology,
        weights: WeightMatrix,
        rule: AggregationRule,
    },
    None,
}

struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a Problem,
    nodes: Vec<NodeState>,
    blocks: Vec<Vec<Block>>,
    exchange: Exchange,
    eval_noise: NoiseModel,
}

struct Step {
    half: Vec<f64>,
    loss: f64,
    alignment: f64,
    grad_norm: f64,
}

fn without_shots(m: NoiseModel) -> NoiseModel {
    NoiseModel { shots: None, ..m }
}

fn init_theta(cfg: &ExperimentConfig, t: usize, node: usize) -> ParameterVector {
    let source = if cfg.train.shared_init { 0 } else { node };
    let mut rng = stream(cfg.seed, Purpose::Init, source, 0);
    let s = cfg.train.init_scale;
    ParameterVector(
        (0..t)
            .map(|_| if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 })
            .collect(),
    )
}

impl Trainer<'_> {
    fn honest(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].role.is_attacker()).collect()
    }

    fn step(&self, i: usize, round: usize) -> Result<Step> {
        let node = &self.nodes[i];
        let noise = without_shots(node.noise);
        let t = node.theta.len();
        let mut grad = vec![0.0; t];
        let (mut loss, mut alignment) = (0.0, 0.0);
        let blocks = &self.blocks[i];
        for b in blocks {
            let sub = if b.batch >= b.data.len() {
                b.data.clone()
            } else {
                let mut rng = stream(self.cfg.seed, Purpose::Subsample, b.stream, round);
                b.data.select(&rand::seq::index::sample(&mut rng, b.data.len(), b.batch).into_vec())
            };
            let r = loss_and_grad(&sub, &node.theta, &self.problem.spec, &noise)?;
            loss += r.loss;
            alignment += r.alignment;
            for (g, v) in grad.iter_mut().zip(&r.grad) {
                *g += v;
            }
        }
        let m = blocks.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let half = node
            .theta
            .as_slice()
            .iter()
            .zip(&grad)
            .map(|(th, g)| th - node.eta * g)
            .collect();
        Ok(Step {
            half,
            loss: loss / m,
            alignment: alignment / m,
            grad_norm,
        })
    }

    fn mean_theta(&self) -> Result<ParameterVector> {
        let honest: Vec<&[f64]> = self.honest().into_iter().map(|i| self.nodes[i].theta.as_slice()).collect();
        Ok(ParameterVector(mean_vector(&honest)?))
    }

    fn evaluate(&self, round: usize) -> Result<f64> {
        let theta = self.mean_theta()?;
        let mut rng = stream(self.cfg.seed, Purpose::Eval, 0, round);
        fit_and_score(
            &self.problem.train,
            &self.problem.test,
            &self.problem.spec,
            &theta,
            &self.eval_noise,
            self.cfg.train.lambda,
            &mut rng,
        )
    }

    fn run(mut self, mode: Mode) -> Result<RunResult> {
        let honest = self.honest();
        let cfg = self.cfg;
        let mut logs = RunLogs::default();
        let mut rounds_run = 0;
        let mut converged = false;
        for round in 1..=cfg.train.budget {
            let steps = par::try_map(&honest, |&i| self.step(i, round))?;
            let mut outgoing: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
            for (&i, s) in honest.iter().zip(&steps) {
                outgoing[i] = Some(s.half.clone());
            }
            let mut stats: Vec<Option<(f64, f64, f64)>> = vec![None; self.nodes.len()];
            for (&i, s) in honest.iter().zip(&steps) {
                stats[i] = Some((s.loss, s.alignment, s.grad_norm));
            }
            match &self.exchange {
                Exchange::None => {
                    for (&i, s) in honest.iter().zip(steps) {
                        self.nodes[i].theta = ParameterVector(s.half);
                    }
                }
                Exchange::Gossip {
                    topology,
                    weights,
                    rule,
                } => {
                    let mut crafted = outgoing.clone();
                    for i in 0..self.nodes.len() {
                        let role = self.nodes[i].role;
                        if !role.is_attacker() {
                            continue;
                        }
                        let seen: Vec<&Vec<f64>> = topology
                            .neighbors(i)
                            .into_iter()
                            .filter_map(|j| outgoing[j].as_ref())
                            .collect();
                        let msg = match role {
                            NodeRole::GaussianAttacker => {
                                attack_gaussian(&seen, &mut stream(cfg.seed, Purpose::Attack, i, round))?
                            }
                            NodeRole::SignFlipAttacker => attack_signflip(&seen)?,
                            NodeRole::Honest => unreachable!(),
                        };
                        crafted[i] = Some(msg);
                    }
                    let updated = par::try_map(&honest, |&i| {
                        let msgs: Messages = topology
                            .closed_neighborhood(i)
                            .into_iter()
                            .map(|j| (j, crafted[j].clone().expect("every node sends")))
                            .collect();
                        rule.apply(crafted[i].as_ref().expect("honest half step"), &msgs, &weights.row(i))
                    })?;
                    for (&i, th) in honest.iter().zip(updated) {
                        self.nodes[i].theta = ParameterVector(th);
                    }
                    for (i, c) in crafted.into_iter().enumerate() {
                        if self.nodes[i].role.is_attacker() {
                            self.nodes[i].theta = ParameterVector(c.expect("attacker crafted"));
                        }
                    }
                }
            }
            let thetas: Vec<&[f64]> = honest.iter().map(|&i| self.nodes[i].theta.as_slice()).collect();
            let consensus = if thetas.len() > 1 { consensus_distance(&thetas)? } else { 0.0 };
            for (i, node) in self.nodes.iter().enumerate() {
                let s = stats[i];
                logs.rounds.push(RoundLog {
                    round,
                    node: node.id,
                    loss: s.map(|s| s.0),
                    alignment: s.map(|s| s.1),
                    grad_norm: s.map(|s| s.2),
                    param_norm: node.theta.norm(),
                    consensus_dist: consensus,
                });
            }
            rounds_run = round;
            if round % cfg.train.eval_every == 0 {
                logs.evals.push(EvalRecord {
                    round,
                    accuracy: self.evaluate(round)?,
                });
            }
            let mean_grad = stats.iter().flatten().map(|s| s.2).sum::<f64>() / honest.len() as f64;
            if mean_grad < cfg.train.grad_threshold {
                converged = true;
                break;
            }
        }
        let scores = self.final_scores(rounds_run)?;
        let gram_final = if cfg.output.gram_final {
            let engine = KernelEngine::new(&self.problem.spec, self.eval_noise.mode)?;
            Some(engine.gram(&self.mean_theta()?, &self.problem.train.features())?)
        } else {
            None
        };
        let iteration_to_threshold =
            iteration_to_threshold(&logs, DEFAULT_METRIC, cfg.train.target_accuracy)?;
        Ok(RunResult {
            mode,
            nodes: self.nodes,
            logs,
            scores,
            rounds_run,
            converged,
            iteration_to_threshold,
            gram_final,
        })
    }

    fn final_scores(&self, rounds: usize) -> Result<Vec<NodeScore>> {
        let lambda = self.cfg.train.lambda;
        par::try_map(&self.nodes, |node| {
            let report = if node.role.is_attacker() {
                None
            } else {
                let mut rng = stream(self.cfg.seed, Purpose::Score, node.id, rounds);
                let mut r = evaluate_scores(node, &self.problem.train, &self.problem.test, &self.problem.spec, lambda, &mut rng)?;
                r.iterations = rounds;
                Some(r)
            };
            Ok(NodeScore {
                node: node.id,
                role: node.role,
                report,
            })
        })
    }
}

/// Score1 (local train, local test), Score2 (local train, global test) and
/// Score3 (global train, global test), all with the node's parameters and noise.
pub fn evaluate_scores<R: Rng + ?Sized>(
    node: &NodeState,
    global_train: &LabeledDataset,
    global_test: &LabeledDataset,
    spec: &FeatureMapSpec,
    lambda: f64,
    rng: &mut R,
) -> Result<ScoreReport> {
    let th = &node.theta;
    let score1 = fit_and_score(&node.train, &node.test, spec, th, &node.noise, lambda, rng)?;
    let score2 = fit_and_score(&node.train, global_test, spec, th, &node.noise, lambda, rng)?;
    let score3 = fit_and_score(global_train, global_test, spec, th, &node.noise, lambda, rng)?;
    let alignment = -loss(&node.train, th, spec, &node.noise, rng)?;
    Ok(ScoreReport {
        score1,
        score2,
        score3,
        alignment,
        iterations: 0,
    })
}

/// Metric used when none is named: whole-test accuracy of the mean model.
pub const DEFAULT_METRIC: &str = "test_accuracy";

/// First logged round whose metric reaches `threshold`.
///
/// `test_accuracy` reads the cadence evaluations; `alignment` reads the mean
/// honest subsample alignment of every round.
pub fn iteration_to_threshold(logs: &RunLogs, metric: &str, threshold: f64) -> Result<Option<usize>> {
    if logs.rounds.is_empty() && logs.evals.is_empty() {
        return Err(Error::Empty("no rounds logged"));
    }
    match metric {
        "test_accuracy" => Ok(logs.evals.iter().find(|e| e.accuracy >= threshold).map(|e| e.round)),
        "alignment" => {
            let mut k = 0;
            while k < logs.rounds.len() {
                let round = logs.rounds[k].round;
                let vals: Vec<f64> = logs.rounds[k..]
                    .iter()
                    .take_while(|r| r.round == round)
                    .filter_map(|r| r.alignment)
                    .collect();
                let width = logs.rounds[k..].iter().take_while(|r| r.round == round).count();
                if !vals.is_empty() && vals.iter().sum::<f64>() / vals.len() as f64 >= threshold {
                    return Ok(Some(round));
                }
                k += width;
            }
            Ok(None)
        }
        other => Err(Error::UnknownMetric(other.to_string())),
    }
}

fn build_nodes(cfg: &ExperimentConfig, problem: &Problem) -> Result<Vec<NodeState>> {
    let n = cfg.network.nodes;
    let roles = cfg.roles()?;
    let noise = cfg.noise_models()?;
    let eta = cfg.train.steps(n)?;
    let batch = cfg.train.batches(n)?;
    let t = problem.spec.n_params();
    Ok((0..n)
        .map(|i| NodeState {
            id: i,
            role: roles[i],
            theta: init_theta(cfg, t, i),
            train: problem.node_train[i].clone(),
            test: problem.node_test[i].clone(),
            noise: noise[i],
            eta: eta[i],
            batch: batch[i],
        })
        .collect())
}

fn own_blocks(nodes: &[NodeState]) -> Vec<Vec<Block>> {
    nodes
        .iter()
        .map(|n| {
            vec![Block {
                stream: n.id,
                data: n.train.clone(),
                batch: n.batch,
            }]
        })
        .collect()
}

/// Algorithm 1: local step, message exchange with attackers crafting from the
/// honest half steps they see, then aggregation on honest nodes.
pub fn run_decentralized(cfg: &ExperimentConfig) -> Result<RunResult> {
    let problem = Problem::prepare(cfg)?;
    run_decentralized_on(cfg, &problem)
}

pub fn run_decentralized_on(cfg: &ExperimentConfig, problem: &Problem) -> Result<RunResult> {
    let nodes = build_nodes(cfg, problem)?;
    let weights = cfg.mixing()?;
    if crate::dnet::spectral_gap(&weights) >= 1.0 && nodes.len() > 1 {
        return Err(Error::Topology("mixing matrix does not contract disagreement".into()));
    }
    for (i, n) in nodes.iter().enumerate() {
        if n.role.is_attacker() && cfg.topology()?.neighbors(i).iter().all(|&j| nodes[j].role.is_attacker()) {
            return Err(Error::Config(format!("attacker {i} has no honest neighbor")));
        }
    }
    let trainer = Trainer {
        cfg,
        problem,
        blocks: own_blocks(&nodes),
        nodes,
        exchange: Exchange::Gossip {
            topology: cfg.topology()?,
            weights,
            rule: cfg.aggregation.rule,
        },
        eval_noise: cfg.noise.model(cfg.noise.p),
    };
    trainer.run(Mode::Decentralized)
}

/// One node holding the whole training split, with node 0's initial draw.
pub fn run_centralized(cfg: &ExperimentConfig) -> Result<RunResult> {
    let problem = Problem::prepare(cfg)?;
    run_centralized_on(cfg, &problem)
}

pub fn run_centralized_on(cfg: &ExperimentConfig, problem: &Problem) -> Result<RunResult> {
    let noise = cfg.noise.model(cfg.noise.p);
    let node = NodeState {
        id: 0,
        role: NodeRole::Honest,
        theta: init_theta(cfg, problem.spec.n_params(), 0),
        train: problem.train.clone(),
        test: problem.test.clone(),
        noise,
        eta: cfg.train.eta,
        batch: cfg.train.batch,
    };
    let blocks = match cfg.train.central_objective {
        CentralObjective::Pooled => own_blocks(std::slice::from_ref(&node)),
        CentralObjective::NodeSum => {
            let batches = cfg.train.batches(cfg.network.nodes)?;
            vec![problem
                .node_train
                .iter()
                .enumerate()
                .map(|(b, d)| Block {
                    stream: b,
                    data: d.clone(),
                    batch: batches[b],
                })
                .collect()]
        }
    };
    let trainer = Trainer {
        cfg,
        problem,
        nodes: vec![node],
        blocks,
        exchange: Exchange::None,
        eval_noise: noise,
    };
    trainer.run(Mode::Centralized)
}

/// Every honest node trains alone on its split; attackers take no part.
pub fn run_local(cfg: &ExperimentConfig) -> Result<RunResult> {
    let problem = Problem::prepare(cfg)?;
    run_local_on(cfg, &problem)
}

pub fn run_local_on(cfg: &ExperimentConfig, problem: &Problem) -> Result<RunResult> {
    let nodes: Vec<NodeState> = build_nodes(cfg, problem)?
        .into_iter()
        .filter(|n| !n.role.is_attacker())
        .collect();
    let trainer = Trainer {
        cfg,
        problem,
        blocks: own_blocks(&nodes),
        nodes,
        exchange: Exchange::None,
        eval_noise: cfg.noise.model(cfg.noise.p),
    };
    trainer.run(Mode::Local)
}

pub fn run(cfg: &ExperimentConfig, mode: Mode) -> Result<RunResult> {
    match mode {
        Mode::Decentralized => run_decentralized(cfg),
        Mode::Centralized => run_centralized(cfg),
        Mode::Local => run_local(cfg),
    }
}
