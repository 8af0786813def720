use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{CheckerboardSpec, PartitionPlan, PartitionStrategy};
use crate::dnet::{metropolis_weights, AggregationRule, NodeRole, Topology, TopologyKind, WeightMatrix};
use crate::qkernel::{FeatureMapSpec, NoiseModel};
use crate::{Error, Result};

/// Full description of one experiment, read from TOML. Every section and key
/// is optional except where noted; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub circuit: CircuitConfig,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub noise: NoiseConfig,
    pub train: TrainConfig,
    pub aggregation: AggregationConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    pub n_qubits: usize,
    pub layers: usize,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self { n_qubits: 5, layers: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Checkerboard,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// CSV file, relative to the config file's directory when loaded from disk.
    pub path: Option<PathBuf>,
    pub points_per_cell: usize,
    pub sigma: f64,
    /// Generator seed; the master seed when absent.
    pub seed: Option<u64>,
    pub test_fraction: f64,
    pub partition: PartitionStrategy,
}

impl Default for DataConfig {
    fn default() -> Self {
        let cb = CheckerboardSpec::default();
        Self {
            source: DataSource::Checkerboard,
            path: None,
            points_per_cell: cb.points_per_cell,
            sigma: cb.sigma,
            seed: None,
            test_fraction: 0.25,
            partition: PartitionStrategy::HeterogeneousByRegion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: usize,
    pub topology: TopologyKind,
    /// Undirected edges, required for `custom`.
    pub edges: Option<Vec<[usize; 2]>>,
    /// One role per node; all honest when absent.
    pub roles: Option<Vec<NodeRole>>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            nodes: 4,
            topology: TopologyKind::Ring,
            edges: None,
            roles: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Exact,
    PerGate,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub p: f64,
    /// Per-node override of `p`.
    pub per_node: Option<Vec<f64>>,
    /// Shots per kernel estimate when scoring; gradients always use expectations.
    pub shots: Option<u32>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::PerGate,
            p: 0.0005,
            per_node: None,
            shots: None,
        }
    }
}

impl NoiseConfig {
    pub fn model(&self, p: f64) -> NoiseModel {
        let base = match self.kind {
            NoiseKind::Exact => NoiseModel::exact(),
            NoiseKind::PerGate => NoiseModel::per_gate(p),
            NoiseKind::Global => NoiseModel::global(p),
        };
        NoiseModel {
            shots: self.shots,
            ..base
        }
    }
}

/// What the centralized baseline minimizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralObjective {
    /// Alignment of one Gram matrix over the sampled pooled points.
    #[default]
    Pooled,
    /// Mean of the per-node alignment losses, each node block sampled as in
    /// the decentralized run.
    NodeSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub eta_per_node: Option<Vec<f64>>,
    /// Subsample size; a node with fewer points uses all of them in order.
    pub batch: usize,
    pub batch_per_node: Option<Vec<usize>>,
    pub budget: usize,
    pub grad_threshold: f64,
    pub eval_every: usize,
    pub lambda: f64,
    /// Accuracy that counts as reaching the target in `iteration_to_threshold`.
    pub target_accuracy: f64,
    /// Half-width of the uniform initial angles.
    pub init_scale: f64,
    /// Start every node from node 0's draw.
    pub shared_init: bool,
    pub central_objective: CentralObjective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.2,
            eta_per_node: None,
            batch: 8,
            batch_per_node: None,
            budget: 3000,
            grad_threshold: 1e-4,
            eval_every: 10,
            lambda: crate::learn::DEFAULT_LAMBDA,
            target_accuracy: 0.9,
            init_scale: 0.1,
            shared_init: false,
            central_objective: CentralObjective::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregationConfig {
    pub rule: AggregationRule,
    /// Use these mixing weights (row-major, N x N) instead of Metropolis.
    pub weights: Option<Vec<Vec<f64>>>,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            rule: AggregationRule::WeightedAverage,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Also write the final global-train Gram matrix.
    pub gram_final: bool,
}

fn per_node<T: Copy>(name: &str, base: T, list: &Option<Vec<T>>, n: usize) -> Result<Vec<T>> {
    match list {
        None => Ok(vec![base; n]),
        Some(v) if v.len() == n => Ok(v.clone()),
        Some(v) => Err(Error::Config(format!("{name} has {} entries for {n} nodes", v.len()))),
    }
}


impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative CSV path is resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(p), Some(dir)) = (cfg.data.path.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.network.nodes;
        self.feature_map()?;
        if n == 0 {
            return Err(Error::Config("network.nodes must be at least 1".into()));
        }
        if self.train.budget == 0 {
            return Err(Error::Config("train.budget must be at least 1".into()));
        }
        if self.train.eval_every == 0 {
            return Err(Error::Config("train.eval_every must be at least 1".into()));
        }
        if !(self.train.lambda > 0.0) {
            return Err(Error::Regularizer(self.train.lambda));
        }
        if self.train.batches(n)?.iter().any(|&q| q < 2) {
            return Err(Error::Config("batch sizes must be at least 2".into()));
        }
        if self.train.steps(n)?.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Config("step sizes must be finite and nonnegative".into()));
        }
        if !(self.train.init_scale >= 0.0) {
            return Err(Error::Config("train.init_scale must be nonnegative".into()));
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::Split(format!("test fraction {} outside (0, 1)", self.data.test_fraction)));
        }
        if self.data.source == DataSource::Csv && self.data.path.is_none() {
            return Err(Error::Config("data.source = \"csv\" needs data.path".into()));
        }
        for m in self.noise_models()? {
            m.validate()?;
        }
        self.aggregation.rule.validate()?;
        let roles = self.roles()?;
        if roles.iter().all(|r| r.is_attacker()) {
            return Err(Error::Config("at least one node must be honest".into()));
        }
        self.mixing()?;
        Ok(())
    }

    pub fn feature_map(&self) -> Result<FeatureMapSpec> {
        FeatureMapSpec::alternating(self.circuit.n_qubits, self.circuit.layers)
    }

    pub fn checkerboard(&self) -> CheckerboardSpec {
        CheckerboardSpec {
            points_per_cell: self.data.points_per_cell,
            sigma: self.data.sigma,
            seed: self.data.seed.unwrap_or(self.seed),
        }
    }

    pub fn partition_plan(&self) -> PartitionPlan {
        PartitionPlan::new(self.data.partition, self.network.nodes, self.seed)
    }

    pub fn roles(&self) -> Result<Vec<NodeRole>> {
        per_node("network.roles", NodeRole::Honest, &self.network.roles, self.network.nodes)
    }

    pub fn noise_models(&self) -> Result<Vec<NoiseModel>> {
        let ps = per_node("noise.per_node", self.noise.p, &self.noise.per_node, self.network.nodes)?;
        Ok(ps.into_iter().map(|p| self.noise.model(p)).collect())
    }

    pub fn topology(&self) -> Result<Topology> {
        let n = self.network.nodes;
        match self.network.topology {
            TopologyKind::Ring => Topology::ring(n),
            TopologyKind::Complete => Topology::complete(n),
            TopologyKind::Custom => {
                let edges = self
                    .network
                    .edges
                    .as_ref()
                    .ok_or_else(|| Error::Config("custom topology needs network.edges".into()))?;
                Topology::custom(n, edges.iter().map(|e| (e[0], e[1])))
            }
        }
    }

    /// Mixing matrix: explicit weights when given, Metropolis otherwise.
    /// Explicit weights must vanish off the graph.
    pub fn mixing(&self) -> Result<WeightMatrix> {
        let topo = self.topology()?;
        let Some(rows) = &self.aggregation.weights else {
            return metropolis_weights(&topo);
        };
        let n = topo.n_nodes();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("aggregation.weights must be {n} x {n}")));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if i != j && w != 0.0 && !topo.has_edge(i, j) {
                    return Err(Error::Config(format!("weight ({i}, {j}) on a missing edge")));
                }
            }
        }
        WeightMatrix::new(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl TrainConfig {
    pub fn steps(&self, n: usize) -> Result<Vec<f64>> {
        per_node("train.eta_per_node", self.eta, &self.eta_per_node, n)
    }

    pub fn batches(&self, n: usize) -> Result<Vec<usize>> {
        per_node("train.batch_per_node", self.batch, &self.batch_per_node, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(matches!(ExperimentConfig::from_toml("sed = 3"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("[train]\nstep = 0.1"), Err(Error::Config(_))));
    }

    #[test]
    fn parses_sections() {
        let cfg = ExperimentConfig::from_toml(
            r#"
seed = 9
[network]
nodes = 4
roles = ["honest", "gaussian_attacker", "honest", "honest"]
[noise]
per_node = [0.0005, 0.05, 0.0005, 0.0005]
[aggregation.rule]
kind = "robust_clip"
tau = 0.5
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.roles().unwrap()[1], NodeRole::GaussianAttacker);
        assert!(matches!(cfg.aggregation.rule, AggregationRule::RobustClip { tau, .. } if tau == 0.5));
    }

    #[test]
    fn invalid_values() {
        assert!(ExperimentConfig::from_toml("[noise]\np = 1.5").is_err());
        assert!(ExperimentConfig::from_toml("[network]\nroles = [\"honest\"]").is_err());
        assert!(ExperimentConfig::from_toml("[train]\nbudget = 0").is_err());
        assert!(ExperimentConfig::from_toml("[network]\ntopology = \"custom\"\nnodes = 3\nedges = [[0, 1]]").is_err());
    }
}
