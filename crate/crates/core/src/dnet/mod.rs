//! Communication graph, gossip weights, aggregation rules and the two
//! attacker models.

mod aggregate;
mod topology;

pub use aggregate::{
    aggregate_plain, aggregate_robust, attack_gaussian, attack_signflip, clip, AggregationRule, ClipReference,
    Messages, NodeRole,
};
pub use topology::{
    consensus_distance, mean_vector, metropolis_weights, spectral_gap, Topology, TopologyKind, WeightMatrix,
    STOCHASTIC_TOL,
};
