use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::topology::mean_vector;
use crate::{Error, Result};

/// Parameter vectors received by one node, keyed by sender.
pub type Messages = BTreeMap<usize, Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Honest,
    GaussianAttacker,
    SignFlipAttacker,
}

impl NodeRole {
    pub fn is_attacker(self) -> bool {
        self != NodeRole::Honest
    }
}

/// What a clipped neighbor message is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipReference {
    /// Clip `theta_j - theta_i` and add `theta_i` back.
    #[default]
    SelfCentered,
    /// Clip `theta_j` itself.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregationRule {
    WeightedAverage,
    RobustClip {
        tau: f64,
        #[serde(default)]
        reference: ClipReference,
    },
}

impl AggregationRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregationRule::RobustClip { tau, .. } if !(tau > 0.0 && tau.is_finite()) => Err(Error::Threshold(tau)),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, self_theta: &[f64], messages: &Messages, weights: &[f64]) -> Result<Vec<f64>> {
        match *self {
            AggregationRule::WeightedAverage => aggregate_plain(messages, weights),
            AggregationRule::RobustClip { tau, reference } => {
                aggregate_robust(self_theta, messages, weights, tau, reference)
            }
        }
    }
}

/// Senders with nonzero weight, each paired with its message.
fn weighted<'a>(messages: &'a Messages, weights: &'a [f64]) -> Result<Vec<(f64, &'a [f64])>> {
    let mut out = Vec::new();
    let mut len = None;
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let m = messages.get(&j).ok_or(Error::MissingMessage(j))?;
        if *len.get_or_insert(m.len()) != m.len() {
            return Err(Error::Dimension(format!("message from {j} has length {}", m.len())));
        }
        out.push((w, m.as_slice()));
    }
    if out.is_empty() {
        return Err(Error::Empty("aggregation over no neighbors"));
    }
    Ok(out)
}

/// `sum_j w_ij theta_j` over the senders with nonzero weight.
pub fn aggregate_plain(messages: &Messages, weights: &[f64]) -> Result<Vec<f64>> {
    let terms = weighted(messages, weights)?;
    let mut out = vec![0.0; terms[0].1.len()];
    for (w, m) in terms {
        for (o, v) in out.iter_mut().zip(m) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Scales `v` down to norm `tau` when it is longer.
pub fn clip(v: &[f64], tau: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= tau {
        return v.to_vec();
    }
    let s = tau / norm;
    v.iter().map(|x| x * s).collect()
}

pub fn aggregate_robust(
    self_theta: &[f64],
    messages: &Messages,
    weights: &[f64],
    tau: f64,
    reference: ClipReference,
) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Threshold(tau));
    }
    let terms = weighted(messages, weights)?;
    let mut out = vec![0.0; self_theta.len()];
    for (w, m) in terms {
        if m.len() != self_theta.len() {
            return Err(Error::Dimension(format!("message of length {} for {} parameters", m.len(), self_theta.len())));
        }
        match reference {
            ClipReference::SelfCentered => {
                let diff: Vec<f64> = m.iter().zip(self_theta).map(|(a, b)| a - b).collect();
                for ((o, s), d) in out.iter_mut().zip(self_theta).zip(clip(&diff, tau)) {
                    *o += w * (s + d);
                }
            }
            ClipReference::Literal => {
                for (o, c) in out.iter_mut().zip(clip(m, tau)) {
                    *o += w * c;
                }
            }
        }
    }
    Ok(out)
}

/// Element-wise draw from `N(mean, population variance)` of the neighbors.
pub fn attack_gaussian<V: AsRef<[f64]>, R: Rng + ?Sized>(neighbors: &[V], rng: &mut R) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::Empty("attacker has no neighbors"));
    }
    let mean = mean_vector(neighbors)?;
    let n = neighbors.len() as f64;
    let mut out = Vec::with_capacity(mean.len());
    for (t, &mu) in mean.iter().enumerate() {
        let var = neighbors.iter().map(|v| (v.as_ref()[t] - mu).powi(2)).sum::<f64>() / n;
        let normal = Normal::new(mu, var.sqrt()).map_err(|e| Error::Dimension(e.to_string()))?;
        out.push(normal.sample(rng));
    }
    Ok(out)
}

/// Negated element-wise mean of the neighbors.
pub fn attack_signflip<V: AsRef<[f64]>>(neighbors: &[V]) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::Empty("attacker has no neighbors"));
    }
    Ok(mean_vector(neighbors)?.into_iter().map(|v| -v).collect())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn msgs(items: &[(usize, &[f64])]) -> Messages {
        items.iter().map(|(j, v)| (*j, v.to_vec())).collect()
    }

    #[test]
    fn plain_examples() {
        let v = [1.0, -2.0];
        let m = msgs(&[(0, &v), (1, &v), (2, &v)]);
        assert_eq!(aggregate_plain(&m, &[0.2, 0.3, 0.5]).unwrap(), v.to_vec());
        let m = msgs(&[(0, &[0.0, 0.0]), (1, &[2.0, -4.0])]);
        assert_eq!(aggregate_plain(&m, &[0.5, 0.5]).unwrap(), v.to_vec());
        assert!(matches!(aggregate_plain(&m, &[0.5, 0.25, 0.25]), Err(Error::MissingMessage(2))));
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
        let c = clip(&[6.0, 8.0], 5.0);
        assert!((c[0] - 3.0).abs() < 1e-15 && (c[1] - 4.0).abs() < 1e-15);
        assert_eq!(clip(&c, 5.0), c);
        assert_eq!(clip(&[0.0, 0.0], 0.1), vec![0.0, 0.0]);
    }

    #[test]
    fn robust_modes() {
        let me = [1.0, 1.0];
        let m = msgs(&[(0, &me), (1, &me)]);
        assert_eq!(
            aggregate_robust(&me, &m, &[0.5, 0.5], 0.1, ClipReference::SelfCentered).unwrap(),
            me.to_vec()
        );
        let small = msgs(&[(0, &[0.01, 0.0]), (1, &[0.0, -0.02])]);
        let lit = aggregate_robust(&[0.01, 0.0], &small, &[0.4, 0.6], 0.5, ClipReference::Literal).unwrap();
        assert_eq!(lit, aggregate_plain(&small, &[0.4, 0.6]).unwrap());
        assert!(AggregationRule::RobustClip { tau: 0.0, reference: ClipReference::Literal }.validate().is_err());
    }

    #[test]
    fn attacks() {
        let v = [0.5, -1.5];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(attack_gaussian(&[v, v], &mut rng).unwrap(), v.to_vec());
        assert_eq!(attack_signflip(&[v, v]).unwrap(), vec![-0.5, 1.5]);
        assert_eq!(attack_signflip(&[v, [-0.5, 1.5]]).unwrap(), vec![0.0, 0.0]);
        let twice = attack_signflip(&[attack_signflip(&[v]).unwrap()]).unwrap();
        assert_eq!(twice, v.to_vec());
        assert!(attack_signflip::<[f64; 2]>(&[]).is_err());
        let a = attack_gaussian(&[[1.0], [3.0]], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = attack_gaussian(&[[1.0], [3.0]], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }
}
