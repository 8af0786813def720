use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkerboard::{cell_of, shuffle_indices, GRID};
use crate::learn::LabeledDataset;
use crate::{Error, Result};

/// Redraws allowed before a random partition that leaves some node with one
/// label is reported as an error.
const MAX_REDRAWS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Node `k` owns cells `k*16/N .. (k+1)*16/N` in column-major order.
    HeterogeneousByRegion,
    /// Seeded shuffle dealt round-robin.
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub strategy: PartitionStrategy,
    pub n_nodes: usize,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn new(strategy: PartitionStrategy, n_nodes: usize, seed: u64) -> Self {
        Self {
            strategy,
            n_nodes,
            seed,
        }
    }

    /// Index lists, one per node.
    pub fn assign(&self, data: &LabeledDataset) -> Result<Vec<Vec<usize>>> {
        let n = self.n_nodes;
        if n == 0 || n > data.len() {
            return Err(Error::Partition(format!("{n} nodes for {} points", data.len())));
        }
        let both = |lists: &[Vec<usize>]| {
            lists.iter().all(|l| {
                let ys = l.iter().map(|&i| data.points()[i].y);
                ys.clone().any(|y| y > 0.0) && ys.clone().any(|y| y < 0.0)
            })
        };
        match self.strategy {
            PartitionStrategy::HeterogeneousByRegion => {
                let cells = GRID * GRID;
                if !cells.is_multiple_of(n) {
                    return Err(Error::Partition(format!("{n} nodes do not divide {cells} cells")));
                }
                let per = cells / n;
                let mut lists = vec![Vec::new(); n];
                for (i, p) in data.points().iter().enumerate() {
                    if p.x.len() < 2 {
                        return Err(Error::Partition("region partition needs 2 features".into()));
                    }
                    let (row, col) = cell_of(&p.x);
                    lists[(col * GRID + row) / per].push(i);
                }
                if !both(&lists) {
                    return Err(Error::Partition(format!(
                        "region blocks of {per} cells leave a node with a single label"
                    )));
                }
                Ok(lists)
            }
            PartitionStrategy::UniformRandom => {
                for attempt in 0..MAX_REDRAWS {
                    let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                    rng.set_stream(attempt);
                    let order = shuffle_indices(data.len(), &mut rng);
                    let mut lists = vec![Vec::new(); n];
                    for (k, i) in order.into_iter().enumerate() {
                        lists[k % n].push(i);
                    }
                    if both(&lists) {
                        return Ok(lists);
                    }
                }
                Err(Error::Partition("could not give every node both labels".into()))
            }
        }
    }
}

/// Per-node datasets under `plan`.
pub fn partition(data: &LabeledDataset, plan: &PartitionPlan) -> Result<Vec<LabeledDataset>> {
    Ok(plan.assign(data)?.iter().map(|idx| data.select(idx)).collect())
}

/// Stratified split: `round(fraction * count)` points of each label go to the
/// test side. Both sides keep the original point order.
pub fn train_test_split(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; data.len()];
    for sign in [1.0, -1.0] {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| data.points()[i].y == sign).collect();
        let take = (test_fraction * idx.len() as f64).round() as usize;
        for k in shuffle_indices(idx.len(), &mut rng).into_iter().take(take) {
            is_test[idx[k]] = true;
        }
    }
    let test: Vec<usize> = (0..data.len()).filter(|&i| is_test[i]).collect();
    let train: Vec<usize> = (0..data.len()).filter(|&i| !is_test[i]).collect();
    if test.is_empty() || train.is_empty() {
        return Err(Error::Split(format!(
            "fraction {test_fraction} on {} points leaves an empty side",
            data.len()
        )));
    }
    Ok((data.select(&train), data.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_checkerboard, CheckerboardSpec};

    #[test]
    fn four_nodes_get_column_strips() {
        let d = gen_checkerboard(&CheckerboardSpec::default()).unwrap();
        let plan = PartitionPlan::new(PartitionStrategy::HeterogeneousByRegion, 4, 0);
        let parts = partition(&d, &plan).unwrap();
        for (k, part) in parts.iter().enumerate() {
            assert!(part.points().iter().all(|p| cell_of(&p.x).1 == k));
            assert!(part.has_both_labels());
        }
        assert!(partition(&d, &PartitionPlan::new(PartitionStrategy::HeterogeneousByRegion, 3, 0)).is_err());
        assert!(partition(&d, &PartitionPlan::new(PartitionStrategy::HeterogeneousByRegion, 16, 0)).is_err());
        let one = partition(&d, &PartitionPlan::new(PartitionStrategy::HeterogeneousByRegion, 1, 0)).unwrap();
        assert_eq!(one[0], d);
    }

    #[test]
    fn random_partition_counts() {
        let d = gen_checkerboard(&CheckerboardSpec::default()).unwrap();
        let parts = partition(&d, &PartitionPlan::new(PartitionStrategy::UniformRandom, 4, 7)).unwrap();
        assert!(parts.iter().all(|p| p.len() == 40 && p.has_both_labels()));
    }

    #[test]
    fn stratified_split() {
        let d = gen_checkerboard(&CheckerboardSpec::default()).unwrap();
        let (train, test) = train_test_split(&d, 0.25, 3).unwrap();
        assert_eq!((train.len(), test.len()), (120, 40));
        assert_eq!(test.label_counts(), (20, 20));
        assert_eq!(train_test_split(&d, 0.25, 3).unwrap(), (train, test));
        assert!(train_test_split(&d, 1.0, 3).is_err());
        let tiny = d.select(&[0, 20]);
        assert!(train_test_split(&tiny, 0.1, 0).is_err());
    }
}
