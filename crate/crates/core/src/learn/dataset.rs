use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A feature vector with a `+1` / `-1` label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Points in a fixed order; labels are validated on construction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    points: Vec<LabeledPoint>,
}

pub(crate) fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(Error::Label(y))
    }
}

impl LabeledDataset {
    pub fn new(points: Vec<LabeledPoint>) -> Result<Self> {
        for p in &points {
            check_label(p.y)?;
        }
        Ok(Self { points })
    }

    pub fn from_parts(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Dimension(format!("{} points but {} labels", xs.len(), ys.len())));
        }
        Self::new(xs.into_iter().zip(ys).map(|(x, y)| LabeledPoint { x, y }).collect())
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.points.iter().map(|p| p.x.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    /// `(positive, negative)` label counts.
    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.points.iter().filter(|p| p.y > 0.0).count();
        (pos, self.points.len() - pos)
    }

    pub fn has_both_labels(&self) -> bool {
        let (pos, neg) = self.label_counts();
        pos > 0 && neg > 0
    }

    /// Points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }

    /// Concatenation of several datasets.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a LabeledDataset>) -> Self {
        Self {
            points: parts.into_iter().flat_map(|d| d.points.iter().cloned()).collect(),
        }
    }

    /// Same points with every label negated.
    pub fn flipped(&self) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| LabeledPoint { x: p.x.clone(), y: -p.y })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_labels() {
        assert!(matches!(
            LabeledDataset::from_parts(vec![vec![0.0]], vec![0.0]),
            Err(Error::Label(_))
        ));
        assert!(LabeledDataset::from_parts(vec![vec![0.0], vec![1.0]], vec![1.0, -1.0]).is_ok());
    }

    #[test]
    fn select_and_counts() {
        let d = LabeledDataset::from_parts(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![1.0, -1.0, 1.0],
        )
        .unwrap();
        assert_eq!(d.label_counts(), (2, 1));
        let s = d.select(&[2, 1]);
        assert_eq!(s.labels(), vec![1.0, -1.0]);
        assert_eq!(s.points()[0].x, vec![2.0]);
        assert_eq!(d.flipped().label_counts(), (1, 2));
    }
}
