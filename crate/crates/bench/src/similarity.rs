//! Pairwise cosine similarity of the gradients along a trajectory.

use rfd_core::optimizers::Trajectory;

/// Symmetric matrix of gradient cosines; entries involving a zero gradient
/// are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub entries: Vec<Vec<Option<f64>>>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i][j]
    }

    /// Cosines between consecutive gradients, `(n, n + 1)`.
    pub fn first_off_diagonal(&self) -> Vec<Option<f64>> {
        (1..self.len()).map(|i| self.entries[i - 1][i]).collect()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn grad_similarity(traj: &Trajectory) -> SimilarityMatrix {
    let grads: Vec<&[f64]> = traj.records.iter().map(|r| r.grad.as_slice()).collect();
    let n = grads.len();
    let mut entries = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = cosine(grads[i], grads[j]);
            entries[i][j] = c;
            entries[j][i] = c;
        }
    }
    SimilarityMatrix { entries }
}
