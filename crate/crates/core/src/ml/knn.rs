use crate::error::{Error, Result};

/// k-nearest-neighbors over a stored standardized training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    pub n_classes: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Knn {
    pub fn fit(x: &[Vec<f64>], y: &[usize], k: usize, n_classes: usize) -> Result<Self> {
        super::check_training_set(x, y, n_classes)?;
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if k > x.len() {
            return Err(Error::Config(format!(
                "k = {k} exceeds {} training rows",
                x.len()
            )));
        }
        Ok(Self {
            k,
            n_classes,
            x: x.to_vec(),
            y: y.to_vec(),
        })
    }

    /// Vote fractions among the k nearest rows; equal distances favor the lower row index.
    pub fn predict_proba(&self, q: &[f64]) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let d2: f64 = row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_dist);
        }
        let mut votes = vec![0.0; self.n_classes];
        for &(_, i) in &dist[..self.k] {
            votes[self.y[i]] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= self.k as f64);
        votes
    }
}
