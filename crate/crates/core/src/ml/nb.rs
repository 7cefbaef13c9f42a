use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with per-class feature means and floored variances.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    pub priors: Vec<f64>,
    /// `means[c][j]`
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<Self> {
        super::check_training_set(x, y, n_classes)?;
        let d = x[0].len();
        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.iter().zip(y) {
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Fit(format!(
                "class {} has no training rows",
                c + 1
            )));
        }
        for (m, &n) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        let mut vars = vec![vec![0.0; d]; n_classes];
        for (row, &c) in x.iter().zip(y) {
            for j in 0..d {
                vars[c][j] += (row[j] - means[c][j]).powi(2);
            }
        }
        for (v, &n) in vars.iter_mut().zip(&counts) {
            v.iter_mut()
                .for_each(|s| *s = (*s / n as f64).max(VARIANCE_FLOOR));
        }
        let total = x.len() as f64;
        let priors = counts.iter().map(|&n| n as f64 / total).collect();
        Ok(Self {
            priors,
            means,
            vars,
        })
    }

    pub fn log_joint(&self, q: &[f64]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.priors
            .iter()
            .zip(self.means.iter().zip(&self.vars))
            .map(|(p, (m, v))| {
                let ll: f64 = q
                    .iter()
                    .zip(m.iter().zip(v))
                    .map(|(x, (mu, var))| -0.5 * (ln_2pi + var.ln()) - (x - mu).powi(2) / (2.0 * var))
                    .sum();
                p.ln() + ll
            })
            .collect()
    }

    pub fn predict_proba(&self, q: &[f64]) -> Vec<f64> {
        super::softmax(&self.log_joint(q))
    }
}
