//! User-count independent scenario features and z-score standardization.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::{fmt_exact, parse_f64, read_to_string, write_atomic};
use crate::scenario::CellScenario;

pub const NUM_FEATURES: usize = 7;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "mean_tau_s",
    "max_tau_s",
    "mean_doppler_hz",
    "max_doppler_hz",
    "frac_embb",
    "frac_urllc",
    "frac_mmtc",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn mean_tau_s(&self) -> f64 {
        self.0[0]
    }
    pub fn max_tau_s(&self) -> f64 {
        self.0[1]
    }
    pub fn mean_doppler_hz(&self) -> f64 {
        self.0[2]
    }
    pub fn max_doppler_hz(&self) -> f64 {
        self.0[3]
    }
    pub fn service_fractions(&self) -> [f64; 3] {
        [self.0[4], self.0[5], self.0[6]]
    }
}

pub fn extract(scenario: &CellScenario) -> Result<FeatureVector> {
    let users = &scenario.users;
    if users.is_empty() {
        return Err(Error::Domain(format!(
            "scenario {} has no users",
            scenario.scenario_id
        )));
    }
    let n = users.len() as f64;
    let mean_tau = users.iter().map(|u| u.tau_max_s).sum::<f64>() / n;
    let max_tau = users.iter().map(|u| u.tau_max_s).fold(f64::MIN, f64::max);
    let mean_dop = users.iter().map(|u| u.doppler_hz).sum::<f64>() / n;
    let max_dop = users.iter().map(|u| u.doppler_hz).fold(f64::MIN, f64::max);
    let counts = scenario.service_counts();
    let n_u = users.len();
    // the last fraction is a remainder so the three sum to one exactly
    let f5 = counts[0] as f64 / n_u as f64;
    let f6 = counts[1] as f64 / n_u as f64;
    let f7 = if counts[2] == 0 { 0.0 } else { 1.0 - f5 - f6 };
    Ok(FeatureVector([
        mean_tau.min(max_tau),
        max_tau,
        mean_dop.min(max_dop),
        max_dop,
        f5,
        f6,
        f7.max(0.0),
    ]))
}

/// Per-feature z-score standardizer fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
}

impl Scaler {
    /// Uses the sample (n − 1) standard deviation.
    pub fn fit(rows: &[FeatureVector]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Fit(format!(
                "scaler needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; NUM_FEATURES];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r.0) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; NUM_FEATURES];
        for r in rows {
            for j in 0..NUM_FEATURES {
                std[j] += (r.0[j] - mean[j]).powi(2);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());
        Ok(Self { mean, std })
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.std[feature].partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
    }

    pub fn constant_features(&self) -> Vec<usize> {
        (0..NUM_FEATURES).filter(|&j| self.is_constant(j)).collect()
    }

    pub fn apply(&self, x: &FeatureVector) -> [f64; NUM_FEATURES] {
        std::array::from_fn(|j| {
            if self.is_constant(j) {
                x.0[j]
            } else {
                (x.0[j] - self.mean[j]) / self.std[j]
            }
        })
    }

    pub fn unscale(&self, z: &[f64; NUM_FEATURES]) -> FeatureVector {
        FeatureVector(std::array::from_fn(|j| {
            if self.is_constant(j) {
                z[j]
            } else {
                z[j] * self.std[j] + self.mean[j]
            }
        }))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("scaler v1\n");
        for ((name, mean), std) in FEATURE_NAMES.iter().zip(&self.mean).zip(&self.std) {
            let _ = writeln!(s, "{name} {} {}", fmt_exact(*mean), fmt_exact(*std));
        }
        s
    }

    /// Parses the block produced by [`Scaler::to_text`] starting at `first_line` (1-based).
    pub fn from_lines<'a, I>(lines: &mut I, first_line: usize) -> Result<Self>
    where
        I: Iterator<Item = &'a str>,
    {
        let header = lines.next().unwrap_or("");
        if header.trim() != "scaler v1" {
            return Err(Error::Schema {
                line: first_line,
                msg: format!("expected 'scaler v1', found '{header}'"),
            });
        }
        let mut mean = [0.0; NUM_FEATURES];
        let mut std = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            let line_no = first_line + 1 + j;
            let line = lines.next().ok_or(Error::Schema {
                line: line_no,
                msg: "truncated scaler block".into(),
            })?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != FEATURE_NAMES[j] {
                return Err(Error::Schema {
                    line: line_no,
                    msg: format!("expected '{} <mean> <std>'", FEATURE_NAMES[j]),
                });
            }
            mean[j] = parse_f64(parts[1], line_no)?;
            std[j] = parse_f64(parts[2], line_no)?;
        }
        Ok(Self { mean, std })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Self::from_lines(&mut text.lines(), 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ServiceType, UserScenario};

    fn user(tau: f64, dop: f64, service: ServiceType) -> UserScenario {
        UserScenario {
            tau_max_s: tau,
            doppler_hz: dop,
            service,
        }
    }

    #[test]
    fn two_user_example() {
        let s = CellScenario {
            scenario_id: 1,
            users: vec![
                user(1e-6, 100.0, ServiceType::Embb),
                user(3e-6, 300.0, ServiceType::Urllc),
            ],
        };
        let f = extract(&s).unwrap();
        let want = [2e-6, 3e-6, 200.0, 300.0, 0.5, 0.5, 0.0];
        for (a, b) in f.0.iter().zip(want) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn singleton_and_empty() {
        let s = CellScenario {
            scenario_id: 0,
            users: vec![user(2e-6, 50.0, ServiceType::Mmtc)],
        };
        let f = extract(&s).unwrap();
        assert_eq!(f.0[0], f.0[1]);
        assert_eq!(f.0[2], f.0[3]);
        assert_eq!(f.service_fractions(), [0.0, 0.0, 1.0]);
        let empty = CellScenario {
            scenario_id: 0,
            users: vec![],
        };
        assert!(extract(&empty).is_err());
    }

    #[test]
    fn scaler_centering_and_flags() {
        let rows = vec![
            FeatureVector([1.0, 2.0, 3.0, 4.0, 0.5, 0.5, 0.0]),
            FeatureVector([3.0, 4.0, 5.0, 8.0, 0.2, 0.3, 0.0]),
            FeatureVector([2.0, 9.0, 1.0, 6.0, 0.1, 0.4, 0.0]),
        ];
        let sc = Scaler::fit(&rows).unwrap();
        assert_eq!(sc.constant_features(), vec![6]);
        let z = sc.apply(&FeatureVector(sc.mean));
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        let z = sc.apply(&rows[0]);
        assert_eq!(z[6], 0.0);
        assert!(Scaler::fit(&rows[..1]).is_err());
    }

    #[test]
    fn scaler_text_roundtrip() {
        let rows = vec![
            FeatureVector([1.0, 2.0, 3.0, 4.0, 0.5, 0.5, 0.0]),
            FeatureVector([3.1, 4.7, 5.0, 8.0, 0.2, 0.3, 0.5]),
        ];
        let sc = Scaler::fit(&rows).unwrap();
        let text = sc.to_text();
        assert!(text.starts_with("scaler v1\nmean_tau_s "));
        let back = Scaler::from_lines(&mut text.lines(), 1).unwrap();
        assert_eq!(back, sc);
    }
}
