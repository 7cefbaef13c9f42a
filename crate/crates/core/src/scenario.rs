//! Seeded random cell scenarios: per-user maximum excess delay, maximum Doppler and
//! service type.
//!
//! Scenario `i` is drawn from its own ChaCha8 stream seeded with
//! [`mix_seed`]`(master_seed, i)`, so generation order and worker count never
//! affect content.
//!
//! Within a cell, users may share their environment. With `channel_correlation`
//! ρ > 0 the delay and Doppler of each user come from a Gaussian copula
//! `z = ρ·z_cell + √(1−ρ²)·z_user`, mapped through Φ onto the configured range, so
//! each user's marginal stays exactly uniform. With `service_concentration` α > 0
//! the cell draws a service mix from a symmetric Dirichlet(α) and users draw their
//! service from it; the per-user marginal is still uniform over the three types.
//! ρ = 0 and α = 0 give fully independent users.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io_util::{fmt_sig9, mix_seed, parse_f64, parse_int, read_to_string, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ServiceType {
    Embb,
    Urllc,
    Mmtc,
}

impl ServiceType {
    pub const ALL: [ServiceType; 3] = [ServiceType::Embb, ServiceType::Urllc, ServiceType::Mmtc];

    pub fn code(self) -> u8 {
        match self {
            ServiceType::Embb => 0,
            ServiceType::Urllc => 1,
            ServiceType::Mmtc => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ServiceType::Embb),
            1 => Ok(ServiceType::Urllc),
            2 => Ok(ServiceType::Mmtc),
            _ => Err(Error::Domain(format!("unknown service code {code}"))),
        }
    }
}

impl fmt::Display for ServiceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceType::Embb => "eMBB",
            ServiceType::Urllc => "uRLLC",
            ServiceType::Mmtc => "mMTC",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserScenario {
    pub tau_max_s: f64,
    pub doppler_hz: f64,
    pub service: ServiceType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScenario {
    pub scenario_id: u64,
    pub users: Vec<UserScenario>,
}

impl CellScenario {
    pub fn service_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for u in &self.users {
            counts[usize::from(u.service.code())] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_scenarios: usize,
    pub users_per_cell: usize,
    pub tau_range_s: (f64, f64),
    pub doppler_range_hz: (f64, f64),
    /// Copula correlation ρ ∈ [0, 1) shared by users of one cell.
    pub channel_correlation: f64,
    /// Dirichlet concentration α of the per-cell service mix; 0 disables mixing.
    pub service_concentration: f64,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_scenarios: 20_000,
            users_per_cell: 20,
            tau_range_s: (1e-7, 6e-6),
            doppler_range_hz: (5.0, 2000.0),
            channel_correlation: 0.9,
            service_concentration: 0.5,
            master_seed: 42,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_scenarios == 0 {
            return Err(Error::Config("num_scenarios must be at least 1".into()));
        }
        if self.users_per_cell == 0 {
            return Err(Error::Config("users_per_cell must be at least 1".into()));
        }
        check_range("tau range", self.tau_range_s)?;
        check_range("doppler range", self.doppler_range_hz)?;
        if !(0.0..1.0).contains(&self.channel_correlation) {
            return Err(Error::Config(format!(
                "channel_correlation must lie in [0, 1), got {}",
                self.channel_correlation
            )));
        }
        if !(self.service_concentration >= 0.0 && self.service_concentration.is_finite()) {
            return Err(Error::Config(format!(
                "service_concentration must be finite and >= 0, got {}",
                self.service_concentration
            )));
        }
        Ok(())
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must satisfy 0 < min < max, got ({lo}, {hi})"
        )))
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Draws scenario `index` from its own substream.
pub fn generate_scenario(config: &ScenarioConfig, index: u64) -> CellScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.master_seed, index));
    let rho = config.channel_correlation;
    let (cell_tau, cell_dop): (f64, f64) = if rho > 0.0 {
        (rng.sample(StandardNormal), rng.sample(StandardNormal))
    } else {
        (0.0, 0.0)
    };
    let service_mix = service_mix(config.service_concentration, &mut rng);
    let own = (1.0 - rho * rho).sqrt();

    let unit = |rng: &mut ChaCha8Rng, cell: f64| -> f64 {
        if rho > 0.0 {
            let e: f64 = rng.sample(StandardNormal);
            std_normal_cdf(rho * cell + own * e)
        } else {
            rng.random::<f64>()
        }
    };

    let (tau_lo, tau_hi) = config.tau_range_s;
    let (dop_lo, dop_hi) = config.doppler_range_hz;
    let users = (0..config.users_per_cell)
        .map(|_| {
            let ut = unit(&mut rng, cell_tau);
            let ud = unit(&mut rng, cell_dop);
            let r: f64 = rng.random();
            let service = if r < service_mix[0] {
                ServiceType::Embb
            } else if r < service_mix[0] + service_mix[1] {
                ServiceType::Urllc
            } else {
                ServiceType::Mmtc
            };
            UserScenario {
                tau_max_s: (tau_lo + (tau_hi - tau_lo) * ut).clamp(tau_lo, tau_hi),
                doppler_hz: (dop_lo + (dop_hi - dop_lo) * ud).clamp(dop_lo, dop_hi),
                service,
            }
        })
        .collect();
    CellScenario {
        scenario_id: index,
        users,
    }
}

fn service_mix(alpha: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    if alpha <= 0.0 {
        return [1.0 / 3.0; 3];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let g: [f64; 3] = std::array::from_fn(|_| gamma.sample(rng));
    let total: f64 = g.iter().sum();
    if total > 0.0 {
        g.map(|x| x / total)
    } else {
        [1.0 / 3.0; 3]
    }
}

/// Generates all scenarios in index order; parallel across the current rayon pool.
pub fn generate_scenarios(config: &ScenarioConfig) -> Result<Vec<CellScenario>> {
    config.validate()?;
    Ok((0..config.num_scenarios as u64)
        .into_par_iter()
        .map(|i| generate_scenario(config, i))
        .collect())
}

pub fn raw_csv_header(users: usize) -> String {
    let mut h = String::from("scenario_id");
    for u in 0..users {
        h.push_str(&format!(",u{u}_tau_s,u{u}_doppler_hz,u{u}_service"));
    }
    h
}

pub fn raw_csv_string(scenarios: &[CellScenario]) -> Result<String> {
    let users = scenarios.first().map_or(0, |s| s.users.len());
    let mut out = raw_csv_header(users);
    out.push('\n');
    for s in scenarios {
        if s.users.len() != users {
            return Err(Error::Domain(format!(
                "scenario {} has {} users, expected {users}",
                s.scenario_id,
                s.users.len()
            )));
        }
        out.push_str(&s.scenario_id.to_string());
        for u in &s.users {
            out.push(',');
            out.push_str(&fmt_sig9(u.tau_max_s));
            out.push(',');
            out.push_str(&fmt_sig9(u.doppler_hz));
            out.push(',');
            out.push_str(&u.service.code().to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_raw_csv(scenarios: &[CellScenario], path: &Path) -> Result<()> {
    write_atomic(path, &raw_csv_string(scenarios)?)
}

pub fn parse_raw_csv(text: &str) -> Result<Vec<CellScenario>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Schema {
        line: 1,
        msg: "missing header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || !(cols.len() - 1).is_multiple_of(3) {
        return Err(Error::Schema {
            line: 1,
            msg: format!("unexpected raw header with {} columns", cols.len()),
        });
    }
    let users = (cols.len() - 1) / 3;
    if header.trim() != raw_csv_header(users) {
        return Err(Error::Schema {
            line: 1,
            msg: "raw header does not match `scenario_id,u0_tau_s,u0_doppler_hz,u0_service,...`"
                .into(),
        });
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Schema {
                line: lineno,
                msg: format!("expected {} columns, found {}", cols.len(), fields.len()),
            });
        }
        let scenario_id: u64 = parse_int(fields[0], lineno)?;
        let mut us = Vec::with_capacity(users);
        for chunk in fields[1..].chunks(3) {
            let code: u8 = parse_int(chunk[2], lineno)?;
            let service = ServiceType::from_code(code).map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid service code {code}"),
            })?;
            us.push(UserScenario {
                tau_max_s: parse_f64(chunk[0], lineno)?,
                doppler_hz: parse_f64(chunk[1], lineno)?,
                service,
            });
        }
        out.push(CellScenario {
            scenario_id,
            users: us,
        });
    }
    Ok(out)
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<CellScenario>> {
    parse_raw_csv(&read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, s: usize) -> ScenarioConfig {
        ScenarioConfig {
            num_scenarios: s,
            master_seed: seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn deterministic_for_equal_config() {
        let c = small(42, 3);
        assert_eq!(generate_scenarios(&c).unwrap(), generate_scenarios(&c).unwrap());
    }

    #[test]
    fn scenario_content_independent_of_order() {
        let c = small(7, 50);
        let all = generate_scenarios(&c).unwrap();
        for i in [49u64, 3, 17, 0] {
            assert_eq!(generate_scenario(&c, i), all[i as usize]);
        }
    }

    #[test]
    fn default_tau_range_respected() {
        let c = ScenarioConfig {
            num_scenarios: 1000,
            ..ScenarioConfig::default()
        };
        for s in generate_scenarios(&c).unwrap() {
            assert_eq!(s.users.len(), 20);
            for u in &s.users {
                assert!((1e-7..=6e-6).contains(&u.tau_max_s));
                assert!((5.0..=2000.0).contains(&u.doppler_hz));
            }
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        let mut c = small(1, 1);
        c.tau_range_s = (2e-6, 1e-6);
        assert!(matches!(generate_scenarios(&c), Err(Error::Config(_))));
        let mut c = small(1, 1);
        c.doppler_range_hz = (0.0, 10.0);
        assert!(generate_scenarios(&c).is_err());
        let mut c = small(1, 0);
        c.num_scenarios = 0;
        assert!(generate_scenarios(&c).is_err());
        let mut c = small(1, 1);
        c.channel_correlation = 1.0;
        assert!(generate_scenarios(&c).is_err());
    }

    #[test]
    fn independent_mode_draws_plain_uniforms() {
        let mut c = small(5, 200);
        c.channel_correlation = 0.0;
        c.service_concentration = 0.0;
        let s = generate_scenarios(&c).unwrap();
        let n = s.len() * 20;
        let mean_tau: f64 = s.iter().flat_map(|c| &c.users).map(|u| u.tau_max_s).sum::<f64>() / n as f64;
        assert!((mean_tau - 3.05e-6).abs() < 0.1e-6);
    }

    #[test]
    fn raw_csv_roundtrip_and_header() {
        let c = small(3, 4);
        let s = generate_scenarios(&c).unwrap();
        let text = raw_csv_string(&s).unwrap();
        assert!(text.starts_with("scenario_id,u0_tau_s,u0_doppler_hz,u0_service,u1_tau_s"));
        let back = parse_raw_csv(&text).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(raw_csv_string(&back).unwrap(), text);
        for (a, b) in s.iter().zip(&back) {
            for (u, v) in a.users.iter().zip(&b.users) {
                assert!(((u.tau_max_s - v.tau_max_s) / u.tau_max_s).abs() < 1e-8);
                assert_eq!(u.service, v.service);
            }
        }
    }

    #[test]
    fn raw_csv_rejects_bad_rows() {
        assert!(matches!(parse_raw_csv(""), Err(Error::Schema { line: 1, .. })));
        let text = "scenario_id,u0_tau_s,u0_doppler_hz,u0_service\n0,1e-6,10\n";
        assert!(matches!(parse_raw_csv(text), Err(Error::Schema { line: 2, .. })));
        let text = "scenario_id,u0_tau_s,u0_doppler_hz,u0_service\n0,1e-6,10,7\n";
        assert!(matches!(parse_raw_csv(text), Err(Error::Parse { line: 2, .. })));
    }
}
