//! Semi-analytical multi-numerology CP-OFDM link model.
//!
//! Each user's SINR is `1 / (N0 + ISI + ICI + INI)` with all powers normalized to a
//! unit-power subcarrier:
//!
//! * ISI: energy of a truncated exponential power-delay profile (σ = τmax/4) that
//!   arrives after the cyclic prefix.
//! * ICI: small-offset Doppler approximation `(π·fD·Tsym)² / 6`, capped at 1.
//! * INI: rectangular-pulse sidelobe energy collected by a victim subcarrier from an
//!   adjacent block of another numerology, integrated across the aggressor block and
//!   weighted by the share of victim subcarriers sitting at the block edge.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerology::{
    params, GuardWidths, WaveformClass, BASE_SCS_HZ, NUM_NUMEROLOGIES,
};
use crate::scenario::{CellScenario, UserScenario};

#[derive(Debug, Clone, PartialEq)]
pub struct PhyConfig {
    pub snr_db: f64,
    pub total_bw_hz: f64,
    pub guards: GuardWidths,
    /// Victim subcarriers per block edge exposed to INI (one resource block).
    pub edge_subcarriers: f64,
    /// Multiplier on the continuous-spectrum sidelobe integral.
    pub ini_leakage_scale: f64,
    /// Subcarriers reserved for a configured numerology that serves no user.
    pub min_block_subcarriers: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            snr_db: 20.0,
            total_bw_hz: 20e6,
            guards: GuardWidths::default(),
            edge_subcarriers: 12.0,
            ini_leakage_scale: 0.005,
            min_block_subcarriers: 12.0,
        }
    }
}

impl PhyConfig {
    pub fn noise_power(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.guards.validate()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("total bandwidth", self.total_bw_hz)?;
        positive("edge subcarriers", self.edge_subcarriers)?;
        if !self.snr_db.is_finite() {
            return Err(Error::Config("snr_db must be finite".into()));
        }
        if !(self.ini_leakage_scale.is_finite() && self.ini_leakage_scale >= 0.0) {
            return Err(Error::Config("ini_leakage_scale must be >= 0".into()));
        }
        if !(self.min_block_subcarriers.is_finite() && self.min_block_subcarriers >= 0.0) {
            return Err(Error::Config("min_block_subcarriers must be >= 0".into()));
        }
        Ok(())
    }
}

/// Fraction of received power landing outside the cyclic prefix.
pub fn isi_fraction(tau_max_s: f64, mu: u8) -> Result<f64> {
    if !(tau_max_s > 0.0 && tau_max_s.is_finite()) {
        return Err(Error::Domain(format!(
            "maximum excess delay must be positive, got {tau_max_s}"
        )));
    }
    let t_cp = crate::numerology::numerology_params(mu)?.t_cp_s;
    Ok(isi_unchecked(tau_max_s, t_cp))
}

fn isi_unchecked(tau_max_s: f64, t_cp: f64) -> f64 {
    if tau_max_s <= t_cp {
        return 0.0;
    }
    let sigma = tau_max_s / 4.0;
    let tail = (-t_cp / sigma).exp() - (-tau_max_s / sigma).exp();
    tail / (1.0 - (-tau_max_s / sigma).exp())
}

pub fn ici_fraction(doppler_hz: f64, mu: u8) -> Result<f64> {
    if !(doppler_hz >= 0.0 && doppler_hz.is_finite()) {
        return Err(Error::Domain(format!(
            "Doppler must be non-negative, got {doppler_hz}"
        )));
    }
    let t_sym = crate::numerology::numerology_params(mu)?.t_sym_s;
    Ok(ici_unchecked(doppler_hz, t_sym))
}

fn ici_unchecked(doppler_hz: f64, t_sym: f64) -> f64 {
    let x = PI * doppler_hz * t_sym;
    (x * x / 6.0).min(1.0)
}

/// Geometry of one victim/aggressor block adjacency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IniGeometry {
    pub guard_hz: f64,
    pub victim_mu: u8,
    pub aggressor_mu: u8,
    pub aggressor_width_hz: f64,
    /// Share of victim subcarriers exposed at the edge, in [0, 1].
    pub edge_weight: f64,
}

/// Inter-numerology interference power at a victim subcarrier.
///
/// With `g = guard + scs_victim / 2` (distance from the edge victim subcarrier to the
/// aggressor band) and aggressor width `W`, returns
/// `scale · edge_weight · (scs_victim / π²) · (1/g − 1/(g + W))`.
/// Identical numerologies stay orthogonal and give zero.
pub fn ini_fraction(geom: &IniGeometry, leakage_scale: f64) -> Result<f64> {
    let victim = crate::numerology::numerology_params(geom.victim_mu)?;
    crate::numerology::numerology_params(geom.aggressor_mu)?;
    if !(0.0..=1.0).contains(&geom.edge_weight) {
        return Err(Error::Domain(format!(
            "edge weight must lie in [0, 1], got {}",
            geom.edge_weight
        )));
    }
    if geom.guard_hz < 0.0 || geom.aggressor_width_hz < 0.0 {
        return Err(Error::Domain("guard and aggressor width must be >= 0".into()));
    }
    if geom.victim_mu == geom.aggressor_mu || geom.aggressor_width_hz == 0.0 {
        return Ok(0.0);
    }
    let g = geom.guard_hz + victim.scs_hz / 2.0;
    let integral = 1.0 / g - 1.0 / (g + geom.aggressor_width_hz);
    Ok((leakage_scale * geom.edge_weight * victim.scs_hz / (PI * PI) * integral).min(1.0))
}

/// Contiguous same-numerology blocks in ascending numerology order.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub active_mus: Vec<u8>,
    /// Numerology of each user, in scenario user order.
    pub user_assignment: Vec<u8>,
    /// Bandwidth of each active block, aligned with `active_mus`.
    pub block_bandwidth_hz: Vec<f64>,
    pub block_users: Vec<usize>,
    /// Guard width at each of the `active_mus.len() - 1` internal boundaries.
    pub guard_hz: f64,
    pub total_bw_hz: f64,
}

impl AllocationPlan {
    /// Share of the band that carries no user data (guards plus reserved empty blocks).
    pub fn idle_bw_fraction(&self) -> f64 {
        let guards = self.guard_hz * (self.active_mus.len().saturating_sub(1)) as f64;
        let reserved: f64 = self
            .block_users
            .iter()
            .zip(&self.block_bandwidth_hz)
            .filter(|(&n, _)| n == 0)
            .map(|(_, &bw)| bw)
            .sum();
        (guards + reserved) / self.total_bw_hz
    }

    fn block_index(&self, mu: u8) -> usize {
        self.active_mus
            .iter()
            .position(|&m| m == mu)
            .expect("user assigned to an active numerology")
    }
}

/// Interference-free impairment (ISI + ICI) of one user on every numerology.
fn impairments(user: &UserScenario) -> [f64; NUM_NUMEROLOGIES] {
    std::array::from_fn(|m| {
        let p = params(m as u8);
        isi_unchecked(user.tau_max_s, p.t_cp_s) + ici_unchecked(user.doppler_hz, p.t_sym_s)
    })
}

/// Numerology maximizing the ISI+ICI-only SINR; ties go to the lower index.
pub fn preferred_numerology(user: &UserScenario) -> u8 {
    let imp = impairments(user);
    let mut best = 0usize;
    for m in 1..NUM_NUMEROLOGIES {
        if imp[m] < imp[best] {
            best = m;
        }
    }
    best as u8
}

fn validate_users(scenario: &CellScenario) -> Result<()> {
    if scenario.users.is_empty() {
        return Err(Error::Domain(format!(
            "scenario {} has no users",
            scenario.scenario_id
        )));
    }
    for u in &scenario.users {
        if !(u.tau_max_s > 0.0 && u.tau_max_s.is_finite()) {
            return Err(Error::Domain(format!("invalid tau {}", u.tau_max_s)));
        }
        if !(u.doppler_hz >= 0.0 && u.doppler_hz.is_finite()) {
            return Err(Error::Domain(format!("invalid doppler {}", u.doppler_hz)));
        }
    }
    Ok(())
}

pub fn plan_allocation(
    scenario: &CellScenario,
    class: &WaveformClass,
    config: &PhyConfig,
) -> Result<AllocationPlan> {
    validate_users(scenario)?;
    let count = usize::from(class.num_count);
    if !(1..=NUM_NUMEROLOGIES).contains(&count) {
        return Err(Error::Domain(format!("invalid numerology count {count}")));
    }

    let preferred: Vec<u8> = scenario.users.iter().map(preferred_numerology).collect();
    let mut demand = [0usize; NUM_NUMEROLOGIES];
    for &p in &preferred {
        demand[usize::from(p)] += 1;
    }
    let mut order: Vec<u8> = (0..NUM_NUMEROLOGIES as u8).collect();
    order.sort_by_key(|&m| (std::cmp::Reverse(demand[usize::from(m)]), m));
    let mut active: Vec<u8> = order[..count].to_vec();
    active.sort_unstable();

    let user_assignment: Vec<u8> = preferred
        .iter()
        .map(|&p| {
            *active
                .iter()
                .min_by_key(|&&a| (a.abs_diff(p), a))
                .expect("at least one active numerology")
        })
        .collect();

    let block_users: Vec<usize> = active
        .iter()
        .map(|&m| user_assignment.iter().filter(|&&a| a == m).count())
        .collect();

    let guard_hz = if count > 1 {
        config.guards.hz(class.guard)
    } else {
        0.0
    };
    let guard_total = guard_hz * (count - 1) as f64;
    let reserved: f64 = active
        .iter()
        .zip(&block_users)
        .filter(|(_, &n)| n == 0)
        .map(|(&m, _)| config.min_block_subcarriers * params(m).scs_hz)
        .sum();
    let available = config.total_bw_hz - guard_total - reserved;
    if available <= 0.0 {
        return Err(Error::InfeasiblePlan(format!(
            "guards ({guard_total} Hz) and reserved blocks ({reserved} Hz) exhaust {} Hz",
            config.total_bw_hz
        )));
    }
    let n_users = scenario.users.len() as f64;
    let block_bandwidth_hz = active
        .iter()
        .zip(&block_users)
        .map(|(&m, &n)| {
            if n == 0 {
                config.min_block_subcarriers * params(m).scs_hz
            } else {
                available * n as f64 / n_users
            }
        })
        .collect();

    Ok(AllocationPlan {
        active_mus: active,
        user_assignment,
        block_bandwidth_hz,
        block_users,
        guard_hz,
        total_bw_hz: config.total_bw_hz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTriple {
    pub sinr_db: f64,
    pub se_bps_hz: f64,
    pub flexibility: f64,
}

/// Per-block INI power seen by that block's users.
pub fn block_ini(plan: &AllocationPlan, config: &PhyConfig) -> Vec<f64> {
    let n = plan.active_mus.len();
    (0..n)
        .map(|i| {
            if plan.block_users[i] == 0 {
                return 0.0;
            }
            let mu = plan.active_mus[i];
            let nsc = plan.block_bandwidth_hz[i] / params(mu).scs_hz;
            let edge_weight = (config.edge_subcarriers / nsc).min(1.0);
            [i.checked_sub(1), (i + 1 < n).then_some(i + 1)]
                .into_iter()
                .flatten()
                .map(|j| {
                    let geom = IniGeometry {
                        guard_hz: plan.guard_hz,
                        victim_mu: mu,
                        aggressor_mu: plan.active_mus[j],
                        aggressor_width_hz: plan.block_bandwidth_hz[j],
                        edge_weight,
                    };
                    ini_fraction(&geom, config.ini_leakage_scale).expect("plan geometry is valid")
                })
                .sum()
        })
        .collect()
}

/// Per-user linear SINR under a plan.
pub fn user_sinr(scenario: &CellScenario, plan: &AllocationPlan, config: &PhyConfig) -> Vec<f64> {
    let n0 = config.noise_power();
    let ini = block_ini(plan, config);
    scenario
        .users
        .iter()
        .zip(&plan.user_assignment)
        .map(|(u, &mu)| {
            let p = params(mu);
            let interference = isi_unchecked(u.tau_max_s, p.t_cp_s)
                + ici_unchecked(u.doppler_hz, p.t_sym_s)
                + ini[plan.block_index(mu)];
            1.0 / (n0 + interference)
        })
        .collect()
}

pub fn cell_metrics(
    scenario: &CellScenario,
    class: &WaveformClass,
    config: &PhyConfig,
) -> Result<MetricTriple> {
    let plan = plan_allocation(scenario, class, config)?;
    let sinr = user_sinr(scenario, &plan, config);
    let n = sinr.len() as f64;
    let sinr_db = sinr.iter().map(|s| 10.0 * s.log10()).sum::<f64>() / n;
    let per_user_se = sinr
        .iter()
        .zip(&plan.user_assignment)
        .map(|(s, &mu)| params(mu).cp_efficiency() * (1.0 + s).log2())
        .sum::<f64>()
        / n;
    Ok(MetricTriple {
        sinr_db,
        se_bps_hz: (1.0 - plan.idle_bw_fraction()) * per_user_se,
        flexibility: class.flexibility(),
    })
}

/// Guard width in Hz for a raw 15 kHz subcarrier count.
pub fn guard_sc15_to_hz(sc15: u32) -> f64 {
    f64::from(sc15) * BASE_SCS_HZ
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerology::{class_table, numerology_params, GuardOption};
    use crate::scenario::ServiceType;

    /// Midpoint-rule integral of the truncated exponential PDP beyond `t_cp`.
    fn isi_by_quadrature(tau: f64, t_cp: f64) -> f64 {
        let sigma = tau / 4.0;
        let n = 200_000;
        let h = tau / n as f64;
        let (mut total, mut tail) = (0.0, 0.0);
        for i in 0..n {
            let t = (i as f64 + 0.5) * h;
            let p = (-t / sigma).exp();
            total += p;
            if t > t_cp {
                tail += p;
            }
        }
        tail / total
    }

    fn user(tau: f64, dop: f64) -> UserScenario {
        UserScenario {
            tau_max_s: tau,
            doppler_hz: dop,
            service: ServiceType::Embb,
        }
    }

    fn cell(users: Vec<UserScenario>) -> CellScenario {
        CellScenario {
            scenario_id: 0,
            users,
        }
    }

    #[test]
    fn isi_inside_cp_is_zero() {
        assert_eq!(isi_fraction(1e-6, 0).unwrap(), 0.0);
    }

    #[test]
    fn isi_matches_quadrature() {
        for mu in 0..4u8 {
            let t_cp = numerology_params(mu).unwrap().t_cp_s;
            let v = isi_fraction(2.0 * t_cp, mu).unwrap();
            // closed form (e^-2 - e^-4)/(1 - e^-4), cross-checked by quadrature
            assert!((v - 0.119_202_922).abs() < 1e-6, "mu={mu}: {v}");
            assert!((v - isi_by_quadrature(2.0 * t_cp, t_cp)).abs() < 1e-5);
        }
        let v = isi_fraction(6e-6, 3).unwrap();
        let q = isi_by_quadrature(6e-6, numerology_params(3).unwrap().t_cp_s);
        assert!((v - q).abs() < 1e-5);
        assert!((v - 0.670_600_687).abs() < 1e-8, "{v}");
        assert!((v - 0.6712).abs() < 1e-3);
    }

    #[test]
    fn isi_rejects_non_positive_tau() {
        assert!(isi_fraction(0.0, 0).is_err());
        assert!(isi_fraction(-1e-6, 1).is_err());
    }

    #[test]
    fn ici_values() {
        assert_eq!(ici_fraction(0.0, 2).unwrap(), 0.0);
        let t_sym = numerology_params(0).unwrap().t_sym_s;
        let v = ici_fraction(0.1 / t_sym, 0).unwrap();
        assert!((v - 0.016_449_34).abs() < 1e-7, "{v}");
        assert_eq!(ici_fraction(1e9, 0).unwrap(), 1.0);
        assert!(ici_fraction(-1.0, 0).is_err());
    }

    #[test]
    fn ini_regression_value() {
        let geom = IniGeometry {
            guard_hz: 60_000.0,
            victim_mu: 0,
            aggressor_mu: 1,
            aggressor_width_hz: 3.6e6,
            edge_weight: 1.0,
        };
        // 15e3/π² · (1/67.5e3 − 1/3.6675e6) at unit leakage scale
        let v = ini_fraction(&geom, 1.0).unwrap();
        assert!((v - 0.022_101_417_018).abs() < 1e-11, "{v}");
        assert!((ini_fraction(&geom, 0.05).unwrap() - 0.05 * v).abs() < 1e-15);
    }

    #[test]
    fn ini_zero_for_same_numerology_and_empty_aggressor() {
        let mut geom = IniGeometry {
            guard_hz: 0.0,
            victim_mu: 2,
            aggressor_mu: 2,
            aggressor_width_hz: 1e6,
            edge_weight: 1.0,
        };
        assert_eq!(ini_fraction(&geom, 1.0).unwrap(), 0.0);
        geom.aggressor_mu = 1;
        geom.aggressor_width_hz = 0.0;
        assert_eq!(ini_fraction(&geom, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ini_decreases_with_guard() {
        let w = GuardWidths::default();
        let at = |g: GuardOption| {
            ini_fraction(
                &IniGeometry {
                    guard_hz: w.hz(g),
                    victim_mu: 1,
                    aggressor_mu: 0,
                    aggressor_width_hz: 5e6,
                    edge_weight: 0.3,
                },
                1.0,
            )
            .unwrap()
        };
        assert!(at(GuardOption::G3) < at(GuardOption::G2));
        assert!(at(GuardOption::G2) < at(GuardOption::G1));
    }

    #[test]
    fn plan_high_doppler_low_delay_picks_mu3() {
        let s = cell(vec![user(0.2e-6, 2000.0); 20]);
        let class = class_table().get(10).copied().unwrap();
        let plan = plan_allocation(&s, &class, &PhyConfig::default()).unwrap();
        assert_eq!(plan.active_mus, vec![3]);
        assert!(plan.user_assignment.iter().all(|&m| m == 3));
        assert_eq!(plan.block_bandwidth_hz, vec![20e6]);
    }

    #[test]
    fn plan_identical_users_fills_by_ascending_mu() {
        let s = cell(vec![user(5e-6, 50.0); 20]);
        assert_eq!(preferred_numerology(&s.users[0]), 0);
        let class = class_table().get(8).copied().unwrap();
        let plan = plan_allocation(&s, &class, &PhyConfig::default()).unwrap();
        assert_eq!(plan.active_mus, vec![0, 1]);
        assert!(plan.user_assignment.iter().all(|&m| m == 0));
        assert_eq!(plan.block_users, vec![20, 0]);
        // the empty numerology keeps its reserved block
        assert_eq!(plan.block_bandwidth_hz[1], 12.0 * 30_000.0);
    }

    #[test]
    fn plan_two_equal_groups() {
        let mut users = vec![user(5.5e-6, 10.0); 10];
        users.extend(vec![user(0.2e-6, 2000.0); 10]);
        let s = cell(users);
        let class = class_table().get(7).copied().unwrap();
        let config = PhyConfig::default();
        let plan = plan_allocation(&s, &class, &config).unwrap();
        assert_eq!(plan.active_mus, vec![0, 3]);
        assert_eq!(plan.block_users, vec![10, 10]);
        assert_eq!(plan.block_bandwidth_hz[0], plan.block_bandwidth_hz[1]);
        assert_eq!(plan.active_mus.len() - 1, 1);
        assert!((plan.block_bandwidth_hz.iter().sum::<f64>() - 20e6).abs() < 1e-6);
    }

    #[test]
    fn plan_infeasible_when_guards_exhaust_band() {
        let s = cell(vec![user(1e-6, 10.0), user(0.2e-6, 2000.0)]);
        let class = class_table().get(3).copied().unwrap();
        let config = PhyConfig {
            total_bw_hz: 200_000.0,
            ..PhyConfig::default()
        };
        assert!(matches!(
            plan_allocation(&s, &class, &config),
            Err(Error::InfeasiblePlan(_))
        ));
    }

    #[test]
    fn unimpaired_single_numerology_hits_snr() {
        let s = cell(vec![user(1e-8, 0.0); 5]);
        let class = class_table().get(10).copied().unwrap();
        let config = PhyConfig::default();
        let m = cell_metrics(&s, &class, &config).unwrap();
        assert!((m.sinr_db - 20.0).abs() < 1e-9);
        let eff = 2048.0 / 2192.0;
        assert!((m.se_bps_hz - eff * (101f64).log2()).abs() < 1e-9);
        assert_eq!(m.flexibility, 0.25);
    }

    #[test]
    fn flexibility_tracks_count() {
        let s = cell(vec![user(2e-6, 300.0); 4]);
        let config = PhyConfig::default();
        for c in class_table().iter() {
            let m = cell_metrics(&s, c, &config).unwrap();
            assert_eq!(m.flexibility, f64::from(c.num_count) / 4.0);
        }
        let c4 = class_table().get(4).copied().unwrap();
        assert_eq!(cell_metrics(&s, &c4, &config).unwrap().flexibility, 0.75);
    }

    #[test]
    fn wider_guard_raises_sinr_and_costs_band() {
        use crate::scenario::{generate_scenarios, ScenarioConfig};
        let scenarios = generate_scenarios(&ScenarioConfig {
            num_scenarios: 100,
            master_seed: 11,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let config = PhyConfig::default();
        let table = class_table();
        let (c1, c3) = (table.get(1).unwrap(), table.get(3).unwrap());
        for s in &scenarios {
            let m1 = cell_metrics(s, c1, &config).unwrap();
            let m3 = cell_metrics(s, c3, &config).unwrap();
            assert!(m3.sinr_db >= m1.sinr_db);
            let p1 = plan_allocation(s, c1, &config).unwrap();
            let p3 = plan_allocation(s, c3, &config).unwrap();
            assert!(p3.idle_bw_fraction() > p1.idle_bw_fraction());
        }
    }

    #[test]
    fn plan_is_permutation_covariant() {
        use crate::scenario::{generate_scenario, ScenarioConfig};
        let config = PhyConfig::default();
        let sc = ScenarioConfig::default();
        for i in 0..20 {
            let s = generate_scenario(&sc, i);
            let mut rev = s.clone();
            rev.users.reverse();
            for c in class_table().iter() {
                let a = plan_allocation(&s, c, &config).unwrap();
                let b = plan_allocation(&rev, c, &config).unwrap();
                let mut ua = a.user_assignment.clone();
                ua.reverse();
                assert_eq!(ua, b.user_assignment);
                assert_eq!(a.active_mus, b.active_mus);
            }
        }
    }
}
