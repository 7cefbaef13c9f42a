//! Exhaustive class scoring and automatic labelling of scenarios.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{extract, FeatureVector};
use crate::numerology::{class_table, NUM_CLASSES};
use crate::phy::{cell_metrics, MetricTriple, PhyConfig};
use crate::scenario::CellScenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricWeights {
    pub w_sinr: f64,
    pub w_se: f64,
    pub w_flex: f64,
}

impl MetricWeights {
    pub fn new(w_sinr: f64, w_se: f64, w_flex: f64) -> Result<Self> {
        let w = Self {
            w_sinr,
            w_se,
            w_flex,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.w_sinr, self.w_se, self.w_flex];
        if parts.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("weights must be >= 0: {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights must sum to 1: {parts:?}")));
        }
        Ok(())
    }
}

/// Weight rows used by the service-majority rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTable {
    pub embb: MetricWeights,
    pub urllc: MetricWeights,
    pub mmtc: MetricWeights,
    pub mixed: MetricWeights,
}

impl Default for WeightTable {
    fn default() -> Self {
        let w = |a, b, c| MetricWeights {
            w_sinr: a,
            w_se: b,
            w_flex: c,
        };
        Self {
            embb: w(0.2, 0.6, 0.2),
            urllc: w(0.6, 0.2, 0.2),
            mmtc: w(0.3, 0.3, 0.4),
            mixed: w(0.25, 0.25, 0.5),
        }
    }
}

impl WeightTable {
    pub fn validate(&self) -> Result<()> {
        self.embb.validate()?;
        self.urllc.validate()?;
        self.mmtc.validate()?;
        self.mixed.validate()
    }

    /// Picks the row of the service type holding a strict majority, else the mixed row.
    pub fn weights_for(&self, counts: [usize; 3]) -> Result<MetricWeights> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::Domain("weights need at least one user".into()));
        }
        let rows = [self.embb, self.urllc, self.mmtc];
        Ok(counts
            .iter()
            .position(|&c| 2 * c > total)
            .map_or(self.mixed, |i| rows[i]))
    }
}

pub fn weights_for(counts: [usize; 3]) -> Result<MetricWeights> {
    WeightTable::default().weights_for(counts)
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    move |v| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }
}

/// Weighted sum of per-dimension min-max normalized metrics.
///
/// `None` marks an infeasible class; it scores −∞ and is excluded from normalization.
pub fn score_classes(metrics: &[Option<MetricTriple>], weights: &MetricWeights) -> Vec<f64> {
    let feasible = metrics.iter().flatten();
    let n_sinr = min_max(feasible.clone().map(|m| m.sinr_db));
    let n_se = min_max(feasible.clone().map(|m| m.se_bps_hz));
    let n_flex = min_max(feasible.map(|m| m.flexibility));
    metrics
        .iter()
        .map(|m| match m {
            Some(m) => {
                weights.w_sinr * n_sinr(m.sinr_db)
                    + weights.w_se * n_se(m.se_bps_hz)
                    + weights.w_flex * n_flex(m.flexibility)
            }
            None => f64::NEG_INFINITY,
        })
        .collect()
}

/// 1-based label of the highest score; ties go to the lowest label.
pub fn argmax_label(scores: &[f64]) -> u8 {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best as u8 + 1
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelConfig {
    pub phy: PhyConfig,
    pub weights: WeightTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScenario {
    pub scenario_id: u64,
    pub features: FeatureVector,
    pub label: u8,
    /// Metrics per class (index = label − 1); `None` where the plan was infeasible.
    pub score_table: Option<Vec<Option<MetricTriple>>>,
}

pub fn label_scenario(scenario: &CellScenario, config: &LabelConfig) -> Result<LabeledScenario> {
    let table = class_table();
    let mut metrics = Vec::with_capacity(NUM_CLASSES);
    for class in table.iter() {
        match cell_metrics(scenario, class, &config.phy) {
            Ok(m) => metrics.push(Some(m)),
            Err(Error::InfeasiblePlan(_)) => metrics.push(None),
            Err(e) => return Err(e),
        }
    }
    if metrics.iter().all(Option::is_none) {
        return Err(Error::InfeasiblePlan(format!(
            "no class is feasible for scenario {}",
            scenario.scenario_id
        )));
    }
    let weights = config.weights.weights_for(scenario.service_counts())?;
    let label = argmax_label(&score_classes(&metrics, &weights));
    Ok(LabeledScenario {
        scenario_id: scenario.scenario_id,
        features: extract(scenario)?,
        label,
        score_table: Some(metrics),
    })
}

/// Labels every scenario on the current rayon pool, keeping input order.
pub fn label_scenarios(
    scenarios: &[CellScenario],
    config: &LabelConfig,
) -> Result<Vec<LabeledScenario>> {
    config.phy.validate()?;
    config.weights.validate()?;
    scenarios
        .par_iter()
        .map(|s| label_scenario(s, config))
        .collect()
}

pub fn class_counts(rows: &[LabeledScenario]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for r in rows {
        counts[usize::from(r.label) - 1] += 1;
    }
    counts
}

/// Downsamples every class to the rarest class count, ordered by (label, scenario_id).
pub fn balance_dataset(rows: Vec<LabeledScenario>, seed: u64) -> Result<Vec<LabeledScenario>> {
    let mut by_class: BTreeMap<u8, Vec<LabeledScenario>> =
        (1..=NUM_CLASSES as u8).map(|l| (l, Vec::new())).collect();
    for r in rows {
        by_class
            .get_mut(&r.label)
            .ok_or_else(|| Error::Domain(format!("label {} out of range", r.label)))?
            .push(r);
    }
    if let Some((&label, _)) = by_class.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Balance { label });
    }
    let keep = by_class.values().map(Vec::len).min().unwrap_or(0);
    let mut out = Vec::with_capacity(keep * NUM_CLASSES);
    for (label, mut members) in by_class {
        members.sort_by_key(|r| r.scenario_id);
        let mut rng = ChaCha8Rng::seed_from_u64(crate::io_util::mix_seed(seed, u64::from(label)));
        members.shuffle(&mut rng);
        members.truncate(keep);
        members.sort_by_key(|r| r.scenario_id);
        out.extend(members);
    }
    Ok(out)
}
