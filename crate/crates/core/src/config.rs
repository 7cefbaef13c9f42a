//! Flat `key = value` pipeline configuration.
//!
//! Blank lines and `#` comments are ignored, unknown or repeated keys are rejected
//! and every key falls back to its default. Lists are comma separated.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::SplitSpec;
use crate::error::{Error, Result};
use crate::io_util::{mix_seed, read_to_string};
use crate::labeler::{LabelConfig, MetricWeights};
use crate::ml::{HyperGrid, MlpTrainConfig};
use crate::numerology::{ClassGrouping, NUM_CLASSES};
use crate::phy::PhyConfig;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    pub label: LabelConfig,
    pub split: SplitSpec,
    pub grouping: ClassGrouping,
    pub grid: HyperGrid,
    /// Worker threads for generation, labelling and training; 0 uses every core.
    pub workers: usize,
}

/// Independent random streams derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Balance,
    Split,
    Mlp,
}

impl SeedStream {
    pub fn derive(self, master_seed: u64) -> u64 {
        let tag = match self {
            SeedStream::Balance => 0xB4A1,
            SeedStream::Split => 0x5971,
            SeedStream::Mlp => 0x3A1F,
        };
        mix_seed(master_seed ^ tag, 0)
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut c = Self {
            scenario: ScenarioConfig::default(),
            label: LabelConfig::default(),
            split: SplitSpec::default(),
            grouping: ClassGrouping::default(),
            grid: HyperGrid::default(),
            workers: 0,
        };
        c.sync_seeds();
        c
    }
}

struct Entry {
    key: &'static str,
    doc: &'static str,
}

const KEYS: &[Entry] = &[
    Entry { key: "num_scenarios", doc: "cells to simulate" },
    Entry { key: "users_per_cell", doc: "users per cell" },
    Entry { key: "tau_min_s", doc: "smallest maximum excess delay (s)" },
    Entry { key: "tau_max_s", doc: "largest maximum excess delay (s)" },
    Entry { key: "doppler_min_hz", doc: "smallest maximum Doppler (Hz)" },
    Entry { key: "doppler_max_hz", doc: "largest maximum Doppler (Hz)" },
    Entry { key: "channel_correlation", doc: "copula correlation of users within a cell, [0, 1)" },
    Entry { key: "service_concentration", doc: "Dirichlet concentration of the per-cell service mix; 0 = uniform" },
    Entry { key: "master_seed", doc: "seed of every random stream" },
    Entry { key: "snr_db", doc: "per-subcarrier SNR (dB)" },
    Entry { key: "bandwidth_hz", doc: "total carrier bandwidth (Hz)" },
    Entry { key: "guard_g1_sc15", doc: "G1 guard width in 15 kHz subcarriers" },
    Entry { key: "guard_g2_sc15", doc: "G2 guard width in 15 kHz subcarriers" },
    Entry { key: "guard_g3_sc15", doc: "G3 guard width in 15 kHz subcarriers" },
    Entry { key: "edge_subcarriers", doc: "victim subcarriers exposed per block edge" },
    Entry { key: "ini_leakage_scale", doc: "multiplier on the sidelobe leakage integral" },
    Entry { key: "min_block_subcarriers", doc: "subcarriers reserved for a configured numerology without users" },
    Entry { key: "weights_embb", doc: "w_sinr,w_se,w_flex when eMBB holds a majority" },
    Entry { key: "weights_urllc", doc: "w_sinr,w_se,w_flex when uRLLC holds a majority" },
    Entry { key: "weights_mmtc", doc: "w_sinr,w_se,w_flex when mMTC holds a majority" },
    Entry { key: "weights_mixed", doc: "w_sinr,w_se,w_flex without a majority" },
    Entry { key: "split_train", doc: "training fraction" },
    Entry { key: "split_val", doc: "validation fraction" },
    Entry { key: "split_test", doc: "test fraction" },
    Entry { key: "grouping", doc: "group id of labels 1..10" },
    Entry { key: "knn_k", doc: "neighbor counts searched" },
    Entry { key: "tree_depth", doc: "tree depths searched; inf = unlimited" },
    Entry { key: "tree_min_leaf", doc: "minimum rows per tree leaf" },
    Entry { key: "mlp_lr", doc: "learning rates searched" },
    Entry { key: "mlp_hidden", doc: "hidden units" },
    Entry { key: "mlp_momentum", doc: "momentum coefficient" },
    Entry { key: "mlp_max_epochs", doc: "epoch limit" },
    Entry { key: "mlp_patience", doc: "epochs without validation improvement before stopping" },
    Entry { key: "workers", doc: "worker threads; 0 = all cores" },
];

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn weights_text(w: &MetricWeights) -> String {
    format!("{},{},{}", w.w_sinr, w.w_se, w.w_flex)
}

fn bad(line: usize, key: &str, value: &str) -> Error {
    Error::Config(format!("line {line}: invalid value {value:?} for {key}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(line, key, value))
}

fn list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| num(line, key, v)).collect()
}

fn weights(line: usize, key: &str, value: &str) -> Result<MetricWeights> {
    let v: Vec<f64> = list(line, key, value)?;
    if v.len() != 3 {
        return Err(bad(line, key, value));
    }
    MetricWeights::new(v[0], v[1], v[2])
        .map_err(|e| Error::Config(format!("line {line}: {key}: {e}")))
}

impl PipelineConfig {
    pub fn seed_for(&self, stream: SeedStream) -> u64 {
        stream.derive(self.scenario.master_seed)
    }

    fn sync_seeds(&mut self) {
        self.split.seed = self.seed_for(SeedStream::Split);
        self.grid.mlp.seed = self.seed_for(SeedStream::Mlp);
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.label.phy.validate()?;
        self.label.weights.validate()?;
        self.split.validate()?;
        let g = &self.grid;
        if g.knn_k.is_empty() || g.knn_k.contains(&0) {
            return Err(Error::Config("knn_k needs values >= 1".into()));
        }
        if g.tree_depth.is_empty() || g.tree_depth.contains(&Some(0)) {
            return Err(Error::Config("tree_depth needs values >= 1 or inf".into()));
        }
        if g.tree_min_leaf == 0 {
            return Err(Error::Config("tree_min_leaf must be >= 1".into()));
        }
        if g.mlp_lr.is_empty() || g.mlp_lr.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return Err(Error::Config("mlp_lr needs positive values".into()));
        }
        if g.mlp.hidden == 0 || g.mlp.max_epochs == 0 || g.mlp.patience == 0 {
            return Err(Error::Config(
                "mlp_hidden, mlp_max_epochs and mlp_patience must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&g.mlp.momentum) {
            return Err(Error::Config("mlp_momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        let s = &self.scenario;
        let p = &self.label.phy;
        let w = &self.label.weights;
        let g = &self.grid;
        match key {
            "num_scenarios" => s.num_scenarios.to_string(),
            "users_per_cell" => s.users_per_cell.to_string(),
            "tau_min_s" => s.tau_range_s.0.to_string(),
            "tau_max_s" => s.tau_range_s.1.to_string(),
            "doppler_min_hz" => s.doppler_range_hz.0.to_string(),
            "doppler_max_hz" => s.doppler_range_hz.1.to_string(),
            "channel_correlation" => s.channel_correlation.to_string(),
            "service_concentration" => s.service_concentration.to_string(),
            "master_seed" => s.master_seed.to_string(),
            "snr_db" => p.snr_db.to_string(),
            "bandwidth_hz" => p.total_bw_hz.to_string(),
            "guard_g1_sc15" => p.guards.g1.to_string(),
            "guard_g2_sc15" => p.guards.g2.to_string(),
            "guard_g3_sc15" => p.guards.g3.to_string(),
            "edge_subcarriers" => p.edge_subcarriers.to_string(),
            "ini_leakage_scale" => p.ini_leakage_scale.to_string(),
            "min_block_subcarriers" => p.min_block_subcarriers.to_string(),
            "weights_embb" => weights_text(&w.embb),
            "weights_urllc" => weights_text(&w.urllc),
            "weights_mmtc" => weights_text(&w.mmtc),
            "weights_mixed" => weights_text(&w.mixed),
            "split_train" => self.split.train_frac.to_string(),
            "split_val" => self.split.val_frac.to_string(),
            "split_test" => self.split.test_frac.to_string(),
            "grouping" => join(self.grouping.as_array()),
            "knn_k" => join(&g.knn_k),
            "tree_depth" => g
                .tree_depth
                .iter()
                .map(|d| d.map_or("inf".to_string(), |d| d.to_string()))
                .collect::<Vec<_>>()
                .join(","),
            "tree_min_leaf" => g.tree_min_leaf.to_string(),
            "mlp_lr" => join(&g.mlp_lr),
            "mlp_hidden" => g.mlp.hidden.to_string(),
            "mlp_momentum" => g.mlp.momentum.to_string(),
            "mlp_max_epochs" => g.mlp.max_epochs.to_string(),
            "mlp_patience" => g.mlp.patience.to_string(),
            "workers" => self.workers.to_string(),
            _ => unreachable!("key list and accessor out of sync: {key}"),
        }
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        let s = &mut self.scenario;
        let p = &mut self.label.phy;
        let w = &mut self.label.weights;
        let g = &mut self.grid;
        match key {
            "num_scenarios" => s.num_scenarios = num(line, key, value)?,
            "users_per_cell" => s.users_per_cell = num(line, key, value)?,
            "tau_min_s" => s.tau_range_s.0 = num(line, key, value)?,
            "tau_max_s" => s.tau_range_s.1 = num(line, key, value)?,
            "doppler_min_hz" => s.doppler_range_hz.0 = num(line, key, value)?,
            "doppler_max_hz" => s.doppler_range_hz.1 = num(line, key, value)?,
            "channel_correlation" => s.channel_correlation = num(line, key, value)?,
            "service_concentration" => s.service_concentration = num(line, key, value)?,
            "master_seed" => s.master_seed = num(line, key, value)?,
            "snr_db" => p.snr_db = num(line, key, value)?,
            "bandwidth_hz" => p.total_bw_hz = num(line, key, value)?,
            "guard_g1_sc15" => p.guards.g1 = num(line, key, value)?,
            "guard_g2_sc15" => p.guards.g2 = num(line, key, value)?,
            "guard_g3_sc15" => p.guards.g3 = num(line, key, value)?,
            "edge_subcarriers" => p.edge_subcarriers = num(line, key, value)?,
            "ini_leakage_scale" => p.ini_leakage_scale = num(line, key, value)?,
            "min_block_subcarriers" => p.min_block_subcarriers = num(line, key, value)?,
            "weights_embb" => w.embb = weights(line, key, value)?,
            "weights_urllc" => w.urllc = weights(line, key, value)?,
            "weights_mmtc" => w.mmtc = weights(line, key, value)?,
            "weights_mixed" => w.mixed = weights(line, key, value)?,
            "split_train" => self.split.train_frac = num(line, key, value)?,
            "split_val" => self.split.val_frac = num(line, key, value)?,
            "split_test" => self.split.test_frac = num(line, key, value)?,
            "grouping" => {
                let v: Vec<u8> = list(line, key, value)?;
                let map: [u8; NUM_CLASSES] =
                    v.try_into().map_err(|_| bad(line, key, value))?;
                self.grouping = ClassGrouping::new(map);
            }
            "knn_k" => g.knn_k = list(line, key, value)?,
            "tree_depth" => {
                g.tree_depth = value
                    .split(',')
                    .map(|v| match v.trim() {
                        "inf" => Ok(None),
                        d => num(line, key, d).map(Some),
                    })
                    .collect::<Result<_>>()?
            }
            "tree_min_leaf" => g.tree_min_leaf = num(line, key, value)?,
            "mlp_lr" => g.mlp_lr = list(line, key, value)?,
            "mlp_hidden" => g.mlp.hidden = num(line, key, value)?,
            "mlp_momentum" => g.mlp.momentum = num(line, key, value)?,
            "mlp_max_epochs" => g.mlp.max_epochs = num(line, key, value)?,
            "mlp_patience" => g.mlp.patience = num(line, key, value)?,
            "workers" => self.workers = num(line, key, value)?,
            _ => return Err(Error::Config(format!("line {line}: unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line}: expected 'key = value', found {raw:?}"))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) && KEYS.iter().any(|e| e.key == key) {
                return Err(Error::Config(format!("line {line}: duplicate key {key:?}")));
            }
            c.set(line, key, value.trim())?;
        }
        c.sync_seeds();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    /// Every key with its current value, one per line, preceded by its description.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in KEYS {
            let _ = writeln!(s, "# {}\n{} = {}", e.doc, e.key, self.value_of(e.key));
        }
        s
    }

    /// Key/value lines without comments; the input of [`PipelineConfig::hash`].
    pub fn canonical(&self) -> String {
        KEYS.iter()
            .map(|e| format!("{}={}\n", e.key, self.value_of(e.key)))
            .collect()
    }

    /// FNV-1a over the canonical text, excluding the worker count.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for line in self.canonical().lines().filter(|l| !l.starts_with("workers=")) {
            for b in line.bytes().chain(std::iter::once(b'\n')) {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    pub fn phy(&self) -> &PhyConfig {
        &self.label.phy
    }

    pub fn mlp(&self) -> &MlpTrainConfig {
        &self.grid.mlp
    }
}
