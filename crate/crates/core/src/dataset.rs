//! Labeled dataset CSV persistence and stratified splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, NUM_FEATURES};
use crate::io_util::{fmt_sig9, mix_seed, parse_f64, parse_int, read_to_string, round_sig9, write_atomic};
use crate::labeler::LabeledScenario;
use crate::numerology::NUM_CLASSES;

pub const DATASET_HEADER: &str = "scenario_id,f1,f2,f3,f4,f5,f6,f7,label";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario_id: u64,
    pub features: FeatureVector,
    /// Class label in 1..=10.
    pub label: u8,
}

/// Where a dataset came from; written as a leading comment line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub rows: Vec<Row>,
    pub provenance: Option<Provenance>,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Row>, provenance: Option<Provenance>) -> Result<Self> {
        let ds = Self { rows, provenance };
        ds.validate()?;
        Ok(ds)
    }

    /// Builds a dataset from labeled scenarios, rounding features to the CSV precision.
    pub fn from_labeled(rows: &[LabeledScenario], provenance: Option<Provenance>) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| Row {
                scenario_id: r.scenario_id,
                features: FeatureVector(r.features.0.map(round_sig9)),
                label: r.label,
            })
            .collect();
        Self::new(rows, provenance)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.rows.len());
        for r in &self.rows {
            if !(1..=NUM_CLASSES as u8).contains(&r.label) {
                return Err(Error::Domain(format!("label {} out of range", r.label)));
            }
            if !seen.insert(r.scenario_id) {
                return Err(Error::Domain(format!(
                    "duplicate scenario_id {}",
                    r.scenario_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.rows.iter().map(|r| r.features).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for r in &self.rows {
            c[usize::from(r.label) - 1] += 1;
        }
        c
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 128 + 128);
        if let Some(p) = self.provenance {
            let _ = writeln!(
                s,
                "# provenance config_hash={:016x} master_seed={}",
                p.config_hash, p.master_seed
            );
        }
        s.push_str(DATASET_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}", r.scenario_id);
            for x in r.features.0 {
                s.push(',');
                s.push_str(&fmt_sig9(x));
            }
            let _ = writeln!(s, ",{}", r.label);
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut provenance = None;
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header = None;
        for (no, line) in lines.by_ref() {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(p) = parse_provenance(comment) {
                    provenance = Some(p);
                }
                continue;
            }
            header = Some((no, line));
            break;
        }
        let (header_no, header) = header.ok_or(Error::Schema {
            line: 1,
            msg: "missing header".into(),
        })?;
        if header.trim_end() != DATASET_HEADER {
            return Err(Error::Schema {
                line: header_no,
                msg: format!("expected header {DATASET_HEADER:?}"),
            });
        }
        let mut rows = Vec::new();
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != NUM_FEATURES + 2 {
                return Err(Error::Schema {
                    line: no,
                    msg: format!("expected {} columns, found {}", NUM_FEATURES + 2, fields.len()),
                });
            }
            let scenario_id = parse_int::<u64>(fields[0], no)?;
            let mut f = [0.0; NUM_FEATURES];
            for (j, v) in f.iter_mut().enumerate() {
                *v = parse_f64(fields[1 + j], no)?;
            }
            let label = parse_int::<u8>(fields[NUM_FEATURES + 1], no)?;
            if !(1..=NUM_CLASSES as u8).contains(&label) {
                return Err(Error::Parse {
                    line: no,
                    msg: format!("label {label} out of range 1..=10"),
                });
            }
            rows.push(Row {
                scenario_id,
                features: FeatureVector(f),
                label,
            });
        }
        Self::new(rows, provenance)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv_string())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&read_to_string(path)?)
    }
}

fn parse_provenance(comment: &str) -> Option<Provenance> {
    let rest = comment.trim().strip_prefix("provenance")?;
    let mut hash = None;
    let mut seed = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=')? {
            ("config_hash", v) => hash = u64::from_str_radix(v, 16).ok(),
            ("master_seed", v) => seed = v.parse().ok(),
            _ => {}
        }
    }
    Some(Provenance {
        config_hash: hash?,
        master_seed: seed?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_frac, self.val_frac, self.test_frac];
        if f.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Config(format!("split fractions must be > 0: {f:?}")));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("split fractions must sum to 1: {f:?}")));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items; remainder ties go to the earlier part.
///
/// With `n >= 3` no part is left empty: an empty part takes one item from the largest.
fn apportion(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact = fractions.map(|f| f * n as f64);
    let mut sizes = exact.map(|e| e.floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    if n >= sizes.len() {
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let largest = (0..sizes.len()).max_by_key(|&i| (sizes[i], usize::MAX - i)).unwrap_or(0);
            sizes[largest] -= 1;
            sizes[empty] += 1;
        }
    }
    sizes
}

/// Per-class seeded shuffle and proportional cut into (train, val, test).
///
/// Each split is ordered by (label, scenario_id).
pub fn split_stratified(
    dataset: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut by_class: BTreeMap<u8, Vec<Row>> = BTreeMap::new();
    for r in &dataset.rows {
        by_class.entry(r.label).or_default().push(r.clone());
    }
    let mut parts: [Vec<Row>; 3] = Default::default();
    for (label, mut members) in by_class {
        if members.len() < 3 {
            return Err(Error::Split(format!(
                "class {label} has {} rows, need at least 3",
                members.len()
            )));
        }
        members.sort_by_key(|r| r.scenario_id);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, u64::from(label)));
        members.shuffle(&mut rng);
        let sizes = apportion(
            members.len(),
            [spec.train_frac, spec.val_frac, spec.test_frac],
        );
        let mut rest = members.into_iter();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let mut chunk: Vec<Row> = rest.by_ref().take(size).collect();
            chunk.sort_by_key(|r| r.scenario_id);
            part.extend(chunk);
        }
    }
    let [train, val, test] = parts.map(|rows| LabeledDataset {
        rows,
        provenance: dataset.provenance,
    });
    Ok((train, val, test))
}
