//! From-scratch classifiers, hyperparameter search and the text model format.
//!
//! Classifiers work on standardized feature rows and 0-based class indices;
//! [`TrainedModel`] wraps one together with its scaler and speaks 1-based labels.

mod knn;
mod mlp;
mod nb;
mod tree;

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

pub use knn::Knn;
pub use mlp::{
    compare_gradients, gradient_check, numeric_gradient, Mlp, MlpFitReport, MlpTrainConfig,
    GRADIENT_CHECK_STEP,
};
pub use nb::{GaussianNb, VARIANCE_FLOOR};
pub use tree::{gini, DecisionTree, Node};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Scaler, NUM_FEATURES};
use crate::io_util::{fmt_exact, read_to_string, write_atomic};
use crate::numerology::NUM_CLASSES;

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Fit("empty training set".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Fit(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::Fit("feature rows must share a non-zero width".into()));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Fit(format!("class index {bad} >= {n_classes}")));
    }
    Ok(())
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Knn,
    Nb,
    Tree,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Knn, ModelKind::Nb, ModelKind::Tree, ModelKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Nb => "nb",
            ModelKind::Tree => "tree",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Knn(Knn),
    Nb(GaussianNb),
    Tree(DecisionTree),
    Mlp(Mlp),
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Knn(_) => ModelKind::Knn,
            Classifier::Nb(_) => ModelKind::Nb,
            Classifier::Tree(_) => ModelKind::Tree,
            Classifier::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Classifier::Knn(m) => m.predict_proba(x),
            Classifier::Nb(m) => m.predict_proba(x),
            Classifier::Tree(m) => m.predict_proba(x),
            Classifier::Mlp(m) => m.predict_proba(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba(x))
    }
}

/// Hyperparameter values searched on the validation split.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub knn_k: Vec<usize>,
    /// `None` means unlimited depth.
    pub tree_depth: Vec<Option<usize>>,
    pub tree_min_leaf: usize,
    pub mlp_lr: Vec<f64>,
    pub mlp: MlpTrainConfig,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            knn_k: vec![5],
            tree_depth: vec![Some(4), Some(6), Some(8), Some(10), None],
            tree_min_leaf: 1,
            mlp_lr: vec![0.01, 0.05, 0.1],
            mlp: MlpTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hyper {
    K(usize),
    Depth(Option<usize>),
    Lr(f64),
    None,
}

impl fmt::Display for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyper::K(k) => write!(f, "k={k}"),
            Hyper::Depth(Some(d)) => write!(f, "max_depth={d}"),
            Hyper::Depth(None) => write!(f, "max_depth=inf"),
            Hyper::Lr(lr) => write!(f, "lr={lr}"),
            Hyper::None => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub hyper: Hyper,
    /// `None` when training failed (for example, divergence).
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub kind: ModelKind,
    pub chosen: Hyper,
    pub val_accuracy: f64,
    pub candidates: Vec<CandidateScore>,
}

/// A classifier bundled with the scaler fitted on its training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub scaler: Scaler,
    pub classifier: Classifier,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.classifier.kind()
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Vec<f64> {
        self.classifier.predict_proba(&self.scaler.apply(x))
    }

    /// 1-based class label.
    pub fn predict(&self, x: &FeatureVector) -> u8 {
        argmax(&self.predict_proba(x)) as u8 + 1
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_to_string(path)?)
    }
}

fn standardize(ds: &LabeledDataset, scaler: &Scaler) -> (Vec<Vec<f64>>, Vec<usize>) {
    let x = ds.rows.iter().map(|r| scaler.apply(&r.features).to_vec()).collect();
    let y = ds.rows.iter().map(|r| usize::from(r.label) - 1).collect();
    (x, y)
}

fn accuracy_on(c: &Classifier, x: &[Vec<f64>], y: &[usize]) -> f64 {
    let hits = x.iter().zip(y).filter(|(r, &t)| c.predict(r) == t).count();
    hits as f64 / y.len() as f64
}

/// Fits the scaler on `train`, fits one candidate per grid value and keeps the best on `val`.
///
/// Validation ties keep the earlier grid value. Candidates are fitted in parallel on the
/// current rayon pool; the result does not depend on the pool size.
pub fn train(
    kind: ModelKind,
    train: &LabeledDataset,
    val: &LabeledDataset,
    grid: &HyperGrid,
) -> Result<(TrainedModel, TrainReport)> {
    if val.is_empty() {
        return Err(Error::Fit("validation split is empty".into()));
    }
    let scaler = Scaler::fit(&train.features())?;
    let (tx, ty) = standardize(train, &scaler);
    let (vx, vy) = standardize(val, &scaler);
    let hypers: Vec<Hyper> = match kind {
        ModelKind::Knn => grid.knn_k.iter().map(|&k| Hyper::K(k)).collect(),
        ModelKind::Nb => vec![Hyper::None],
        ModelKind::Tree => grid.tree_depth.iter().map(|&d| Hyper::Depth(d)).collect(),
        ModelKind::Mlp => grid.mlp_lr.iter().map(|&lr| Hyper::Lr(lr)).collect(),
    };
    if hypers.is_empty() {
        return Err(Error::Config(format!("empty hyperparameter grid for {kind}")));
    }
    let fitted: Vec<Result<Classifier>> = hypers
        .par_iter()
        .map(|h| -> Result<Classifier> {
            Ok(match *h {
                Hyper::K(k) => Classifier::Knn(Knn::fit(&tx, &ty, k, NUM_CLASSES)?),
                Hyper::None => Classifier::Nb(GaussianNb::fit(&tx, &ty, NUM_CLASSES)?),
                Hyper::Depth(d) => Classifier::Tree(DecisionTree::fit(
                    &tx,
                    &ty,
                    NUM_CLASSES,
                    d,
                    grid.tree_min_leaf,
                )?),
                Hyper::Lr(lr) => {
                    let config = MlpTrainConfig { lr, ..grid.mlp };
                    Classifier::Mlp(Mlp::fit(&tx, &ty, &vx, &vy, NUM_CLASSES, &config)?.0)
                }
            })
        })
        .collect();

    let mut candidates = Vec::with_capacity(hypers.len());
    let mut best: Option<(Classifier, Hyper, f64)> = None;
    let mut divergence = None;
    for (r, &hyper) in fitted.into_iter().zip(&hypers) {
        let val_accuracy = match r {
            Ok(c) => {
                let a = accuracy_on(&c, &vx, &vy);
                if best.as_ref().is_none_or(|(_, _, b)| a > *b) {
                    best = Some((c, hyper, a));
                }
                Some(a)
            }
            Err(e @ Error::Divergence { .. }) => {
                divergence.get_or_insert(e);
                None
            }
            Err(e) => return Err(e),
        };
        candidates.push(CandidateScore {
            hyper,
            val_accuracy,
        });
    }
    let Some((classifier, chosen, val_accuracy)) = best else {
        return Err(divergence.expect("every candidate failed"));
    };
    Ok((
        TrainedModel { scaler, classifier },
        TrainReport {
            kind,
            chosen,
            val_accuracy,
            candidates,
        },
    ))
}

struct SectionWriter(String);

impl SectionWriter {
    fn section(&mut self, name: &str, values: impl ExactSizeIterator<Item = f64>) {
        let _ = writeln!(self.0, "section {name} {}", values.len());
        for v in values {
            self.0.push_str(&fmt_exact(v));
            self.0.push('\n');
        }
    }
}

struct SectionReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

fn load_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::ModelLoad(format!("line {line}: {msg}"))
}

impl<'a> SectionReader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::ModelLoad("unexpected end of file".into()))
    }

    fn section(&mut self, name: &str) -> Result<Vec<f64>> {
        let (no, line) = self.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "section" || parts[1] != name {
            return Err(load_err(no, format!("expected 'section {name} <count>'")));
        }
        let count: usize = parts[2]
            .parse()
            .map_err(|_| load_err(no, "invalid section length"))?;
        (0..count)
            .map(|_| {
                let (no, line) = self.next_line()?;
                line.trim()
                    .parse::<f64>()
                    .map_err(|_| load_err(no, format!("invalid number {line:?}")))
            })
            .collect()
    }

    fn sized(&mut self, name: &str, expect: usize) -> Result<Vec<f64>> {
        let v = self.section(name)?;
        if v.len() != expect {
            return Err(Error::ModelLoad(format!(
                "section {name} has {} values, expected {expect}",
                v.len()
            )));
        }
        Ok(v)
    }

    fn finish(&mut self) -> Result<()> {
        let (no, line) = self.next_line()?;
        if line.trim() != "end" {
            return Err(load_err(no, "expected 'end'"));
        }
        if let Some((i, l)) = self.lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(load_err(i + 1, format!("trailing content {l:?}")));
        }
        Ok(())
    }
}

fn to_index(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(Error::ModelLoad(format!("{what} must be a non-negative integer, got {v}")))
    }
}

impl TrainedModel {
    /// Versioned text format: `model <kind> v1`, named numeric sections, then `end`.
    pub fn to_text(&self) -> String {
        let mut w = SectionWriter(format!("model {} v1\n", self.kind()));
        w.section("scaler_mean", self.scaler.mean.into_iter());
        w.section("scaler_std", self.scaler.std.into_iter());
        match &self.classifier {
            Classifier::Knn(m) => {
                let d = m.x.first().map_or(0, Vec::len);
                w.section(
                    "shape",
                    [m.x.len(), d, m.n_classes, m.k].map(|v| v as f64).into_iter(),
                );
                w.section("train_x", m.x.iter().flatten().copied().collect::<Vec<_>>().into_iter());
                w.section("train_y", m.y.iter().map(|&c| c as f64).collect::<Vec<_>>().into_iter());
            }
            Classifier::Nb(m) => {
                let d = m.means.first().map_or(0, Vec::len);
                w.section("shape", [m.priors.len(), d].map(|v| v as f64).into_iter());
                w.section("priors", m.priors.clone().into_iter());
                w.section("means", m.means.concat().into_iter());
                w.section("vars", m.vars.concat().into_iter());
            }
            Classifier::Tree(m) => {
                w.section("shape", [m.nodes.len(), m.n_classes].map(|v| v as f64).into_iter());
                let mut feature = Vec::new();
                let mut threshold = Vec::new();
                let mut children = Vec::new();
                let mut proba = Vec::new();
                for n in &m.nodes {
                    match n {
                        Node::Leaf { proba: p } => {
                            feature.push(-1.0);
                            threshold.push(0.0);
                            children.extend([0.0, 0.0]);
                            proba.extend_from_slice(p);
                        }
                        Node::Split {
                            feature: f,
                            threshold: t,
                            left,
                            right,
                        } => {
                            feature.push(*f as f64);
                            threshold.push(*t);
                            children.extend([*left as f64, *right as f64]);
                            proba.extend(std::iter::repeat_n(0.0, m.n_classes));
                        }
                    }
                }
                w.section("node_feature", feature.into_iter());
                w.section("node_threshold", threshold.into_iter());
                w.section("node_children", children.into_iter());
                w.section("leaf_proba", proba.into_iter());
            }
            Classifier::Mlp(m) => {
                w.section(
                    "shape",
                    [m.n_in, m.n_hidden, m.n_out].map(|v| v as f64).into_iter(),
                );
                w.section("params", m.params.clone().into_iter());
            }
        }
        w.0.push_str("end\n");
        w.0
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = SectionReader::new(text);
        let (no, header) = r.next_line()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "model" {
            return Err(load_err(no, "expected 'model <kind> v1'"));
        }
        let kind: ModelKind = parts[1]
            .parse()
            .map_err(|_| load_err(no, format!("unknown model kind {:?}", parts[1])))?;
        if parts[2] != "v1" {
            return Err(load_err(no, format!("unsupported version {:?}", parts[2])));
        }
        let mean = r.sized("scaler_mean", NUM_FEATURES)?;
        let std = r.sized("scaler_std", NUM_FEATURES)?;
        let scaler = Scaler {
            mean: mean.try_into().expect("sized"),
            std: std.try_into().expect("sized"),
        };
        let classifier = match kind {
            ModelKind::Knn => {
                let shape = r.sized("shape", 4)?;
                let [n, d, c, k] = [0, 1, 2, 3].map(|i| to_index(shape[i], "shape"));
                let (n, d, c, k) = (n?, d?, c?, k?);
                let flat = r.sized("train_x", n * d)?;
                let y = r
                    .sized("train_y", n)?
                    .into_iter()
                    .map(|v| to_index(v, "label"))
                    .collect::<Result<Vec<_>>>()?;
                let x: Vec<Vec<f64>> = flat.chunks(d.max(1)).map(<[f64]>::to_vec).collect();
                Classifier::Knn(
                    Knn::fit(&x, &y, k, c).map_err(|e| Error::ModelLoad(e.to_string()))?,
                )
            }
            ModelKind::Nb => {
                let shape = r.sized("shape", 2)?;
                let (c, d) = (to_index(shape[0], "shape")?, to_index(shape[1], "shape")?);
                let priors = r.sized("priors", c)?;
                let means = r.sized("means", c * d)?;
                let vars = r.sized("vars", c * d)?;
                Classifier::Nb(GaussianNb {
                    priors,
                    means: means.chunks(d.max(1)).map(<[f64]>::to_vec).collect(),
                    vars: vars.chunks(d.max(1)).map(<[f64]>::to_vec).collect(),
                })
            }
            ModelKind::Tree => {
                let shape = r.sized("shape", 2)?;
                let (n, c) = (to_index(shape[0], "shape")?, to_index(shape[1], "shape")?);
                let feature = r.sized("node_feature", n)?;
                let threshold = r.sized("node_threshold", n)?;
                let children = r.sized("node_children", 2 * n)?;
                let proba = r.sized("leaf_proba", n * c)?;
                let mut nodes = Vec::with_capacity(n);
                for i in 0..n {
                    if feature[i] < 0.0 {
                        nodes.push(Node::Leaf {
                            proba: proba[i * c..(i + 1) * c].to_vec(),
                        });
                    } else {
                        let left = to_index(children[2 * i], "child")?;
                        let right = to_index(children[2 * i + 1], "child")?;
                        if left >= n || right >= n || left <= i || right <= i {
                            return Err(Error::ModelLoad(format!("node {i} has invalid children")));
                        }
                        nodes.push(Node::Split {
                            feature: to_index(feature[i], "feature")?,
                            threshold: threshold[i],
                            left,
                            right,
                        });
                    }
                }
                if nodes.is_empty() {
                    return Err(Error::ModelLoad("tree has no nodes".into()));
                }
                Classifier::Tree(DecisionTree {
                    n_classes: c,
                    nodes,
                })
            }
            ModelKind::Mlp => {
                let shape = r.sized("shape", 3)?;
                let [a, b, c] = [0, 1, 2].map(|i| to_index(shape[i], "shape"));
                let (n_in, n_hidden, n_out) = (a?, b?, c?);
                let params = r.sized("params", Mlp::param_count(n_in, n_hidden, n_out))?;
                Classifier::Mlp(Mlp {
                    n_in,
                    n_hidden,
                    n_out,
                    params,
                })
            }
        };
        r.finish()?;
        Ok(Self { scaler, classifier })
    }
}
