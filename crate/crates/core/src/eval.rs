//! Confusion matrices, fine and grouped accuracy, one-vs-rest ROC curves.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numerology::{group_of, ClassGrouping, NUM_CLASSES};

/// Rows are true labels, columns predicted labels, both 1-based in the accessors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

fn label_index(label: u8) -> Result<usize> {
    if (1..=NUM_CLASSES as u8).contains(&label) {
        Ok(usize::from(label) - 1)
    } else {
        Err(Error::Domain(format!("label {label} out of range 1..=10")))
    }
}

fn check_lengths(truth: &[u8], pred: &[u8]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::Domain(format!(
            "{} true labels but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    Ok(())
}

impl ConfusionMatrix {
    pub fn get(&self, truth: u8, pred: u8) -> u64 {
        self.counts[usize::from(truth) - 1][usize::from(pred) - 1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> [u64; NUM_CLASSES] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("true_label");
        for p in 1..=NUM_CLASSES {
            let _ = write!(s, ",pred_{p}");
        }
        s.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{}", t + 1);
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(truth: &[u8], pred: &[u8]) -> Result<ConfusionMatrix> {
    check_lengths(truth, pred)?;
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (&t, &p) in truth.iter().zip(pred) {
        counts[label_index(t)?][label_index(p)?] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Domain("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Accuracy after mapping both label sequences through the class grouping.
pub fn grouped_accuracy(truth: &[u8], pred: &[u8], grouping: &ClassGrouping) -> Result<f64> {
    check_lengths(truth, pred)?;
    if truth.is_empty() {
        return Err(Error::Domain("grouped accuracy of an empty sequence".into()));
    }
    let mut hits = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        if group_of(t, grouping)? == group_of(p, grouping)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores `>= threshold` count as positive; the first point uses `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRoc {
    pub label: u8,
    pub points: Vec<RocPoint>,
    /// `None` when the class is absent from the truth (or is the only class present).
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub classes: Vec<ClassRoc>,
    /// Mean AUC over classes with a defined AUC.
    pub macro_auc: f64,
    /// Labels whose AUC was undefined and left out of the macro average.
    pub excluded: Vec<u8>,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,threshold,fpr,tpr\n");
        for c in &self.classes {
            for p in &c.points {
                let t = if p.threshold.is_infinite() {
                    "inf".to_string()
                } else {
                    format!("{:.12e}", p.threshold)
                };
                let _ = writeln!(s, "{},{t},{:.12e},{:.12e}", c.label, p.fpr, p.tpr);
            }
        }
        s
    }
}

pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

fn class_roc(label: u8, is_pos: &[bool], scores: &[f64]) -> ClassRoc {
    let n_pos = is_pos.iter().filter(|&&p| p).count();
    let n_neg = is_pos.len() - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let rate = |hits: usize, of: usize| if of == 0 { 0.0 } else { hits as f64 / of as f64 };

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if is_pos[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: s,
            fpr: rate(fp, n_neg),
            tpr: rate(tp, n_pos),
        });
    }
    if points.last().is_some_and(|p| p.threshold > 0.0) {
        points.push(RocPoint {
            threshold: 0.0,
            fpr: rate(fp, n_neg),
            tpr: rate(tp, n_pos),
        });
    }
    points.dedup_by(|b, a| a.fpr == b.fpr && a.tpr == b.tpr);
    let auc = (n_pos > 0 && n_neg > 0).then(|| trapezoid_auc(&points));
    ClassRoc { label, points, auc }
}

/// One-vs-rest ROC per class from a row-per-sample probability matrix.
pub fn roc_ovr(truth: &[u8], scores: &[Vec<f64>]) -> Result<RocCurve> {
    if truth.len() != scores.len() {
        return Err(Error::Domain(format!(
            "{} labels but {} score rows",
            truth.len(),
            scores.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Domain("ROC of an empty set".into()));
    }
    if let Some(r) = scores.iter().find(|r| r.len() != NUM_CLASSES) {
        return Err(Error::Domain(format!(
            "score rows need {NUM_CLASSES} columns, found {}",
            r.len()
        )));
    }
    for &t in truth {
        label_index(t)?;
    }
    let classes: Vec<ClassRoc> = (1..=NUM_CLASSES as u8)
        .map(|label| {
            let is_pos: Vec<bool> = truth.iter().map(|&t| t == label).collect();
            let col: Vec<f64> = scores.iter().map(|r| r[usize::from(label) - 1]).collect();
            class_roc(label, &is_pos, &col)
        })
        .collect();
    let defined: Vec<f64> = classes.iter().filter_map(|c| c.auc).collect();
    let excluded = classes
        .iter()
        .filter(|c| c.auc.is_none())
        .map(|c| c.label)
        .collect();
    let macro_auc = if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(RocCurve {
        classes,
        macro_auc,
        excluded,
    })
}

/// Test-set metrics for one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub model: String,
    pub samples: usize,
    pub accuracy: f64,
    pub grouped_accuracy: f64,
    pub macro_auc: f64,
    pub excluded: Vec<u8>,
}

impl EvalSummary {
    pub fn to_line(&self) -> String {
        let mut s = format!(
            "model={} samples={} accuracy={:.6} grouped_accuracy={:.6} macro_auc_ovr={:.6}",
            self.model, self.samples, self.accuracy, self.grouped_accuracy, self.macro_auc
        );
        if !self.excluded.is_empty() {
            let labels: Vec<String> = self.excluded.iter().map(u8::to_string).collect();
            let _ = write!(s, " auc_excluded={}", labels.join(";"));
        }
        s
    }
}

pub fn summary_text(rows: &[EvalSummary]) -> String {
    let mut s = String::from("# test-set metrics; AUC is one-vs-rest, macro-averaged over classes present\n");
    for r in rows {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

pub fn evaluate_predictions(
    model: &str,
    truth: &[u8],
    proba: &[Vec<f64>],
    grouping: &ClassGrouping,
) -> Result<(EvalSummary, ConfusionMatrix, RocCurve)> {
    let pred: Vec<u8> = proba
        .iter()
        .map(|p| crate::ml::argmax(p) as u8 + 1)
        .collect();
    let cm = confusion(truth, &pred)?;
    let roc = roc_ovr(truth, proba)?;
    let summary = EvalSummary {
        model: model.to_string(),
        samples: truth.len(),
        accuracy: accuracy(&cm)?,
        grouped_accuracy: grouped_accuracy(truth, &pred, grouping)?,
        macro_auc: roc.macro_auc,
        excluded: roc.excluded.clone(),
    };
    Ok((summary, cm, roc))
}
