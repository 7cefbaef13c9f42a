//! generate → label/balance → split → train → evaluate, with file outputs.

use std::path::{Path, PathBuf};

use crate::config::{PipelineConfig, SeedStream};
use crate::dataset::{split_stratified, LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::eval::{evaluate_predictions, summary_text, ConfusionMatrix, EvalSummary, RocCurve};
use crate::io_util::write_atomic;
use crate::labeler::{balance_dataset, class_counts, label_scenarios};
use crate::ml::{train, ModelKind, TrainReport, TrainedModel};
use crate::numerology::{ClassGrouping, NUM_CLASSES};
use crate::scenario::{generate_scenarios, CellScenario};

/// Runs `f` on a pool of `workers` threads (0 = one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn provenance(cfg: &PipelineConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        master_seed: cfg.scenario.master_seed,
    }
}

pub fn generate(cfg: &PipelineConfig) -> Result<Vec<CellScenario>> {
    cfg.validate()?;
    generate_scenarios(&cfg.scenario)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    pub dataset: LabeledDataset,
    pub raw_counts: [usize; NUM_CLASSES],
}

/// Labels, balances and rounds to the stored precision.
pub fn label_and_balance(cfg: &PipelineConfig, scenarios: &[CellScenario]) -> Result<LabelOutcome> {
    let labeled = label_scenarios(scenarios, &cfg.label)?;
    let raw_counts = class_counts(&labeled);
    let balanced = balance_dataset(labeled, cfg.seed_for(SeedStream::Balance))?;
    let dataset = LabeledDataset::from_labeled(&balanced, Some(provenance(cfg)))?;
    Ok(LabelOutcome {
        dataset,
        raw_counts,
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: EvalSummary,
    pub confusion: ConfusionMatrix,
    pub roc: RocCurve,
}

pub fn evaluate(
    model: &TrainedModel,
    name: &str,
    test: &LabeledDataset,
    grouping: &ClassGrouping,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Domain("test set is empty".into()));
    }
    let proba: Vec<Vec<f64>> = test.features().iter().map(|f| model.predict_proba(f)).collect();
    let (summary, confusion, roc) = evaluate_predictions(name, &test.labels(), &proba, grouping)?;
    Ok(Evaluation {
        summary,
        confusion,
        roc,
    })
}

/// Writes `<prefix>_confusion.csv`, `<prefix>_roc.csv` and `<prefix>_summary.txt`.
pub fn write_evaluation(eval: &Evaluation, prefix: &Path) -> Result<()> {
    write_atomic(&with_suffix(prefix, "_confusion.csv"), &eval.confusion.to_csv())?;
    write_atomic(&with_suffix(prefix, "_roc.csv"), &eval.roc.to_csv())?;
    write_atomic(
        &with_suffix(prefix, "_summary.txt"),
        &summary_text(std::slice::from_ref(&eval.summary)),
    )
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub struct ModelRun {
    pub model: TrainedModel,
    pub report: TrainReport,
    pub evaluation: Evaluation,
}

pub struct RunReport {
    pub raw_counts: [usize; NUM_CLASSES],
    pub dataset: LabeledDataset,
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
    pub models: Vec<ModelRun>,
}

impl RunReport {
    pub fn summaries(&self) -> Vec<EvalSummary> {
        self.models.iter().map(|m| m.evaluation.summary.clone()).collect()
    }

    pub fn best_fine(&self) -> Option<&ModelRun> {
        best_by(&self.models, |s| s.accuracy)
    }

    pub fn best_grouped(&self) -> Option<&ModelRun> {
        best_by(&self.models, |s| s.grouped_accuracy)
    }
}

fn best_by(models: &[ModelRun], key: impl Fn(&EvalSummary) -> f64) -> Option<&ModelRun> {
    models.iter().fold(None, |best: Option<&ModelRun>, m| match best {
        Some(b) if key(&b.evaluation.summary) >= key(&m.evaluation.summary) => Some(b),
        _ => Some(m),
    })
}

/// Runs every stage in memory on the configured worker pool.
pub fn run(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    with_workers(cfg.workers, || -> Result<RunReport> {
        let scenarios = generate(cfg)?;
        let LabelOutcome {
            dataset,
            raw_counts,
        } = label_and_balance(cfg, &scenarios)?;
        drop(scenarios);
        let (train_set, val, test) = split_stratified(&dataset, &cfg.split)?;
        let mut models = Vec::with_capacity(ModelKind::ALL.len());
        for kind in ModelKind::ALL {
            let (model, report) = train(kind, &train_set, &val, &cfg.grid)?;
            let evaluation = evaluate(&model, kind.name(), &test, &cfg.grouping)?;
            models.push(ModelRun {
                model,
                report,
                evaluation,
            });
        }
        Ok(RunReport {
            raw_counts,
            dataset,
            train: train_set,
            val,
            test,
            models,
        })
    })?
}

fn summary_file(cfg: &PipelineConfig, report: &RunReport) -> String {
    let mut s = summary_text(&report.summaries());
    s.push_str(&format!(
        "# config_hash={:016x} master_seed={}\n",
        cfg.hash(),
        cfg.scenario.master_seed
    ));
    let counts: Vec<String> = report.raw_counts.iter().map(usize::to_string).collect();
    s.push_str(&format!("# pre_balance_counts={}\n", counts.join(",")));
    s.push_str(&format!(
        "# balanced_rows={} train={} val={} test={}\n",
        report.dataset.len(),
        report.train.len(),
        report.val.len(),
        report.test.len()
    ));
    for m in &report.models {
        s.push_str(&format!(
            "# selected {} {} val_accuracy={:.6}\n",
            m.report.kind, m.report.chosen, m.report.val_accuracy
        ));
    }
    s
}

/// Runs the pipeline and writes every artifact into `out_dir`.
///
/// Files: `labeled.csv`, `d_{train,val,test}.csv`, `<model>.model`,
/// `<model>_confusion.csv`, `<model>_roc.csv` and `summary.txt`.
pub fn run_to_dir(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let report = run(cfg)?;
    report.dataset.write_csv(&out_dir.join("labeled.csv"))?;
    report.train.write_csv(&out_dir.join("d_train.csv"))?;
    report.val.write_csv(&out_dir.join("d_val.csv"))?;
    report.test.write_csv(&out_dir.join("d_test.csv"))?;
    for m in &report.models {
        let name = m.report.kind.name();
        m.model.save(&out_dir.join(format!("{name}.model")))?;
        write_atomic(
            &out_dir.join(format!("{name}_confusion.csv")),
            &m.evaluation.confusion.to_csv(),
        )?;
        write_atomic(&out_dir.join(format!("{name}_roc.csv")), &m.evaluation.roc.to_csv())?;
    }
    write_atomic(&out_dir.join("summary.txt"), &summary_file(cfg, &report))?;
    Ok(report)
}
