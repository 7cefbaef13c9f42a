//! Simulation-labeled datasets and from-scratch classifiers for choosing a
//! multi-numerology OFDM configuration per cell.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io_util;
pub mod labeler;
pub mod ml;
pub mod numerology;
pub mod oracle;
pub mod phy;
pub mod pipeline;
pub mod scenario;

pub use config::PipelineConfig;
pub use dataset::{LabeledDataset, Provenance, Row, SplitSpec};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, EvalSummary, RocCurve};
pub use features::{FeatureVector, Scaler, NUM_FEATURES};
pub use labeler::{LabelConfig, LabeledScenario, MetricWeights, WeightTable};
pub use ml::{HyperGrid, ModelKind, TrainedModel};
pub use numerology::{
    ClassGrouping, GuardOption, GuardWidths, NumerologyParams, WaveformClass, NUM_CLASSES,
    NUM_NUMEROLOGIES,
};
pub use phy::{AllocationPlan, MetricTriple, PhyConfig};
pub use scenario::{CellScenario, ScenarioConfig, ServiceType, UserScenario};
