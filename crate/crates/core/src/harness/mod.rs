//! Data collection, experiments and persistence.

mod collect;
mod excitation;
pub mod io;
mod probe;
mod reference;
mod tracking;

pub use collect::{collect_dataset, CollectSettings, CollectionInfo, EstimatedModelKind, RecordedDataset, Recording};
pub use excitation::{generate_excitation, ExcitationKind, ExcitationProfile};
pub use probe::{run_stiffness_probe, OperatingPointResult, ProbeSettings, StiffnessReport};
pub use reference::ReferenceSpec;
pub use tracking::{
    recompose, run_tracking, ExperimentSetup, LogRow, TrackingFailure, TrackingMetrics, TrackingRun, TrajectoryLog,
    TRANSIENT_FRACTION,
};

use crate::error::Result;
use crate::gp::{log_marginal_likelihood, OptimizerSettings, TrainedGP};
use io::SavedModel;

/// Optimizes hyperparameters on a recorded dataset and fits the GP.
pub fn train_model(data: &RecordedDataset, restarts: usize, seed: u64) -> Result<SavedModel> {
    let dataset = data.recording.dataset.clone();
    let report = OptimizerSettings {
        restarts,
        seed,
        ..Default::default()
    }
    .optimize(&dataset)?;
    let log_likelihood = log_marginal_likelihood(&dataset, &report.hyperparameters)?.value;
    let gp = TrainedGP::fit(dataset, report.hyperparameters)?;
    Ok(SavedModel {
        gp,
        collection: data.info.clone(),
        fingerprint: data.fingerprint.clone(),
        log_likelihood,
    })
}
