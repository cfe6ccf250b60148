//! Batch experiment runner behind the `eigensense` binary.

mod config;
mod emit;
mod run;

pub use config::{
    default_pfa_grid, Calibration, Emit, Experiment, ExperimentSpec, Overrides, DEFAULT_RUNS, DEFAULT_SEED,
};
pub use emit::{
    emit, g12, metadata_json, result_json, round12, sidecar_path, to_csv, CDF_HEADER, DETECTION_HEADER,
    SWEEP_HEADER, THRESHOLD_HEADER,
};
pub use run::{
    run_cdf_experiment, run_detection_experiment, run_experiment, run_sweep, run_threshold_experiment,
    simulate_statistics, CdfRow, DetectionRow, ExperimentResult, Metadata, Records, SweepRow, ThresholdRow,
    VERSION_TAG,
};
