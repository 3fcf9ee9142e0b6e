//! Synthetic studies, metrics and reporting behind the `levelset` CLI.

pub mod bpdn;
pub mod config;
pub mod image;
pub mod lowrank_study;
pub mod metrics;
pub mod report;
pub mod spike;

pub use bpdn::{
    run_bpdn_study, run_convergence_study, spike_problem, BpdnStudyConfig, ConvergenceStudyConfig, Method, SigmaPolicy, StudyOutput,
};
pub use image::{gen_image, image_problem, run_image_study, ImageConfig, ImageInstance, ImageStudyConfig};
pub use lowrank_study::{
    gen_lowrank, run_lowrank_study, LowRankExperimentConfig, LowRankInstance, LowRankMode, LowRankStudyConfig, LowRankStudyOutput,
    LOWRANK_METHOD,
};
pub use metrics::{median, snr_db, SNR_CAP_DB};
pub use report::{ReportRow, RowStatus, RunReport, REPORT_HEADER};
pub use spike::{gen_spike_train, SpikeTrain, SpikeTrainConfig};
