//! Variable read-disturbance toolkit: a synthetic DRAM device model, the RDT
//! profiling procedure, an empirical bitflip model with ECC-failure Monte
//! Carlo, and per-row threshold / mitigation overhead models.

pub mod devsim;
pub mod errmodel;
pub mod error;
pub mod montecarlo;
pub mod persist;
pub mod profiler;
pub mod svard;

pub use devsim::{
    BitLocation, BitflipSet, ChipGeometry, ConditionPreset, DeviceModel, DeviceSpec, EpisodeId, Fraction,
    RowDistribution, RowId,
};
pub use errmodel::{ModelParams, Stepping, UncorrectableEvent};
pub use error::{Error, Result};
pub use montecarlo::{
    epoch_hours, estimate_mttue, run_trials, Ensemble, EpochClock, FailureCurve, MttueEstimate, TrialResult,
};
pub use profiler::{HammerGrid, ProfileSummary, RdtMatrix, WeakRowCensus};
pub use svard::{AccessTrace, MitigationStats, ThresholdMap, ThresholdPolicy, TraceKind};
