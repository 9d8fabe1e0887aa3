//! Continuity and large-signal stability analysis of constant off-time
//! peak current-mode control with a low-pass filtered current sense and
//! sinusoidal interference.

pub mod cli;
pub mod config;
pub mod criteria;
pub mod cycle;
pub mod error;
pub mod filter;
pub mod linearize;
pub mod params;
pub mod sim;
pub mod sweep;

pub use config::{load_config, Config, SimSettings};
pub use criteria::{
    proof_internals, theorem1_margin, theorem2_coefficients, theorem2_margin, StabilityReport,
};
pub use cycle::{CurrentLoop, CycleRecord, CycleState, OperatingPoint, SolverSettings};
pub use error::{Error, Result};
pub use filter::{FilterKernels, ForcedResponse};
pub use linearize::{fd_jacobian, linearize, root_locus, LinearizedModel, LocusPoint};
pub use params::{
    normalize, ConverterParams, FilterSpec, InterferenceSpec, NormalizedParams, PhaseMode, Sinusoid,
};
pub use sim::{classify_stability, simulate, Classification, StabilityVerdict, Trajectory};
pub use sweep::{sweep, Axis, GridSpec, RegionGrid, SweepOptions};
