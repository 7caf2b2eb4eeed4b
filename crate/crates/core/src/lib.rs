//! Rank-one POVMs that identify almost every pure state from `2d` outcomes.
//!
//! * [`povm`]: the `2d`-element rank-one construction, states, probabilities.
//! * [`reconstruct`]: state recovery from outcome statistics and certification
//!   of the measure-zero set where recovery is ambiguous.
//! * [`adversary`]: explicit pairs of distinct states with identical
//!   statistics, for any POVM with a probe seen by fewer than `2d - 1`
//!   elements (in particular any rank-one POVM with fewer than `3d - 2`).
//! * [`harness`]: seeded Monte Carlo sweeps and shot-noise experiments.
//! * [`linalg`]: the small dense complex kernels underneath.
//! * [`io`]: JSON file formats.

pub mod adversary;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod povm;
pub mod reconstruct;

pub use num_complex::Complex64;

pub use adversary::{
    annihilation_profile, attack_with_probe, build_chi, theorem2_attack, AdversaryError,
    AnnihilationProfile, CounterexamplePair,
};
pub use harness::{
    fidelity, haar_random_state, instability_probe, round_trip_sweep, sample_counts,
    ExperimentConfig, SweepResult,
};
pub use linalg::{ComplexMatrix, HermitianOperator, LinalgError};
pub use povm::{
    build_fsc_operators, build_fsc_povm, expectations, probabilities, validate_povm,
    FscConstruction, OperatorSet, Povm, PovmError, Provenance, StateVector,
};
pub use reconstruct::{
    certify_failure_set, reconstruct_from_expectations, reconstruct_from_probabilities,
    AmbiguityCertificate, ReconstructError, ReconstructionReport, ReconstructionStatus,
};
