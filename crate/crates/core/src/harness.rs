//! Seeded Monte Carlo experiments.
//!
//! Randomness comes from ChaCha20 streams: an experiment seed picks the key
//! and sample `i` reads stream `i`, so every sample is reproducible on its own
//! and parallel execution gives the same records as a serial run.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::CounterexamplePair;
use crate::povm::{probabilities, FscConstruction, PovmError, StateVector};
use crate::reconstruct::{
    reconstruct_probabilities_with_model, DataModel, ReconstructionStatus, DEFAULT_PATTERN_TOL,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Povm(#[from] PovmError),

    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
}

/// ChaCha20 generator for stream `stream` under key `seed`.
pub fn child_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Haar-random pure state: i.i.d. standard complex Gaussians, normalized.
pub fn haar_random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> StateVector {
    let coeffs: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::normalized(coeffs).expect("gaussian vector is nonzero with probability one")
}

/// Multinomial draw of `shots` outcomes, by sequential conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut remaining_shots = shots;
    let mut remaining_mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_shots == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining_shots;
            break;
        }
        let p = p.max(0.0);
        let q = if remaining_mass > 0.0 { (p / remaining_mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(remaining_shots, q)
            .expect("q is a probability")
            .sample(rng);
        counts[i] = k;
        remaining_shots -= k;
        remaining_mass -= p;
    }
    counts
}

/// `|<a|b>|²`, clamped to `[0, 1]`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, PovmError> {
    if a.dim() != b.dim() {
        return Err(PovmError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.inner(b).norm_sqr().clamp(0.0, 1.0))
}

/// `min_θ |a - e^{iθ} b|` for normalized states.
pub fn phase_distance(a: &StateVector, b: &StateVector) -> Result<f64, PovmError> {
    let overlap = fidelity(a, b)?.sqrt();
    Ok((2.0 - 2.0 * overlap).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub samples: usize,
    /// `None` means exact probabilities.
    pub shots: Option<u64>,
    pub seed: u64,
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn exact(d: usize, samples: usize, seed: u64) -> Self {
        Self {
            d,
            samples,
            shots: None,
            seed,
            tol: DEFAULT_PATTERN_TOL,
        }
    }

    pub fn with_shots(self, shots: u64) -> Self {
        Self {
            shots: Some(shots),
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.d < 2 {
            return Err(HarnessError::InvalidConfig(format!("d = {} (need d >= 2)", self.d)));
        }
        if self.samples == 0 {
            return Err(HarnessError::InvalidConfig("samples must be positive".into()));
        }
        if self.shots == Some(0) {
            return Err(HarnessError::InvalidConfig("shots must be positive".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(HarnessError::InvalidConfig(format!("tol = {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleStatus {
    Unique,
    Ambiguous,
    GaugeDegenerate,
    BestFit,
    Error,
}

impl From<ReconstructionStatus> for SampleStatus {
    fn from(s: ReconstructionStatus) -> Self {
        match s {
            ReconstructionStatus::Unique => Self::Unique,
            ReconstructionStatus::Ambiguous => Self::Ambiguous,
            ReconstructionStatus::GaugeDegenerate => Self::GaugeDegenerate,
            ReconstructionStatus::BestFit => Self::BestFit,
        }
    }
}

impl SampleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Unique => "Unique",
            Self::Ambiguous => "Ambiguous",
            Self::GaugeDegenerate => "GaugeDegenerate",
            Self::BestFit => "BestFit",
            Self::Error => "Error",
        }
    }

    /// Ambiguous reconstructions and errors.
    pub fn is_failure(self) -> bool {
        matches!(self, Self::Ambiguous | Self::Error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    /// `|<true|recovered>|²`; zero when reconstruction failed outright.
    pub fidelity: f64,
    /// Norm distance after optimal phase alignment.
    pub distance: f64,
    pub status: SampleStatus,
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mean_infidelity: f64,
    pub max_infidelity: f64,
    pub failure_count: usize,
    pub gauge_degenerate_count: usize,
}

impl SweepSummary {
    pub fn from_records(records: &[SampleRecord]) -> Self {
        let mut sorted: Vec<&SampleRecord> = records.iter().collect();
        sorted.sort_by_key(|r| r.index);
        let infidelities: Vec<f64> = sorted.iter().map(|r| 1.0 - r.fidelity).collect();
        let n = infidelities.len().max(1) as f64;
        Self {
            mean_infidelity: infidelities.iter().sum::<f64>() / n,
            max_infidelity: infidelities.iter().copied().fold(0.0, f64::max),
            failure_count: sorted.iter().filter(|r| r.status.is_failure()).count(),
            gauge_degenerate_count: sorted
                .iter()
                .filter(|r| r.status == SampleStatus::GaugeDegenerate)
                .count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub per_sample: Vec<SampleRecord>,
    pub summary: SweepSummary,
}

impl SweepResult {
    /// One row per sample: index, fidelity, distance, status, residual.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "fidelity", "distance", "status", "residual"])?;
        for r in &self.per_sample {
            w.write_record([
                r.index.to_string(),
                r.fidelity.to_string(),
                r.distance.to_string(),
                r.status.as_str().to_string(),
                r.residual.map(|x| x.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn reconstruct_record(
    construction: &FscConstruction,
    index: usize,
    truth: &StateVector,
    data: &[f64],
    model: DataModel,
    tol: f64,
) -> SampleRecord {
    match reconstruct_probabilities_with_model(construction, data, tol, model) {
        Ok(report) => {
            let fid = fidelity(truth, &report.recovered).unwrap_or(0.0);
            SampleRecord {
                index,
                fidelity: fid,
                distance: phase_distance(truth, &report.recovered).unwrap_or(f64::MAX),
                status: report.status.into(),
                residual: Some(report.residual),
                error: None,
            }
        }
        Err(e) => SampleRecord {
            index,
            fidelity: 0.0,
            distance: 2f64.sqrt(),
            status: SampleStatus::Error,
            residual: None,
            error: Some(e.to_string()),
        },
    }
}

/// Forward-simulates `psi`, optionally degrades the probabilities to
/// `shots` samples, and reconstructs.
pub fn run_sample<R: Rng + ?Sized>(
    construction: &FscConstruction,
    index: usize,
    psi: &StateVector,
    shots: Option<u64>,
    tol: f64,
    rng: &mut R,
) -> SampleRecord {
    let probs = match probabilities(construction.povm(), psi) {
        Ok(p) => p,
        Err(e) => {
            return SampleRecord {
                index,
                fidelity: 0.0,
                distance: 2f64.sqrt(),
                status: SampleStatus::Error,
                residual: None,
                error: Some(e.to_string()),
            }
        }
    };
    match shots {
        None => reconstruct_record(construction, index, psi, &probs, DataModel::Exact, tol),
        Some(n) => {
            let counts = sample_counts(&probs, n, rng);
            let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            reconstruct_record(construction, index, psi, &freqs, DataModel::Sampled, tol)
        }
    }
}

/// Haar states through the construction's POVM and back, one child stream
/// per sample.
pub fn round_trip_sweep(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let construction = FscConstruction::new(cfg.d)?;
    let per_sample: Vec<SampleRecord> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = child_rng(cfg.seed, i as u64);
            let psi = haar_random_state(cfg.d, &mut rng);
            run_sample(&construction, i, &psi, cfg.shots, cfg.tol, &mut rng)
        })
        .collect();
    let summary = SweepSummary::from_records(&per_sample);
    Ok(SweepResult {
        config: *cfg,
        per_sample,
        summary,
    })
}

/// Like [`round_trip_sweep`] over caller-chosen states; `cfg.samples` is
/// ignored.
pub fn round_trip_states(cfg: &ExperimentConfig, states: &[StateVector]) -> Result<SweepResult, HarnessError> {
    let construction = FscConstruction::new(cfg.d)?;
    let per_sample: Vec<SampleRecord> = states
        .par_iter()
        .enumerate()
        .map(|(i, psi)| {
            let mut rng = child_rng(cfg.seed, i as u64);
            run_sample(&construction, i, psi, cfg.shots, cfg.tol, &mut rng)
        })
        .collect();
    let summary = SweepSummary::from_records(&per_sample);
    Ok(SweepResult {
        config: ExperimentConfig {
            samples: states.len(),
            ..*cfg
        },
        per_sample,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
    pub status: SampleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub shots: Option<u64>,
    pub trials: Vec<TrialRecord>,
    /// Fraction of trials whose reconstruction is strictly closer to `ψ-`.
    pub misidentification_fraction: f64,
}

/// Simulates data from `ψ+` of an equal-probability pair and records, for
/// each trial, how close the reconstruction lands to `ψ+` and to `ψ-`.
/// `shots = None` uses the exact probabilities.
pub fn instability_probe<R: Rng + ?Sized>(
    construction: &FscConstruction,
    pair: &CounterexamplePair,
    shots: Option<u64>,
    trials: usize,
    rng: &mut R,
) -> Result<InstabilityReport, HarnessError> {
    let probs = probabilities(construction.povm(), &pair.psi_plus)?;
    let mut records = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (data, model) = match shots {
            None => (probs.clone(), DataModel::Exact),
            Some(n) => {
                let counts = sample_counts(&probs, n, rng);
                (counts.iter().map(|&c| c as f64 / n as f64).collect(), DataModel::Sampled)
            }
        };
        let record = match reconstruct_probabilities_with_model(construction, &data, DEFAULT_PATTERN_TOL, model) {
            Ok(report) => TrialRecord {
                fidelity_plus: fidelity(&pair.psi_plus, &report.recovered)?,
                fidelity_minus: fidelity(&pair.psi_minus, &report.recovered)?,
                status: report.status.into(),
            },
            Err(_) => TrialRecord {
                fidelity_plus: 0.0,
                fidelity_minus: 0.0,
                status: SampleStatus::Error,
            },
        };
        records.push(record);
    }
    let misidentified = records
        .iter()
        .filter(|r| r.status != SampleStatus::Error && r.fidelity_minus > r.fidelity_plus)
        .count();
    Ok(InstabilityReport {
        shots,
        misidentification_fraction: misidentified as f64 / trials.max(1) as f64,
        trials: records,
    })
}
