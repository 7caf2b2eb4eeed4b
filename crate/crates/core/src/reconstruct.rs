//! Pure-state reconstruction from the `2d` expectation values of the
//! construction, and certification of the sign-ambiguous failure set.
//!
//! Working in the operator frame with gauge `c_0 > 0` real:
//!
//! 1. `c_0 = sqrt(v_0)` and `|c_i| = sqrt(v_i)` from the basis projectors;
//! 2. `Im c_i = (v_{d-1+i} - c_0² - |c_i|²) / (2 c_0)` from the phase operators;
//! 3. `|Re c_i| = sqrt(|c_i|² - (Im c_i)²)`;
//! 4. the signs of `Re c_i` are chosen by enumerating every pattern and keeping
//!    those with `(c_0 + Σ s_i |Re c_i|)² + (Σ Im c_i)² = v_{2d-1}`.
//!
//! Two states agreeing on all `2d` values differ by flipping `Re c_i` over some
//! index set `U` with either `Σ_{i∈U} Re c_i = 0` or `Σ_{i∉U} Re c_i = 0`.
//! [`certify_failure_set`] searches for exactly those coincidences.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::povm::{
    build_fsc_operators, expectations, probabilities, FscConstruction, OperatorSet, PovmError,
    StateVector,
};

/// Relative tolerance for matching the sum-operator value.
pub const DEFAULT_PATTERN_TOL: f64 = 1e-9;
/// Relative tolerance for the failure-set subset sums.
pub const DEFAULT_FAILURE_TOL: f64 = 1e-10;
/// Bound on the emitted alternative's expectation mismatch.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// Largest number of free signs the exhaustive search will enumerate.
const MAX_FREE_SIGNS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("expected {expected} values, got {found}")]
    WrongLength { expected: usize, found: usize },

    #[error("operator set is not the 2d-element construction in its fixed order")]
    NotFscOperators,

    #[error("basis-projector value {index} is negative ({value:e})")]
    NegativeMagnitude { index: usize, value: f64 },

    #[error("inconsistent data: |Re c_{index}|^2 = {re_sqr:e} is negative beyond tolerance")]
    InconsistentData { index: usize, re_sqr: f64 },

    #[error("inconsistent data: no sign pattern matches the sum-operator value (best mismatch {best:e}, tolerance {tol:e})")]
    NoConsistentPattern { best: f64, tol: f64 },

    #[error("not a probability vector (sum {sum}, min {min})")]
    NotProbabilityVector { sum: f64, min: f64 },

    #[error("{free} free signs is too many for exhaustive enumeration")]
    SearchTooLarge { free: usize },

    #[error(transparent)]
    Povm(#[from] PovmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReconstructionStatus {
    /// Exactly one sign pattern reproduces the data.
    Unique,
    /// Several sign patterns reproduce the data; `recovered` is the first.
    Ambiguous,
    /// `c_0 ≈ 0`: the gauge `c_0 > 0` is unavailable.
    GaugeDegenerate,
    /// Sampled data that no pattern reproduces within tolerance; `recovered`
    /// uses the pattern with the smallest mismatch.
    BestFit,
}

impl ReconstructionStatus {
    pub fn is_unique(self) -> bool {
        matches!(self, Self::Unique | Self::BestFit)
    }
}

/// Whether the input is exact (up to roundoff) or estimated from finite
/// samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataModel {
    /// Inconsistencies beyond tolerance are errors.
    Exact,
    /// Plug-in estimate: negative `|Re c_i|²` is clamped to zero and, when no
    /// pattern fits within tolerance, the best-fitting one is used.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Gauge-fixed: `c_0 >= 0`, `Im c_0 = 0`.
    #[serde(with = "crate::io::state_serde")]
    pub recovered: StateVector,
    /// The operator-frame coefficients the sign search produced. Equal to
    /// `recovered` for [`reconstruct_from_expectations`].
    #[serde(with = "crate::io::state_serde")]
    pub operator_frame: StateVector,
    /// Sign patterns over indices `1..d`, in lexicographic order with `+1`
    /// before `-1`. Indices whose real part is zero at tolerance carry `+1`.
    pub sign_solutions: Vec<Vec<i8>>,
    pub status: ReconstructionStatus,
    /// Max |input value - value of `recovered`|.
    pub residual: f64,
}

fn check_fsc_operators(ops: &OperatorSet) -> Result<(), ReconstructError> {
    let d = ops.dim();
    if d < 2 || ops.len() != 2 * d {
        return Err(ReconstructError::NotFscOperators);
    }
    let reference = build_fsc_operators(d)?;
    let matches = ops
        .operators()
        .iter()
        .zip(reference.operators())
        .all(|(a, b)| a.matrix().max_abs_diff(b.matrix()) <= 1e-12);
    if matches {
        Ok(())
    } else {
        Err(ReconstructError::NotFscOperators)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Reconstructs the operator-frame coefficients from exact expectation values
/// `values[k] = <ψ|P_k|ψ>`. `tol` is relative to `Σ_{i<d} values[i]`.
pub fn reconstruct_from_expectations(
    ops: &OperatorSet,
    values: &[f64],
    tol: f64,
) -> Result<ReconstructionReport, ReconstructError> {
    reconstruct_with_model(ops, values, tol, DataModel::Exact)
}

pub fn reconstruct_with_model(
    ops: &OperatorSet,
    values: &[f64],
    tol: f64,
    model: DataModel,
) -> Result<ReconstructionReport, ReconstructError> {
    check_fsc_operators(ops)?;
    let d = ops.dim();
    if values.len() != 2 * d {
        return Err(ReconstructError::WrongLength {
            expected: 2 * d,
            found: values.len(),
        });
    }
    let scale: f64 = values[..d].iter().map(|v| v.max(0.0)).sum();
    let abs_tol = tol * scale;
    if let Some(index) = (0..d).find(|&i| values[i] < -abs_tol) {
        return Err(ReconstructError::NegativeMagnitude {
            index,
            value: values[index],
        });
    }
    let mag_sqr: Vec<f64> = values[..d].iter().map(|v| v.max(0.0)).collect();

    if scale == 0.0 || values[0] <= abs_tol {
        // No gauge available: report magnitudes only.
        let coeffs: Vec<Complex64> = std::iter::once(Complex64::new(0.0, 0.0))
            .chain(mag_sqr[1..].iter().map(|m| Complex64::new(m.sqrt(), 0.0)))
            .collect();
        let recovered = StateVector::new(coeffs)?;
        let residual = max_abs_diff(&expectations(ops, &recovered)?, values);
        return Ok(ReconstructionReport {
            operator_frame: recovered.clone(),
            recovered,
            sign_solutions: Vec::new(),
            status: ReconstructionStatus::GaugeDegenerate,
            residual,
        });
    }

    let c0 = mag_sqr[0].sqrt();
    let mut im = vec![0.0; d];
    let mut re_abs = vec![0.0; d];
    re_abs[0] = c0;
    let mut free = Vec::new();
    for i in 1..d {
        im[i] = (values[d - 1 + i] - mag_sqr[0] - mag_sqr[i]) / (2.0 * c0);
        let re_sqr = mag_sqr[i] - im[i] * im[i];
        if re_sqr < -abs_tol && model == DataModel::Exact {
            return Err(ReconstructError::InconsistentData { index: i, re_sqr });
        }
        re_abs[i] = re_sqr.max(0.0).sqrt();
        if re_sqr > abs_tol {
            free.push(i);
        }
    }
    if free.len() > MAX_FREE_SIGNS {
        return Err(ReconstructError::SearchTooLarge { free: free.len() });
    }

    let im_sum: f64 = im.iter().sum();
    // Rounding in the input values is amplified by 1/c0 in Im c_i and by
    // the square root near zero in |Re c_i|, so each magnitude is carried as
    // an interval and a pattern survives if the sum value is reachable.
    let unit = 16.0 * f64::EPSILON * scale;
    let d_im: Vec<f64> = im.iter().map(|x| unit * (3.0 + x.abs() / c0) / (2.0 * c0)).collect();
    let re_range: Vec<(f64, f64)> = (0..d)
        .map(|i| {
            if i == 0 {
                let e = unit / (2.0 * c0);
                return ((c0 - e).max(0.0), c0 + e);
            }
            let re_sqr = mag_sqr[i] - im[i] * im[i];
            let noise = unit + 2.0 * im[i].abs() * d_im[i];
            ((re_sqr - noise).max(0.0).sqrt(), (re_sqr.max(0.0) + noise).sqrt())
        })
        .collect();
    let want_err = unit + 2.0 * im_sum.abs() * d_im.iter().sum::<f64>();
    // Components below resolution still shift the sum value; they enter the
    // test as an unknown offset and get their signs afterwards.
    let pinned: Vec<usize> = (1..d).filter(|i| !free.contains(i) && re_abs[*i] > 0.0).collect();
    let pinned_hi: f64 = (1..d).filter(|i| !free.contains(i)).map(|i| re_range[i].1).sum();
    let want = values[2 * d - 1] - im_sum * im_sum;
    let k = free.len();
    let sign_of = |pattern: u64, pos: usize| -> f64 {
        if (pattern >> (k - 1 - pos)) & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    };
    let free_sum = |pattern: u64| -> f64 {
        c0 + free
            .iter()
            .enumerate()
            .map(|(pos, &i)| sign_of(pattern, pos) * re_abs[i])
            .sum::<f64>()
    };
    let mismatch = |pattern: u64| -> f64 {
        let (mut lo, mut hi) = (re_range[0].0 - pinned_hi, re_range[0].1 + pinned_hi);
        for (pos, &i) in free.iter().enumerate() {
            let (a, b) = re_range[i];
            if sign_of(pattern, pos) > 0.0 {
                lo += a;
                hi += b;
            } else {
                lo -= b;
                hi -= a;
            }
        }
        let (sq_lo, sq_hi) = if lo <= 0.0 && hi >= 0.0 {
            (0.0, (lo * lo).max(hi * hi))
        } else {
            ((lo * lo).min(hi * hi), (lo * lo).max(hi * hi))
        };
        let gap = if want < sq_lo {
            sq_lo - want
        } else if want > sq_hi {
            want - sq_hi
        } else {
            0.0
        };
        (gap - want_err).max(0.0)
    };
    // Greedy signs for the pinned components, largest first, steering the
    // real-part sum toward the value the data ask for.
    let mut by_size = pinned.clone();
    by_size.sort_by(|&a, &b| re_abs[b].total_cmp(&re_abs[a]));
    let pinned_signs = |pattern: u64| -> Vec<(usize, i8)> {
        let s = free_sum(pattern);
        let desired = want.max(0.0).sqrt().copysign(if s < 0.0 { -1.0 } else { 1.0 });
        let mut remaining = desired - s;
        by_size
            .iter()
            .map(|&i| {
                if remaining < 0.0 {
                    remaining += re_abs[i];
                    (i, -1)
                } else {
                    remaining -= re_abs[i];
                    (i, 1)
                }
            })
            .collect()
    };

    let mut survivors = Vec::new();
    let mut best = (f64::INFINITY, 0u64);
    for pattern in 0..(1u64 << k) {
        let m = mismatch(pattern);
        if m <= abs_tol {
            survivors.push(pattern);
        }
        if m < best.0 {
            best = (m, pattern);
        }
    }

    let (chosen, status) = match survivors.len() {
        0 => match model {
            DataModel::Exact => {
                return Err(ReconstructError::NoConsistentPattern {
                    best: best.0,
                    tol: abs_tol,
                })
            }
            DataModel::Sampled => (best.1, ReconstructionStatus::BestFit),
        },
        1 => (survivors[0], ReconstructionStatus::Unique),
        _ => (survivors[0], ReconstructionStatus::Ambiguous),
    };

    let full_pattern = |pattern: u64| -> Vec<i8> {
        let extra = pinned_signs(pattern);
        (1..d)
            .map(|i| match free.iter().position(|&f| f == i) {
                Some(pos) if sign_of(pattern, pos) < 0.0 => -1,
                Some(_) => 1,
                None => extra.iter().find(|(j, _)| *j == i).map_or(1, |&(_, s)| s),
            })
            .collect()
    };
    let chosen_signs = full_pattern(chosen);
    let coeffs: Vec<Complex64> = std::iter::once(Complex64::new(c0, 0.0))
        .chain((1..d).map(|i| Complex64::new(f64::from(chosen_signs[i - 1]) * re_abs[i], im[i])))
        .collect();
    let recovered = StateVector::new(coeffs)?;
    let residual = max_abs_diff(&expectations(ops, &recovered)?, values);
    Ok(ReconstructionReport {
        operator_frame: recovered.clone(),
        recovered,
        sign_solutions: survivors.into_iter().map(full_pattern).collect(),
        status,
        residual,
    })
}

fn check_probability_vector(probs: &[f64]) -> Result<(), ReconstructError> {
    let sum: f64 = probs.iter().sum();
    let min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > 1e-8 || min < -1e-8 || probs.iter().any(|p| !p.is_finite()) {
        return Err(ReconstructError::NotProbabilityVector { sum, min });
    }
    Ok(())
}

/// Reconstructs a normalized state from exact outcome probabilities of the
/// construction's POVM.
///
/// The POVM probabilities of `ψ` are the operator-frame expectations of
/// `φ = G^{-1/2} ψ`, so `φ` is reconstructed first and `ψ = G^{1/2} φ` is
/// normalized and gauge-fixed.
pub fn reconstruct_from_probabilities(
    construction: &FscConstruction,
    probs: &[f64],
    tol: f64,
) -> Result<ReconstructionReport, ReconstructError> {
    reconstruct_probabilities_with_model(construction, probs, tol, DataModel::Exact)
}

/// As [`reconstruct_from_probabilities`], for empirical frequencies.
pub fn reconstruct_from_frequencies(
    construction: &FscConstruction,
    freqs: &[f64],
    tol: f64,
) -> Result<ReconstructionReport, ReconstructError> {
    reconstruct_probabilities_with_model(construction, freqs, tol, DataModel::Sampled)
}

pub fn reconstruct_probabilities_with_model(
    construction: &FscConstruction,
    probs: &[f64],
    tol: f64,
    model: DataModel,
) -> Result<ReconstructionReport, ReconstructError> {
    check_probability_vector(probs)?;
    let frame = reconstruct_with_model(construction.operators(), probs, tol, model)?;
    let psi = construction
        .to_measurement_frame(&frame.operator_frame)?
        .to_normalized()?
        .gauge_fixed();
    let residual = max_abs_diff(&probabilities(construction.povm(), &psi)?, probs);
    Ok(ReconstructionReport {
        recovered: psi,
        operator_frame: frame.operator_frame,
        sign_solutions: frame.sign_solutions,
        status: frame.status,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureCondition {
    /// `Σ_{i∈U} Re c_i = 0`: the real-part sum keeps its sign under the flip.
    SumOverU,
    /// `Σ_{i∈E} Re c_i = 0`: the real-part sum changes sign under the flip.
    SumOverE,
}

/// A witness that `psi` shares all `2d` expectation values with a distinct
/// state obtained by flipping `Re c_i` for `i ∈ U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityCertificate {
    /// Nonempty subset of `1..d`.
    pub subset_u: Vec<usize>,
    pub condition: FailureCondition,
    #[serde(with = "crate::io::state_serde")]
    pub alternative: StateVector,
    /// |Σ Re c_i| over the vanishing subset.
    pub violation: f64,
    /// Max expectation mismatch between `psi` and `alternative`.
    pub expectation_gap: f64,
}

/// Lists every sign-flip ambiguity of the operator-frame vector `psi`.
///
/// `psi` is gauge-fixed first. `tol` is relative to `|psi|`. An empty list
/// means the data of `psi` determine it uniquely at this tolerance.
pub fn certify_failure_set(
    psi: &StateVector,
    tol: f64,
) -> Result<Vec<AmbiguityCertificate>, ReconstructError> {
    let d = psi.dim();
    if d < 2 {
        return Err(PovmError::DimensionTooSmall(d).into());
    }
    if d - 1 > MAX_FREE_SIGNS {
        return Err(ReconstructError::SearchTooLarge { free: d - 1 });
    }
    let ops = build_fsc_operators(d)?;
    let psi = psi.gauge_fixed();
    let abs_tol = tol * psi.norm();
    let re: Vec<f64> = psi.coeffs().iter().map(|z| z.re).collect();
    let original = expectations(&ops, &psi)?;
    let gap_bound = CERTIFICATE_TOL * psi.norm().powi(2).max(1.0);

    let mut certificates = Vec::new();
    for mask in 1u64..(1u64 << (d - 1)) {
        let subset_u: Vec<usize> = (1..d).filter(|i| (mask >> (i - 1)) & 1 == 1).collect();
        if subset_u.iter().all(|&i| re[i].abs() <= abs_tol) {
            continue;
        }
        let sum_u: f64 = subset_u.iter().map(|&i| re[i]).sum();
        let sum_e: f64 = re.iter().sum::<f64>() - sum_u;
        let candidates = [
            (FailureCondition::SumOverU, sum_u.abs()),
            (FailureCondition::SumOverE, sum_e.abs()),
        ];
        for (condition, violation) in candidates {
            if violation > abs_tol {
                continue;
            }
            let coeffs = psi
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, z)| if subset_u.contains(&i) { Complex64::new(-z.re, z.im) } else { *z })
                .collect();
            let alternative = StateVector::new(coeffs)?;
            let expectation_gap = max_abs_diff(&expectations(&ops, &alternative)?, &original);
            if expectation_gap <= gap_bound {
                certificates.push(AmbiguityCertificate {
                    subset_u: subset_u.clone(),
                    condition,
                    alternative,
                    violation,
                    expectation_gap,
                });
            }
        }
    }
    Ok(certificates)
}
