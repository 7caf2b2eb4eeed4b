//! Constructive counterexamples to "all pure states are determined".
//!
//! Given a probe `φ` annihilated by enough elements, a nonzero `χ ⊥ φ` with
//! `Re<φ|E_i|χ> = 0` for every element exists, and then `φ + χ` and `φ - χ`
//! have identical outcome probabilities:
//!
//! `<φ±χ|E_i|φ±χ> = <φ|E_i|φ> + <χ|E_i|χ> ± 2 Re<φ|E_i|χ>`.
//!
//! Writing `χ = Σ_j (x_j + i y_j) e_j` over an orthonormal basis of `φ^⊥`
//! turns each condition into one real homogeneous row in the `2d - 2`
//! unknowns `(x, y)`. Completeness makes the rows sum to zero, so `K_φ`
//! non-annihilating elements give at most `K_φ - 1` independent rows and a
//! solution exists whenever `K_φ < 2d - 1`.
//!
//! For rank-one POVMs any `d - 1` elements sum to an operator of rank at most
//! `d - 1`; a vector in its kernel is annihilated by each of them, which is
//! the probe [`theorem2_attack`] uses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, null_space, real_homogeneous_solve, ComplexMatrix, HermitianOperator, LinalgError};
use crate::povm::{is_rank_one, Povm, PovmError, StateVector};

/// Relative annihilation tolerance: `|E_i φ| <= tol |φ| (1 + max|E_i|)`.
pub const DEFAULT_ANNIHILATION_TOL: f64 = 1e-10;
/// Largest acceptable probability gap in a produced pair.
pub const MAX_PROB_GAP: f64 = 1e-9;
/// Pairs closer than this in `1 - |<ψ+|ψ->|` are rejected as not distinct.
pub const DISTINCTNESS_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("probe vector is zero")]
    ZeroVector,

    #[error("no perturbation exists at this probe (K_phi = {k_phi}, d = {dim}): {source}")]
    KPhiTooLarge {
        k_phi: usize,
        dim: usize,
        #[source]
        source: LinalgError,
    },

    #[error("sum of the chosen elements has no null vector (smallest eigenvalue {smallest:e})")]
    NoNullVector { smallest: f64 },

    #[error("element {index} is not rank one")]
    NotRankOne { index: usize },

    #[error("element subset must have {expected} distinct in-range indices, got {found:?}")]
    BadSubset { expected: usize, found: Vec<usize> },

    #[error("POVM has {len} elements; at least {needed} are needed")]
    TooFewElements { len: usize, needed: usize },

    #[error("probe is not annihilated by subset element {index} (|E phi| = {norm:e})")]
    ProbeNotAnnihilated { index: usize, norm: f64 },

    #[error("constructed pair failed verification: gap {gap:e}, overlap {overlap}")]
    VerificationFailed { gap: f64, overlap: f64 },

    #[error(transparent)]
    Povm(#[from] PovmError),

    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for AdversaryError {
    fn from(e: LinalgError) -> Self {
        Self::Linalg(e)
    }
}

/// How many elements of a POVM see a given vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilationProfile {
    pub phi: StateVector,
    /// `K_φ`: elements with `E_i φ` above tolerance.
    pub k_phi: usize,
    /// `|E_i φ|` for each element.
    pub per_element_norms: Vec<f64>,
    pub threshold: f64,
}

impl AnnihilationProfile {
    pub fn annihilates(&self, index: usize) -> bool {
        self.per_element_norms[index] <= self.threshold
    }
}

/// Two distinct normalized states with the same outcome probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexamplePair {
    #[serde(with = "crate::io::state_serde")]
    pub phi: StateVector,
    #[serde(with = "crate::io::state_serde")]
    pub chi: StateVector,
    #[serde(with = "crate::io::state_serde")]
    pub psi_plus: StateVector,
    #[serde(with = "crate::io::state_serde")]
    pub psi_minus: StateVector,
    /// `|φ ± χ|`, common to both signs.
    pub common_norm: f64,
    pub max_prob_gap: f64,
    /// `|<ψ+|ψ->|`
    pub overlap: f64,
    pub k_phi: usize,
}

fn check_probe(povm: &Povm, phi: &StateVector) -> Result<(), AdversaryError> {
    if povm.dim() != phi.dim() {
        return Err(PovmError::DimensionMismatch {
            expected: povm.dim(),
            found: phi.dim(),
        }
        .into());
    }
    if phi.norm() == 0.0 {
        return Err(AdversaryError::ZeroVector);
    }
    Ok(())
}

/// `K_φ` and the per-element norms `|E_i φ|`. `tol` is relative; see
/// [`DEFAULT_ANNIHILATION_TOL`].
pub fn annihilation_profile(
    povm: &Povm,
    phi: &StateVector,
    tol: f64,
) -> Result<AnnihilationProfile, AdversaryError> {
    check_probe(povm, phi)?;
    let max_entry = povm
        .elements()
        .iter()
        .map(HermitianOperator::max_abs)
        .fold(0.0, f64::max);
    let threshold = tol * phi.norm() * (1.0 + max_entry);
    let per_element_norms: Vec<f64> = povm
        .elements()
        .iter()
        .map(|e| linalg::norm(&e.apply(phi.coeffs())))
        .collect();
    let k_phi = per_element_norms.iter().filter(|&&n| n > threshold).count();
    Ok(AnnihilationProfile {
        phi: phi.clone(),
        k_phi,
        per_element_norms,
        threshold,
    })
}

/// Orthonormal basis of `φ^⊥` by Gram–Schmidt over the canonical basis,
/// skipping the basis vector with the largest overlap with `φ`.
pub fn orthogonal_complement(phi: &StateVector) -> Vec<Vec<Complex64>> {
    let d = phi.dim();
    let n = phi.norm();
    let unit: Vec<Complex64> = phi.coeffs().iter().map(|z| z / n).collect();
    let skip = (0..d)
        .max_by(|&a, &b| unit[a].norm().total_cmp(&unit[b].norm()).then(b.cmp(&a)))
        .expect("d > 0");
    let mut accepted = vec![unit];
    for k in (0..d).filter(|&k| k != skip) {
        let mut v = StateVector::basis(d, k).into_coeffs();
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for q in &accepted {
                let overlap = linalg::dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= overlap * qi;
                }
            }
        }
        let len = linalg::norm(&v);
        v.iter_mut().for_each(|z| *z /= len);
        accepted.push(v);
    }
    accepted.remove(0);
    accepted
}

/// The real system `Re<φ|E_i|χ> = 0` in the coordinates of `basis`, one row
/// per element (annihilating elements included; their rows vanish).
pub fn perturbation_rows(povm: &Povm, phi: &StateVector, basis: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
    let m = basis.len();
    povm.elements()
        .iter()
        .map(|e| {
            let e_phi = e.apply(phi.coeffs());
            let mut row = vec![0.0; 2 * m];
            for (j, b) in basis.iter().enumerate() {
                // <φ|E|e_j> = <Eφ|e_j> since E is Hermitian
                let a = linalg::dot(&e_phi, b);
                row[j] = a.re;
                row[m + j] = -a.im;
            }
            row
        })
        .collect()
}

/// A nonzero `χ ⊥ φ` with `Re<φ|E_i|χ> = 0` for every element, scaled to
/// `|χ| = |φ|`.
pub fn build_chi(povm: &Povm, phi: &StateVector) -> Result<StateVector, AdversaryError> {
    let profile = annihilation_profile(povm, phi, DEFAULT_ANNIHILATION_TOL)?;
    let basis = orthogonal_complement(phi);
    let rows: Vec<Vec<f64>> = perturbation_rows(povm, phi, &basis)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !profile.annihilates(*i))
        .map(|(_, r)| r)
        .collect();
    let m = basis.len();
    let x = real_homogeneous_solve(&rows, 2 * m).map_err(|source| match source {
        LinalgError::RankTooHigh { .. } => AdversaryError::KPhiTooLarge {
            k_phi: profile.k_phi,
            dim: povm.dim(),
            source,
        },
        other => AdversaryError::Linalg(other),
    })?;
    let mut chi = vec![Complex64::new(0.0, 0.0); phi.dim()];
    for (j, b) in basis.iter().enumerate() {
        let w = Complex64::new(x[j], x[m + j]);
        for (c, bi) in chi.iter_mut().zip(b) {
            *c += w * bi;
        }
    }
    let scale = phi.norm() / linalg::norm(&chi);
    chi.iter_mut().for_each(|z| *z *= scale);
    Ok(StateVector::new(chi)?)
}

fn outcome_values(povm: &Povm, v: &StateVector) -> Vec<f64> {
    povm.elements().iter().map(|e| e.expectation(v.coeffs())).collect()
}

/// Builds `ψ± = (φ ± χ)/N` for the given probe and verifies the pair.
pub fn attack_with_probe(povm: &Povm, phi: &StateVector) -> Result<CounterexamplePair, AdversaryError> {
    let k_phi = annihilation_profile(povm, phi, DEFAULT_ANNIHILATION_TOL)?.k_phi;
    let chi = build_chi(povm, phi)?;
    let plus: Vec<Complex64> = phi.coeffs().iter().zip(chi.coeffs()).map(|(a, b)| a + b).collect();
    let minus: Vec<Complex64> = phi.coeffs().iter().zip(chi.coeffs()).map(|(a, b)| a - b).collect();
    let common_norm = linalg::norm(&plus);
    let psi_plus = StateVector::normalized(plus)?;
    let psi_minus = StateVector::normalized(minus)?;
    let max_prob_gap = outcome_values(povm, &psi_plus)
        .iter()
        .zip(outcome_values(povm, &psi_minus))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let overlap = psi_plus.inner(&psi_minus).norm();
    if max_prob_gap > MAX_PROB_GAP || 1.0 - overlap <= DISTINCTNESS_MARGIN {
        return Err(AdversaryError::VerificationFailed {
            gap: max_prob_gap,
            overlap,
        });
    }
    Ok(CounterexamplePair {
        phi: phi.clone(),
        chi,
        psi_plus,
        psi_minus,
        common_norm,
        max_prob_gap,
        overlap,
        k_phi,
    })
}

/// Takes a probe from the kernel of `F = Σ_{i∈subset} E_i` (default subset:
/// the first `d - 1` elements) and attacks with it.
pub fn theorem2_attack(povm: &Povm, element_subset: Option<&[usize]>) -> Result<CounterexamplePair, AdversaryError> {
    let d = povm.dim();
    let needed = d - 1;
    if povm.len() < needed.max(1) {
        return Err(AdversaryError::TooFewElements {
            len: povm.len(),
            needed,
        });
    }
    let default: Vec<usize> = (0..needed).collect();
    let subset = element_subset.unwrap_or(&default);
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if subset.len() != needed || sorted.len() != needed || sorted.iter().any(|&i| i >= povm.len()) {
        return Err(AdversaryError::BadSubset {
            expected: needed,
            found: subset.to_vec(),
        });
    }
    for &i in subset {
        if !is_rank_one(povm.element(i))? {
            return Err(AdversaryError::NotRankOne { index: i });
        }
    }

    let mut f = ComplexMatrix::zeros(d, d);
    for &i in subset {
        f = &f + povm.element(i).matrix();
    }
    let f = HermitianOperator::symmetrized(f);
    let null_tol = DEFAULT_ANNIHILATION_TOL * (1.0 + f.max_abs());
    let kernel = null_space(&f, null_tol)?;
    let Some(phi) = kernel.into_iter().next() else {
        let smallest = linalg::hermitian_eig(&f)?.eigenvalues[0];
        return Err(AdversaryError::NoNullVector { smallest });
    };
    let phi = StateVector::new(phi)?;

    let profile = annihilation_profile(povm, &phi, DEFAULT_ANNIHILATION_TOL)?;
    if let Some(&index) = subset.iter().find(|&&i| !profile.annihilates(i)) {
        return Err(AdversaryError::ProbeNotAnnihilated {
            index,
            norm: profile.per_element_norms[index],
        });
    }
    attack_with_probe(povm, &phi)
}
