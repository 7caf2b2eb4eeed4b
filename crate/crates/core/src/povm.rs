//! States, POVMs and the 2d-element rank-one construction.
//!
//! The construction starts from `2d` rank-one operators in a fixed basis
//! `{e_0, ..., e_{d-1}}`:
//!
//! * the `d` basis projectors `|e_i><e_i|`, `i = 0..d`;
//! * the `d - 1` phase operators `(|e_0> + i|e_i>)(<e_0| - i<e_i|)`, `i = 1..d`;
//! * the single sum operator `(sum_i |e_i>)(sum_j <e_j|)`.
//!
//! Their sum `G` is positive definite (it dominates the identity), so
//! `E_k = G^{-1/2} P_k G^{-1/2}` is a POVM with `2d` rank-one elements.
//! The order above is part of the file format: reconstruction reads the
//! families back by position.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, hermitian_eig, psd_inv_sqrt, psd_sqrt, ComplexMatrix, HermitianOperator, LinalgError,
    DEFAULT_SINGULAR_EPS,
};

/// Tolerance on `|Σ|c_i|² - 1|` for the normalized marker.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Element-wise tolerance on `Σ E_i = I`.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Lower bound on element eigenvalues.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Relative bound on the second-largest eigenvalue of a rank-one operator.
pub const RANK_ONE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PovmError {
    #[error("dimension {0} is too small; the construction needs d >= 2")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state vector is empty or has a non-finite coefficient")]
    InvalidState,

    #[error("state is not normalized: squared norm {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("state vector is zero")]
    ZeroVector,

    #[error("POVM has no elements")]
    Empty,

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Coefficient vector `c_i` in the fixed basis.
///
/// `normalized` records whether `Σ|c_i|² = 1` held (to [`NORMALIZATION_TOL`])
/// when the vector was built; intermediate vectors such as the probe `φ` and
/// perturbation `χ` of the adversary are kept unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    coeffs: Vec<Complex64>,
    normalized: bool,
}

impl StateVector {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self, PovmError> {
        if coeffs.is_empty() || coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PovmError::InvalidState);
        }
        let normalized = (linalg::norm(&coeffs).powi(2) - 1.0).abs() <= NORMALIZATION_TOL;
        Ok(Self { coeffs, normalized })
    }

    /// Scales `coeffs` to unit length.
    pub fn normalized(coeffs: Vec<Complex64>) -> Result<Self, PovmError> {
        let s = Self::new(coeffs)?;
        s.to_normalized()
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self, PovmError> {
        Self::new(coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); dim];
        coeffs[index] = Complex64::new(1.0, 0.0);
        Self {
            coeffs,
            normalized: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.coeffs)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        linalg::dot(&self.coeffs, &other.coeffs)
    }

    pub fn to_normalized(&self) -> Result<Self, PovmError> {
        let n = self.norm();
        if n == 0.0 {
            return Err(PovmError::ZeroVector);
        }
        let coeffs: Vec<Complex64> = self.coeffs.iter().map(|z| z / n).collect();
        let normalized = (linalg::norm(&coeffs).powi(2) - 1.0).abs() <= NORMALIZATION_TOL;
        Ok(Self { coeffs, normalized })
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|z| z * s).collect())
            .expect("scaling a finite vector by a finite factor")
    }

    /// Multiplies by the global phase that makes `c_0` real and non-negative,
    /// then zeroes `Im c_0` exactly. Leaves the vector alone when `c_0 = 0`.
    pub fn gauge_fixed(&self) -> Self {
        let c0 = self.coeffs[0];
        let r = c0.norm();
        if r == 0.0 {
            return self.clone();
        }
        let phase = c0.conj() / r;
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|z| z * phase).collect();
        coeffs[0] = Complex64::new(r, 0.0);
        Self {
            coeffs,
            normalized: self.normalized,
        }
    }

    pub fn apply(&self, op: &HermitianOperator) -> Result<Self, PovmError> {
        check_dim(op.dim(), self.dim())?;
        Self::new(op.apply(&self.coeffs))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<(), PovmError> {
    if expected == found {
        Ok(())
    } else {
        Err(PovmError::DimensionMismatch { expected, found })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// `G^{-1/2} P_k G^{-1/2}` from [`build_fsc_povm`].
    #[serde(rename = "ConstructedFSC")]
    ConstructedFsc,
    /// Read from a file or supplied by the caller.
    Ingested,
    /// The raw operators `P_k` (not a POVM: they sum to `G`, not `I`).
    PreNormalized,
}

/// Ordered list of measurement operators.
///
/// Construction only checks shapes; the POVM invariants (completeness and
/// positivity) are reported by [`validate_povm`] so that invalid inputs can
/// be diagnosed rather than rejected outright.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianOperator>,
    provenance: Provenance,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>, provenance: Provenance) -> Result<Self, PovmError> {
        let dim = elements.first().ok_or(PovmError::Empty)?.dim();
        for e in &elements {
            check_dim(dim, e.dim())?;
        }
        Ok(Self {
            dim,
            elements,
            provenance,
        })
    }

    /// The measurement in the basis `{e_i}`.
    pub fn computational_basis(dim: usize) -> Self {
        let elements = (0..dim)
            .map(|i| HermitianOperator::projector(StateVector::basis(dim, i).coeffs()))
            .collect();
        Self {
            dim,
            elements,
            provenance: Provenance::Ingested,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &HermitianOperator {
        &self.elements[i]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn sum(&self) -> HermitianOperator {
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for e in &self.elements {
            acc = &acc + e.matrix();
        }
        HermitianOperator::symmetrized(acc)
    }
}

/// The pre-normalization operators `P_k` together with `G = Σ P_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    dim: usize,
    operators: Vec<HermitianOperator>,
    gram_sum: HermitianOperator,
}

impl OperatorSet {
    pub fn new(operators: Vec<HermitianOperator>) -> Result<Self, PovmError> {
        let povm = Povm::new(operators, Provenance::PreNormalized)?;
        let gram_sum = povm.sum();
        Ok(Self {
            dim: povm.dim,
            operators: povm.elements,
            gram_sum,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.operators
    }

    pub fn gram_sum(&self) -> &HermitianOperator {
        &self.gram_sum
    }

    /// The operators packaged as a (non-normalized) measurement.
    pub fn as_povm(&self) -> Povm {
        Povm {
            dim: self.dim,
            elements: self.operators.clone(),
            provenance: Provenance::PreNormalized,
        }
    }
}

/// Basis projectors, then phase operators, then the sum operator.
pub fn build_fsc_operators(d: usize) -> Result<OperatorSet, PovmError> {
    if d < 2 {
        return Err(PovmError::DimensionTooSmall(d));
    }
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut operators = Vec::with_capacity(2 * d);
    for i in 0..d {
        operators.push(HermitianOperator::projector(StateVector::basis(d, i).coeffs()));
    }
    for i in 1..d {
        let mut v = vec![zero; d];
        v[0] = one;
        v[i] = Complex64::new(0.0, 1.0);
        operators.push(HermitianOperator::projector(&v));
    }
    operators.push(HermitianOperator::projector(&vec![one; d]));
    OperatorSet::new(operators)
}

/// Everything derived from the construction at one dimension: the raw
/// operators, the normalized POVM, and both `G^{∓1/2}` for moving states
/// between the measurement frame and the operator frame.
#[derive(Debug, Clone)]
pub struct FscConstruction {
    operators: OperatorSet,
    povm: Povm,
    inv_sqrt_gram: HermitianOperator,
    sqrt_gram: HermitianOperator,
}

impl FscConstruction {
    pub fn new(d: usize) -> Result<Self, PovmError> {
        let operators = build_fsc_operators(d)?;
        let inv_sqrt_gram = psd_inv_sqrt(operators.gram_sum(), DEFAULT_SINGULAR_EPS)?;
        let sqrt_gram = psd_sqrt(operators.gram_sum(), DEFAULT_SINGULAR_EPS)?;
        let elements = operators
            .operators()
            .iter()
            .map(|p| p.congruence(&inv_sqrt_gram))
            .collect();
        let povm = Povm::new(elements, Provenance::ConstructedFsc)?;
        Ok(Self {
            operators,
            povm,
            inv_sqrt_gram,
            sqrt_gram,
        })
    }

    pub fn dim(&self) -> usize {
        self.povm.dim
    }

    pub fn operators(&self) -> &OperatorSet {
        &self.operators
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn into_povm(self) -> Povm {
        self.povm
    }

    /// `G^{-1/2}`
    pub fn inv_sqrt_gram(&self) -> &HermitianOperator {
        &self.inv_sqrt_gram
    }

    /// `G^{1/2}`
    pub fn sqrt_gram(&self) -> &HermitianOperator {
        &self.sqrt_gram
    }

    /// `G^{-1/2} ψ`: the operator-frame vector whose `P`-expectations equal
    /// the POVM probabilities of `ψ`.
    pub fn to_operator_frame(&self, psi: &StateVector) -> Result<StateVector, PovmError> {
        psi.apply(&self.inv_sqrt_gram)
    }

    /// `G^{1/2} φ`, the inverse of [`Self::to_operator_frame`].
    pub fn to_measurement_frame(&self, phi: &StateVector) -> Result<StateVector, PovmError> {
        phi.apply(&self.sqrt_gram)
    }
}

pub fn build_fsc_povm(d: usize) -> Result<Povm, PovmError> {
    Ok(FscConstruction::new(d)?.into_povm())
}

/// Outcome probabilities `<ψ|E_i|ψ>` for a normalized state, clamped to
/// `[0, 1]`.
pub fn probabilities(povm: &Povm, psi: &StateVector) -> Result<Vec<f64>, PovmError> {
    check_dim(povm.dim(), psi.dim())?;
    if !psi.is_normalized() {
        return Err(PovmError::NotNormalized {
            norm_sqr: psi.norm().powi(2),
        });
    }
    Ok(povm
        .elements()
        .iter()
        .map(|e| e.expectation(psi.coeffs()).clamp(0.0, 1.0))
        .collect())
}

/// `<ψ|P_k|ψ>` for every operator; `ψ` may be unnormalized.
pub fn expectations(ops: &OperatorSet, psi: &StateVector) -> Result<Vec<f64>, PovmError> {
    check_dim(ops.dim(), psi.dim())?;
    Ok(ops
        .operators()
        .iter()
        .map(|p| p.expectation(psi.coeffs()))
        .collect())
}

/// True when the second-largest eigenvalue is at most [`RANK_ONE_TOL`] of the
/// largest in magnitude.
pub fn is_rank_one(op: &HermitianOperator) -> Result<bool, PovmError> {
    let eig = hermitian_eig(op)?;
    let n = eig.eigenvalues.len();
    let largest = eig.eigenvalues[n - 1];
    if largest <= 0.0 {
        return Ok(false);
    }
    let second = if n > 1 {
        eig.eigenvalues[n - 2].abs().max(eig.eigenvalues[0].abs())
    } else {
        0.0
    };
    Ok(second <= RANK_ONE_TOL * largest)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// max entry-wise |Σ E_i - I|
    Completeness { magnitude: f64 },
    /// `-λ_min` of element `index`
    Positivity { index: usize, magnitude: f64 },
    /// The eigensolver gave up on element `index`.
    Eigensolver { index: usize, message: String },
}

impl Violation {
    pub fn magnitude(&self) -> f64 {
        match self {
            Violation::Completeness { magnitude } | Violation::Positivity { magnitude, .. } => *magnitude,
            Violation::Eigensolver { .. } => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Completeness { magnitude } => {
                write!(f, "elements do not sum to identity (max deviation {magnitude:e})")
            }
            Violation::Positivity { index, magnitude } => {
                write!(f, "element {index} has eigenvalue -{magnitude:e}")
            }
            Violation::Eigensolver { index, message } => write!(f, "element {index}: {message}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_povm(povm: &Povm) -> ValidationReport {
    let mut violations = Vec::new();
    let deviation = povm
        .sum()
        .matrix()
        .max_abs_diff(&ComplexMatrix::identity(povm.dim()));
    if deviation > COMPLETENESS_TOL {
        violations.push(Violation::Completeness {
            magnitude: deviation,
        });
    }
    for (index, e) in povm.elements().iter().enumerate() {
        match hermitian_eig(e) {
            Ok(eig) => {
                let smallest = eig.eigenvalues[0];
                if smallest < -POSITIVITY_TOL {
                    violations.push(Violation::Positivity {
                        index,
                        magnitude: -smallest,
                    });
                }
            }
            Err(err) => violations.push(Violation::Eigensolver {
                index,
                message: err.to_string(),
            }),
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn matrix(rows: &[&[Complex64]]) -> ComplexMatrix {
        ComplexMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn d2_operators_by_hand() {
        let ops = build_fsc_operators(2).unwrap();
        assert_eq!(ops.len(), 4);
        let phase = matrix(&[&[c(1.0, 0.0), c(0.0, -1.0)], &[c(0.0, 1.0), c(1.0, 0.0)]]);
        assert_eq!(ops.operators()[2].matrix(), &phase);
        let sum = matrix(&[&[c(1.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(1.0, 0.0)]]);
        assert_eq!(ops.operators()[3].matrix(), &sum);
        let gram = matrix(&[&[c(3.0, 0.0), c(1.0, -1.0)], &[c(1.0, 1.0), c(3.0, 0.0)]]);
        assert_eq!(ops.gram_sum().matrix(), &gram);
        for p in ops.operators() {
            assert!(is_rank_one(p).unwrap());
        }
    }

    #[test]
    fn d3_sum_operator_trace() {
        let ops = build_fsc_operators(3).unwrap();
        assert_eq!(ops.len(), 6);
        assert_eq!(ops.operators()[5].matrix().trace(), c(3.0, 0.0));
    }

    #[test]
    fn dimension_too_small() {
        assert_eq!(build_fsc_operators(1).unwrap_err(), PovmError::DimensionTooSmall(1));
        assert!(build_fsc_povm(0).is_err());
    }

    #[test]
    fn povm_d2_complete() {
        let povm = build_fsc_povm(2).unwrap();
        assert_eq!(povm.len(), 4);
        assert!(povm.sum().matrix().max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-10);
        assert_eq!(povm.provenance(), Provenance::ConstructedFsc);
    }

    #[test]
    fn povm_d5_psd_and_rank_one() {
        let povm = build_fsc_povm(5).unwrap();
        assert_eq!(povm.len(), 10);
        for e in povm.elements() {
            assert!(hermitian_eig(e).unwrap().eigenvalues[0] >= -1e-10);
            assert!(is_rank_one(e).unwrap());
        }
    }

    #[test]
    fn gram_positive_definite_up_to_16() {
        for d in 2..=16 {
            let ops = build_fsc_operators(d).unwrap();
            let eig = hermitian_eig(ops.gram_sum()).unwrap();
            assert!(eig.eigenvalues[0] > 1e-10, "d={d}");
            assert!(validate_povm(&build_fsc_povm(d).unwrap()).is_valid(), "d={d}");
        }
    }

    #[test]
    fn projective_probabilities() {
        let povm = Povm::computational_basis(2);
        assert_eq!(probabilities(&povm, &StateVector::basis(2, 0)).unwrap(), vec![1.0, 0.0]);
        let plus = StateVector::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let p = probabilities(&povm, &plus).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn probabilities_reject_bad_inputs() {
        let povm = Povm::computational_basis(2);
        assert!(matches!(
            probabilities(&povm, &StateVector::basis(3, 0)),
            Err(PovmError::DimensionMismatch { expected: 2, found: 3 })
        ));
        let unnormalized = StateVector::from_real(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            probabilities(&povm, &unnormalized),
            Err(PovmError::NotNormalized { .. })
        ));
    }

    #[test]
    fn expectations_of_e0_in_d3() {
        let ops = build_fsc_operators(3).unwrap();
        let v = expectations(&ops, &StateVector::basis(3, 0)).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn expectations_of_plus_in_d2() {
        // |c_i|^2 = 1/2; phase: c0^2 + |c1|^2 + 2 c0 Im c1 = 1; sum: |c0 + c1|^2 = 2
        let ops = build_fsc_operators(2).unwrap();
        let plus = StateVector::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let v = expectations(&ops, &plus).unwrap();
        let expected = [0.5, 0.5, 1.0, 2.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn expectations_dimension_mismatch() {
        let ops = build_fsc_operators(3).unwrap();
        assert!(expectations(&ops, &StateVector::basis(2, 0)).is_err());
    }

    #[test]
    fn validate_incomplete_povm() {
        let povm = Povm::new(
            vec![HermitianOperator::projector(StateVector::basis(2, 0).coeffs())],
            Provenance::Ingested,
        )
        .unwrap();
        let report = validate_povm(&povm);
        assert_eq!(report.violations, vec![Violation::Completeness { magnitude: 1.0 }]);
    }

    #[test]
    fn validate_negative_element() {
        // {diag(1.1, 0.5), diag(-0.1, 0.5)} sums to I but the second element is not PSD
        let povm = Povm::new(
            vec![HermitianOperator::diag(&[1.1, 0.5]), HermitianOperator::diag(&[-0.1, 0.5])],
            Provenance::Ingested,
        )
        .unwrap();
        let report = validate_povm(&povm);
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::Positivity { index, magnitude } => {
                assert_eq!(*index, 1);
                assert!((magnitude - 0.1).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gauge_fix_makes_c0_real_positive() {
        let s = StateVector::normalized(vec![c(0.0, -2.0), c(1.0, 1.0)]).unwrap();
        let g = s.gauge_fixed();
        assert_eq!(g.coeffs()[0].im, 0.0);
        assert!(g.coeffs()[0].re > 0.0);
        assert!((g.inner(&s).norm() - 1.0).abs() < 1e-14);
    }
}
