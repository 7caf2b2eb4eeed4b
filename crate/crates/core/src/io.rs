//! JSON file formats.
//!
//! Complex numbers are two-element arrays `[re, im]`. Floats are written in
//! shortest round-trip form, so every file re-parses to bit-identical values.
//!
//! * POVM / operator set: `{"dim", "provenance", "elements": [matrix, ...]}`,
//!   each matrix an array of rows.
//! * State: `{"dim", "coeffs": [[re, im], ...], "normalized"}`.
//! * Probabilities `{"probs": [...]}`, counts `{"counts": [...], "shots"}`,
//!   operator-frame expectation values `{"values": [...]}`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, HermitianOperator};
use crate::povm::{Povm, Provenance, StateVector, NORMALIZATION_TOL};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub dim: usize,
    pub coeffs: Vec<Complex64>,
    pub normalized: bool,
}

impl From<StateVector> for StateFile {
    fn from(s: StateVector) -> Self {
        Self {
            dim: s.dim(),
            normalized: s.is_normalized(),
            coeffs: s.into_coeffs(),
        }
    }
}

impl TryFrom<StateFile> for StateVector {
    type Error = String;

    fn try_from(f: StateFile) -> Result<Self, String> {
        if f.dim != f.coeffs.len() {
            return Err(format!("state dim {} but {} coefficients", f.dim, f.coeffs.len()));
        }
        let s = StateVector::new(f.coeffs).map_err(|e| e.to_string())?;
        if f.normalized && !s.is_normalized() {
            return Err(format!(
                "state is marked normalized but has squared norm {} (tolerance {NORMALIZATION_TOL:e})",
                s.norm().powi(2)
            ));
        }
        Ok(s)
    }
}

pub type MatrixFile = Vec<Vec<Complex64>>;

impl From<HermitianOperator> for MatrixFile {
    fn from(op: HermitianOperator) -> Self {
        op.matrix().to_rows()
    }
}

impl TryFrom<MatrixFile> for HermitianOperator {
    type Error = String;

    fn try_from(rows: MatrixFile) -> Result<Self, String> {
        let m = ComplexMatrix::from_rows(&rows).map_err(|e| e.to_string())?;
        HermitianOperator::new(m).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmFile {
    pub dim: usize,
    pub provenance: Provenance,
    pub elements: Vec<MatrixFile>,
}

impl From<Povm> for PovmFile {
    fn from(p: Povm) -> Self {
        Self {
            dim: p.dim(),
            provenance: p.provenance(),
            elements: p.elements().iter().cloned().map(MatrixFile::from).collect(),
        }
    }
}

impl TryFrom<PovmFile> for Povm {
    type Error = String;

    fn try_from(f: PovmFile) -> Result<Self, String> {
        let elements = f
            .elements
            .into_iter()
            .enumerate()
            .map(|(i, m)| HermitianOperator::try_from(m).map_err(|e| format!("element {i}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let povm = Povm::new(elements, f.provenance).map_err(|e| e.to_string())?;
        if povm.dim() != f.dim {
            return Err(format!("declared dim {} but elements are {}x{}", f.dim, povm.dim(), povm.dim()));
        }
        Ok(povm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbsFile {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsFile {
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl CountsFile {
    /// Frequencies `counts / shots`, after checking the counts add up.
    pub fn frequencies(&self) -> Result<Vec<f64>, String> {
        let total: u64 = self.counts.iter().sum();
        if self.shots == 0 || total != self.shots {
            return Err(format!("counts sum to {total} but shots = {}", self.shots));
        }
        Ok(self.counts.iter().map(|&c| c as f64 / self.shots as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationsFile {
    pub values: Vec<f64>,
}

/// Serde adapter for fields holding a [`StateVector`].
pub mod state_serde {
    use super::StateFile;
    use crate::povm::StateVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: &StateVector, ser: S) -> Result<S::Ok, S::Error> {
        StateFile::from(s.clone()).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<StateVector, D::Error> {
        StateVector::try_from(StateFile::deserialize(de)?).map_err(serde::de::Error::custom)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("in-memory values serialize")
}

pub fn from_json_str<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|source| FormatError::Json {
        path: origin.to_string(),
        source,
    })
}

/// Reads JSON from `path`, or standard input when `path` is `-`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let origin = path.display().to_string();
    let io_err = |source| FormatError::Io {
        path: origin.clone(),
        source,
    };
    let text = if origin == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf).map_err(io_err)?;
        buf
    } else {
        fs::read_to_string(path).map_err(io_err)?
    };
    from_json_str(&text, &origin)
}

/// Writes pretty JSON to `path`, or standard output when `path` is `-`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let origin = path.display().to_string();
    let mut text = to_json_string(value);
    text.push('\n');
    let result = if origin == "-" {
        std::io::stdout().write_all(text.as_bytes())
    } else {
        fs::write(path, text)
    };
    result.map_err(|source| FormatError::Io { path: origin, source })
}

pub fn read_state(path: &Path) -> Result<StateVector, FormatError> {
    let file: StateFile = read_json(path)?;
    StateVector::try_from(file).map_err(|msg| invalid(path, msg))
}

pub fn read_povm(path: &Path) -> Result<Povm, FormatError> {
    let file: PovmFile = read_json(path)?;
    Povm::try_from(file).map_err(|msg| invalid(path, msg))
}

fn invalid(path: &Path, msg: String) -> FormatError {
    FormatError::Json {
        path: path.display().to_string(),
        source: <serde_json::Error as serde::de::Error>::custom(msg),
    }
}
