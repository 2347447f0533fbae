//! Vector norms, the four matrix norms used by the bounds, and executable
//! compatibility checks `‖Ax‖_q ≤ ‖|A|‖_q ‖x‖_q`.
//!
//! Matrix norm names follow what they compute rather than subscripts:
//!
//! ```text
//! ColSum:    ‖|A|‖_1 = max_j Σ_i |a_ij|
//! Frobenius: ‖|A|‖_2 = sqrt(Σ_ij a_ij²)
//! RowSum:    ‖|A|‖_∞ = max_i Σ_j |a_ij|
//! MaxAbs:    ‖A‖_∞   = max_ij |a_ij|      (entrywise, not RowSum)
//! ```
//!
//! Frobenius is exposed as a plain functional; no submultiplicativity is
//! claimed for it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};

/// Relative and absolute slack used by [`check_compatibility`].
pub const COMPAT_REL_TOL: f64 = 1e-12;
pub const COMPAT_ABS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VectorNorm {
    L1,
    L2,
    LInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixNorm {
    ColSum,
    Frobenius,
    RowSum,
    MaxAbs,
}

impl VectorNorm {
    pub const ALL: [VectorNorm; 3] = [VectorNorm::L1, VectorNorm::L2, VectorNorm::LInf];

    /// The matrix norm paired with this vector norm in `‖Ax‖_q ≤ ‖|A|‖_q ‖x‖_q`.
    pub fn compatible_matrix_norm(self) -> MatrixNorm {
        match self {
            VectorNorm::L1 => MatrixNorm::ColSum,
            VectorNorm::L2 => MatrixNorm::Frobenius,
            VectorNorm::LInf => MatrixNorm::RowSum,
        }
    }
}

impl fmt::Display for VectorNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VectorNorm::L1 => "1",
            VectorNorm::L2 => "2",
            VectorNorm::LInf => "inf",
        })
    }
}

impl FromStr for VectorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(VectorNorm::L1),
            "2" | "l2" => Ok(VectorNorm::L2),
            "inf" | "linf" | "max" => Ok(VectorNorm::LInf),
            other => Err(Error::Parse(format!("unknown norm `{other}` (expected 1, 2 or inf)"))),
        }
    }
}

pub fn vec_norm(v: &DVector<f64>, kind: VectorNorm) -> Result<f64> {
    ensure_dims(!v.is_empty(), || "vector norm of an empty vector".into())?;
    Ok(match kind {
        VectorNorm::L1 => v.iter().map(|x| x.abs()).sum(),
        VectorNorm::L2 => v.norm(),
        VectorNorm::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    })
}

pub fn mat_norm(a: &DMatrix<f64>, kind: MatrixNorm) -> Result<f64> {
    ensure_dims(!a.is_empty(), || "matrix norm of an empty matrix".into())?;
    Ok(match kind {
        MatrixNorm::Frobenius => a.norm(),
        MatrixNorm::ColSum => a
            .column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        MatrixNorm::RowSum => a
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        MatrixNorm::MaxAbs => a.iter().fold(0.0, |m, x| m.max(x.abs())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub norm: VectorNorm,
    /// `‖Ax‖_q`
    pub lhs: f64,
    /// `‖|A|‖_q ‖x‖_q`
    pub rhs: f64,
    pub holds: bool,
}

/// `a ≤ b` up to the mixed relative/absolute slack used throughout the crate.
pub fn le_with_slack(a: f64, b: f64) -> bool {
    a <= b * (1.0 + COMPAT_REL_TOL) + COMPAT_ABS_TOL
}

pub fn check_compatibility(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    q: VectorNorm,
) -> Result<CompatibilityReport> {
    ensure_dims(a.ncols() == x.len(), || {
        format!("matrix has {} columns but vector has length {}", a.ncols(), x.len())
    })?;
    let lhs = vec_norm(&(a * x), q)?;
    let rhs = mat_norm(a, q.compatible_matrix_norm())? * vec_norm(x, q)?;
    Ok(CompatibilityReport {
        norm: q,
        lhs,
        rhs,
        holds: le_with_slack(lhs, rhs),
    })
}

/// `‖|A|‖_2 ≤ p · MaxAbs(A)` for a symmetric `p × p` matrix. Returns
/// `(frobenius, p * max_abs, holds)`.
pub fn check_symmetric_frobenius_bound(a: &DMatrix<f64>) -> Result<(f64, f64, bool)> {
    ensure_dims(a.is_square(), || format!("expected square matrix, got {}x{}", a.nrows(), a.ncols()))?;
    let fro = mat_norm(a, MatrixNorm::Frobenius)?;
    let rhs = a.nrows() as f64 * mat_norm(a, MatrixNorm::MaxAbs)?;
    Ok((fro, rhs, le_with_slack(fro, rhs)))
}
