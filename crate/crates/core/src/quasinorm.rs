//! Schatten quasi-norms and their bilinear factor surrogates.
//!
//! For `X = UVᵀ` the Frobenius/nuclear hybrid quasi-norm
//! `min ‖U‖_*‖V‖_F` equals `‖X‖_{S_{2/3}}`, and the bi-nuclear quasi-norm
//! `min ‖U‖_*‖V‖_*` equals `‖X‖_{S_{1/2}}`. Both minima are attained by
//! splitting the singular values of `X` between the two factors; see
//! [`optimal_factor_pair`].

use alloc::vec::Vec;

use crate::error::{dim_err, domain_err, Result};
use crate::linalg::{frobenius_norm, nuclear_norm, thin_svd};
#[allow(unused_imports)]
use crate::math::FloatMath;
use crate::matrix::DenseMatrix;
use crate::palm::FactorPair;

/// Singular values at or below `RANK_TOL · σ₁` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Which factored quasi-norm regularizes the completion objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularizer {
    /// Frobenius/nuclear hybrid: `(2‖U‖_* + ‖V‖²_F)/3`, Schatten-2/3.
    FrobeniusNuclear,
    /// Bi-nuclear: `(‖U‖_* + ‖V‖_*)/2`, Schatten-1/2.
    BiNuclear,
}

impl Regularizer {
    /// Schatten exponent represented by the regularizer.
    pub fn p(self) -> f64 {
        match self {
            Regularizer::FrobeniusNuclear => 2.0 / 3.0,
            Regularizer::BiNuclear => 0.5,
        }
    }

    /// Weight of `‖U‖_*` in the objective per unit `λ`; this is also the
    /// bound on `‖P_Ω(D − UVᵀ)V‖₂` at a critical point.
    pub fn u_weight(self) -> f64 {
        match self {
            Regularizer::FrobeniusNuclear => 2.0 / 3.0,
            Regularizer::BiNuclear => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regularizer::FrobeniusNuclear => "fn",
            Regularizer::BiNuclear => "bin",
        }
    }

    /// Regularization term `φ(U, V)` (without `λ`).
    pub fn penalty(self, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
        Ok(match self {
            Regularizer::FrobeniusNuclear => {
                let vf = frobenius_norm(v);
                (2.0 * nuclear_norm(u)? + vf * vf) / 3.0
            }
            Regularizer::BiNuclear => (nuclear_norm(u)? + nuclear_norm(v)?) / 2.0,
        })
    }
}

impl core::str::FromStr for Regularizer {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fn" | "f/n" | "frobenius-nuclear" => Ok(Regularizer::FrobeniusNuclear),
            "bin" | "bi-nuclear" | "binuclear" => Ok(Regularizer::BiNuclear),
            other => Err(domain_err!("unknown regularizer {:?} (expected fn or bin)", other)),
        }
    }
}

/// Singular values above the numerical-rank cutoff.
fn significant_singular_values(x: &DenseMatrix) -> Result<Vec<f64>> {
    if x.is_zero() {
        return Ok(Vec::new());
    }
    let s = thin_svd(x)?.singular_values;
    let cutoff = RANK_TOL * s[0];
    Ok(s.into_iter().filter(|&v| v > cutoff).collect())
}

/// `(Σ σᵢᵖ)^{1/p}` over the singular values above the rank cutoff.
pub fn schatten_quasi_norm(x: &DenseMatrix, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(domain_err!("Schatten exponent must be positive and finite, got {}", p));
    }
    let s = significant_singular_values(x)?;
    if s.is_empty() {
        return Ok(0.0);
    }
    // Factor out σ₁ so that large p cannot overflow.
    let s1 = s[0];
    let sum: f64 = s.iter().map(|&v| (v / s1).powf(p)).sum();
    Ok(s1 * sum.powf(1.0 / p))
}

/// Frobenius/nuclear hybrid quasi-norm, i.e. `‖X‖_{S_{2/3}}`.
pub fn fn_quasi_norm(x: &DenseMatrix) -> Result<f64> {
    schatten_quasi_norm(x, 2.0 / 3.0)
}

/// Bi-nuclear quasi-norm, i.e. `‖X‖_{S_{1/2}}`.
pub fn bin_quasi_norm(x: &DenseMatrix) -> Result<f64> {
    schatten_quasi_norm(x, 0.5)
}

pub fn quasi_norm(x: &DenseMatrix, reg: Regularizer) -> Result<f64> {
    schatten_quasi_norm(x, reg.p())
}

/// Factorization attaining the surrogate minimum: with `X = L Σ Rᵀ`,
/// F/N takes `U = L Σ^{2/3}, V = R Σ^{1/3}` and BiN takes
/// `U = L Σ^{1/2}, V = R Σ^{1/2}`. Columns beyond `rank(X)` are zero.
pub fn optimal_factor_pair(x: &DenseMatrix, reg: Regularizer, d: usize) -> Result<FactorPair> {
    let (m, n) = x.shape();
    if x.is_zero() {
        if d == 0 {
            return Err(dim_err!("rank bound d must be at least 1"));
        }
        return FactorPair::new(DenseMatrix::zeros(m, d), DenseMatrix::zeros(n, d));
    }
    let svd = thin_svd(x)?;
    let rank = svd.rank(RANK_TOL);
    if d < rank {
        return Err(dim_err!("rank bound d = {} is below rank(X) = {}", d, rank));
    }
    let (pu, pv) = match reg {
        Regularizer::FrobeniusNuclear => (2.0 / 3.0, 1.0 / 3.0),
        Regularizer::BiNuclear => (0.5, 0.5),
    };
    let su: Vec<f64> = svd.singular_values[..rank].iter().map(|s| s.powf(pu)).collect();
    let sv: Vec<f64> = svd.singular_values[..rank].iter().map(|s| s.powf(pv)).collect();
    let u = svd.left.resize_columns(rank).scale_columns(&su)?.resize_columns(d);
    let v = svd.right.resize_columns(rank).scale_columns(&sv)?.resize_columns(d);
    FactorPair::new(u, v)
}

/// Surrogate upper bound on the quasi-norm of `uvᵀ`:
/// F/N gives `((2‖u‖_* + ‖v‖²_F)/3)^{3/2}`, BiN gives `((‖u‖_* + ‖v‖_*)/2)²`.
pub fn factor_surrogate_value(u: &DenseMatrix, v: &DenseMatrix, reg: Regularizer) -> Result<f64> {
    if u.cols() != v.cols() {
        return Err(dim_err!(
            "factor inner dimensions differ: u has {} columns, v has {}",
            u.cols(),
            v.cols()
        ));
    }
    let phi = reg.penalty(u, v)?;
    Ok(match reg {
        Regularizer::FrobeniusNuclear => phi.powf(1.5),
        Regularizer::BiNuclear => phi * phi,
    })
}

/// `Σᵢ bᵢᵢᵖ` for a square matrix with (numerically) non-negative diagonal.
pub fn trace_power(b: &DenseMatrix, p: f64) -> Result<f64> {
    if b.rows() != b.cols() {
        return Err(dim_err!("trace_power needs a square matrix, got {}x{}", b.rows(), b.cols()));
    }
    let mut total = 0.0;
    for i in 0..b.rows() {
        let d = b[(i, i)];
        if d < -1e-12 {
            return Err(domain_err!("diagonal entry {} = {} is negative", i, d));
        }
        total += d.max(0.0).powf(p);
    }
    Ok(total)
}
