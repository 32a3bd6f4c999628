//! Recovery metrics and the computable terms of the recovery bound.

use crate::error::{dim_err, domain_err, Result};
use crate::linalg::frobenius_norm;
#[allow(unused_imports)]
use crate::math::FloatMath;
use crate::matrix::DenseMatrix;
use crate::palm::FactorPair;
use crate::sparse::{grad_u, masked_residual, SparseObservations};

/// One held-out rating `(user, item, value)` in dense zero-based indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// `‖X − Z‖_F / ‖Z‖_F`.
pub fn rse(x: &DenseMatrix, z: &DenseMatrix) -> Result<f64> {
    let zn = frobenius_norm(z);
    if zn == 0.0 {
        return Err(domain_err!("RSE against an all-zero reference"));
    }
    Ok(frobenius_norm(&x.sub(z)?) / zn)
}

/// Root mean squared error of `UVᵀ` over a test list:
/// `√(Σ (X_ij − D_ij)² / |T|)`.
pub fn rmse(fp: &FactorPair, test: &[Rating]) -> Result<f64> {
    if test.is_empty() {
        return Err(domain_err!("RMSE over an empty test set"));
    }
    let (m, n) = (fp.u.rows(), fp.v.rows());
    let mut sse = 0.0;
    for r in test {
        if r.user >= m || r.item >= n {
            return Err(dim_err!("test pair ({}, {}) outside a {}x{} model", r.user, r.item, m, n));
        }
        let e = fp.predict(r.user, r.item) - r.value;
        sse += e * e;
    }
    Ok((sse / test.len() as f64).sqrt())
}

/// Peak signal-to-noise ratio in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psnr {
    /// `10·log₁₀(maxval²/MSE)`; `+∞` for identical inputs.
    pub db: f64,
    pub identical: bool,
}

pub fn psnr(x: &DenseMatrix, z: &DenseMatrix, maxval: f64) -> Result<Psnr> {
    if x.shape() != z.shape() {
        return Err(dim_err!("PSNR of {:?} against {:?}", x.shape(), z.shape()));
    }
    let n = x.as_slice().len();
    if n == 0 {
        return Err(domain_err!("PSNR of empty images"));
    }
    let mse = x
        .as_slice()
        .iter()
        .zip(z.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64;
    if mse == 0.0 {
        return Ok(Psnr {
            db: f64::INFINITY,
            identical: true,
        });
    }
    Ok(Psnr {
        db: 10.0 * (maxval * maxval / mse).log10(),
        identical: false,
    })
}

/// Observable quantities in the recovery bound
/// `‖Z − ÛV̂ᵀ‖_F/√(mn) ≤ ‖E‖_F/√(mn) + C₁β(md·log m/|Ω|)^{1/4} + 2√d·λ/(3C₂√|Ω|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `max |D_ij|` over Ω.
    pub beta: f64,
    /// `‖P_Ω(D − ÛV̂ᵀ)V̂‖_F / ‖P_Ω(D − ÛV̂ᵀ)‖_F`.
    pub c2: f64,
    /// `2λ/(3√γ)`, `γ = ‖P_Ω(D)‖²_F`.
    pub c2_lower: f64,
    /// `(m·d·ln m / |Ω|)^{1/4}`.
    pub sample_term: f64,
    /// `2√d·λ / (3·C₂·√|Ω|)`; zero when C₂ is infinite.
    pub lambda_term: f64,
    pub c2_degenerate: bool,
}

/// `(m·d·ln m / |Ω|)^{1/4}`.
pub fn sample_term(m: usize, d: usize, omega: f64) -> f64 {
    let m = m as f64;
    (m * d as f64 * m.ln() / omega).max(0.0).powf(0.25)
}

pub fn bound_terms(obs: &SparseObservations, fp: &FactorPair, lambda: f64, d: usize) -> Result<BoundTerms> {
    if obs.is_empty() {
        return Err(domain_err!("bound terms need at least one observation"));
    }
    let beta = obs.max_abs();
    let r = masked_residual(&fp.u, &fp.v, obs)?;
    let q = grad_u(&r, &fp.v)?;
    let rn = r.frobenius_norm();
    let (c2, c2_degenerate) = if rn > 0.0 {
        (frobenius_norm(&q) / rn, false)
    } else {
        (f64::INFINITY, true)
    };
    let gamma = obs.sum_squares();
    let c2_lower = if gamma > 0.0 {
        2.0 * lambda / (3.0 * gamma.sqrt())
    } else {
        f64::INFINITY
    };
    let omega = obs.len() as f64;
    let sample_term = sample_term(obs.rows(), d, omega);
    let lambda_term = if c2.is_finite() && c2 > 0.0 {
        2.0 * (d as f64).sqrt() * lambda / (3.0 * c2 * omega.sqrt())
    } else {
        0.0
    };
    Ok(BoundTerms {
        beta,
        c2,
        c2_lower,
        sample_term,
        lambda_term,
        c2_degenerate,
    })
}

/// Metrics gathered for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub rse: f64,
    pub rmse: Option<f64>,
    pub psnr: Option<f64>,
    pub bound_terms: BoundTerms,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, seeded};
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn rse_cases() {
        let mut rng = seeded(1);
        let z = gaussian_matrix(&mut rng, 4, 3, 1.0);
        assert_eq!(rse(&z, &z).unwrap(), 0.0);
        assert!((rse(&z.scale(2.0), &z).unwrap() - 1.0).abs() < 1e-15);
        assert!((rse(&DenseMatrix::zeros(4, 3), &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(rse(&z, &DenseMatrix::zeros(4, 3)).is_err());
        let x = gaussian_matrix(&mut rng, 4, 3, 1.0);
        for a in [-3.0, 0.25, 1e3] {
            assert!((rse(&x.scale(a), &z.scale(a)).unwrap() - rse(&x, &z).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rmse_cases() {
        let u = DenseMatrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        let v = DenseMatrix::new(3, 1, vec![1.0, 0.5, -1.0]).unwrap();
        let fp = FactorPair::new(u, v).unwrap();
        let perfect: Vec<Rating> = (0..2)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| Rating { user: i, item: j, value: fp.predict(i, j) })
            .collect();
        assert_eq!(rmse(&fp, &perfect).unwrap(), 0.0);
        let off = [Rating { user: 1, item: 0, value: 0.0 }];
        assert!((rmse(&fp, &off).unwrap() - 2.0).abs() < 1e-15);
        // Predictions: (0,0)=1, (0,1)=0.5, (0,2)=-1, (1,1)=1, (1,2)=-2.
        let fixture = [
            Rating { user: 0, item: 0, value: 2.0 },
            Rating { user: 0, item: 1, value: 0.5 },
            Rating { user: 0, item: 2, value: 1.0 },
            Rating { user: 1, item: 1, value: 4.0 },
            Rating { user: 1, item: 2, value: -1.0 },
        ];
        // Errors: -1, 0, -2, -3, -1 → SSE 15, MSE 3.
        assert!((rmse(&fp, &fixture).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        let mut rev = fixture;
        rev.reverse();
        assert!((rmse(&fp, &rev).unwrap() - rmse(&fp, &fixture).unwrap()).abs() < 1e-15);
        assert!(rmse(&fp, &[]).is_err());
    }

    #[test]
    fn psnr_cases() {
        let z = DenseMatrix::from_fn(8, 8, |i, j| ((i * 8 + j) * 3 % 200) as f64);
        let p16 = psnr(&z.map(|x| x + 16.0), &z, 255.0).unwrap();
        assert!((p16.db - 10.0 * (255.0f64 * 255.0 / 256.0).log10()).abs() < 1e-12);
        assert!((p16.db - 24.0484).abs() < 1e-4);
        let p1 = psnr(&z.map(|x| x + 1.0), &z, 255.0).unwrap();
        assert!((p1.db - 48.1308).abs() < 1e-4);
        let same = psnr(&z, &z, 255.0).unwrap();
        assert!(same.identical && same.db.is_infinite());
        // Fixture: two of four pixels off by 10 and 20 → MSE = 125.
        let a = DenseMatrix::new(2, 2, vec![0.0, 10.0, 100.0, 255.0]).unwrap();
        let b = DenseMatrix::new(2, 2, vec![10.0, 10.0, 80.0, 255.0]).unwrap();
        let expect = 10.0 * (65025.0f64 / 125.0).log10();
        assert!((psnr(&a, &b, 255.0).unwrap().db - expect).abs() < 1e-9);
        assert!(psnr(&a, &DenseMatrix::zeros(1, 4), 255.0).is_err());
    }

    #[test]
    fn bound_term_cases() {
        let obs = SparseObservations::new(4, 4, (0..4).map(|i| (i, (i + 1) % 4, 3.0)).collect()).unwrap();
        let fp = FactorPair::zeros(4, 4, 1);
        let t = bound_terms(&obs, &fp, 1.0, 1).unwrap();
        assert_eq!(t.beta, 3.0);
        // Zero factors: Q = 0 so C₂ = 0 with a finite residual.
        assert_eq!(t.c2, 0.0);
        assert!(!t.c2_degenerate);

        for (m, d) in [(100usize, 6usize), (6040, 10), (3, 1)] {
            let omega = m as f64 * d as f64 * (m as f64).ln();
            assert!((sample_term(m, d, omega) - 1.0).abs() < 1e-15);
        }
        let m = 3.0f64;
        let obs = SparseObservations::new(3, 3, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        let t = bound_terms(&obs, &FactorPair::zeros(3, 3, 1), 1.0, 1).unwrap();
        assert!((t.sample_term - (m * m.ln() / 3.0).powf(0.25)).abs() < 1e-15);
        assert!((t.sample_term - m.ln().powf(0.25)).abs() < 1e-15);

        let all: Vec<_> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j, 1.0))).collect();
        let obs = SparseObservations::new(3, 3, all).unwrap();
        let exact = FactorPair::new(DenseMatrix::from_fn(3, 1, |_, _| 1.0), DenseMatrix::from_fn(3, 1, |_, _| 1.0)).unwrap();
        let t = bound_terms(&obs, &exact, 1.0, 1).unwrap();
        assert!(t.c2_degenerate && t.c2.is_infinite());
    }
}
