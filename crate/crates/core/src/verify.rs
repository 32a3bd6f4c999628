//! Randomized numerical checks of the quasi-norm identities.
//!
//! Each property draws seeded random instances and records the worst
//! violation, normalized so that `0` means the identity holds exactly and a
//! positive value is the relative amount by which it fails.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{domain_err, Result};
use crate::linalg::{frobenius_norm, householder_qr, nuclear_norm, thin_svd};
#[allow(unused_imports)]
use crate::math::FloatMath;
use crate::matrix::DenseMatrix;
use crate::quasinorm::{
    bin_quasi_norm, factor_surrogate_value, fn_quasi_norm, optimal_factor_pair, quasi_norm, trace_power, Regularizer,
    RANK_TOL,
};
use crate::rng::{derive_seed, gaussian_matrix, keys, seeded, SolverRng};

/// Corpus shape: `ROWS × COLS` matrices of rank `1..=MAX_RANK`.
pub const ROWS: usize = 30;
pub const COLS: usize = 20;
pub const MAX_RANK: usize = 8;
/// Largest condition number of the mixing matrices in the lower-bound check.
pub const MAX_CONDITION: f64 = 100.0;

pub const ATTAINMENT_TOL: f64 = 1e-8;
pub const LOWER_BOUND_TOL: f64 = 1e-10;
pub const SANDWICH_TOL: f64 = 1e-9;
pub const BILINEAR_TOL: f64 = 1e-9;
pub const TRACE_POWER_TOL: f64 = 1e-10;
pub const HOMOGENEITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    /// Random feasible factorizations drawn per matrix for the lower bound.
    pub factorizations: usize,
    /// Replaces every tolerance; used to exercise the failure path.
    pub tolerance_override: Option<f64>,
}

impl VerifyConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        VerifyConfig {
            trials,
            seed,
            factorizations: 100,
            tolerance_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub trials: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

struct Tracker {
    name: &'static str,
    trials: usize,
    worst: f64,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Tracker { name, trials: 0, worst: 0.0 }
    }

    fn record(&mut self, violation: f64) {
        self.trials += 1;
        // NaN must register as a failure.
        if violation.is_nan() {
            self.worst = f64::INFINITY;
        } else if violation > self.worst {
            self.worst = violation;
        }
    }

    fn finish(self, tolerance: f64, overridden: Option<f64>) -> PropertyResult {
        let tolerance = overridden.unwrap_or(tolerance);
        PropertyResult {
            name: self.name,
            trials: self.trials,
            max_violation: self.worst,
            tolerance,
            passed: self.worst <= tolerance,
        }
    }
}

/// `max(0, lhs − rhs) / scale`.
fn excess(lhs: f64, rhs: f64, scale: f64) -> f64 {
    (lhs - rhs).max(0.0) / scale
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Seeded `rows × cols` matrix of exact rank `r` (product of Gaussians).
pub fn random_low_rank(rng: &mut SolverRng, rows: usize, cols: usize, r: usize) -> Result<DenseMatrix> {
    let a = gaussian_matrix(rng, rows, r, 1.0);
    let b = gaussian_matrix(rng, cols, r, 1.0);
    a.matmul_t(&b)
}

/// Haar-like random orthogonal matrix: `Q` from the QR of a Gaussian matrix
/// with column signs fixed by `diag(R) > 0`.
pub fn random_orthogonal(rng: &mut SolverRng, n: usize) -> Result<DenseMatrix> {
    let (q, r) = householder_qr(&gaussian_matrix(rng, n, n, 1.0))?;
    let signs: Vec<f64> = (0..n).map(|i| if r[(i, i)] < 0.0 { -1.0 } else { 1.0 }).collect();
    q.scale_columns(&signs)
}

/// Random invertible `G` together with `G⁻ᵀ`, built as `Q₁ S Q₂ᵀ` with
/// singular values log-uniform in `[1, MAX_CONDITION]`.
fn random_mixing(rng: &mut SolverRng, d: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let q1 = random_orthogonal(rng, d)?;
    let q2 = random_orthogonal(rng, d)?;
    let s: Vec<f64> = (0..d).map(|_| MAX_CONDITION.powf(rng.random::<f64>())).collect();
    let inv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
    let g = q1.scale_columns(&s)?.matmul_t(&q2)?;
    let g_inv_t = q1.scale_columns(&inv)?.matmul_t(&q2)?;
    Ok((g, g_inv_t))
}

fn trial_rng(seed: u64, trial: usize) -> SolverRng {
    seeded(derive_seed(derive_seed(seed, keys::VERIFY), trial as u64))
}

/// Runs every property over `config.trials` seeded instances.
pub fn run_property_suite(config: &VerifyConfig) -> Result<Vec<PropertyResult>> {
    if config.trials == 0 {
        return Err(domain_err!("the property suite needs at least one trial"));
    }
    let mut attain_fn = Tracker::new("attainment_fn");
    let mut attain_bin = Tracker::new("attainment_bin");
    let mut lower_fn = Tracker::new("lower_bound_fn");
    let mut lower_bin = Tracker::new("lower_bound_bin");
    let mut sandwich = Tracker::new("sandwich");
    let mut frob_nuc = Tracker::new("frobenius_nuclear_sandwich");
    let mut bilinear = Tracker::new("nuclear_bilinear_minimum");
    let mut tp_half = Tracker::new("trace_power_p1_2");
    let mut tp_two_thirds = Tracker::new("trace_power_p2_3");
    let mut homogeneity = Tracker::new("homogeneity");

    for t in 0..config.trials {
        let mut rng = trial_rng(config.seed, t);
        let r = rng.random_range(1..=MAX_RANK);
        let x = random_low_rank(&mut rng, ROWS, COLS, r)?;
        let nuc = nuclear_norm(&x)?;
        let fnq = fn_quasi_norm(&x)?;
        let binq = bin_quasi_norm(&x)?;
        let rank = thin_svd(&x)?.rank(RANK_TOL);
        let rf = rank as f64;

        for (reg, q, attain, lower) in [
            (Regularizer::FrobeniusNuclear, fnq, &mut attain_fn, &mut lower_fn),
            (Regularizer::BiNuclear, binq, &mut attain_bin, &mut lower_bin),
        ] {
            // Pad a little beyond the rank so zero columns are exercised.
            let d = rank + rng.random_range(0..=2);
            let opt = optimal_factor_pair(&x, reg, d)?;
            attain.record(rel_diff(factor_surrogate_value(&opt.u, &opt.v, reg)?, q));
            for _ in 0..config.factorizations {
                let (g, g_inv_t) = random_mixing(&mut rng, d)?;
                let u = opt.u.matmul(&g)?;
                let v = opt.v.matmul(&g_inv_t)?;
                lower.record(excess(q, factor_surrogate_value(&u, &v, reg)?, q));
            }
        }

        let s = [
            excess(nuc, fnq, nuc),
            excess(fnq, binq, nuc),
            excess(binq, rf * nuc, nuc),
            excess(fnq, rf.sqrt() * nuc, nuc),
        ];
        sandwich.record(s.iter().copied().fold(0.0, f64::max));
        let fro = frobenius_norm(&x);
        frob_nuc.record(excess(fro, nuc, nuc).max(excess(nuc, rf.sqrt() * fro, nuc)));

        let balanced = optimal_factor_pair(&x, Regularizer::BiNuclear, rank)?;
        bilinear.record(rel_diff(frobenius_norm(&balanced.u) * frobenius_norm(&balanced.v), nuc));

        let n = rng.random_range(2..=MAX_RANK);
        let a = random_orthogonal(&mut rng, n)?;
        let diag: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { 10.0 * rng.random::<f64>() })
            .collect();
        let sigma = DenseMatrix::from_diag(&diag);
        let b = a.matmul(&sigma)?.matmul_t(&a)?;
        for (p, tracker) in [(0.5, &mut tp_half), (2.0 / 3.0, &mut tp_two_thirds)] {
            let base = trace_power(&sigma, p)?;
            tracker.record(excess(base, trace_power(&b, p)?, base.max(1.0)));
        }

        for a in [-2.0, 0.5] {
            let ax = x.scale(a);
            let h_fn = rel_diff(quasi_norm(&ax, Regularizer::FrobeniusNuclear)?, libm::fabs(a) * fnq);
            let h_bin = rel_diff(quasi_norm(&ax, Regularizer::BiNuclear)?, libm::fabs(a) * binq);
            homogeneity.record(h_fn.max(h_bin));
        }
    }

    let o = config.tolerance_override;
    Ok(alloc::vec![
        attain_fn.finish(ATTAINMENT_TOL, o),
        attain_bin.finish(ATTAINMENT_TOL, o),
        lower_fn.finish(LOWER_BOUND_TOL, o),
        lower_bin.finish(LOWER_BOUND_TOL, o),
        sandwich.finish(SANDWICH_TOL, o),
        frob_nuc.finish(SANDWICH_TOL, o),
        bilinear.finish(BILINEAR_TOL, o),
        tp_half.finish(TRACE_POWER_TOL, o),
        tp_two_thirds.finish(TRACE_POWER_TOL, o),
        homogeneity.finish(HOMOGENEITY_TOL, o),
    ])
}
