//! Proximal alternating linearized minimization for
//!
//! ```text
//! F/N:  min λ(2‖U‖_* + ‖V‖²_F)/3 + ½‖P_Ω(UVᵀ) − P_Ω(D)‖²_F
//! BiN:  min λ(‖U‖_* + ‖V‖_*)/2   + ½‖P_Ω(UVᵀ) − P_Ω(D)‖²_F
//! ```
//!
//! Each iteration linearizes the smooth loss in one block, adds a proximal
//! term weighted by the block Lipschitz constant (`‖V‖²₂` for the `U` step,
//! `‖U_{k+1}‖²₂` for the `V` step) and solves the resulting subproblem in
//! closed form: singular value shrinkage for nuclear-norm blocks, a scalar
//! shrink for the squared Frobenius block.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{dim_err, domain_err, Error, Result};
use crate::linalg::{frobenius_norm, householder_qr, nuclear_norm, spectral_norm, thin_svd};
#[allow(unused_imports)]
use crate::math::FloatMath;
use crate::matrix::DenseMatrix;
use crate::quasinorm::Regularizer;
use crate::rng::{derive_seed, gaussian_matrix, keys, seeded};
use crate::sparse::{grad_u, grad_v, masked_residual, SparseObservations};

/// Substitute for a zero Lipschitz constant (all-zero factor).
pub const LIPSCHITZ_FLOOR: f64 = 1e-12;
pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_ITERS: usize = 1000;
/// Orthogonal-iteration rounds used by the spectral initializer.
pub const SPECTRAL_INIT_ROUNDS: usize = 20;
const SPECTRAL_INIT_OVERSAMPLE: usize = 5;

/// The iterate `(U, V)` with `U ∈ ℝ^{m×d}`, `V ∈ ℝ^{n×d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl FactorPair {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(dim_err!("U has {} columns but V has {}", u.cols(), v.cols()));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(m: usize, n: usize, d: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(m, d),
            v: DenseMatrix::zeros(n, d),
        }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.u.cols()
    }

    /// Dense `UVᵀ`.
    pub fn product(&self) -> DenseMatrix {
        self.u.matmul_t(&self.v).expect("factor pair has matching inner dimension")
    }

    /// Entry `(UVᵀ)_{ij}` without forming the product.
    pub fn predict(&self, i: usize, j: usize) -> f64 {
        crate::matrix::dot(self.u.row(i), self.v.row(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// `U₀ = LΣ^{1/2}`, `V₀ = RΣ^{1/2}` from the rank-`d` truncated SVD of
    /// `(mn/|Ω|)·P_Ω(D)`.
    SpectralScaled,
    /// I.i.d. Gaussian entries with standard deviation `1/√d`.
    GaussianScaled,
}

impl InitPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            InitPolicy::SpectralScaled => "spectral",
            InitPolicy::GaussianScaled => "gaussian",
        }
    }
}

impl core::str::FromStr for InitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spectral" => Ok(InitPolicy::SpectralScaled),
            "gaussian" => Ok(InitPolicy::GaussianScaled),
            other => Err(domain_err!("unknown init policy {:?} (expected spectral or gaussian)", other)),
        }
    }
}

/// How `max{‖U_{k+1} − U_k‖_F, ‖V_{k+1} − V_k‖_F}` is compared with `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Absolute Frobenius differences.
    Absolute,
    /// Each difference divided by `max(1, ‖previous iterate‖_F)`.
    Relative,
}

impl StopRule {
    pub fn as_str(self) -> &'static str {
        match self {
            StopRule::Absolute => "absolute",
            StopRule::Relative => "relative",
        }
    }
}

impl core::str::FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "absolute" => Ok(StopRule::Absolute),
            "relative" => Ok(StopRule::Relative),
            other => Err(domain_err!("unknown stop rule {:?} (expected absolute or relative)", other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub reg: Regularizer,
    pub lambda: f64,
    pub d: usize,
    pub epsilon: f64,
    pub max_iters: usize,
    pub init: InitPolicy,
    pub seed: u64,
    pub stop_rule: StopRule,
}

impl SolverConfig {
    /// A configuration with `ε = 1e-4`, 1000 iterations, spectral start.
    pub fn new(reg: Regularizer, lambda: f64, d: usize) -> Self {
        Self {
            reg,
            lambda,
            d,
            epsilon: DEFAULT_EPSILON,
            max_iters: DEFAULT_MAX_ITERS,
            init: InitPolicy::SpectralScaled,
            seed: 0,
            stop_rule: StopRule::Absolute,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_init(mut self, init: InitPolicy) -> Self {
        self.init = init;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(domain_err!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(domain_err!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.d == 0 {
            return Err(domain_err!("rank bound d must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(domain_err!("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// First-order diagnostics at a claimed critical point.
///
/// `Q = P_Ω(D − UVᵀ)V` must lie in `w·λ·∂‖U‖_*` where `w` is the
/// regularizer's `U` weight, i.e. `‖Q‖₂ ≤ wλ` and `⟨Q, U⟩ = wλ‖U‖_*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimality {
    pub q_spectral: f64,
    /// `|⟨Q, U⟩ − wλ‖U‖_*|`.
    pub duality_gap: f64,
    /// `duality_gap / (wλ‖U‖_*)`, or the raw gap when `‖U‖_* = 0`.
    pub duality_gap_rel: f64,
    /// `‖Q‖_F / ‖P_Ω(D − UVᵀ)‖_F`; `+∞` when the residual vanishes.
    pub c2: f64,
    /// `wλ / √γ` with `γ = ‖P_Ω(D)‖²_F`.
    pub c2_lower: f64,
    pub c2_degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub factors: FactorPair,
    /// Objective at the start point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    /// `(l_g, l_h)` used by each iteration.
    pub lipschitz_trace: Vec<(f64, f64)>,
    /// `max{‖ΔU‖, ‖ΔV‖}` per iteration, measured under the configured rule.
    pub change_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub optimality: Optimality,
}

/// A numerical failure part-way through [`solve`], with the trace so far.
#[derive(Debug, Clone)]
pub struct SolveError {
    pub error: Error,
    pub objective_trace: Vec<f64>,
    pub lipschitz_trace: Vec<(f64, f64)>,
    pub iterations: usize,
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "solver failed after {} iterations: {}", self.iterations, self.error)
    }
}

impl core::error::Error for SolveError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Singular value shrinkage `L·max(Σ − τI, 0)·Rᵀ`, the proximal map of
/// `τ‖·‖_*`.
pub fn svt_prox(a: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) {
        return Err(domain_err!("shrinkage threshold must be non-negative, got {}", tau));
    }
    if tau == 0.0 {
        return Ok(a.clone());
    }
    if a.is_zero() {
        return Ok(a.clone());
    }
    let svd = thin_svd(a)?;
    let shrunk: Vec<f64> = svd.singular_values.iter().map(|s| (s - tau).max(0.0)).collect();
    let keep = shrunk.iter().take_while(|&&s| s > 0.0).count();
    if keep == 0 {
        return Ok(DenseMatrix::zeros(a.rows(), a.cols()));
    }
    svd.left
        .resize_columns(keep)
        .scale_columns(&shrunk[..keep])?
        .matmul_t(&svd.right.resize_columns(keep))
}

/// Closed-form minimizer of `(λ/3)‖V‖²_F + (l/2)‖V − b‖²_F`, namely
/// `b · l / (l + 2λ/3)`.
pub fn frob_prox(b: &DenseMatrix, l: f64, lambda: f64) -> Result<DenseMatrix> {
    if !(l > 0.0) || !(lambda >= 0.0) {
        return Err(domain_err!("frob_prox needs l > 0 and lambda >= 0, got l = {}, lambda = {}", l, lambda));
    }
    Ok(b.scale(l / (l + 2.0 * lambda / 3.0)))
}

/// Lipschitz constant of `∇g(U) = P_Ω(UVᵀ − D)V`, i.e. `‖V‖²₂`.
pub fn lipschitz_g(v: &DenseMatrix) -> Result<f64> {
    let s = spectral_norm(v)?;
    Ok(s * s)
}

/// Lipschitz constant of `∇h(V) = P_Ω(UVᵀ − D)ᵀU`, i.e. `‖U‖²₂`.
pub fn lipschitz_h(u: &DenseMatrix) -> Result<f64> {
    lipschitz_g(u)
}

/// Value of the regularized completion objective.
pub fn objective(fp: &FactorPair, obs: &SparseObservations, config: &SolverConfig) -> Result<f64> {
    let r = masked_residual(&fp.u, &fp.v, obs)?;
    let reg = if config.lambda == 0.0 {
        0.0
    } else {
        config.lambda * config.reg.penalty(&fp.u, &fp.v)?
    };
    Ok(reg + 0.5 * r.sum_squares())
}

/// Outcome of one alternating sweep.
#[derive(Debug, Clone)]
pub struct Step {
    pub pair: FactorPair,
    pub l_g: f64,
    pub l_h: f64,
}

/// One PALM iteration: update `U` against the current `V`, then `V`
/// against the new `U`.
pub fn step(fp: &FactorPair, obs: &SparseObservations, config: &SolverConfig) -> Result<Step> {
    if !(config.lambda >= 0.0) {
        return Err(domain_err!("lambda must be non-negative, got {}", config.lambda));
    }
    let lambda = config.lambda;
    let w = config.reg.u_weight();

    let l_g = lipschitz_g(&fp.v)?.max(LIPSCHITZ_FLOOR);
    let r = masked_residual(&fp.u, &fp.v, obs)?;
    let gu = grad_u(&r, &fp.v)?;
    let u_next = svt_prox(&fp.u.add_scaled(-1.0 / l_g, &gu)?, w * lambda / l_g)?;

    let l_h = lipschitz_h(&u_next)?.max(LIPSCHITZ_FLOOR);
    let r = masked_residual(&u_next, &fp.v, obs)?;
    let gv = grad_v(&r, &u_next)?;
    let v_point = fp.v.add_scaled(-1.0 / l_h, &gv)?;
    let v_next = match config.reg {
        Regularizer::FrobeniusNuclear => frob_prox(&v_point, l_h, lambda)?,
        Regularizer::BiNuclear => svt_prox(&v_point, lambda / (2.0 * l_h))?,
    };

    Ok(Step {
        pair: FactorPair { u: u_next, v: v_next },
        l_g,
        l_h,
    })
}

/// Starting point for [`solve`].
pub fn initialize(obs: &SparseObservations, config: &SolverConfig) -> Result<FactorPair> {
    let (m, n) = (obs.rows(), obs.cols());
    let seed = derive_seed(config.seed, keys::INIT);
    match config.init {
        InitPolicy::GaussianScaled => {
            let mut rng = seeded(seed);
            let std = 1.0 / (config.d as f64).sqrt();
            let u = gaussian_matrix(&mut rng, m, config.d, std);
            let v = gaussian_matrix(&mut rng, n, config.d, std);
            FactorPair::new(u, v)
        }
        InitPolicy::SpectralScaled => spectral_init(obs, config.d, seed),
    }
}

/// Rank-`d` truncated SVD of `(mn/|Ω|)·P_Ω(D)` by seeded orthogonal
/// iteration, split as `U₀ = LΣ^{1/2}`, `V₀ = RΣ^{1/2}`.
pub fn spectral_init(obs: &SparseObservations, d: usize, seed: u64) -> Result<FactorPair> {
    let (m, n) = (obs.rows(), obs.cols());
    if d == 0 {
        return Err(dim_err!("rank bound d must be at least 1"));
    }
    if obs.is_empty() || obs.max_abs() == 0.0 || m == 0 || n == 0 {
        return Ok(FactorPair::zeros(m, n, d));
    }
    let scale = (m as f64) * (n as f64) / obs.len() as f64;
    let k = d.min(m).min(n);
    let p = (k + SPECTRAL_INIT_OVERSAMPLE).min(m).min(n);

    let mut rng = seeded(seed);
    let omega = gaussian_matrix(&mut rng, n, p, 1.0);
    let (mut q, _) = householder_qr(&obs.mul_dense(&omega)?)?;
    for _ in 0..SPECTRAL_INIT_ROUNDS {
        let (qz, _) = householder_qr(&obs.tmul_dense(&q)?)?;
        q = householder_qr(&obs.mul_dense(&qz)?)?.0;
    }
    // P_Ω(D)ᵀQ = L' Σ R'ᵀ, hence P_Ω(D) ≈ (Q R') Σ L'ᵀ.
    let bt = obs.tmul_dense(&q)?;
    let svd = thin_svd(&bt)?;
    let sigma: Vec<f64> = svd.singular_values[..k].iter().map(|s| (scale * s).sqrt()).collect();
    let left = q.matmul(&svd.right)?.resize_columns(k).scale_columns(&sigma)?;
    let right = svd.left.resize_columns(k).scale_columns(&sigma)?;
    FactorPair::new(left.resize_columns(d), right.resize_columns(d))
}

/// Runs PALM from [`initialize`] until the step criterion or the
/// iteration cap.
pub fn solve(obs: &SparseObservations, config: &SolverConfig) -> core::result::Result<SolveReport, SolveError> {
    let fail = |error: Error, objective_trace: Vec<f64>, lipschitz_trace: Vec<(f64, f64)>, iterations| SolveError {
        error,
        objective_trace,
        lipschitz_trace,
        iterations,
    };
    if let Err(e) = config.validate() {
        return Err(fail(e, Vec::new(), Vec::new(), 0));
    }
    let start = initialize(obs, config).map_err(|e| fail(e, Vec::new(), Vec::new(), 0))?;
    solve_from(start, obs, config)
}

/// [`solve`] from a caller-supplied start point.
pub fn solve_from(
    start: FactorPair,
    obs: &SparseObservations,
    config: &SolverConfig,
) -> core::result::Result<SolveReport, SolveError> {
    let mut objective_trace = Vec::with_capacity(config.max_iters + 1);
    let mut lipschitz_trace = Vec::with_capacity(config.max_iters);
    let mut change_trace = Vec::with_capacity(config.max_iters);
    macro_rules! bail {
        ($e:expr, $iters:expr) => {
            return Err(SolveError {
                error: $e,
                objective_trace,
                lipschitz_trace,
                iterations: $iters,
            })
        };
    }
    if let Err(e) = config.validate() {
        bail!(e, 0);
    }
    if start.u.rows() != obs.rows() || start.v.rows() != obs.cols() || start.d() != config.d {
        bail!(
            dim_err!(
                "start point {}x{} / {}x{} does not match {}x{} data with d = {}",
                start.u.rows(),
                start.u.cols(),
                start.v.rows(),
                start.v.cols(),
                obs.rows(),
                obs.cols(),
                config.d
            ),
            0
        );
    }

    let mut current = start;
    match objective(&current, obs, config) {
        Ok(f) => objective_trace.push(f),
        Err(e) => bail!(e, 0),
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let next = match step(&current, obs, config) {
            Ok(s) => s,
            Err(e) => bail!(e, iterations),
        };
        iterations += 1;
        let du = frobenius_norm(&next.pair.u.sub(&current.u).expect("same shape"));
        let dv = frobenius_norm(&next.pair.v.sub(&current.v).expect("same shape"));
        let change = match config.stop_rule {
            StopRule::Absolute => du.max(dv),
            StopRule::Relative => {
                (du / frobenius_norm(&current.u).max(1.0)).max(dv / frobenius_norm(&current.v).max(1.0))
            }
        };
        lipschitz_trace.push((next.l_g, next.l_h));
        change_trace.push(change);
        current = next.pair;
        match objective(&current, obs, config) {
            Ok(f) => objective_trace.push(f),
            Err(e) => bail!(e, iterations),
        }
        if change < config.epsilon {
            converged = true;
            break;
        }
    }

    let optimality = match optimality_residual(&current, obs, config) {
        Ok(o) => o,
        Err(e) => bail!(e, iterations),
    };
    Ok(SolveReport {
        factors: current,
        objective_trace,
        lipschitz_trace,
        change_trace,
        iterations,
        converged,
        optimality,
    })
}

/// Subdifferential residuals of the `U`-subproblem with `V` fixed, plus
/// the `C₂` ratio of the recovery bound and its lower bound.
pub fn optimality_residual(fp: &FactorPair, obs: &SparseObservations, config: &SolverConfig) -> Result<Optimality> {
    let r = masked_residual(&fp.u, &fp.v, obs)?;
    // Q = P_Ω(D − UVᵀ)V = −∇g(U).
    let q = grad_u(&r, &fp.v)?.scale(-1.0);
    let threshold = config.reg.u_weight() * config.lambda;
    let q_spectral = spectral_norm(&q)?;
    let u_nuclear = nuclear_norm(&fp.u)?;
    let duality_gap = (q.inner(&fp.u)? - threshold * u_nuclear).abs();
    let denom = threshold * u_nuclear;
    let duality_gap_rel = if denom > 0.0 { duality_gap / denom } else { duality_gap };

    let residual_norm = r.frobenius_norm();
    let (c2, c2_degenerate) = if residual_norm > 0.0 {
        (frobenius_norm(&q) / residual_norm, false)
    } else {
        (f64::INFINITY, true)
    };
    let gamma = obs.sum_squares();
    let c2_lower = if gamma > 0.0 { threshold / gamma.sqrt() } else { f64::INFINITY };
    Ok(Optimality {
        q_spectral,
        duality_gap,
        duality_gap_rel,
        c2,
        c2_lower,
        c2_degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, seeded, standard_normal};
    use crate::sparse::sample_mask;

    fn toy_problem(seed: u64, m: usize, n: usize, r: usize, sr: f64) -> (DenseMatrix, SparseObservations) {
        let mut rng = seeded(seed);
        let z = gaussian_matrix(&mut rng, m, r, 1.0).matmul_t(&gaussian_matrix(&mut rng, n, r, 1.0)).unwrap();
        let mask = sample_mask(m, n, sr, seed ^ 0xABCD).unwrap();
        let obs = SparseObservations::from_dense_mask(&z, &mask).unwrap();
        (z, obs)
    }

    #[test]
    fn svt_identity_and_diagonal() {
        let mut rng = seeded(1);
        let a = gaussian_matrix(&mut rng, 5, 3, 1.0);
        assert_eq!(svt_prox(&a, 0.0).unwrap(), a);
        let out = svt_prox(&DenseMatrix::from_diag(&[3.0, 1.0]), 2.0).unwrap();
        let expect = DenseMatrix::from_diag(&[1.0, 0.0]);
        for (x, y) in out.as_slice().iter().zip(expect.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!(svt_prox(&a, -1.0).is_err());
        let once = svt_prox(&a, 0.3).unwrap();
        assert_eq!(svt_prox(&once, 0.0).unwrap(), once);
    }

    #[test]
    fn svt_is_a_local_minimizer() {
        let mut rng = seeded(2);
        let a = gaussian_matrix(&mut rng, 8, 3, 1.0);
        let tau = 0.7;
        let f = |x: &DenseMatrix| {
            let diff = frobenius_norm(&x.sub(&a).unwrap());
            tau * nuclear_norm(x).unwrap() + 0.5 * diff * diff
        };
        let best = svt_prox(&a, tau).unwrap();
        let fbest = f(&best);
        for _ in 0..1000 {
            let dir = gaussian_matrix(&mut rng, 8, 3, 1.0);
            let dir = dir.scale(1e-2 / frobenius_norm(&dir));
            assert!(f(&best.add_scaled(1.0, &dir).unwrap()) >= fbest - 1e-12);
        }
    }

    #[test]
    fn frob_prox_cases() {
        let mut rng = seeded(3);
        let b = gaussian_matrix(&mut rng, 4, 3, 1.0);
        let out = frob_prox(&b, 1.3, 1e-12).unwrap();
        for (x, y) in out.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
        let ones = DenseMatrix::from_fn(2, 2, |_, _| 1.0);
        assert_eq!(frob_prox(&ones, 2.0, 3.0).unwrap(), ones.scale(0.5));
        // Stationarity: (2λ/3)V + l(V − b) = 0.
        let (l, lambda) = (1.7, 5.0);
        let v = frob_prox(&b, l, lambda).unwrap();
        let grad = v.scale(2.0 * lambda / 3.0).add_scaled(l, &v.sub(&b).unwrap()).unwrap();
        assert!(frobenius_norm(&grad) < 1e-10);
        assert!(frob_prox(&b, 0.0, 1.0).is_err());
    }

    #[test]
    fn lipschitz_values_and_bound() {
        assert!((lipschitz_g(&DenseMatrix::from_diag(&[3.0, 1.0])).unwrap() - 9.0).abs() < 1e-9);
        assert_eq!(lipschitz_h(&DenseMatrix::zeros(3, 2)).unwrap(), 0.0);

        let (_, obs) = toy_problem(4, 12, 9, 2, 0.4);
        let mut rng = seeded(5);
        let v = gaussian_matrix(&mut rng, 9, 3, 1.0);
        let l = lipschitz_g(&v).unwrap();
        for _ in 0..20 {
            let u1 = gaussian_matrix(&mut rng, 12, 3, 1.0);
            let u2 = gaussian_matrix(&mut rng, 12, 3, 1.0);
            let g1 = grad_u(&masked_residual(&u1, &v, &obs).unwrap(), &v).unwrap();
            let g2 = grad_u(&masked_residual(&u2, &v, &obs).unwrap(), &v).unwrap();
            let lhs = frobenius_norm(&g1.sub(&g2).unwrap());
            let rhs = l * frobenius_norm(&u1.sub(&u2).unwrap());
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn objective_simple_cases() {
        let (z, obs) = toy_problem(6, 7, 6, 2, 0.5);
        let cfg = SolverConfig::new(Regularizer::FrobeniusNuclear, 3.0, 2);
        let zero = FactorPair::zeros(7, 6, 2);
        assert!((objective(&zero, &obs, &cfg).unwrap() - 0.5 * obs.sum_squares()).abs() < 1e-12);

        let exact = crate::quasinorm::optimal_factor_pair(&z, Regularizer::BiNuclear, 2).unwrap();
        let mut cfg0 = SolverConfig::new(Regularizer::BiNuclear, 0.0, 2);
        assert!(objective(&exact, &obs, &cfg0).unwrap() < 1e-20);
        cfg0.reg = Regularizer::FrobeniusNuclear;
        assert!(objective(&exact, &obs, &cfg0).unwrap() < 1e-20);
    }

    #[test]
    fn zero_lambda_step_is_plain_gradient_descent() {
        let (_, obs) = toy_problem(7, 10, 8, 2, 0.4);
        let mut rng = seeded(8);
        let fp = FactorPair::new(gaussian_matrix(&mut rng, 10, 3, 1.0), gaussian_matrix(&mut rng, 8, 3, 1.0)).unwrap();
        let cfg = SolverConfig::new(Regularizer::FrobeniusNuclear, 0.0, 3);
        let out = step(&fp, &obs, &cfg).unwrap();

        // Hand-coded: dense gradients with step sizes 1/‖V‖²₂ and 1/‖U₁‖²₂.
        let mask = |x: DenseMatrix| {
            let mut data = x.into_vec();
            let dense_obs = obs.to_dense();
            let mut keep = alloc::vec![false; data.len()];
            for (i, j, _) in obs.iter() {
                keep[i * 8 + j] = true;
            }
            for (idx, x) in data.iter_mut().enumerate() {
                *x = if keep[idx] { *x - dense_obs.as_slice()[idx] } else { 0.0 };
            }
            DenseMatrix::new(10, 8, data).unwrap()
        };
        let lg = spectral_norm(&fp.v).unwrap().powi(2);
        let r = mask(fp.u.matmul(&fp.v.transpose()).unwrap());
        let u1 = fp.u.add_scaled(-1.0 / lg, &r.matmul(&fp.v).unwrap()).unwrap();
        let lh = spectral_norm(&u1).unwrap().powi(2);
        let r = mask(u1.matmul(&fp.v.transpose()).unwrap());
        let v1 = fp.v.add_scaled(-1.0 / lh, &r.transpose().matmul(&u1).unwrap()).unwrap();
        assert!((out.l_g - lg).abs() < 1e-12 * lg && (out.l_h - lh).abs() < 1e-12 * lh);
        for (a, b) in out.pair.u.as_slice().iter().zip(u1.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in out.pair.v.as_slice().iter().zip(v1.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn steps_never_increase_the_objective() {
        let (_, obs) = toy_problem(9, 15, 12, 3, 0.4);
        let mut rng = seeded(10);
        for trial in 0..200 {
            let reg = if trial % 2 == 0 { Regularizer::FrobeniusNuclear } else { Regularizer::BiNuclear };
            let lambda = 0.05 + 2.0 * standard_normal(&mut rng).abs();
            let cfg = SolverConfig::new(reg, lambda, 4);
            let fp =
                FactorPair::new(gaussian_matrix(&mut rng, 15, 4, 1.0), gaussian_matrix(&mut rng, 12, 4, 1.0)).unwrap();
            let before = objective(&fp, &obs, &cfg).unwrap();
            let after = objective(&step(&fp, &obs, &cfg).unwrap().pair, &obs, &cfg).unwrap();
            assert!(after <= before + 1e-12, "trial {}: {} -> {}", trial, before, after);
        }
    }

    #[test]
    fn near_fixed_point_stays_put() {
        let mut rng = seeded(11);
        let z = gaussian_matrix(&mut rng, 9, 3, 1.0).matmul_t(&gaussian_matrix(&mut rng, 7, 3, 1.0)).unwrap();
        let all: Vec<_> = (0..9).flat_map(|i| (0..7).map(move |j| (i, j))).collect();
        let obs = SparseObservations::from_dense_mask(&z, &all).unwrap();
        for reg in [Regularizer::FrobeniusNuclear, Regularizer::BiNuclear] {
            let cfg = SolverConfig::new(reg, 1e-8, 3);
            let mut fp = crate::quasinorm::optimal_factor_pair(&z, reg, 3).unwrap();
            for _ in 0..10 {
                fp = step(&fp, &obs, &cfg).unwrap().pair;
            }
            assert!(frobenius_norm(&fp.product().sub(&z).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn zero_data_converges_immediately() {
        let obs = SparseObservations::new(6, 5, (0..6).map(|i| (i, i % 5, 0.0)).collect()).unwrap();
        let cfg = SolverConfig::new(Regularizer::FrobeniusNuclear, 1.0, 2).with_epsilon(1e-8);
        let rep = solve(&obs, &cfg).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
        assert!(rep.factors.u.is_zero() && rep.factors.v.is_zero());
        assert!(rep.optimality.c2_degenerate && rep.optimality.c2.is_infinite());
    }

    #[test]
    fn fully_observed_rank_one_is_recovered() {
        let mut rng = seeded(12);
        let z = gaussian_matrix(&mut rng, 10, 1, 1.0).matmul_t(&gaussian_matrix(&mut rng, 10, 1, 1.0)).unwrap();
        let all: Vec<_> = (0..10).flat_map(|i| (0..10).map(move |j| (i, j))).collect();
        let obs = SparseObservations::from_dense_mask(&z, &all).unwrap();
        for reg in [Regularizer::FrobeniusNuclear, Regularizer::BiNuclear] {
            let cfg = SolverConfig::new(reg, 0.1, 2).with_epsilon(1e-7).with_max_iters(5000);
            let rep = solve(&obs, &cfg).unwrap();
            assert!(rep.converged, "{:?} did not converge", reg);
            let rse = frobenius_norm(&rep.factors.product().sub(&z).unwrap()) / frobenius_norm(&z);
            assert!(rse < 1e-2, "{:?}: rse {} after {}", reg, rse, rep.iterations);
        }
    }

    #[test]
    fn over_fit_with_zero_lambda_has_no_residual_force() {
        let (z, obs) = toy_problem(13, 9, 8, 2, 0.6);
        let cfg = SolverConfig::new(Regularizer::FrobeniusNuclear, 0.0, 3);
        let fp = crate::quasinorm::optimal_factor_pair(&z, Regularizer::FrobeniusNuclear, 3).unwrap();
        let opt = optimality_residual(&fp, &obs, &cfg).unwrap();
        assert!(opt.q_spectral < 1e-8);
    }

    #[test]
    fn config_validation() {
        let obs = SparseObservations::new(2, 2, alloc::vec![(0, 0, 1.0)]).unwrap();
        let bad = [
            SolverConfig::new(Regularizer::BiNuclear, 0.0, 1),
            SolverConfig::new(Regularizer::BiNuclear, 1.0, 0),
            SolverConfig::new(Regularizer::BiNuclear, 1.0, 1).with_epsilon(0.0),
            SolverConfig::new(Regularizer::BiNuclear, 1.0, 1).with_max_iters(0),
        ];
        for cfg in bad {
            let err = solve(&obs, &cfg).unwrap_err();
            assert!(matches!(err.error, Error::Domain(_)));
            assert!(err.objective_trace.is_empty());
        }
    }

    #[test]
    fn spectral_init_recovers_fully_observed_low_rank() {
        let mut rng = seeded(14);
        let z = gaussian_matrix(&mut rng, 20, 3, 1.0).matmul_t(&gaussian_matrix(&mut rng, 15, 3, 1.0)).unwrap();
        let all: Vec<_> = (0..20).flat_map(|i| (0..15).map(move |j| (i, j))).collect();
        let obs = SparseObservations::from_dense_mask(&z, &all).unwrap();
        let fp = spectral_init(&obs, 5, 1).unwrap();
        assert_eq!(fp.d(), 5);
        let err = frobenius_norm(&fp.product().sub(&z).unwrap()) / frobenius_norm(&z);
        assert!(err < 1e-10, "relative error {}", err);
        // Gaussian start has the requested shape.
        let cfg = SolverConfig::new(Regularizer::BiNuclear, 1.0, 4).with_init(InitPolicy::GaussianScaled);
        let g = initialize(&obs, &cfg).unwrap();
        assert_eq!((g.u.shape(), g.v.shape()), ((20, 4), (15, 4)));
    }
}
