//! Small dense linear algebra: thin SVD, spectral norm and the unitarily
//! invariant norms built on top of them.
//!
//! Everything here is sized for the factor matrices of the solvers, i.e.
//! tall `m x d` blocks with `d` in the tens to low hundreds.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain_err, numerical_err, Result};
#[allow(unused_imports)]
use crate::math::FloatMath;
use crate::matrix::{dot, DenseMatrix};

/// Maximum number of one-sided Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Maximum number of power iterations in [`spectral_norm`].
pub const POWER_MAX_ITERS: usize = 10_000;
/// Relative Rayleigh-quotient change that stops the power iteration.
pub const POWER_TOL: f64 = 1e-12;
/// Repeated squarings used to build the start vector.
pub const POWER_SQUARINGS: usize = 40;

/// Singular values below this fraction of `σ₁` get their left vectors
/// completed by orthonormalization instead of normalization.
const NULL_SIGMA_RATIO: f64 = 1e-12;
/// Relative column norm below which Jacobi skips a rotation.
const NEGLIGIBLE_COLUMN: f64 = 1e-15;

/// Thin singular value decomposition `a = left · diag(σ) · rightᵀ`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub left: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub right: DenseMatrix,
}

impl ThinSvd {
    pub fn rank(&self, rel_tol: f64) -> usize {
        let s1 = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > rel_tol * s1 && s > 0.0).count()
    }

    /// Reassembles `left · diag(σ) · rightᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.left
            .scale_columns(&self.singular_values)
            .and_then(|ls| ls.matmul_t(&self.right))
            .expect("thin SVD factors have consistent shapes")
    }
}

/// Householder QR of a tall matrix (`rows >= cols`), returning the thin
/// factor `Q` (`rows x cols`, orthonormal columns) and upper-triangular `R`.
pub fn householder_qr(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(domain_err!("householder_qr needs rows >= cols, got {}x{}", m, n));
    }
    // Column-major working copy.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);

    for k in 0..n {
        let x = &cols[k][k..];
        let norm_x = dot(x, x).sqrt();
        let mut v = x.to_vec();
        if norm_x > 0.0 {
            let alpha = if x[0] >= 0.0 { -norm_x } else { norm_x };
            v[0] -= alpha;
            let vn = dot(&v, &v).sqrt();
            if vn > 0.0 {
                v.iter_mut().for_each(|e| *e /= vn);
            }
        } else {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        for col in cols.iter_mut().skip(k) {
            apply_reflector(&v, &mut col[k..]);
        }
        reflectors.push(v);
    }

    let r = DenseMatrix::from_fn(n, n, |i, j| if i <= j { cols[j][i] } else { 0.0 });

    let mut q_cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for col in q_cols.iter_mut() {
        for k in (0..n).rev() {
            apply_reflector(&reflectors[k], &mut col[k..]);
        }
    }
    let q = DenseMatrix::from_fn(m, n, |i, j| q_cols[j][i]);
    Ok((q, r))
}

#[inline]
fn apply_reflector(v: &[f64], x: &mut [f64]) {
    let t = 2.0 * dot(v, x);
    if t != 0.0 {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi -= t * vi;
        }
    }
}

/// Thin SVD returning all `min(rows, cols)` singular triplets, sorted by
/// non-increasing singular value.
///
/// The tall orientation is reduced by Householder QR and the square
/// triangular factor is diagonalized with cyclic one-sided Jacobi
/// rotations, which keeps tiny singular values accurate to roughly
/// `ε·σ₁` instead of the `√ε·σ₁` a Gram-matrix route would give.
pub fn thin_svd(a: &DenseMatrix) -> Result<ThinSvd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(domain_err!("thin_svd of an empty {}x{} matrix", m, n));
    }
    if m < n {
        let t = thin_svd(&a.transpose())?;
        return Ok(ThinSvd {
            left: t.right,
            singular_values: t.singular_values,
            right: t.left,
        });
    }

    let (q, r) = householder_qr(a)?;
    let k = n;
    let mut w: Vec<Vec<f64>> = (0..k).map(|j| r.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::max(1e-14, k as f64 * f64::EPSILON);
    // Columns this small end up below the null cutoff and are replaced by
    // completion, so rotating against them only risks underflow stalls.
    let total: f64 = w.iter().map(|c| dot(c, c)).sum();
    let negligible = NEGLIGIBLE_COLUMN * NEGLIGIBLE_COLUMN * total;
    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || alpha <= negligible || beta <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(numerical_err!(
            "one-sided Jacobi did not converge within {} sweeps on a {}x{} matrix",
            JACOBI_MAX_SWEEPS,
            m,
            n
        ));
    }

    let sigma: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // Stable sort keeps Jacobi order among ties.
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(core::cmp::Ordering::Equal));

    let s1 = sigma[order[0]];
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut pending = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        if s1 > 0.0 && sigma[j] > NULL_SIGMA_RATIO * s1 {
            u_cols.push(w[j].iter().map(|x| x / sigma[j]).collect());
        } else {
            u_cols.push(vec![0.0; k]);
            pending.push(pos);
        }
    }
    complete_orthonormal(&mut u_cols, &pending);

    let u_r = DenseMatrix::from_fn(k, k, |i, j| u_cols[j][i]);
    let left = q.matmul(&u_r)?;
    let right = DenseMatrix::from_fn(k, k, |i, j| v[order[j]][i]);
    let singular_values = order.iter().map(|&j| sigma[j]).collect();
    Ok(ThinSvd {
        left,
        singular_values,
        right,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the columns listed in `pending` with unit vectors orthogonal to
/// every other column, drawing candidates from the standard basis.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize]) {
    if pending.is_empty() {
        return;
    }
    let k = cols.len();
    let mut candidate = 0usize;
    for &slot in pending {
        loop {
            assert!(candidate < k, "standard basis exhausted during completion");
            let mut e = vec![0.0; k];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for (idx, c) in cols.iter().enumerate() {
                    if idx == slot || (pending.contains(&idx) && dot(c, c) == 0.0) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    e.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 {
                e.iter_mut().for_each(|x| *x /= norm);
                cols[slot] = e;
                break;
            }
        }
    }
}

/// Largest singular value by power iteration on the smaller Gram matrix.
///
/// Plain iteration from a fixed vector crawls (and its stopping test is
/// fooled) when the two leading eigenvalues nearly tie, so the iteration
/// starts from the heaviest column of `G^(2^POWER_SQUARINGS)`, which has
/// already shed every component outside the leading eigenspace. The
/// squarings cost `O(k³)` on the `k × k` Gram matrix, small for factor
/// matrices with few columns.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(domain_err!("spectral_norm of an empty {}x{} matrix", m, n));
    }
    if a.is_zero() {
        return Ok(0.0);
    }
    let g = if n <= m { a.gram() } else { a.transpose().gram() };
    let k = g.rows();

    let mut h = g.scale(1.0 / g.max_abs());
    for _ in 0..POWER_SQUARINGS {
        let next = h.matmul(&h)?;
        let s = next.max_abs();
        if s == 0.0 {
            break;
        }
        h = next.scale(1.0 / s);
    }
    let j = (0..k)
        .max_by(|&x, &y| {
            let cx = h.column(x);
            let cy = h.column(y);
            dot(&cx, &cx).partial_cmp(&dot(&cy, &cy)).unwrap_or(core::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut x = h.column(j);
    let nx = dot(&x, &x).sqrt();
    if nx == 0.0 {
        return Err(numerical_err!("power iteration start vector vanished"));
    }
    x.iter_mut().for_each(|e| *e /= nx);
    match power_iterate(&g, x, POWER_MAX_ITERS) {
        Some(lambda) => Ok(lambda.max(0.0).sqrt()),
        None => Err(numerical_err!(
            "power iteration stagnated after {} iterations",
            POWER_MAX_ITERS
        )),
    }
}

/// Dominant eigenvalue of the PSD matrix `g`, or `None` if the Rayleigh
/// quotient has not settled within `cap` steps or the iterate vanished.
fn power_iterate(g: &DenseMatrix, mut x: Vec<f64>, cap: usize) -> Option<f64> {
    let k = g.rows();
    let mut y = vec![0.0; k];
    let mut prev = f64::NAN;
    for _ in 0..cap {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(g.row(i), &x);
        }
        let rq = dot(&x, &y);
        let ny = dot(&y, &y).sqrt();
        if ny == 0.0 {
            return None;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
        if (rq - prev).abs() < POWER_TOL * rq.abs() {
            return Some(rq);
        }
        prev = rq;
    }
    None
}

/// Sum of singular values.
pub fn nuclear_norm(a: &DenseMatrix) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    Ok(thin_svd(a)?.singular_values.iter().sum())
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    // Scaled accumulation avoids overflow for large entries.
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = a.as_slice().iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}
