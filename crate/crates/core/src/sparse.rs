//! Observed entries `P_Ω(D)` in sorted coordinate layout, and the three
//! kernels the solvers run every iteration: the masked residual
//! `P_Ω(UVᵀ − D)` and the gradient products `R·V` and `Rᵀ·U`.
//!
//! Each kernel is a single pass over the entry list with `d`
//! multiply-adds per entry; unobserved positions are never touched.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{dim_err, domain_err, Result};
#[allow(unused_imports)]
use crate::math::FloatMath;
use crate::matrix::{dot, DenseMatrix};
use crate::rng::seeded;

/// Above this many samples [`sample_mask`] switches from a partial
/// Fisher–Yates shuffle to rejection sampling.
pub const FISHER_YATES_LIMIT: u64 = 10_000_000;

#[cfg(test)]
std::thread_local! {
    static MULTIPLY_ADDS: core::cell::Cell<usize> = const { core::cell::Cell::new(0) };
}

#[cfg(test)]
pub(crate) fn take_multiply_adds() -> usize {
    MULTIPLY_ADDS.with(|c| c.replace(0))
}

#[inline]
fn count_multiply_adds(_n: usize) {
    #[cfg(test)]
    MULTIPLY_ADDS.with(|c| c.set(c.get() + _n));
}

/// The observation set Ω with the observed values of `D`.
///
/// Entries are sorted by `(row, col)` with no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservations {
    rows: usize,
    cols: usize,
    row_idx: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseObservations {
    /// Builds the set from arbitrary-order triplets; duplicates are an error.
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let (obs, dups) = Self::build(rows, cols, entries)?;
        if dups > 0 {
            return Err(domain_err!("{} duplicate (row, col) positions", dups));
        }
        Ok(obs)
    }

    /// Builds the set keeping the last value for repeated positions, and
    /// returns how many entries were overridden.
    pub fn with_last_wins(
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<(Self, usize)> {
        Self::build(rows, cols, entries)
    }

    fn build(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<(Self, usize)> {
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(dim_err!("entry ({}, {}) outside a {}x{} matrix", i, j, rows, cols));
            }
            if !v.is_finite() {
                return Err(domain_err!("non-finite value at ({}, {})", i, j));
            }
        }
        // Stable: equal keys keep input order, so the last of a run is the
        // last one supplied.
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut duplicates = 0;
        for (i, j, v) in entries {
            if row_idx.last() == Some(&i) && col_idx.last() == Some(&j) {
                *values.last_mut().expect("non-empty") = v;
                duplicates += 1;
            } else {
                row_idx.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        Ok((
            Self {
                rows,
                cols,
                row_idx,
                col_idx,
                values,
            },
            duplicates,
        ))
    }

    pub fn from_dense_mask(d: &DenseMatrix, mask: &[(usize, usize)]) -> Result<Self> {
        let entries = mask.iter().map(|&(i, j)| (i, j, d.get(i, j))).collect();
        Self::new(d.rows(), d.cols(), entries)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of observed entries `|Ω|`.
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.row_idx
            .iter()
            .zip(&self.col_idx)
            .zip(&self.values)
            .map(|((&i, &j), &v)| (i, j, v))
    }

    /// `‖P_Ω(D)‖²_F`.
    pub fn sum_squares(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    /// `max |D_ij|` over Ω.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Same index set with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(dim_err!("{} values for {} observed entries", values.len(), self.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain_err!("non-finite replacement value"));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Dense `P_Ω(D)` with zeros off Ω.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for (i, j, v) in self.iter() {
            data[i * self.cols + j] = v;
        }
        DenseMatrix::from_raw(self.rows, self.cols, data)
    }

    /// `P_Ω(D) · x` for `x` of shape `cols x k`.
    pub fn mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        scatter_product(self.iter(), self.rows, self.cols, x, false)
    }

    /// `P_Ω(D)ᵀ · y` for `y` of shape `rows x k`.
    pub fn tmul_dense(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        scatter_product(self.iter(), self.rows, self.cols, y, true)
    }
}

/// `P_Ω(UVᵀ − D)`, stored against the index set of its parent observations.
#[derive(Debug, Clone)]
pub struct SparseResidual<'a> {
    obs: &'a SparseObservations,
    values: Vec<f64>,
}

impl<'a> SparseResidual<'a> {
    pub fn observations(&self) -> &'a SparseObservations {
        self.obs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.obs
            .row_indices()
            .iter()
            .zip(self.obs.col_indices())
            .zip(&self.values)
            .map(|((&i, &j), &v)| (i, j, v))
    }

    /// `‖P_Ω(UVᵀ − D)‖²_F`.
    pub fn sum_squares(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sum_squares().sqrt()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let (m, n) = (self.obs.rows(), self.obs.cols());
        let mut data = vec![0.0; m * n];
        for (i, j, v) in self.iter() {
            data[i * n + j] = v;
        }
        DenseMatrix::from_raw(m, n, data)
    }
}

/// `P_Ω(UVᵀ − D)` at the observed positions only.
pub fn masked_residual<'a>(
    u: &DenseMatrix,
    v: &DenseMatrix,
    obs: &'a SparseObservations,
) -> Result<SparseResidual<'a>> {
    if u.rows() != obs.rows() || v.rows() != obs.cols() || u.cols() != v.cols() {
        return Err(dim_err!(
            "factors {}x{} and {}x{} do not match a {}x{} observation set",
            u.rows(),
            u.cols(),
            v.rows(),
            v.cols(),
            obs.rows(),
            obs.cols()
        ));
    }
    let values = obs.iter().map(|(i, j, d)| dot(u.row(i), v.row(j)) - d).collect();
    count_multiply_adds(obs.len() * u.cols());
    Ok(SparseResidual { obs, values })
}

/// `∇g(U) = P_Ω(UVᵀ − D) · V`, an `m x d` matrix.
pub fn grad_u(r: &SparseResidual<'_>, v: &DenseMatrix) -> Result<DenseMatrix> {
    scatter_product(r.iter(), r.obs.rows(), r.obs.cols(), v, false)
}

/// `∇h(V) = P_Ω(UVᵀ − D)ᵀ · U`, an `n x d` matrix.
pub fn grad_v(r: &SparseResidual<'_>, u: &DenseMatrix) -> Result<DenseMatrix> {
    scatter_product(r.iter(), r.obs.rows(), r.obs.cols(), u, true)
}

fn scatter_product(
    entries: impl Iterator<Item = (usize, usize, f64)>,
    rows: usize,
    cols: usize,
    x: &DenseMatrix,
    transpose: bool,
) -> Result<DenseMatrix> {
    let (inner, outer) = if transpose { (rows, cols) } else { (cols, rows) };
    if x.rows() != inner {
        return Err(dim_err!(
            "dense operand has {} rows, expected {} for a {}x{} sparse matrix{}",
            x.rows(),
            inner,
            rows,
            cols,
            if transpose { " (transposed)" } else { "" }
        ));
    }
    let k = x.cols();
    let mut out = vec![0.0; outer * k];
    for (i, j, r) in entries {
        let (dst, src) = if transpose { (j, i) } else { (i, j) };
        if r == 0.0 {
            continue;
        }
        for (o, &s) in out[dst * k..(dst + 1) * k].iter_mut().zip(x.row(src)) {
            *o += r * s;
        }
    }
    Ok(DenseMatrix::from_raw(outer, k, out))
}

/// `⌊sr·m·n⌋` distinct positions drawn uniformly without replacement,
/// returned sorted by `(row, col)`.
pub fn sample_mask(m: usize, n: usize, sr: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(domain_err!("sampling ratio must lie in (0, 1], got {}", sr));
    }
    let total = (m as u64) * (n as u64);
    let k = ((sr * total as f64) + 1e-9).floor() as u64;
    let k = k.min(total);
    let mut rng = seeded(seed);

    let mut linear: Vec<u64> = if k <= FISHER_YATES_LIMIT {
        // Partial Fisher–Yates over a virtual 0..total array; only the
        // displaced slots are materialized.
        let mut displaced: BTreeMap<u64, u64> = BTreeMap::new();
        let mut out = Vec::with_capacity(k as usize);
        for i in 0..k {
            let j = rng.random_range(i..total);
            let at_i = *displaced.get(&i).unwrap_or(&i);
            let at_j = *displaced.get(&j).unwrap_or(&j);
            displaced.insert(j, at_i);
            out.push(at_j);
        }
        out
    } else if k > total / 2 {
        let excluded = rejection_sample(&mut rng, total, total - k);
        (0..total).filter(|x| !excluded.contains(x)).collect()
    } else {
        rejection_sample(&mut rng, total, k).into_iter().collect()
    };
    linear.sort_unstable();
    let n64 = n as u64;
    Ok(linear
        .into_iter()
        .map(|x| ((x / n64) as usize, (x % n64) as usize))
        .collect())
}

fn rejection_sample(rng: &mut impl Rng, total: u64, k: u64) -> BTreeSet<u64> {
    let mut chosen = BTreeSet::new();
    while (chosen.len() as u64) < k {
        chosen.insert(rng.random_range(0..total));
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, seeded};

    fn random_instance(seed: u64) -> (DenseMatrix, DenseMatrix, DenseMatrix, SparseObservations) {
        let mut rng = seeded(seed);
        let u = gaussian_matrix(&mut rng, 10, 2, 1.0);
        let v = gaussian_matrix(&mut rng, 8, 2, 1.0);
        let d = gaussian_matrix(&mut rng, 10, 8, 1.0);
        let mask = sample_mask(10, 8, 0.25, seed + 1).unwrap();
        assert_eq!(mask.len(), 20);
        let obs = SparseObservations::from_dense_mask(&d, &mask).unwrap();
        (u, v, d, obs)
    }

    /// Dense `P_Ω(UVᵀ − D)` built without the sparse kernels.
    fn dense_masked(u: &DenseMatrix, v: &DenseMatrix, d: &DenseMatrix, obs: &SparseObservations) -> DenseMatrix {
        let x = u.matmul(&v.transpose()).unwrap();
        let mut mask = DenseMatrix::zeros(d.rows(), d.cols()).into_vec();
        for (i, j, _) in obs.iter() {
            mask[i * d.cols() + j] = 1.0;
        }
        DenseMatrix::from_fn(d.rows(), d.cols(), |i, j| mask[i * d.cols() + j] * (x[(i, j)] - d[(i, j)]))
    }

    #[test]
    fn zero_factors_give_negated_data() {
        let (_, _, _, obs) = random_instance(1);
        let r = masked_residual(&DenseMatrix::zeros(10, 2), &DenseMatrix::zeros(8, 2), &obs).unwrap();
        for (a, b) in r.values().iter().zip(obs.values()) {
            assert_eq!(*a, -b);
        }
    }

    #[test]
    fn exact_rank_one_fit_has_zero_residual() {
        let u = DenseMatrix::new(3, 1, vec![1.0, -2.0, 0.5]).unwrap();
        let v = DenseMatrix::new(3, 1, vec![3.0, 1.0, -1.0]).unwrap();
        let d = u.matmul_t(&v).unwrap();
        let all: Vec<_> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        let obs = SparseObservations::from_dense_mask(&d, &all).unwrap();
        let r = masked_residual(&u, &v, &obs).unwrap();
        assert!(r.values().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn kernels_match_dense_oracle() {
        for seed in 0..5 {
            let (u, v, d, obs) = random_instance(seed);
            let r = masked_residual(&u, &v, &obs).unwrap();
            let dense = dense_masked(&u, &v, &d, &obs);
            let sparse_dense = r.to_dense();
            for (a, b) in sparse_dense.as_slice().iter().zip(dense.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
            let dense_ss: f64 = dense.as_slice().iter().map(|x| x * x).sum();
            assert!((r.sum_squares() - dense_ss).abs() <= 1e-12 * dense_ss);

            let gu = grad_u(&r, &v).unwrap();
            let gu_dense = dense.matmul(&v).unwrap();
            let gv = grad_v(&r, &u).unwrap();
            let gv_dense = dense.transpose().matmul(&u).unwrap();
            for (a, b) in gu.as_slice().iter().zip(gu_dense.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in gv.as_slice().iter().zip(gv_dense.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_entry_gradients() {
        let obs = SparseObservations::new(2, 2, vec![(0, 0, 0.0)]).unwrap();
        let v = DenseMatrix::new(2, 2, vec![3.0, 1.0, 7.0, 7.0]).unwrap();
        let r = SparseResidual {
            obs: &obs,
            values: vec![2.0],
        };
        let g = grad_u(&r, &v).unwrap();
        assert_eq!(g.as_slice(), &[6.0, 2.0, 0.0, 0.0]);

        let obs = SparseObservations::new(2, 2, vec![(0, 1, 0.0)]).unwrap();
        let u = DenseMatrix::new(2, 2, vec![1.0, 4.0, 9.0, 9.0]).unwrap();
        let r = SparseResidual {
            obs: &obs,
            values: vec![2.0],
        };
        let g = grad_v(&r, &u).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0, 2.0, 8.0]);

        let zero = SparseResidual {
            obs: &obs,
            values: vec![0.0],
        };
        assert!(grad_v(&zero, &u).unwrap().is_zero());
        assert!(grad_u(&zero, &v).unwrap().is_zero());
    }

    #[test]
    fn finite_difference_gradients() {
        // g(U) = ½‖P_Ω(UVᵀ − D)‖²_F, central differences with step 1e-6.
        let h = 1e-6;
        for seed in 10..14 {
            let (u, v, _, obs) = random_instance(seed);
            let loss = |u: &DenseMatrix, v: &DenseMatrix| 0.5 * masked_residual(u, v, &obs).unwrap().sum_squares();
            let r = masked_residual(&u, &v, &obs).unwrap();
            let gu = grad_u(&r, &v).unwrap();
            let gv = grad_v(&r, &u).unwrap();

            let fd = |x: &DenseMatrix, is_u: bool| {
                let mut out = Vec::new();
                for idx in 0..x.as_slice().len() {
                    let mut plus = x.clone().into_vec();
                    let mut minus = plus.clone();
                    plus[idx] += h;
                    minus[idx] -= h;
                    let p = DenseMatrix::new(x.rows(), x.cols(), plus).unwrap();
                    let m = DenseMatrix::new(x.rows(), x.cols(), minus).unwrap();
                    let (lp, lm) = if is_u { (loss(&p, &v), loss(&m, &v)) } else { (loss(&u, &p), loss(&u, &m)) };
                    out.push((lp - lm) / (2.0 * h));
                }
                out
            };
            for (g, num) in [(gu.as_slice().to_vec(), fd(&u, true)), (gv.as_slice().to_vec(), fd(&v, false))] {
                let diff: f64 = g.iter().zip(&num).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let scale: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(diff <= 1e-5 * scale, "relative gradient error {}", diff / scale);
            }
        }
    }

    #[test]
    fn residual_costs_exactly_omega_times_d() {
        let (u, v, _, obs) = random_instance(3);
        take_multiply_adds();
        masked_residual(&u, &v, &obs).unwrap();
        assert_eq!(take_multiply_adds(), obs.len() * u.cols());
    }

    #[test]
    fn dimension_checks() {
        let (u, v, _, obs) = random_instance(2);
        assert!(masked_residual(&v, &u, &obs).is_err());
        assert!(masked_residual(&u, &DenseMatrix::zeros(8, 3), &obs).is_err());
        let r = masked_residual(&u, &v, &obs).unwrap();
        assert!(grad_u(&r, &u).is_err());
        assert!(grad_v(&r, &v).is_err());
        assert!(SparseObservations::new(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn duplicates_policy() {
        assert!(SparseObservations::new(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        let (obs, dups) =
            SparseObservations::with_last_wins(2, 2, vec![(1, 1, 5.0), (0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(dups, 1);
        assert_eq!(obs.iter().collect::<Vec<_>>(), vec![(0, 0, 2.0), (1, 1, 5.0)]);
    }

    #[test]
    fn masks() {
        let all = sample_mask(4, 5, 1.0, 9).unwrap();
        assert_eq!(all.len(), 20);
        assert_eq!(all, (0..4).flat_map(|i| (0..5).map(move |j| (i, j))).collect::<Vec<_>>());

        let m = sample_mask(100, 100, 0.2, 1).unwrap();
        assert_eq!(m.len(), 2000);
        assert!(m.windows(2).all(|w| w[0] < w[1]));
        assert!(m.iter().all(|&(i, j)| i < 100 && j < 100));

        assert_eq!(m, sample_mask(100, 100, 0.2, 1).unwrap());
        assert_ne!(m, sample_mask(100, 100, 0.2, 2).unwrap());

        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(sample_mask(3, 3, bad, 0), Err(crate::Error::Domain(_))));
        }
    }

    #[test]
    fn rejection_path_has_exact_counts() {
        let mut rng = seeded(4);
        assert_eq!(rejection_sample(&mut rng, 1000, 300).len(), 300);
    }
}
