//! Random low-rank completion instances: `Z = UVᵀ` with Gaussian factors,
//! observed on a uniform mask with additive Gaussian noise `nf·E`.

use crate::error::{domain_err, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, gaussian_matrix, keys, seeded, standard_normal};
use crate::sparse::{sample_mask, SparseObservations};

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub ground_truth: DenseMatrix,
    pub observations: SparseObservations,
    pub noise_factor: f64,
    pub sampling_ratio: f64,
    pub true_rank: usize,
    pub seed: u64,
}

/// The default rank bound `⌊1.25·r⌋`.
pub fn default_rank_bound(r: usize) -> usize {
    (r * 5 / 4).max(1)
}

pub fn gen_synthetic(m: usize, n: usize, r: usize, nf: f64, sr: f64, seed: u64) -> Result<SyntheticInstance> {
    if r == 0 || r > m.min(n) {
        return Err(domain_err!("rank {} must lie in 1..={}", r, m.min(n)));
    }
    if !(nf >= 0.0 && nf.is_finite()) {
        return Err(domain_err!("noise factor must be non-negative, got {}", nf));
    }
    let u = gaussian_matrix(&mut seeded(derive_seed(seed, keys::FACTOR_U)), m, r, 1.0);
    let v = gaussian_matrix(&mut seeded(derive_seed(seed, keys::FACTOR_V)), n, r, 1.0);
    let z = u.matmul_t(&v)?;
    let mask = sample_mask(m, n, sr, derive_seed(seed, keys::MASK))?;
    let mut noise = seeded(derive_seed(seed, keys::NOISE));
    let entries = mask
        .into_iter()
        .map(|(i, j)| {
            let e = standard_normal(&mut noise);
            (i, j, if nf == 0.0 { z[(i, j)] } else { z[(i, j)] + nf * e })
        })
        .collect();
    let observations = SparseObservations::new(m, n, entries)?;
    Ok(SyntheticInstance {
        ground_truth: z,
        observations,
        noise_factor: nf,
        sampling_ratio: sr,
        true_rank: r,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_full_sampling_reproduces_truth() {
        let inst = gen_synthetic(12, 9, 3, 0.0, 1.0, 5).unwrap();
        assert_eq!(inst.observations.len(), 108);
        for (i, j, v) in inst.observations.iter() {
            assert_eq!(v, inst.ground_truth[(i, j)]);
        }
        assert_eq!(crate::linalg::thin_svd(&inst.ground_truth).unwrap().rank(1e-10), 3);
    }

    #[test]
    fn counts_and_determinism() {
        let a = gen_synthetic(100, 100, 5, 0.1, 0.2, 3).unwrap();
        assert_eq!(a.observations.len(), 2000);
        let b = gen_synthetic(100, 100, 5, 0.1, 0.2, 3).unwrap();
        assert_eq!(a.observations, b.observations);
        assert_eq!(a.ground_truth, b.ground_truth);
        let c = gen_synthetic(100, 100, 5, 0.1, 0.2, 4).unwrap();
        assert_ne!(a.observations, c.observations);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_synthetic(5, 5, 6, 0.0, 0.5, 0).is_err());
        assert!(gen_synthetic(5, 5, 0, 0.0, 0.5, 0).is_err());
        assert!(gen_synthetic(5, 5, 2, -1.0, 0.5, 0).is_err());
        assert!(gen_synthetic(5, 5, 2, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn rank_bound_rule() {
        assert_eq!(default_rank_bound(5), 6);
        assert_eq!(default_rank_bound(8), 10);
        assert_eq!(default_rank_bound(1), 1);
    }
}
