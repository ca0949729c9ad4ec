use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Gaussian moments of a feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and the unbiased (N−1) covariance, symmetrized.
pub fn fit_gaussian(features: &DMatrix<f64>) -> Result<FeatureStats> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::arg(format!("need at least 2 feature rows, got {n}")));
    }
    let mean: DVector<f64> = features.row_mean().transpose();
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(FeatureStats { mean, cov, n })
}

/// Eigenvalues and vectors of a symmetric matrix with negative eigenvalues
/// set to zero. Returns the summed magnitude that was clipped.
fn clipped_eigen(m: &DMatrix<f64>) -> (SymmetricEigen<f64, nalgebra::Dyn>, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    let mut clipped = 0.0;
    for v in eig.eigenvalues.iter_mut() {
        if *v < 0.0 {
            clipped += -*v;
            *v = 0.0;
        }
    }
    (eig, clipped)
}

fn sqrtm_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (eig, clipped) = clipped_eigen(m);
    let roots = eig.eigenvalues.map(f64::sqrt);
    let q = &eig.eigenvectors;
    (q * DMatrix::from_diagonal(&roots) * q.transpose(), clipped)
}

/// `‖μa − μb‖² + tr(Σa + Σb − 2 (Σa Σb)^{1/2})`.
///
/// The trace of the cross term is taken from the eigenvalues of the
/// symmetric `√Σa · Σb · √Σa`, with negative eigenvalues clipped to zero.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d || a.cov.shape() != (d, d) || b.cov.shape() != (d, d) {
        return Err(Error::arg(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = &a.mean - &b.mean;
    let (sqrt_a, clip_a) = sqrtm_psd(&a.cov);
    let inner = &sqrt_a * &b.cov * &sqrt_a;
    let (eig, clip_inner) = clipped_eigen(&inner);
    let tr_cross: f64 = eig.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let (tr_a, tr_b) = (a.cov.trace(), b.cov.trace());

    let tolerance = 1e-6 * (tr_a + tr_b).max(f64::MIN_POSITIVE);
    let clipped = clip_a + clip_inner;
    if clipped > tolerance {
        log::warn!("clipped negative eigenvalue mass {clipped:.3e} exceeds {tolerance:.3e}");
    } else if clipped > 0.0 {
        log::debug!("clipped negative eigenvalue mass {clipped:.3e}");
    }

    let fd = diff.dot(&diff) + tr_a + tr_b - 2.0 * tr_cross;
    if !fd.is_finite() {
        return Err(Error::Numerical(format!("Fréchet distance is {fd}")));
    }
    Ok(fd.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn diag(mean: &[f64], var: &[f64]) -> FeatureStats {
        FeatureStats {
            mean: DVector::from_column_slice(mean),
            cov: DMatrix::from_diagonal(&DVector::from_column_slice(var)),
            n: 100,
        }
    }

    #[test]
    fn hand_examples() {
        let a = diag(&[0.0, 0.0], &[1.0, 1.0]);
        let b = diag(&[0.0, 0.0], &[4.0, 4.0]);
        assert!((frechet_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        let shifted = diag(&[1.0, 0.0], &[1.0, 1.0]);
        assert!((frechet_distance(&shifted, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(frechet_distance(&a, &diag(&[0.0], &[1.0])).is_err());
    }

    #[test]
    fn fit_gaussian_examples() {
        let s = fit_gaussian(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 2.0])).unwrap();
        assert_eq!(s.mean.as_slice(), [1.0, 1.0]);
        assert_eq!(s.cov, DMatrix::from_element(2, 2, 2.0));
        let same = fit_gaussian(&DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 1.0, 5.0, 1.0, 5.0])).unwrap();
        assert_eq!(same.cov, DMatrix::zeros(2, 2));
        assert!(fit_gaussian(&DMatrix::from_row_slice(1, 2, &[1.0, 2.0])).is_err());
    }

    #[test]
    fn covariance_matches_two_pass_oracle() {
        let mut rng = crate::seed::rng(11);
        let x = DMatrix::from_fn(50, 4, |_, _| rng.random_range(-3.0..3.0));
        let s = fit_gaussian(&x).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mi = (0..50).map(|r| x[(r, i)]).sum::<f64>() / 50.0;
                let mj = (0..50).map(|r| x[(r, j)]).sum::<f64>() / 50.0;
                let c = (0..50).map(|r| (x[(r, i)] - mi) * (x[(r, j)] - mj)).sum::<f64>() / 49.0;
                assert!((s.cov[(i, j)] - c).abs() < 1e-10);
            }
        }
    }

    fn random_stats(seed: u64, n: usize, d: usize) -> FeatureStats {
        let mut rng = crate::seed::rng(seed);
        let x = DMatrix::from_fn(n, d, |_, j| rng.random_range(-1.0..1.0) * (1.0 + j as f64));
        fit_gaussian(&x).unwrap()
    }

    #[test]
    fn identity_is_zero_for_full_and_rank_deficient_covariances() {
        for (n, d) in [(40, 6), (4, 6)] {
            let s = random_stats(n as u64, n, d);
            assert!(frechet_distance(&s, &s).unwrap() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn diagonal_closed_form(
            mean_a in proptest::collection::vec(-5.0f64..5.0, 1..6),
            seed in any::<u64>(),
        ) {
            let d = mean_a.len();
            let mut rng = crate::seed::rng(seed);
            let mean_b: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let va: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..10.0)).collect();
            let vb: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..10.0)).collect();
            let expected: f64 = (0..d)
                .map(|i| (mean_a[i] - mean_b[i]).powi(2) + (va[i].sqrt() - vb[i].sqrt()).powi(2))
                .sum();
            let got = frechet_distance(&diag(&mean_a, &va), &diag(&mean_b, &vb)).unwrap();
            prop_assert!((got - expected).abs() < 1e-8);
        }

        #[test]
        fn symmetric_and_non_negative(s1 in any::<u64>(), s2 in any::<u64>()) {
            let (a, b) = (random_stats(s1, 30, 5), random_stats(s2, 30, 5));
            let (ab, ba) = (frechet_distance(&a, &b).unwrap(), frechet_distance(&b, &a).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() < 1e-8);
        }

        #[test]
        fn row_permutation_invariance(seed in any::<u64>()) {
            let mut rng = crate::seed::rng(seed);
            let x = DMatrix::from_fn(12, 3, |_, _| rng.random_range(-2.0..2.0));
            let mut order: Vec<usize> = (0..12).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let y = DMatrix::from_fn(12, 3, |i, j| x[(order[i], j)]);
            let (sx, sy) = (fit_gaussian(&x).unwrap(), fit_gaussian(&y).unwrap());
            prop_assert!((sx.mean - sy.mean).amax() < 1e-12);
            prop_assert!((sx.cov - sy.cov).amax() < 1e-12);
        }
    }
}
