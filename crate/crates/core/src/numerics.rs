//! Dense symmetric/Hermitian eigensolvers, the inverse matrix square root used
//! for noise whitening, and waterfilling.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest admissible eigenvalue of a covariance, relative to the largest.
pub const PD_TOLERANCE: f64 = 1e-10;

/// Eigenvalues below this fraction of the largest are treated as exact zeros
/// before waterfilling (rank deficiency of the channel matrix).
pub const EIGEN_FLOOR: f64 = 1e-12;

const EIGEN_EPS: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SymmetricEvd {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`; its first entry
    /// above round-off is positive.
    pub vectors: DMatrix<f64>,
}

fn symmetrized(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::invalid(
            "matrix",
            format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols()),
        ));
    }
    let scale = a.amax();
    let asym = (a - a.transpose()).amax();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) * 2.0 {
        return Err(Error::invalid(
            "matrix",
            format!("not symmetric (max asymmetry {asym:e})"),
        ));
    }
    Ok((a + a.transpose()) * 0.5)
}

fn eigen(a: DMatrix<f64>, vectors: bool) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), vectors.then(|| DMatrix::zeros(0, 0))));
    }
    if vectors {
        let e = SymmetricEigen::try_new(a, EIGEN_EPS, 0)
            .ok_or_else(|| Error::Degenerate("symmetric eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| e.eigenvalues[j].total_cmp(&e.eigenvalues[i]));
        let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
        let mut v = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            let mut col = e.eigenvectors.column(i).into_owned();
            let tol = 1e-12 * col.amax();
            if let Some(first) = col.iter().find(|x| x.abs() > tol) {
                if *first < 0.0 {
                    col.neg_mut();
                }
            }
            v.set_column(k, &col);
        }
        Ok((values, Some(v)))
    } else {
        let mut values: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(|x, y| y.total_cmp(x));
        Ok((values, None))
    }
}

/// Full eigendecomposition of a symmetric matrix (symmetrized as
/// `(A + A^T) / 2` first). Eigenvalues are sorted in descending order.
pub fn sym_evd(a: &DMatrix<f64>) -> Result<SymmetricEvd> {
    let (values, vectors) = eigen(symmetrized(a)?, true)?;
    Ok(SymmetricEvd {
        values,
        vectors: vectors.expect("vectors requested"),
    })
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(eigen(symmetrized(a)?, false)?.0)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn herm_eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::invalid("matrix", "expected a square matrix"));
    }
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

fn pd_check(values: &[f64], what: &str) -> Result<()> {
    let largest = values.first().copied().unwrap_or(0.0);
    let smallest = values.last().copied().unwrap_or(0.0);
    if !(largest > 0.0) || smallest <= PD_TOLERANCE * largest {
        return Err(Error::Degenerate(format!(
            "{what} is not positive definite (eigenvalues in [{smallest:e}, {largest:e}])"
        )));
    }
    Ok(())
}

pub(crate) fn check_positive_definite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    pd_check(&sym_eigenvalues(a)?, what)
}

pub(crate) fn check_positive_definite_herm(a: &DMatrix<Complex64>, what: &str) -> Result<()> {
    pd_check(&herm_eigenvalues(a)?, what)
}

/// Symmetric inverse square root `A^{-1/2}` of a positive definite matrix.
/// Near-singular input is a [`Error::Degenerate`]; nothing is regularized.
pub fn inv_sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let evd = sym_evd(a)?;
    pd_check(&evd.values, "matrix")?;
    let v = &evd.vectors;
    let mut scaled = v.clone();
    for (k, lambda) in evd.values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(lambda.sqrt().recip());
    }
    let b = &scaled * v.transpose();
    Ok((&b + b.transpose()) * 0.5)
}

/// Power allocation `p_k = (waterlevel - 1/lambda_k)^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillAllocation {
    pub waterlevel: f64,
    pub powers: Vec<f64>,
    pub active: Vec<usize>,
}

impl WaterfillAllocation {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Zeroes eigenvalues below [`EIGEN_FLOOR`] times the largest (and any
/// negative round-off).
pub fn clamp_eigenvalues(values: &mut [f64]) {
    let largest = values.iter().fold(0.0_f64, |m, v| m.max(*v));
    let floor = EIGEN_FLOOR * largest;
    for v in values.iter_mut() {
        if *v < floor {
            *v = 0.0;
        }
    }
}

/// Solves `sum_k (level - 1/lambda_k)^+ = budget` by bisection on the
/// level over `[min 1/lambda, min 1/lambda + budget]`, then fixes the level
/// exactly on the resulting active set. Zero eigenvalues never activate.
fn solve_waterlevel(lambdas: &[f64], budget: f64) -> Result<f64> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::invalid("budget", "must be positive and finite"));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("eigenvalues", "must be finite and nonnegative"));
    }
    let best = lambdas.iter().fold(0.0_f64, |m, v| m.max(*v));
    if best <= 0.0 {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    let fill = |level: f64| -> f64 {
        lambdas
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| (level - 1.0 / l).max(0.0))
            .sum()
    };
    let mut lo = 1.0 / best;
    let mut hi = lo + budget;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fill(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // On the active set the constraint is linear in the level.
    let level = 0.5 * (lo + hi);
    let (count, inv_sum) = lambdas
        .iter()
        .filter(|&&l| l > 0.0 && level > 1.0 / l)
        .fold((0usize, 0.0), |(c, s), &l| (c + 1, s + 1.0 / l));
    if count == 0 {
        return Ok(level);
    }
    let exact = (budget + inv_sum) / count as f64;
    // Keep the polished level only if it does not change the active set.
    let same_set = lambdas
        .iter()
        .filter(|&&l| l > 0.0)
        .all(|&l| (level > 1.0 / l) == (exact > 1.0 / l));
    Ok(if same_set { exact } else { level })
}

/// Waterfilling over eigenvalues `lambdas` with total power `budget`.
pub fn waterfill(lambdas: &[f64], budget: f64) -> Result<WaterfillAllocation> {
    let waterlevel = solve_waterlevel(lambdas, budget)?;
    let powers: Vec<f64> = lambdas
        .iter()
        .map(|&l| if l > 0.0 { (waterlevel - 1.0 / l).max(0.0) } else { 0.0 })
        .collect();
    let active = powers
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, _)| k)
        .collect();
    Ok(WaterfillAllocation {
        waterlevel,
        powers,
        active,
    })
}

/// Waterlevel for a frequency-dependent spectrum sampled on a uniform grid of
/// `[-pi, pi)`: solves `(1/2pi) sum_k int (level - 1/lambda_k(w))^+ dw = budget`
/// with the periodic trapezoid rule. `grid[j]` lists the eigenvalues at `w_j`.
pub fn waterfill_spectral(grid: &[Vec<f64>], budget: f64) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::invalid("grid", "need at least two frequency points"));
    }
    // On a uniform periodic grid every trapezoid weight is 2 pi / J, so the
    // constraint is the discrete one over all samples with budget J * budget.
    let flat: Vec<f64> = grid.iter().flatten().copied().collect();
    solve_waterlevel(&flat, budget * grid.len() as f64)
}

/// `sum_k (log2(level * lambda_k))^+`.
pub fn log_gain_sum(lambdas: &[f64], level: f64) -> f64 {
    lambdas
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| (level * l).log2().max(0.0))
        .sum()
}

/// `log2 det(A)` of a symmetric positive definite matrix via Cholesky.
pub fn log2_det_spd(a: DMatrix<f64>) -> Result<f64> {
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.log2()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a + a.transpose()
    }

    #[test]
    fn evd_diagonal() {
        let e = sym_evd(&DMatrix::from_diagonal(&nalgebra::dvector![1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_relative_eq!(e.vectors[(1, 0)].abs(), 1.0);
        assert_relative_eq!(e.vectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn evd_two_by_two() {
        let e = sym_evd(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert_relative_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-12);
        let s = 0.5f64.sqrt();
        assert_relative_eq!(e.vectors[(0, 0)], s, epsilon = 1e-12);
        assert_relative_eq!(e.vectors[(1, 0)], s, epsilon = 1e-12);
        // sign convention: first nonzero entry positive
        assert_relative_eq!(e.vectors[(0, 1)], s, epsilon = 1e-12);
        assert_relative_eq!(e.vectors[(1, 1)], -s, epsilon = 1e-12);
    }

    #[test]
    fn evd_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = random_symmetric(8, &mut rng);
            let e = sym_evd(&a).unwrap();
            let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
            let rec = &e.vectors * lam * e.vectors.transpose();
            let norm = a.norm();
            assert!((rec - &a).amax() < 1e-9 * norm);
            let orth = e.vectors.transpose() * &e.vectors - DMatrix::identity(8, 8);
            assert!(orth.amax() < 1e-9);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            for k in 0..8 {
                let r = &a * e.vectors.column(k) - e.vectors.column(k) * e.values[k];
                assert!(r.amax() < 1e-9 * norm);
            }
        }
    }

    #[test]
    fn evd_rejects_non_square() {
        assert!(sym_evd(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn inverse_square_root() {
        let b = inv_sqrt_psd(&(DMatrix::identity(3, 3) * 4.0)).unwrap();
        assert!((b - DMatrix::identity(3, 3) * 0.5).amax() < 1e-14);

        let b = inv_sqrt_psd(&DMatrix::from_diagonal(&nalgebra::dvector![4.0, 9.0])).unwrap();
        assert_relative_eq!(b[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(b[(1, 1)], 1.0 / 3.0, epsilon = 1e-14);

        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let b = inv_sqrt_psd(&a).unwrap();
        assert_eq!(b, b.transpose());
        assert!((&b * &a * &b - DMatrix::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn inverse_square_root_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(inv_sqrt_psd(&a), Err(Error::Degenerate(_))));
    }

    #[test]
    fn waterfill_examples() {
        let w = waterfill(&[1.0, 1.0], 2.0).unwrap();
        assert_relative_eq!(w.waterlevel, 2.0, epsilon = 1e-12);
        assert_relative_eq!(w.powers[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(w.powers[1], 1.0, epsilon = 1e-12);

        let w = waterfill(&[1.0, 1e-6], 1.0).unwrap();
        assert_relative_eq!(w.waterlevel, 2.0, epsilon = 1e-12);
        assert_eq!(w.powers[1], 0.0);
        assert_eq!(w.active, vec![0]);

        let w = waterfill(&[4.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(w.waterlevel, 1.125, epsilon = 1e-12);
        assert_relative_eq!(w.powers[0], 0.875, epsilon = 1e-12);
        assert_relative_eq!(w.powers[1], 0.125, epsilon = 1e-12);
    }

    #[test]
    fn waterfill_grid_oracle_two_channels() {
        // grid search over p0 in [0, 1] for lambda = [4, 1], budget 1
        let f = |p0: f64| (1.0 + 4.0 * p0).ln() + (1.0 + (1.0 - p0)).ln();
        let best = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .max_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        assert!((best - 0.875).abs() < 1e-4);
    }

    #[test]
    fn waterfill_zero_eigenvalues() {
        let w = waterfill(&[0.0, 2.0, 0.0], 3.0).unwrap();
        assert_eq!(w.powers[0], 0.0);
        assert_relative_eq!(w.powers[1], 3.0, epsilon = 1e-12);
        assert!(matches!(waterfill(&[0.0, 0.0], 1.0), Err(Error::Degenerate(_))));
        assert!(waterfill(&[1.0], 0.0).is_err());
    }

    #[test]
    fn waterfill_budget_exact_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let lambdas: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
            let budget = 10f64.powf(rng.random_range(-2.0..2.0));
            let w = waterfill(&lambdas, budget).unwrap();
            assert!((w.total_power() - budget).abs() <= 1e-9 * budget);
            assert!(w.powers.iter().all(|p| *p >= 0.0));
            for (&l, &p) in lambdas.iter().zip(&w.powers) {
                assert!((p - (w.waterlevel - 1.0 / l).max(0.0)).abs() < 1e-12 * w.waterlevel.max(1.0));
            }
            let w2 = waterfill(&lambdas, budget * 1.5).unwrap();
            assert!(w2.waterlevel >= w.waterlevel);
            assert!(log_gain_sum(&lambdas, w2.waterlevel) >= log_gain_sum(&lambdas, w.waterlevel));
        }
    }

    #[test]
    fn spectral_flat_band() {
        let grid = vec![vec![2.0]; 64];
        let level = waterfill_spectral(&grid, 1.5).unwrap();
        assert_relative_eq!(level, 1.5 + 0.5, epsilon = 1e-12);

        let grid2 = vec![vec![2.0, 2.0]; 64];
        assert_relative_eq!(waterfill_spectral(&grid2, 3.0).unwrap(), level, epsilon = 1e-12);
        assert!(waterfill_spectral(&[vec![0.0], vec![0.0]], 1.0).is_err());
        assert!(waterfill_spectral(&[vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn spectral_grid_refinement() {
        let sample = |j: usize| {
            (0..j)
                .map(|i| {
                    let w = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / j as f64;
                    vec![1.0 + 0.5 * w.cos()]
                })
                .collect::<Vec<_>>()
        };
        let reference = waterfill_spectral(&sample(1_000_000), 1.0).unwrap();
        let coarse = waterfill_spectral(&sample(1024), 1.0).unwrap();
        assert!((coarse - reference).abs() < 1e-6, "{coarse} vs {reference}");
    }

    #[test]
    fn hermitian_eigenvalues_are_real() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let v = herm_eigenvalues(&a).unwrap();
        assert_relative_eq!(v[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(v[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_det() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 8.0]);
        assert_relative_eq!(log2_det_spd(a).unwrap(), 4.0, epsilon = 1e-12);
    }
}
