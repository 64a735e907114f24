use approx::assert_abs_diff_eq;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;

use segdetect::{
    build_surrogate, fit_lasso, gen_dataset, gen_design, kkt_check, rng_from, Dataset,
    LassoOptions, LassoProblem, Rng, SimConfig, SurrogateDataset,
};

fn sample_cov(x: &Array2<f64>, a: usize, b: usize) -> f64 {
    let n = x.nrows() as f64;
    let (ca, cb) = (x.column(a), x.column(b));
    let (ma, mb) = (ca.sum() / n, cb.sum() / n);
    ca.iter().zip(cb).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / (n - 1.0)
}

#[test]
fn design_covariance_is_ar1() {
    let n = 10_000;
    let x = gen_design(n, 8, 0.5, &mut Rng::seed_from_u64(21)).unwrap();
    let tol = 5.0 / (n as f64).sqrt();
    for a in 0..5 {
        for b in 0..5 {
            let target = 0.5f64.powi((a as i32 - b as i32).abs());
            assert_abs_diff_eq!(sample_cov(&x, a, b), target, epsilon = tol);
        }
    }
    assert_abs_diff_eq!(sample_cov(&x, 0, 1), 0.5, epsilon = tol);
    assert_abs_diff_eq!(sample_cov(&x, 0, 2), 0.25, epsilon = tol);
}

#[test]
fn independent_design_has_unit_variances() {
    let n = 10_000;
    let x = gen_design(n, 6, 0.0, &mut Rng::seed_from_u64(5)).unwrap();
    let tol = 5.0 / (n as f64).sqrt();
    for a in 0..6 {
        assert_abs_diff_eq!(sample_cov(&x, a, a), 1.0, epsilon = 5.0 * 2f64.sqrt() / (n as f64).sqrt());
        for b in a + 1..6 {
            assert_abs_diff_eq!(sample_cov(&x, a, b), 0.0, epsilon = tol);
        }
    }
}

#[test]
fn simulated_noise_is_centred_with_unit_variance() {
    let config = SimConfig::reference_cell(625, 20, 3, 1, 0);
    let (data, truth) = gen_dataset(&config, &mut rng_from(9, &[])).unwrap();
    let mut resid = Vec::new();
    let mut segment = 0;
    for i in 0..data.n() {
        while segment < truth.boundaries.len() && i + 1 > truth.boundaries[segment] {
            segment += 1;
        }
        let fit: f64 = data.x().row(i).iter().zip(truth.betas.get(segment)).map(|(a, b)| a * b).sum();
        resid.push(data.y()[i] - fit);
    }
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 4.0 * 2f64.sqrt() / n.sqrt(), "var {var}");
    assert_eq!(truth.boundaries, vec![156, 312, 468]);
}

fn lasso_data(y: Vec<f64>, x: Array2<f64>) -> SurrogateDataset {
    let n = y.len();
    let w: Array1<f64> = (1..=n).map(|i| i as f64).collect();
    build_surrogate(&Dataset::new(Array1::from(y), x, w).unwrap()).unwrap()
}

fn random_lasso(m: usize, p: usize, seed: u64) -> SurrogateDataset {
    let mut rng = Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((m, p), |_| rng.sample(StandardNormal));
    let y = (0..m)
        .map(|i| x[[i, 0]] - 0.5 * x[[i, p - 1]] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    lasso_data(y, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lasso_solutions_satisfy_kkt(m in 2usize..80, p in 1usize..40, frac in 0.01f64..0.9, seed in any::<u64>()) {
        let data = random_lasso(m, p, seed);
        let lambda = frac * LassoProblem::segment(&data, 0, m, false).lambda_max().max(1e-3);
        let fit = fit_lasso(&data, 0, m, lambda, &LassoOptions::default()).unwrap();
        prop_assert!(kkt_check(&fit, &data, 0, m, 1e-4));
    }

    #[test]
    fn lasso_is_scale_equivariant(m in 5usize..50, p in 1usize..10, c in 0.1f64..10.0, seed in any::<u64>()) {
        let data = random_lasso(m, p, seed);
        let lambda = 0.2 * LassoProblem::segment(&data, 0, m, false).lambda_max().max(1e-3);
        let opts = LassoOptions { tol: 1e-12, max_iter: 100_000, ..LassoOptions::default() };
        let base = fit_lasso(&data, 0, m, lambda, &opts).unwrap();
        let scaled_y: Vec<f64> = data.y().iter().map(|v| c * v).collect();
        let scaled = lasso_data(scaled_y, data.x().to_owned());
        let fit = fit_lasso(&scaled, 0, m, c * lambda, &opts).unwrap();
        for (a, b) in fit.coef.iter().zip(&base.coef) {
            prop_assert!((a - c * b).abs() <= 1e-6 * (1.0 + c * b.abs()), "{a} vs {}", c * b);
        }
    }
}

#[test]
fn lasso_beats_every_grid_point() {
    let x = ndarray::array![
        [1.0, 0.5, -0.3],
        [-0.7, 1.2, 0.4],
        [0.3, -0.8, 1.1],
        [1.4, 0.2, -0.9],
        [-0.2, 0.6, 0.7]
    ];
    let y = vec![1.1, -0.4, 0.9, 1.6, 0.2];
    let data = lasso_data(y, x);
    let lambda = 0.1;
    let opts = LassoOptions { tol: 1e-12, max_iter: 100_000, ..LassoOptions::default() };
    let fit = fit_lasso(&data, 0, 5, lambda, &opts).unwrap();
    let problem = LassoProblem::segment(&data, 0, 5, false);
    let best = problem.objective(&fit.coef, lambda);

    let step = 0.02;
    let axis: Vec<f64> = (-75..=75).map(|k| k as f64 * step).collect();
    let mut grid_min = f64::INFINITY;
    let mut grid_arg = [0.0; 3];
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                let v = problem.objective(&[a, b, c], lambda);
                if v < grid_min {
                    grid_min = v;
                    grid_arg = [a, b, c];
                }
            }
        }
    }
    assert!(best <= grid_min + 1e-12, "solver {best} vs grid {grid_min}");
    for (c, g) in fit.coef.iter().zip(grid_arg) {
        assert!((c - g).abs() <= 2.0 * step, "solver {:?} vs grid {grid_arg:?}", fit.coef);
    }
}
