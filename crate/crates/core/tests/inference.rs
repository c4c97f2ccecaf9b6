use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rayon::prelude::*;
use specaus_core::estimate::{fit_all, population_fit};
use specaus_core::fixtures::{five_process_lags, five_process_model};
use specaus_core::graph::{enumerate_paths, Path};
use specaus_core::inference::*;
use specaus_core::svar::simulate;
use specaus_core::FreqValue;

fn region(center: Vec<f64>, shape: DMatrix<f64>, t: usize, alpha: f64) -> ConfidenceRegion {
    confidence_region(&DVector::from_vec(center), &shape, t, alpha).unwrap()
}

/// Extremal norms over `n` boundary points of a 2-dim ellipse.
fn grid_extremes(r: &ConfidenceRegion, n: usize) -> (f64, f64) {
    let eig = r.shape.clone().symmetric_eigen();
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let rad = r.radius_sq.sqrt();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let y = DVector::from_vec(vec![rad * t.cos(), rad * t.sin()]);
        let x = &r.center + &root * y;
        lo = lo.min(x.norm());
        hi = hi.max(x.norm());
    }
    if r.contains(&DVector::zeros(2)) {
        lo = 0.0;
    }
    (lo, hi)
}

#[test]
fn norm_interval_matches_boundary_search() {
    let mut rng_state = 12345u64;
    let mut next = || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((rng_state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    for _ in 0..20 {
        let a = DMatrix::from_fn(2, 2, |_, _| next());
        let shape = &a * a.transpose() + DMatrix::identity(2, 2) * 0.05;
        let center = vec![2.0 * next(), 2.0 * next()];
        let r = region(center, shape, 10, 0.95);
        let iv = norm_interval(&r);
        let (lo, hi) = grid_extremes(&r, 1_000_000);
        assert!((iv.lo - lo).abs() < 1e-4, "lo {} vs {}", iv.lo, lo);
        assert!((iv.hi - hi).abs() < 1e-4, "hi {} vs {}", iv.hi, hi);
    }
}

#[test]
fn norm_interval_handles_degenerate_directions() {
    // centre on the minor axis of a long ellipse: the maximiser leaves the axis
    let shape = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
    let r = region(vec![0.0, 0.5], shape, 1, 0.95);
    let iv = norm_interval(&r);
    let (_, hi) = grid_extremes(&r, 1_000_000);
    assert!((iv.hi - hi).abs() < 1e-4);
    assert_eq!(iv.lo, 0.0);
}

#[test]
fn region_membership_and_nesting() {
    let shape = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let small = region(vec![1.0, -1.0], shape.clone(), 50, 0.5);
    let large = region(vec![1.0, -1.0], shape, 50, 0.99);
    assert!(small.contains(&small.center));
    for i in 0..200 {
        let t = i as f64 * 0.1;
        let x = DVector::from_vec(vec![1.0 + 0.2 * t.cos(), -1.0 + 0.15 * t.sin()]);
        if small.contains(&x) {
            assert!(large.contains(&x));
        }
    }
    let a = norm_interval(&small);
    let b = norm_interval(&large);
    assert!(b.lo <= a.lo && a.hi <= b.hi);
}

#[test]
fn interval_shrinks_with_sample_size() {
    let shape = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let mut last = f64::INFINITY;
    for t in [10, 100, 1000, 10000] {
        let iv = norm_interval(&region(vec![0.4, 0.2], shape.clone(), t, 0.95));
        assert!(iv.contains((0.4f64 * 0.4 + 0.2 * 0.2).sqrt()));
        assert!(iv.width() < last);
        last = iv.width();
    }
}

#[test]
fn squared_interval_scales() {
    let iv = NormInterval { lo: 1.0, hi: 2.0, squared: false };
    let sq = iv.squared_scaled(3.0);
    assert_eq!((sq.lo, sq.hi, sq.squared), (3.0, 12.0, true));
}

#[test]
fn chi2_tail_examples() {
    assert!((chi2_quantile(0.95, 2) - 5.991465).abs() < 1e-6);
    assert_eq!(chi2_sf(0.0, 5), 1.0);
    let x = chi2_quantile(0.9, 7);
    assert!((chi2_sf(x, 7) - 0.1).abs() < 1e-10);
    assert!((chi2_quantile(0.95, 1) - 3.841458820694124).abs() < 1e-9);
}

#[test]
fn invalid_levels_and_empty_queries() {
    let id = DMatrix::identity(2, 2);
    assert!(matches!(
        wald_test(&DVector::zeros(2), &id, 10, 1.5),
        Err(InferenceError::Level(_))
    ));
    let model = five_process_model();
    let fit = population_fit(&model, &five_process_lags()).unwrap();
    let mut fit = fit;
    fit.t_len = 500;
    let z = FreqValue::from_angle(0.5);
    assert!(matches!(test_any_path(&fit, &[], z, 0.95), Err(InferenceError::EmptyQuery)));
    assert!(matches!(test_total_effect(&fit, &[], z, 0.95), Err(InferenceError::EmptyQuery)));
    assert!(matches!(test_spectral_contribution(&fit, &[], z, 0.95), Err(InferenceError::EmptyQuery)));
    let g = model.graph();
    let mixed = vec![
        Path::from_names(g, &["v", "w"]).unwrap(),
        Path::from_names(g, &["v", "m"]).unwrap(),
    ];
    assert!(matches!(test_any_path(&fit, &mixed, z, 0.95), Err(InferenceError::PathMismatch(_))));
}

#[test]
fn tests_report_their_degrees_of_freedom() {
    let model = five_process_model();
    let lags = five_process_lags();
    let sample = simulate(&model, 500, 3, 500, 4).unwrap();
    let fit = fit_all(&sample, &lags, model.graph(), model.contemp()).unwrap();
    let g = model.graph();
    let (u2, v, w) = (g.index_of("u2").unwrap(), g.index_of("v").unwrap(), g.index_of("w").unwrap());
    let z = FreqValue::from_angle(0.6);
    let pi = enumerate_paths(g, v, w).unwrap();
    assert_eq!(test_path_effect(&fit, &pi[0], z, 0.95).unwrap().dof, 2);
    assert_eq!(test_any_path(&fit, &pi, z, 0.95).unwrap().dof, 4);
    assert_eq!(test_total_effect(&fit, &pi, z, 0.95).unwrap().dof, 2);
    assert_eq!(test_spectral_contribution(&fit, &pi, z, 0.95).unwrap().dof, 6);
    let r = test_robust(&fit, u2, v, z, 0.95).unwrap();
    assert_eq!(r.dof, 2);
    assert!(r.reject);
    assert_eq!(r.t_len, 500);
    let (test, per) = infer_spectral_contribution(&fit, &pi, z, 0.95).unwrap();
    assert_eq!(test.dof, 6);
    for c in &per {
        assert!(c.interval.squared && c.interval.contains(c.contribution));
    }
}

#[test]
fn robust_p_values_are_uniform_under_the_null() {
    use specaus_core::fixtures::{FIVE_PROCESS_EDGES, FIVE_PROCESS_VERTICES};
    use specaus_core::graph::{ContempGraph, ProcessGraph};
    use specaus_core::SvarModel;
    let mut edges: Vec<(&str, &str)> = FIVE_PROCESS_EDGES.to_vec();
    edges.push(("u2", "m"));
    let g = ProcessGraph::new(&FIVE_PROCESS_VERTICES, &edges).unwrap();
    let g0 = ContempGraph::new(&g, &FIVE_PROCESS_EDGES).unwrap();
    let base = five_process_model();
    let mut model = SvarModel::new(g.clone(), g0, base.noise_vars().to_vec()).unwrap();
    for v in 0..base.dim() {
        for (&(u, k), &c) in base.target_coeffs(v) {
            model.set_coeff(u, v, k, c).unwrap();
        }
    }
    let (u2, m) = (g.index_of("u2").unwrap(), g.index_of("m").unwrap());
    let mut lags = five_process_lags();
    lags.insert_range(m, u2, 1..=2);
    let z = FreqValue::from_angle(1.2);
    let mut p: Vec<f64> = (0..1000u64)
        .into_par_iter()
        .map(|s| {
            let sample = simulate(&model, 2000, 3, 500, 5000 + s).unwrap();
            let fit = fit_all(&sample, &lags, &g, model.contemp()).unwrap();
            test_robust(&fit, u2, m, z, 0.95).unwrap().p_value
        })
        .collect();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = p.len() as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.1, "Kolmogorov distance {ks}");
}

proptest! {
    #[test]
    fn wald_is_invariant_under_reparameterisation(
        theta in proptest::collection::vec(-1.0f64..1.0, 3),
        a in proptest::collection::vec(-1.0f64..1.0, 9),
        b in proptest::collection::vec(-1.0f64..1.0, 9),
    ) {
        let a = DMatrix::from_vec(3, 3, a);
        let acov = &a * a.transpose() + DMatrix::identity(3, 3) * 0.1;
        let b = DMatrix::from_vec(3, 3, b) + DMatrix::identity(3, 3) * 2.0;
        prop_assume!(b.determinant().abs() > 0.1);
        let theta = DVector::from_vec(theta);
        let w1 = wald_test(&theta, &acov, 100, 0.95).unwrap();
        let w2 = wald_test(&(&b * &theta), &(&b * &acov * b.transpose()), 100, 0.95).unwrap();
        prop_assert!((w1.statistic - w2.statistic).abs() <= 1e-10 * w1.statistic.max(1.0));
        prop_assert!((0.0..=1.0).contains(&w1.p_value));
    }

    #[test]
    fn chi2_sf_decreases(x in 0.0f64..50.0, dx in 0.001f64..5.0, m in 1usize..30) {
        prop_assert!(chi2_sf(x + dx, m) <= chi2_sf(x, m));
    }

    #[test]
    fn norm_interval_brackets_the_centre(
        c in proptest::collection::vec(-3.0f64..3.0, 4),
        a in proptest::collection::vec(-1.0f64..1.0, 16),
        t in 5usize..500,
    ) {
        let a = DMatrix::from_vec(4, 4, a);
        let shape = &a * a.transpose() + DMatrix::identity(4, 4) * 0.01;
        let r = region(c.clone(), shape, t, 0.95);
        let iv = norm_interval(&r);
        let n = DVector::from_vec(c).norm();
        prop_assert!(iv.lo <= n + 1e-12 && n <= iv.hi + 1e-12);
        prop_assert!(iv.lo >= 0.0);
    }
}
