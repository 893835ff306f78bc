mod support;

use mmclab::hdfe::{fit_hdfe, linear_combination_test, max_group_mean, within_transform, RegressionSpec, SeKind};
use mmclab::{Frame, Groups};
use proptest::prelude::*;
use support::{dummy_ols, random_instance, rel_err, Instance};

fn frame_of(inst: &Instance) -> Frame {
    let mut f = Frame::new();
    f.push_num("y", inst.y.clone()).unwrap();
    for (j, x) in inst.xs.iter().enumerate() {
        f.push_num(&format!("x{j}"), x.clone()).unwrap();
    }
    for (d, l) in inst.labels.iter().enumerate() {
        f.push_num(&format!("g{d}"), l.iter().map(|&v| v as f64).collect()).unwrap();
    }
    f
}

fn spec_of(inst: &Instance, se: SeKind) -> RegressionSpec {
    let covs: Vec<String> = (0..inst.xs.len()).map(|j| format!("x{j}")).collect();
    let fes: Vec<String> = (0..inst.labels.len()).map(|d| format!("g{d}")).collect();
    let c: Vec<&str> = covs.iter().map(String::as_str).collect();
    let f: Vec<&str> = fes.iter().map(String::as_str).collect();
    let mut s = RegressionSpec::new("y", &c, &f);
    s.se_kind = se;
    s
}

fn groups_of(inst: &Instance) -> Vec<Groups> {
    inst.labels.iter().map(|l| Groups::from_keys(l)).collect()
}

#[test]
fn three_dim_toy_matches_dummy_residuals() {
    let inst = random_instance(17, 200, 2, &[12, 9, 7], false);
    let fit = fit_hdfe(&frame_of(&inst), &spec_of(&inst, SeKind::Classical)).unwrap();
    let oracle = dummy_ols(&inst.y, &inst.xs, &groups_of(&inst));
    assert!(fit.converged);
    for (a, b) in fit.residuals.iter().zip(&oracle.resid) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
    for (a, b) in fit.coef.iter().zip(&oracle.beta) {
        assert!(rel_err(*a, *b) <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn two_dim_covariances_match_oracle() {
    let inst = random_instance(5, 400, 3, &[30, 20], false);
    let groups = groups_of(&inst);
    let oracle = dummy_ols(&inst.y, &inst.xs, &groups);
    for (kind, cov) in [(SeKind::Classical, &oracle.cov_classical), (SeKind::Robust, &oracle.cov_hc1)] {
        let fit = fit_hdfe(&frame_of(&inst), &spec_of(&inst, kind)).unwrap();
        assert_eq!(fit.names.len() + fit.n_absorbed, oracle.rank);
        assert!(fit.absorbed_exact);
        for i in 0..3 {
            for j in 0..3 {
                assert!(rel_err(fit.cov[(i, j)], cov[(i, j)]) <= 1e-7, "{kind}: ({i},{j})");
            }
        }
    }
}

#[test]
fn lincom_with_negatively_correlated_coefficients() {
    // x1 nearly equals x0, so the two slopes are strongly negatively correlated.
    let mut inst = random_instance(8, 300, 2, &[15], false);
    for i in 0..inst.y.len() {
        inst.xs[1][i] = inst.xs[0][i] + 0.05 * inst.xs[1][i];
    }
    let oracle = dummy_ols(&inst.y, &inst.xs, &groups_of(&inst));
    let fit = fit_hdfe(&frame_of(&inst), &spec_of(&inst, SeKind::Classical)).unwrap();
    let lc = linear_combination_test(&fit, &[("x0", 1.0), ("x1", 1.0)], 0.95).unwrap();
    let c = &oracle.cov_classical;
    let want = (c[(0, 0)] + c[(1, 1)] + 2.0 * c[(0, 1)]).sqrt();
    assert!(c[(0, 1)] < 0.0);
    assert!(rel_err(lc.se, want) <= 1e-7);
    assert!(lc.se < fit.se[0] + fit.se[1]);
}

#[test]
fn exact_linear_response_has_no_residual() {
    let inst = random_instance(2, 300, 2, &[10, 8], false);
    let groups = groups_of(&inst);
    let mut f = frame_of(&inst);
    let fe: Vec<f64> = (0..inst.y.len())
        .map(|i| groups[0].codes[i] as f64 * 0.5 - groups[1].codes[i] as f64)
        .collect();
    let y: Vec<f64> = (0..inst.y.len()).map(|i| 2.0 * inst.xs[0][i] - inst.xs[1][i] + fe[i]).collect();
    f.push_num("y", y.clone()).unwrap();
    let mut spec = spec_of(&inst, SeKind::Robust);
    spec.tol = 1e-12;
    let fit = fit_hdfe(&f, &spec).unwrap();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    assert!(fit.rss <= 1e-16 * tss, "rss {} tss {}", fit.rss, tss);
}

#[test]
fn demeaned_group_means_vanish() {
    let inst = random_instance(23, 1000, 1, &[40, 25, 10], true);
    let groups = groups_of(&inst);
    let mut cols = vec![inst.y.clone(), inst.xs[0].clone()];
    let tol = 1e-8;
    let r = within_transform(&mut cols, &groups, tol, 10_000);
    assert!(r.converged);
    for c in &cols {
        assert!(max_group_mean(c, &groups) <= 10.0 * tol);
    }
}

#[test]
fn interaction_fe_by_name() {
    let inst = random_instance(31, 600, 2, &[6, 9], true);
    let mut f = frame_of(&inst);
    // g2 is g0*g1; naming the interaction must give the same fit.
    f.push_num("g2", vec![0.0; inst.y.len()]).unwrap();
    let spec = RegressionSpec::new("y", &["x0", "x1"], &["g0", "g1", "g0*g1"]);
    let a = fit_hdfe(&f, &spec).unwrap();
    let oracle = dummy_ols(&inst.y, &inst.xs, &groups_of(&inst));
    for (x, y) in a.coef.iter().zip(&oracle.beta) {
        assert!(rel_err(*x, *y) <= 1e-8);
    }
}

#[test]
fn non_convergence_is_reported_not_fatal() {
    let inst = random_instance(3, 500, 1, &[50, 50], false);
    let mut spec = spec_of(&inst, SeKind::Robust);
    spec.max_iter = 1;
    spec.tol = 1e-14;
    let fit = fit_hdfe(&frame_of(&inst), &spec).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.iterations, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matches_dummy_ols(seed in any::<u64>(), n in 300usize..800, l0 in 2u32..15, l1 in 2u32..12, interact in any::<bool>()) {
        let inst = random_instance(seed, n, 2, &[l0, l1], interact);
        let groups = groups_of(&inst);
        let oracle = dummy_ols(&inst.y, &inst.xs, &groups);
        prop_assume!(n > oracle.rank + 2);
        let fit = fit_hdfe(&frame_of(&inst), &spec_of(&inst, SeKind::Robust)).unwrap();
        prop_assume!(fit.dropped.is_empty());
        for (a, b) in fit.coef.iter().zip(&oracle.beta) {
            prop_assert!(rel_err(*a, *b) <= 1e-8, "{} vs {}", a, b);
        }
    }

    #[test]
    fn row_order_does_not_matter(seed in any::<u64>(), shift in 1usize..199) {
        let inst = random_instance(seed, 200, 2, &[8, 6], false);
        let f = frame_of(&inst);
        let rows: Vec<usize> = (0..200).map(|i| (i * 7 + shift) % 200).collect();
        let g = f.take_rows(&rows);
        let spec = spec_of(&inst, SeKind::Robust);
        let a = fit_hdfe(&f, &spec).unwrap();
        let b = fit_hdfe(&g, &spec).unwrap();
        for (x, y) in a.coef.iter().zip(&b.coef) {
            prop_assert!(rel_err(*x, *y) <= 1e-10);
        }
        for (x, y) in a.se.iter().zip(&b.se) {
            prop_assert!(rel_err(*x, *y) <= 1e-10);
        }
    }

    #[test]
    fn column_scaling(seed in any::<u64>(), c in prop_oneof![-50.0f64..-0.02, 0.02f64..50.0]) {
        let inst = random_instance(seed, 250, 3, &[10, 7], false);
        // The stopping rule is absolute, so compare fully converged fits.
        let mut spec = spec_of(&inst, SeKind::Robust);
        spec.tol = 1e-13;
        let a = fit_hdfe(&frame_of(&inst), &spec).unwrap();
        let mut scaled = frame_of(&inst);
        scaled.push_num("x1", inst.xs[1].iter().map(|v| v * c).collect()).unwrap();
        let b = fit_hdfe(&scaled, &spec).unwrap();
        prop_assert!(rel_err(b.coef[1] * c, a.coef[1]) <= 1e-10);
        prop_assert!(rel_err(b.se[1] * c.abs(), a.se[1]) <= 1e-10);
        for j in [0, 2] {
            prop_assert!(rel_err(b.coef[j], a.coef[j]) <= 1e-10);
            prop_assert!(rel_err(b.se[j], a.se[j]) <= 1e-10);
        }
    }
}
