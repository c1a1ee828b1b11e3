use std::sync::Arc;

use poclab::criteria::closed_form::{
    ising_dp_boundary_zero_field, ising_gamma, ising_px, stavskaya_gamma, stavskaya_px,
};
use poclab::criteria::{
    apply_kernel, dobrushin_gamma, dp_decision, dust_rate_matrix, dusting_audit, max_perc_params,
    uniformity_constant, Decision, TestFunction,
};
use poclab::models::{ConstantKernel, IsingKernel, StavskayaKernel};
use poclab::{Color, ColorSpace, Configuration, Kernel, SiteSpace, TimeBox};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ising_rates_match_closed_forms(beta in 0.02f64..3.0, h in -3.0f64..3.0) {
        let space = SiteSpace::z2_window(3, 3).unwrap();
        let kernel = IsingKernel::new(beta, h).unwrap();
        let alpha = dust_rate_matrix(&kernel, &space).unwrap();
        let gamma = dobrushin_gamma(&alpha).gamma;
        prop_assert!((gamma - ising_gamma(beta, h)).abs() < 1e-9, "{gamma}");
        let px = max_perc_params(&kernel, &space).unwrap();
        prop_assert!((px.sup() - ising_px(beta, h)).abs() < 1e-9);
        for (y, row) in alpha.rows() {
            let p = px.values.iter().find(|e| e.0 == *y).unwrap().1;
            for (_, a) in row {
                prop_assert!(*a <= p + 1e-12, "alpha {a} above p {p}");
            }
        }
    }

    #[test]
    fn stavskaya_rates_match_closed_forms(p in 0.0f64..1.0) {
        let space = SiteSpace::z2_window(3, 3).unwrap();
        let kernel = StavskayaKernel::new(p).unwrap();
        let alpha = dust_rate_matrix(&kernel, &space).unwrap();
        prop_assert!((dobrushin_gamma(&alpha).gamma - stavskaya_gamma(p)).abs() < 1e-12);
        prop_assert!((max_perc_params(&kernel, &space).unwrap().sup() - stavskaya_px(p)).abs() < 1e-12);
    }

    #[test]
    fn total_variation_bounds_expectation_gaps(
        raw_mu in proptest::collection::vec(0.01f64..1.0, 2..5),
        seed in proptest::collection::vec(0.01f64..1.0, 4),
        values in proptest::collection::vec(-5.0f64..5.0, 4),
    ) {
        let n = raw_mu.len();
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<f64>>() };
        let mu = norm(&raw_mu);
        let nu = norm(&seed[..n]);
        let space = SiteSpace::chain(0, 0).unwrap();
        let x = space.sites().next().unwrap();
        let f = TestFunction::new(vec![x], n, values[..n].to_vec()).unwrap();
        let tv: f64 = mu.iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        let gap = (f.expectation(&mu).unwrap() - f.expectation(&nu).unwrap()).abs();
        prop_assert!(gap <= f.oscillation(x) * tv + 1e-12);
        if n == 2 {
            prop_assert!((gap - f.oscillation(x) * tv).abs() < 1e-12);
        }
    }

    #[test]
    fn dusting_never_exceeds_its_bound(beta in 0.05f64..2.0, h in -1.0f64..1.0, table in proptest::collection::vec(-1.0f64..1.0, 8)) {
        let space = SiteSpace::z2_window(3, 3).unwrap();
        let kernel = IsingKernel::new(beta, h).unwrap();
        let alpha = dust_rate_matrix(&kernel, &space).unwrap();
        let support = space.sites_at(&[(2, 2), (1, 2), (2, 1)]).unwrap();
        let f = TestFunction::new(support, 2, table).unwrap();
        let y = space.site((2, 2)).unwrap();
        let report = dusting_audit(&kernel, &space, &alpha, &f, y).unwrap();
        prop_assert_eq!(report.violations, 0);
        prop_assert!(report.cases.iter().all(|c| c.slack >= -1e-12));
    }
}

#[test]
fn kernel_action_leaves_functions_of_other_sites_alone() {
    let space = SiteSpace::z2_window(3, 3).unwrap();
    let kernel = StavskayaKernel::new(0.3).unwrap();
    let support = space.sites_at(&[(1, 1), (3, 2)]).unwrap();
    let f = TestFunction::new(support.clone(), 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
    let y = space.site((2, 3)).unwrap();
    let g = apply_kernel(&kernel, &space, y, &f).unwrap();
    assert_eq!(g.support(), f.support());
    assert_eq!(g.table(), f.table());
}

#[test]
fn kernel_action_averages_over_the_site_law() {
    let space = SiteSpace::z2_window(2, 2).unwrap();
    let kernel = IsingKernel::new(0.4, 0.1).unwrap();
    let y = space.site((1, 1)).unwrap();
    let f = TestFunction::indicator(y, Color(1), 2);
    let g = apply_kernel(&kernel, &space, y, &f).unwrap();
    let past = space.sites_at(&[(0, 1), (1, 0)]).unwrap();
    assert_eq!(g.support(), past.as_slice());
    for (i, v) in g.table().iter().enumerate() {
        let s = [(i >> 1) & 1, i & 1].iter().map(|b| if *b == 1 { 1.0 } else { -1.0 }).sum::<f64>() + 0.1;
        let plus = 1.0 / (1.0 + (-0.8 * s).exp());
        assert!((v - plus).abs() < 1e-12);
    }
}

#[test]
fn constant_kernels_are_uniformly_bounded() {
    let space = Arc::new(SiteSpace::z2_window(2, 2).unwrap());
    let tbox = TimeBox::z2_interior(space.clone()).unwrap();
    let kernel = ConstantKernel::new(ColorSpace::occupation(), vec![0.4, 0.6]).unwrap();
    let top = space.site((2, 2)).unwrap();
    let report = uniformity_constant(&kernel, &tbox, |c: &Configuration| c.get(top) == Some(Color(1))).unwrap();
    assert!((report.c - 1.0).abs() < 1e-12);
    assert!((report.max - 0.6).abs() < 1e-12);

    let alpha = dust_rate_matrix(&kernel, &space).unwrap();
    assert_eq!(dobrushin_gamma(&alpha).gamma, 0.0);
    assert_eq!(max_perc_params(&kernel, &space).unwrap().sup(), 0.0);
}

#[test]
fn uniformity_of_a_two_site_ising_box() {
    let space = Arc::new(SiteSpace::z2_window(2, 1).unwrap());
    let tbox = TimeBox::from_keys(space.clone(), &[(1, 1), (2, 1)]).unwrap();
    let beta = 0.3;
    let kernel = IsingKernel::new(beta, 0.0).unwrap();
    let right = space.site((2, 1)).unwrap();
    let report = uniformity_constant(&kernel, &tbox, |c: &Configuration| c.get(right) == Some(Color(1))).unwrap();
    let p = |s: f64| 1.0 / (1.0 + (-2.0 * beta * s).exp());
    let prob = |a: f64, b: f64, c: f64| {
        let left_plus = p(a + b);
        left_plus * p(1.0 + c) + (1.0 - left_plus) * p(-1.0 + c)
    };
    let mut probs = Vec::new();
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            for c in [-1.0, 1.0] {
                probs.push(prob(a, b, c));
            }
        }
    }
    let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = probs.iter().copied().fold(0.0, f64::max);
    assert!((report.c - lo / hi).abs() < 1e-12, "{} vs {}", report.c, lo / hi);
}

#[test]
fn dp_decisions() {
    assert_eq!(dp_decision(0.4, 0.5).unwrap().decision, Decision::Uniqueness);
    assert_eq!(dp_decision(0.5, 0.5).unwrap().decision, Decision::Inconclusive);
    assert!(dp_decision(0.1, 0.0).is_err());
    assert!(dp_decision(0.1, 1.5).is_err());
    let beta = ising_dp_boundary_zero_field(0.5);
    assert!((ising_px(beta, 0.0) - 0.5).abs() < 1e-12);
    assert!((beta - 0.274653).abs() < 1e-6);
}

#[test]
fn homogeneous_kernels_use_one_row() {
    let space = SiteSpace::z2_window(2, 2).unwrap();
    let kernel = IsingKernel::new(0.5, 0.0).unwrap();
    assert!(kernel.is_homogeneous());
    let alpha = dust_rate_matrix(&kernel, &space).unwrap();
    assert!(alpha.warning.is_none());
    assert_eq!(alpha.rows().len(), 1);
    let (y, row) = alpha.rows().iter().next().unwrap();
    assert_eq!(row.len(), 2);
    assert_eq!(space.key(*y), (2, 2));
    let other = space.site((1, 1)).unwrap();
    let west = space.site((0, 1)).unwrap();
    assert!((alpha.get(&kernel, &space, other, west) - row[0].1).abs() < 1e-15);
}
