use std::sync::Arc;

use poclab::kernel::{
    box_event_probability, eval_single_site, exact_box_distribution, gibbs_specification, properness_check,
};
use poclab::models::{ConstantKernel, IsingKernel, StavskayaKernel, VoterKernel};
use poclab::sampler::{sample_coupled_monotone, BoundaryCondition};
use poclab::{Color, ColorSpace, Configuration, Kernel, SiteId, SiteSpace, TimeBox};
use proptest::prelude::*;

fn spin(c: Color) -> f64 {
    if c == Color(1) {
        1.0
    } else {
        -1.0
    }
}

fn random_configuration(len: usize, bits: u64) -> Configuration {
    let mut c = Configuration::empty(len);
    for i in 0..len {
        c.set(SiteId::from_index(i), Color((bits >> (i % 64) & 1) as u8));
    }
    c
}

fn box_of(space: &Arc<SiteSpace>, keys: &[(i64, i64)]) -> TimeBox {
    TimeBox::from_keys(space.clone(), keys).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ising_law_is_logistic_in_the_local_field(beta in 0.01f64..3.0, h in -3.0f64..3.0, a: bool, b: bool) {
        let space = SiteSpace::z2_window(2, 2).unwrap();
        let kernel = IsingKernel::new(beta, h).unwrap();
        let x = space.site((1, 1)).unwrap();
        let mut past = Configuration::empty(space.len());
        past.set(space.site((1, 0)).unwrap(), Color(a as u8));
        past.set(space.site((0, 1)).unwrap(), Color(b as u8));
        let s = spin(Color(a as u8)) + spin(Color(b as u8)) + h;
        let plus = 1.0 / (1.0 + (-2.0 * beta * s).exp());
        let got = eval_single_site(&kernel, &space, x, Color(1), &past).unwrap();
        prop_assert!((got - plus).abs() < 1e-12);
    }

    #[test]
    fn zero_field_ising_is_the_voter_kernel(beta in 0.01f64..3.0, a: bool, b: bool) {
        let space = SiteSpace::z2_window(2, 2).unwrap();
        let ising = IsingKernel::new(beta, 0.0).unwrap();
        let voter = VoterKernel::from_beta(beta).unwrap();
        let x = space.site((1, 1)).unwrap();
        let mut past = Configuration::empty(space.len());
        past.set(space.site((1, 0)).unwrap(), Color(a as u8));
        past.set(space.site((0, 1)).unwrap(), Color(b as u8));
        for c in [Color(0), Color(1)] {
            let p = eval_single_site(&ising, &space, x, c, &past).unwrap();
            let q = eval_single_site(&voter, &space, x, c, &past).unwrap();
            prop_assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn boxes_are_normalized_and_consistent(beta in 0.05f64..1.5, h in -1.0f64..1.0, bits: u64) {
        let space = Arc::new(SiteSpace::z2_window(3, 3).unwrap());
        let kernel = IsingKernel::new(beta, h).unwrap();
        let boundary = random_configuration(space.len(), bits);
        let outer = box_of(&space, &[(1, 1), (2, 1), (1, 2), (2, 2), (3, 1)]);
        let inner = box_of(&space, &[(1, 1), (2, 1), (3, 1)]);
        let joint = exact_box_distribution(&kernel, &outer, &boundary).unwrap();
        prop_assert!((joint.total() - 1.0).abs() < 1e-12);
        let marginal = joint.marginal(inner.sites()).unwrap();
        let direct = exact_box_distribution(&kernel, &inner, &boundary).unwrap();
        prop_assert_eq!(marginal.sites(), direct.sites());
        for (a, b) in marginal.probs().iter().zip(direct.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stavskaya_survival_is_monotone_in_p(p in 0.0f64..0.99, dp in 0.0f64..0.01) {
        let space = Arc::new(SiteSpace::z2_window(3, 3).unwrap());
        let tbox = TimeBox::z2_interior(space.clone()).unwrap();
        let top = space.site((3, 3)).unwrap();
        let boundary = Configuration::constant(space.len(), Color(1));
        let alive = |p: f64| {
            let kernel = StavskayaKernel::new(p).unwrap();
            box_event_probability(&kernel, &tbox, &boundary, |c| c.get(top) == Some(Color(1))).unwrap()
        };
        prop_assert!(alive(p) <= alive(p + dp) + 1e-12);
    }

    #[test]
    fn ising_correlations_are_nonnegative(beta in 0.05f64..1.5, h in -1.0f64..1.0, plus: bool) {
        let space = Arc::new(SiteSpace::z2_window(2, 2).unwrap());
        let tbox = TimeBox::z2_interior(space.clone()).unwrap();
        let kernel = IsingKernel::new(beta, h).unwrap();
        let boundary = Configuration::constant(space.len(), Color(plus as u8));
        let joint = exact_box_distribution(&kernel, &tbox, &boundary).unwrap();
        let sites = joint.sites().to_vec();
        let mean = |f: &dyn Fn(&[Color]) -> f64| {
            joint.probs().iter().enumerate().map(|(i, p)| p * f(&joint.decode(i))).sum::<f64>()
        };
        for i in 0..sites.len() {
            for j in i + 1..sites.len() {
                let cov = mean(&|c| spin(c[i]) * spin(c[j])) - mean(&|c| spin(c[i])) * mean(&|c| spin(c[j]));
                prop_assert!(cov > -1e-12, "cov {cov}");
            }
        }
    }

    #[test]
    fn gibbs_single_site_matches_the_product_formula(beta in 0.05f64..2.0, h in -1.0f64..1.0, bits: u64) {
        let space = SiteSpace::z2_window(3, 3).unwrap();
        let kernel = IsingKernel::new(beta, h).unwrap();
        let x = space.site((1, 2)).unwrap();
        let surround = random_configuration(space.len(), bits);
        let spec = gibbs_specification(&kernel, &space, &[x], &surround).unwrap();
        let futures = [space.site((2, 2)).unwrap(), space.site((1, 3)).unwrap()];
        let weight = |c: Color| {
            let mut eta = surround.clone();
            eta.set(x, c);
            let own = eval_single_site(&kernel, &space, x, c, &eta).unwrap();
            futures
                .iter()
                .map(|&z| eval_single_site(&kernel, &space, z, eta.get(z).unwrap(), &eta).unwrap())
                .product::<f64>()
                * own
        };
        let (w0, w1) = (weight(Color(0)), weight(Color(1)));
        prop_assert!((spec.probs()[1] - w1 / (w0 + w1)).abs() < 1e-12);
    }

    #[test]
    fn coupled_samples_are_ordered(beta in 0.05f64..1.5, h in -1.0f64..1.0, seed: u64) {
        let space = Arc::new(SiteSpace::z2_window(6, 6).unwrap());
        let tbox = TimeBox::z2_interior(space.clone()).unwrap();
        let kernel = IsingKernel::new(beta, h).unwrap();
        let (lo, hi) =
            sample_coupled_monotone(&kernel, &tbox, &BoundaryCondition::Minus, &BoundaryCondition::Plus, seed)
                .unwrap();
        prop_assert!(lo.le_on(&hi, tbox.sites()));
    }
}

#[test]
fn lattice_models_are_proper() {
    let space = SiteSpace::z2_window(8, 8).unwrap();
    let kernels: Vec<Box<dyn Kernel>> = vec![
        Box::new(IsingKernel::new(0.7, -0.3).unwrap()),
        Box::new(VoterKernel::new(0.2).unwrap()),
        Box::new(StavskayaKernel::new(0.6).unwrap()),
    ];
    for k in &kernels {
        let report = properness_check(&**k, &space, 2000, 5);
        assert!(report.is_proper(), "{}: {:?}", k.label(), report.normalization);
        assert!(report.truncated > 0);
    }
}

#[test]
fn constant_kernel_ignores_the_past() {
    let space = Arc::new(SiteSpace::z2_window(2, 2).unwrap());
    let tbox = TimeBox::z2_interior(space.clone()).unwrap();
    let kernel = ConstantKernel::new(ColorSpace::occupation(), vec![0.25, 0.75]).unwrap();
    let joint = exact_box_distribution(&kernel, &tbox, &Configuration::constant(space.len(), Color(0))).unwrap();
    for (i, p) in joint.probs().iter().enumerate() {
        let ones = joint.decode(i).iter().filter(|c| **c == Color(1)).count() as i32;
        assert!((p - 0.75f64.powi(ones) * 0.25f64.powi(4 - ones)).abs() < 1e-12);
    }
}

#[test]
fn stavskaya_extremes() {
    let space = Arc::new(SiteSpace::z2_window(3, 3).unwrap());
    let tbox = TimeBox::z2_interior(space.clone()).unwrap();
    let ones = Configuration::constant(space.len(), Color(1));
    let zeros = Configuration::constant(space.len(), Color(0));
    let all_one = |c: &Configuration| tbox.sites().iter().all(|&s| c.get(s) == Some(Color(1)));
    let all_zero = |c: &Configuration| tbox.sites().iter().all(|&s| c.get(s) == Some(Color(0)));
    let dead = StavskayaKernel::new(0.0).unwrap();
    let sure = StavskayaKernel::new(1.0).unwrap();
    assert_eq!(box_event_probability(&dead, &tbox, &ones, all_zero).unwrap(), 1.0);
    assert_eq!(box_event_probability(&sure, &tbox, &ones, all_one).unwrap(), 1.0);
    let half = StavskayaKernel::new(0.5).unwrap();
    assert_eq!(box_event_probability(&half, &tbox, &zeros, all_zero).unwrap(), 1.0);
}
