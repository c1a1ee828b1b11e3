use std::sync::Arc;

use poclab::kernel::exact_box_distribution;
use poclab::models::{IsingKernel, StavskayaKernel};
use poclab::sampler::{quantile, sample_box, sample_replicas, BoundaryCondition};
use poclab::{Color, ColorSpace, Configuration, SiteSpace, TimeBox};
use proptest::prelude::*;

proptest! {
    #[test]
    fn quantile_inverts_the_upper_tail(raw in proptest::collection::vec(0.0f64..1.0, 1..6), u in 0.0001f64..1.0) {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 0.0);
        let law: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let c = quantile(&law, u).index();
        let tail = |e: usize| law[e..].iter().sum::<f64>();
        prop_assert!(c == 0 || tail(c) >= u - 1e-12);
        if c + 1 < law.len() {
            prop_assert!(tail(c + 1) < u);
        }
    }
}

#[test]
fn quantile_draws_are_monotone_in_u() {
    let law = [0.2, 0.3, 0.5];
    let draws: Vec<usize> = (1..=100).map(|i| quantile(&law, i as f64 / 100.0).index()).collect();
    assert!(draws.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(draws[0], 2);
    assert_eq!(draws[99], 0);
}

#[test]
fn samples_depend_only_on_seed_and_replica() {
    let space = Arc::new(SiteSpace::z2_window(10, 10).unwrap());
    let tbox = TimeBox::z2_interior(space.clone()).unwrap();
    let kernel = IsingKernel::new(0.4, 0.1).unwrap();
    let a = sample_box(&kernel, &tbox, &BoundaryCondition::Plus, 7).unwrap();
    let b = sample_box(&kernel, &tbox, &BoundaryCondition::Plus, 7).unwrap();
    let c = sample_box(&kernel, &tbox, &BoundaryCondition::Plus, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let run = sample_replicas(&kernel, &tbox, &BoundaryCondition::Plus, 7, 3).unwrap();
    assert_eq!(run.view(0).to_configuration(), a);
    assert_ne!(run.view(1).colors(), run.view(2).colors());
}

#[test]
fn empirical_frequencies_match_enumeration() {
    let space = Arc::new(SiteSpace::z2_window(2, 2).unwrap());
    let tbox = TimeBox::z2_interior(space.clone()).unwrap();
    let kernel = StavskayaKernel::new(0.7).unwrap();
    let boundary = Configuration::constant(space.len(), Color(1));
    let exact = exact_box_distribution(&kernel, &tbox, &boundary).unwrap();
    let n = 40_000;
    let run = sample_replicas(&kernel, &tbox, &BoundaryCondition::Plus, 2, n).unwrap();
    let mut counts = vec![0usize; exact.len()];
    for v in run.views() {
        counts[exact.encode(&exact.sites().iter().map(|&s| v.get(s).unwrap()).collect::<Vec<_>>())] += 1;
    }
    for (k, p) in counts.iter().zip(exact.probs()) {
        let f = *k as f64 / n as f64;
        assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-9, "{f} vs {p}");
    }
    let means = run.site_means();
    assert_eq!(means.len(), 4);
}

#[test]
fn random_boundaries_follow_their_density() {
    let colors = ColorSpace::spins();
    assert!(matches!(BoundaryCondition::parse("plus", &colors).unwrap(), BoundaryCondition::Plus));
    assert!(matches!(BoundaryCondition::parse("-", &colors).unwrap(), BoundaryCondition::Minus));
    assert!(BoundaryCondition::parse("random:1.5", &colors).is_err());
    assert!(BoundaryCondition::parse("sideways", &colors).is_err());
    let BoundaryCondition::IidRandom(law) = BoundaryCondition::parse("random:0.25", &colors).unwrap() else {
        panic!("expected a random boundary");
    };
    assert_eq!(law, vec![0.75, 0.25]);

    let space = Arc::new(SiteSpace::z2_window(1, 1).unwrap());
    let tbox = TimeBox::z2_interior(space.clone()).unwrap();
    let kernel = StavskayaKernel::new(1.0).unwrap();
    let random = BoundaryCondition::IidRandom(vec![0.5, 0.5]);
    let n = 20_000;
    let run = sample_replicas(&kernel, &tbox, &random, 4, n).unwrap();
    let top = space.site((1, 1)).unwrap();
    let ones = run.views().filter(|v| v.get(top) == Some(Color(1))).count() as f64 / n as f64;
    assert!((ones - 0.75).abs() < 5.0 * (0.1875 / n as f64).sqrt(), "{ones}");
}
