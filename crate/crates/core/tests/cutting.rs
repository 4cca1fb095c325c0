mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsbb::cutting_set::{robust_cutting_set, violated_constraints, DEFAULT_DELTA};
use rsbb::rsbb::SolveConfig;
use rsbb::toy::{toy_problem, toy_set};
use rsbb::uncertainty::{extract_affine, SetKind, UncertaintySet};

#[test]
fn toy_cutting_set_is_certified_by_sampling() {
    let p = toy_problem();
    let set = toy_set();
    let res = robust_cutting_set(&p, &set, DEFAULT_DELTA, true, &SolveConfig::default()).unwrap();
    assert!((res.objective + 0.36).abs() < 5e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..10_000 {
        let xi = vec![rng.gen_range(-set.size..=set.size)];
        for u in &p.uncertain {
            assert!(u.at_xi(&xi).eval(&res.point) <= DEFAULT_DELTA);
        }
    }
}

#[test]
fn objective_after_each_round_never_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for kind in [SetKind::Box, SetKind::Ellipsoidal, SetKind::Polyhedral] {
        for _ in 0..6 {
            let p = common::random_bilinear(&mut rng, 2);
            let set = UncertaintySet::new(kind, 1.0).unwrap();
            let res = robust_cutting_set(&p, &set, DEFAULT_DELTA, true, &SolveConfig::default()).unwrap();
            assert!(violated_constraints(&p, &res.point, &set, DEFAULT_DELTA).is_empty());
            let mut prev = f64::NEG_INFINITY;
            for r in &res.rounds {
                assert!(r.objective_after >= prev - 1e-6, "{kind}: {} < {prev}", r.objective_after);
                prev = r.objective_after;
            }
            // Each stored sample came from the oracle and lies in the set.
            for i in 0..res.store.n_constraints() {
                for xi in res.store.samples(i) {
                    assert!(set.contains(xi, 1e-12));
                }
            }
            let (a0, a) = extract_affine(&p.uncertain[0], &res.point);
            assert!(set.worst_case(a0, &a).1 <= DEFAULT_DELTA);
        }
    }
}
