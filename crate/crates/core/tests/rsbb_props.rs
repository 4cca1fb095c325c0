mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsbb::qcqp::QcqpProblem;
use rsbb::rsbb::{solve_rsbb, SolveConfig, Termination};
use rsbb::uncertainty::{SetKind, UncertaintySet};

/// Worst case of the uncertain row is at `ξ = 1` since its perturbation is
/// nonnegative on the unit box.
fn robust_value(p: &QcqpProblem, x: &[f64]) -> f64 {
    let u = &p.uncertain[0];
    u.base.eval(x) + u.perturbations[0].1.eval(x)
}

fn config() -> SolveConfig {
    SolveConfig {
        max_nodes: 20_000,
        ..SolveConfig::default()
    }
}

#[test]
fn matches_grid_on_small_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let set = UncertaintySet::new(SetKind::Box, 1.0).unwrap();
    for k in 0..24 {
        let n = 1 + k % 2;
        let p = common::random_bilinear(&mut rng, n);
        let sol = solve_rsbb(&p, &set, &config()).unwrap();
        assert_eq!(sol.termination, Termination::Optimal, "problem {k}");
        let x = sol.point.as_ref().unwrap();
        assert!(robust_value(&p, x) <= 1e-6);
        assert!(p.constraints[0].expr.eval(x) <= 1e-6);
        assert!(sol.lb <= sol.objective + 1e-9);
        let steps = if n == 1 { 20_000 } else { 600 };
        let (grid, _) = common::grid_min(&p.bounds, steps, |x| p.objective.eval(x), |x| {
            common::feasible_for(&p, x, &[-1.0, 1.0])
        })
        .unwrap();
        assert!(sol.objective <= grid + 1e-4 * (1.0 + grid.abs()), "problem {k}: {} vs grid {grid}", sol.objective);
        assert!(sol.objective >= grid - 5e-3, "problem {k}: {} vs grid {grid}", sol.objective);
        sol.trace.check_monotone(1e-9).unwrap();
    }
}

#[test]
fn three_variables_not_worse_than_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let set = UncertaintySet::new(SetKind::Box, 1.0).unwrap();
    for k in 0..6 {
        let p = common::random_bilinear(&mut rng, 3);
        let sol = solve_rsbb(&p, &set, &config()).unwrap();
        assert_eq!(sol.termination, Termination::Optimal, "problem {k}");
        let (grid, _) = common::grid_min(&p.bounds, 40, |x| p.objective.eval(x), |x| {
            common::feasible_for(&p, x, &[-1.0, 1.0])
        })
        .unwrap();
        assert!(sol.objective <= grid + 1e-4 * (1.0 + grid.abs()));
        assert!(sol.lb <= grid + 1e-9);
    }
}

#[test]
fn runs_are_reproducible_and_logs_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let set = UncertaintySet::new(SetKind::Box, 1.0).unwrap();
    let p = common::random_bilinear(&mut rng, 2);
    let a = solve_rsbb(&p, &set, &config()).unwrap();
    let b = solve_rsbb(&p, &set, &config()).unwrap();
    assert_eq!(a.point, b.point);
    assert_eq!(a.node_log, b.node_log);
    assert_eq!(a.sample_log, b.sample_log);
    assert_eq!(a.sample_log.len(), a.samples_added);
    assert_eq!(a.store.added(), a.samples_added);
    for ev in &a.sample_log {
        assert!(a.store.samples(ev.constraint).contains(&ev.xi));
        assert!(set.contains(&ev.xi, 1e-12));
    }
}

#[test]
fn zero_size_set_is_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let p = common::random_bilinear(&mut rng, 2);
    let nominal = solve_rsbb(&p, &UncertaintySet::nominal(), &config()).unwrap();
    let zero = solve_rsbb(&p, &UncertaintySet::new(SetKind::Ellipsoidal, 0.0).unwrap(), &config()).unwrap();
    assert_eq!(nominal.samples_added, 0);
    assert_eq!(zero.samples_added, 0);
    assert!((nominal.objective - zero.objective).abs() < 1e-9);
}
