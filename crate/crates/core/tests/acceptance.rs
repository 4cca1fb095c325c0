//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero only when
//! a check fails that is not listed as a known gap.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsbb::pooling::{build_dual_counterpart, build_pq, load_instance, PerturbationMode, PoolingInstance};
use rsbb::qcqp::QcqpProblem;
use rsbb::rsbb::{solve_rsbb, solve_rsbb_with_store, RobustSolution, SolveConfig, Termination};
use rsbb::toy::{toy_problem, toy_set};
use rsbb::trace::TraceEvent;
use rsbb::uncertainty::{SampleStore, SetKind, UncertaintySet};

struct Check {
    name: String,
    ok: bool,
    /// Documented as unattainable with the shipped data or model.
    known_gap: bool,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.push(Check { name: name.into(), ok, known_gap: false });
    }

    fn gap(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.push(Check { name: name.into(), ok, known_gap: true });
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    fn unexpected(&self) -> bool {
        self.checks.iter().any(|c| !c.ok && !c.known_gap)
    }
}

/// Solutions kept for the trace invariant criterion.
#[derive(Default)]
struct Runs(Vec<(String, RobustSolution)>);

fn data(name: &str) -> Option<PoolingInstance> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("data/{name}.json"));
    path.is_file().then(|| load_instance(&path).expect("shipped instance parses"))
}

fn criterion_1(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::default();
    let p = toy_problem();
    let t = Instant::now();
    let sol = solve_rsbb(&p, &toy_set(), &SolveConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    c.check(format!("terminates Optimal ({:?})", sol.termination), sol.termination == Termination::Optimal);
    c.check(format!("objective {:.5} = -0.36 ± 0.005", sol.objective), (sol.objective + 0.36).abs() <= 5e-3);
    c.gap(format!("root bound {:.6} = -0.5 ± 1e-6", sol.root_lb), (sol.root_lb + 0.5).abs() <= 1e-6);
    let one_sample = sol.samples_added == 1 && sol.sample_log.first().is_some_and(|e| e.xi == [1.0]);
    c.check(format!("one sample at u = 6 ({} added)", sol.samples_added), one_sample);
    let pre_cut = sol.node_log.iter().find(|n| n.cut_rounds > 0).map(|n| n.local_objective);
    c.check(
        format!("pre-cut local objective {pre_cut:?} = -0.45 ± 0.005"),
        pre_cut.is_some_and(|z| (z + 0.45).abs() <= 5e-3),
    );
    c.check(format!("runtime {secs:.3} s < 1 s"), secs < 1.0);
    let grid = common::grid_min(&p.bounds, 1000, |x| p.objective.eval(x), |x| {
        common::feasible_for(&p, x, &[-1.0, 1.0])
    })
    .unwrap();
    c.check(
        format!("grid oracle {:.5} within 0.005", grid.0),
        (sol.objective - grid.0).abs() <= 5e-3,
    );
    runs.0.push(("toy".into(), sol));
    c
}

fn criterion_2() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Instant::now();
    let mut worst = [0.0f64; 3];
    for trial in 0..1000 {
        let dim = rng.gen_range(1..=4);
        let a0: f64 = rng.gen_range(-2.0..2.0);
        let a: Vec<f64> = (0..dim)
            .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-3.0..3.0) })
            .collect();
        let size = rng.gen_range(0.0..2.0);
        let kind = [SetKind::Box, SetKind::Polyhedral, SetKind::Ellipsoidal][trial % 3];
        let set = UncertaintySet::new(kind, size).unwrap();
        let (xi, value) = set.worst_case(a0, &a);
        let at = |xi: &[f64]| a0 + a.iter().zip(xi).map(|(p, q)| p * q).sum::<f64>();
        let mut err = (at(&xi) - value).abs();
        if !set.contains(&xi, 1e-9) {
            err = f64::INFINITY;
        }
        let reference = match kind {
            SetKind::Box => (0..1usize << dim)
                .map(|mask| {
                    let v: Vec<f64> = (0..dim).map(|k| if mask >> k & 1 == 1 { size } else { -size }).collect();
                    at(&v)
                })
                .fold(f64::NEG_INFINITY, f64::max),
            SetKind::Polyhedral => (0..2 * dim)
                .map(|k| {
                    let mut v = vec![0.0; dim];
                    v[k / 2] = if k % 2 == 0 { size } else { -size };
                    at(&v)
                })
                .fold(a0, f64::max),
            SetKind::Ellipsoidal => (0..10_000)
                .map(|_| {
                    let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                    let v: Vec<f64> = g.iter().map(|v| size * v / n).collect();
                    at(&v)
                })
                .fold(f64::NEG_INFINITY, f64::max),
        };
        let k = trial % 3;
        err = match kind {
            SetKind::Ellipsoidal => err.max(reference - value),
            _ => err.max((reference - value).abs()),
        };
        worst[k] = worst[k].max(err);
    }
    let secs = t.elapsed().as_secs_f64();
    c.check(format!("box max error {:.1e}", worst[0]), worst[0] <= 1e-6);
    c.check(format!("polyhedral max error {:.1e}", worst[1]), worst[1] <= 1e-6);
    c.check(format!("ellipsoidal max shortfall {:.1e}", worst[2]), worst[2] <= 1e-6);
    c.check(format!("runtime {secs:.2} s < 5 s"), secs < 5.0);
    c
}

fn criterion_3(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let set = UncertaintySet::new(SetKind::Box, 1.0).unwrap();
    let (mut upper_ok, mut lower_ok, mut robust_ok) = (0, 0, 0);
    let trials = 50;
    for k in 0..trials {
        let p = common::random_bilinear(&mut rng, 2);
        let nominal = solve_rsbb(&p, &UncertaintySet::nominal(), &SolveConfig::default()).unwrap();
        let mut store = SampleStore::nominal(&p);
        store.add_sample(0, vec![0.5], &set).unwrap();
        let sampled = solve_rsbb_with_store(&p, &UncertaintySet::nominal(), store, &SolveConfig::default()).unwrap();
        let robust = solve_rsbb(&p, &set, &SolveConfig::default()).unwrap();
        let (grid, _) = common::grid_min_refined(&p.bounds, 400, 400, |x| p.objective.eval(x), |x| {
            common::feasible_for(&p, x, &[-1.0, 1.0])
        })
        .unwrap();
        if grid >= sampled.lb - 1e-6 && robust.objective >= sampled.lb - 1e-6 {
            upper_ok += 1;
        }
        if sampled.objective >= nominal.lb - 1e-6 {
            lower_ok += 1;
        }
        if robust.objective <= grid + 1e-4 * (1.0 + grid.abs()) && robust.objective >= grid - 5e-3 {
            robust_ok += 1;
        }
        runs.0.push((format!("chain{k}-nominal"), nominal));
        runs.0.push((format!("chain{k}-sampled"), sampled));
        runs.0.push((format!("chain{k}-robust"), robust));
    }
    c.check(format!("grid robust ≥ sampled on {upper_ok}/{trials}"), upper_ok == trials);
    c.check(format!("sampled ≥ nominal on {lower_ok}/{trials}"), lower_ok == trials);
    c.check(format!("robust solve matches grid on {robust_ok}/{trials}"), robust_ok == trials);
    c
}

/// Single-pool oracle: for a fixed pool composition the problem is an LP
/// in the outflows, solved by vertex enumeration; the composition is swept
/// on a grid and refined.
fn single_pool_oracle(inst: &PoolingInstance) -> f64 {
    assert_eq!(inst.pools.len(), 1, "oracle handles one pool");
    let pool = &inst.pools[0].name;
    let arcs = &inst.arcs;
    let into_pool: Vec<usize> = arcs.feed_pool.iter().flatten()
        .filter(|(_, l)| l == pool)
        .map(|(i, _)| inst.feeds.iter().position(|f| &f.name == i).unwrap())
        .collect();
    assert_eq!(into_pool.len(), 2, "oracle handles two pool feeds");
    let prod = |name: &str| inst.products.iter().position(|p| p.name == name).unwrap();
    let feed = |name: &str| inst.feeds.iter().position(|p| p.name == name).unwrap();
    // Columns: pool outflows then direct flows.
    let mut cols: Vec<(Option<usize>, usize)> = arcs.pool_product.iter().flatten()
        .map(|(_, j)| (None, prod(j)))
        .collect();
    cols.extend(arcs.feed_product.iter().flatten().map(|(i, j)| (Some(feed(i)), prod(j))));
    let n = cols.len();
    let qualities = inst.qualities();

    let solve = |alpha: f64| -> f64 {
        let share = |i: usize| {
            if i == into_pool[0] { alpha } else if i == into_pool[1] { 1.0 - alpha } else { 0.0 }
        };
        let feed_frac = |col: &(Option<usize>, usize), i: usize| match col.0 {
            None => share(i),
            Some(f) => (f == i) as u8 as f64,
        };
        let mut c = vec![0.0; n];
        for (k, col) in cols.iter().enumerate() {
            let cost: f64 = (0..inst.feeds.len()).map(|i| feed_frac(col, i) * inst.feeds[i].cost).sum();
            c[k] = cost - inst.products[col.1].price;
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, f) in inst.feeds.iter().enumerate() {
            if let Some(cap) = f.availability {
                a.push(cols.iter().map(|col| feed_frac(col, i)).collect());
                b.push(cap);
            }
        }
        if let Some(cap) = inst.pools[0].capacity {
            a.push(cols.iter().map(|col| col.0.is_none() as u8 as f64).collect());
            b.push(cap);
        }
        for (j, p) in inst.products.iter().enumerate() {
            if let Some(d) = p.demand {
                a.push(cols.iter().map(|col| (col.1 == j) as u8 as f64).collect());
                b.push(d);
            }
            for q in &qualities {
                let content = |col: &(Option<usize>, usize)| -> f64 {
                    (0..inst.feeds.len()).map(|i| feed_frac(col, i) * inst.feeds[i].quality[q]).sum()
                };
                if let Some(&hi) = p.quality_upper.get(q) {
                    a.push(cols.iter().map(|col| if col.1 == j { content(col) - hi } else { 0.0 }).collect());
                    b.push(0.0);
                }
                if let Some(&lo) = p.quality_lower.get(q) {
                    a.push(cols.iter().map(|col| if col.1 == j { lo - content(col) } else { 0.0 }).collect());
                    b.push(0.0);
                }
            }
        }
        // Flows are bounded by total demand, or a large box without one.
        let big: f64 = inst.products.iter().map(|p| p.demand.unwrap_or(1e4)).sum();
        let lo = vec![0.0; n];
        let hi = vec![big; n];
        common::vertex_lp_min(&c, &a, &b, &lo, &hi).map_or(f64::INFINITY, |(v, _)| v)
    };
    let mut best = (f64::INFINITY, 0.0);
    for s in 0..=1000 {
        let alpha = s as f64 / 1000.0;
        let v = solve(alpha);
        if v < best.0 {
            best = (v, alpha);
        }
    }
    let centre = best.1;
    for s in -1000..=1000 {
        let alpha = (centre + s as f64 * 1e-6).clamp(0.0, 1.0);
        best.0 = best.0.min(solve(alpha));
    }
    best.0
}

fn criterion_4(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::default();
    let t = Instant::now();
    match data("foulds2") {
        Some(inst) => {
            let sol = solve_rsbb(&build_pq(&inst, PerturbationMode::Equal).problem, &UncertaintySet::nominal(), &SolveConfig::default()).unwrap();
            c.check(format!("foulds2 nominal {:.2} = -1100 ± 0.1%", sol.objective), (sol.objective + 1100.0).abs() <= 1.1);
        }
        None => c.gap("foulds2 nominal: instance data not shipped", false),
    }
    for name in ["haverly1", "haverly2", "haverly3", "bental4"] {
        let Some(inst) = data(name) else {
            c.gap(format!("{name}: instance data not shipped"), false);
            continue;
        };
        let problem = build_pq(&inst, PerturbationMode::Equal).problem;
        let sol = solve_rsbb(&problem, &UncertaintySet::nominal(), &SolveConfig::default()).unwrap();
        let oracle = single_pool_oracle(&inst);
        let rel = (sol.objective - oracle).abs() / oracle.abs();
        c.check(
            format!("{name} nominal {:.3} vs oracle {oracle:.3}", sol.objective),
            sol.termination == Termination::Optimal && rel <= 5e-3,
        );
        runs.0.push((format!("{name}-nominal"), sol));
    }
    let secs = t.elapsed().as_secs_f64();
    c.check(format!("runtime {secs:.1} s < 60 s"), secs < 60.0);
    c
}

fn increase(nominal: f64, robust: f64) -> f64 {
    (robust - nominal) / nominal.abs() * 100.0
}

fn criterion_5() -> Criterion {
    let mut c = Criterion::default();
    let Some(inst) = data("foulds2") else {
        c.gap("foulds2 robust increases: instance data not shipped", false);
        c.gap("foulds2 root cut rounds: instance data not shipped", false);
        return c;
    };
    let problem = build_pq(&inst, PerturbationMode::Equal).problem;
    let cfg = SolveConfig::default();
    let nominal = solve_rsbb(&problem, &UncertaintySet::nominal(), &cfg).unwrap().objective;
    for (kind, want) in [(SetKind::Box, 77.0), (SetKind::Ellipsoidal, 51.0), (SetKind::Polyhedral, 38.0)] {
        let sol = solve_rsbb(&problem, &UncertaintySet::new(kind, 0.15).unwrap(), &cfg).unwrap();
        let inc = increase(nominal, sol.objective);
        c.check(format!("{kind} increase {inc:.1}% = {want}% ± 2"), (inc - want).abs() <= 2.0);
        if kind == SetKind::Box {
            let root = sol.node_log.first().map_or(0, |n| n.cut_rounds);
            c.check(format!("root cut rounds {root} = 11 ± 2"), root.abs_diff(11) <= 2);
        }
    }
    c
}

fn criterion_6(runs: &mut Runs) -> Criterion {
    let mut c = Criterion::default();
    let t = Instant::now();
    let cfg = SolveConfig::default();
    for name in ["haverly1", "foulds2"] {
        let Some(inst) = data(name) else {
            c.gap(format!("{name}: instance data not shipped"), false);
            continue;
        };
        let problem = build_pq(&inst, PerturbationMode::Equal).problem;
        for kind in [SetKind::Box, SetKind::Polyhedral] {
            for size in [0.05, 0.15, 0.30] {
                let set = UncertaintySet::new(kind, size).unwrap();
                let path = solve_rsbb(&problem, &set, &cfg).unwrap();
                let dual_problem = build_dual_counterpart(&inst, PerturbationMode::Equal, &set).unwrap();
                let dual = solve_rsbb(&dual_problem, &UncertaintySet::nominal(), &cfg).unwrap();
                // Relative agreement, with an absolute floor for zero optima.
                let rel = (path.objective - dual.objective).abs() / dual.objective.abs().max(1.0);
                c.check(
                    format!("{name} {kind} {size}: rsbb {:.4} dual {:.4}", path.objective, dual.objective),
                    rel <= 1e-3,
                );
                runs.0.push((format!("{name}-{kind}-{size}-rsbb"), path));
                runs.0.push((format!("{name}-{kind}-{size}-dual"), dual));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    c.check(format!("runtime {secs:.1} s < 600 s"), secs < 600.0);
    c
}

fn criterion_7(runs: &Runs) -> Criterion {
    let mut c = Criterion::default();
    let mut bad_bounds = Vec::new();
    let mut bad_incumbent = Vec::new();
    for (name, sol) in &runs.0 {
        if let Err(e) = sol.trace.check_monotone(1e-9) {
            bad_bounds.push(format!("{name}: {e}"));
        }
        for r in sol.trace.records.iter().filter(|r| r.event == TraceEvent::IncumbentUpdated) {
            let tested = sol.node_log.iter().any(|n| {
                Some(n.node_id) == r.node_id && n.tested && n.certified_objective.is_some_and(f64::is_finite)
            });
            if !tested {
                bad_incumbent.push(format!("{name}: node {:?}", r.node_id));
            }
        }
    }
    c.check(format!("bound monotonicity over {} runs {:?}", runs.0.len(), bad_bounds.first()), bad_bounds.is_empty());
    c.check(format!("incumbents certified {:?}", bad_incumbent.first()), bad_incumbent.is_empty());
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::default();
    let Some(inst) = data("bental5") else {
        c.gap("bental5 smoke run: instance data not shipped", false);
        return c;
    };
    let cfg = SolveConfig {
        time_limit: Some(60.0),
        ..SolveConfig::default()
    };
    let problem: QcqpProblem = build_pq(&inst, PerturbationMode::Equal).problem;
    let sol = solve_rsbb(&problem, &UncertaintySet::new(SetKind::Ellipsoidal, 0.15).unwrap(), &cfg).unwrap();
    c.check("bental5 ellipsoidal 0.15 bound progress", sol.trace.check_monotone(1e-9).is_ok());
    c
}

fn print(id: usize, c: &Criterion, secs: f64) {
    println!("criterion {id}: {} ({secs:.1} s)", if c.passed() { "PASS" } else { "FAIL" });
    for ch in &c.checks {
        let mark = match (ch.ok, ch.known_gap) {
            (true, _) => "ok  ",
            (false, true) => "gap ",
            (false, false) => "FAIL",
        };
        println!("    [{mark}] {}", ch.name);
    }
}

fn main() {
    let mut runs = Runs::default();
    let mut unexpected = false;
    for id in 1..=8 {
        let t = Instant::now();
        let c = match id {
            1 => criterion_1(&mut runs),
            2 => criterion_2(),
            3 => criterion_3(&mut runs),
            4 => criterion_4(&mut runs),
            5 => criterion_5(),
            6 => criterion_6(&mut runs),
            7 => criterion_7(&runs),
            _ => criterion_8(),
        };
        print(id, &c, t.elapsed().as_secs_f64());
        unexpected |= c.unexpected();
    }
    if unexpected {
        std::process::exit(1);
    }
}
