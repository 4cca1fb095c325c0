use std::path::Path;

use rsbb::cutting_set::robust_cutting_set;
use rsbb::pooling::{build_dual_counterpart, build_pq, load_instance, PerturbationMode};
use rsbb::rsbb::{solve_rsbb, SolveConfig};
use rsbb::uncertainty::{SetKind, UncertaintySet};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let cfg = SolveConfig::default();
    for name in ["haverly1", "haverly2", "haverly3"] {
        let inst = load_instance(&dir.join(format!("{name}.json"))).expect("instance");
        let pooled = build_pq(&inst, PerturbationMode::Equal);
        for kind in [SetKind::Box, SetKind::Polyhedral, SetKind::Ellipsoidal] {
            for size in [0.05, 0.15, 0.3] {
                let set = UncertaintySet::new(kind, size).unwrap();
                let t = std::time::Instant::now();
                let rs = solve_rsbb(&pooled.problem, &set, &cfg).expect("rsbb");
                let t_rs = t.elapsed().as_secs_f64() * 1e3;
                let cut = robust_cutting_set(&pooled.problem, &set, cfg.delta, true, &cfg)
                    .map(|r| r.objective)
                    .unwrap_or(f64::NAN);
                let dual = match build_dual_counterpart(&inst, PerturbationMode::Equal, &set) {
                    Ok(p) => solve_rsbb(&p, &UncertaintySet::nominal(), &cfg)
                        .map(|s| s.objective)
                        .unwrap_or(f64::NAN),
                    Err(_) => f64::NAN,
                };
                println!(
                    "{name:<9} {:<11} {size:.2}  rsbb {:>10.4} ({:>3} nodes, {:>2} cuts, {:>6.0} ms, {:?})  cutting {:>10.4}  dual {:>10.4}",
                    kind.as_str(),
                    rs.objective,
                    rs.nodes_explored,
                    rs.cut_rounds,
                    t_rs,
                    rs.termination,
                    cut,
                    dual
                );
            }
        }
    }
}
