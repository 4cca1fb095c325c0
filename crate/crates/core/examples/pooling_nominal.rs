use std::path::Path;

use rsbb::pooling::{build_pq, load_instance, model_stats, PerturbationMode};
use rsbb::rsbb::{solve_rsbb, SolveConfig};
use rsbb::uncertainty::UncertaintySet;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for name in ["haverly1", "haverly2", "haverly3"] {
        let inst = load_instance(&dir.join(format!("{name}.json"))).expect("instance");
        let stats = model_stats(&inst);
        let pooled = build_pq(&inst, PerturbationMode::Equal);
        let t = std::time::Instant::now();
        let sol = solve_rsbb(&pooled.problem, &UncertaintySet::nominal(), &SolveConfig::default())
            .expect("solve");
        println!(
            "{name:<9} vars {:>3} qp {:>3} lp {:>3}  objective {:>10.4}  lb {:>10.4}  nodes {:>4}  {:?}  {:.0} ms",
            stats.variables,
            stats.qp_equations,
            stats.lp_equations,
            sol.objective,
            sol.lb,
            sol.nodes_explored,
            sol.termination,
            t.elapsed().as_secs_f64() * 1e3
        );
    }
}
