use rsbb::cutting_set::{robust_cutting_set, DEFAULT_DELTA};
use rsbb::rsbb::SolveConfig;
use rsbb::toy::{toy_problem, toy_set, xi_to_u};

fn main() {
    let p = toy_problem();
    for global in [false, true] {
        let res = robust_cutting_set(&p, &toy_set(), DEFAULT_DELTA, global, &SolveConfig::default()).unwrap();
        println!("global inner solves: {global}");
        for r in &res.rounds {
            let us: Vec<f64> = r.violated.iter().map(|v| xi_to_u(v.xi[0])).collect();
            println!("  round {} cut at u = {us:?}, then f = {:.5}", r.round, r.objective_after);
        }
        println!("  robust f = {:.5} at {:?} ({} inner nodes)", res.objective, res.point, res.inner_nodes);
    }
}
