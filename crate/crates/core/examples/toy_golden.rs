use rsbb::rsbb::{solve_rsbb, SolveConfig};
use rsbb::toy::{toy_problem, toy_set, xi_to_u};

fn main() {
    let sol = solve_rsbb(&toy_problem(), &toy_set(), &SolveConfig::default()).expect("solve");
    println!("termination   {:?}", sol.termination);
    println!("objective     {:.6}", sol.objective);
    println!("point         {:?}", sol.point);
    println!("root bound    {:.6}", sol.root_lb);
    println!("final bound   {:.6}  gap {:.2e}", sol.lb, sol.gap);
    println!("nodes         {}", sol.nodes_explored);
    for ev in &sol.sample_log {
        println!("sample added  node {} u = {}", ev.node_id, xi_to_u(ev.xi[0]));
    }
    for n in &sol.node_log {
        println!(
            "node {:>3} depth {:>2} lb {:>9.5} local {:>9.5} rounds {} certified {:?}",
            n.node_id, n.depth, n.lb, n.local_objective, n.cut_rounds, n.certified_objective
        );
    }
}
