use rsbb::slp::solve_local;
use rsbb::toy::toy_problem;
use rsbb::uncertainty::SampleStore;

fn main() {
    let p = toy_problem();
    let store = SampleStore::nominal(&p);
    for start in [[0.5, 0.5], [0.9, 0.1], [0.1, 0.9], [0.0, 0.0]] {
        let out = solve_local(&p, &p.bounds, &store, &start).unwrap();
        println!(
            "start {start:?} -> {:?} f = {:.5} at ({:.4}, {:.4}) in {} iterations",
            out.status, out.objective, out.point[0], out.point[1], out.iterations
        );
    }
}
