use rsbb::mccormick::{approximation_errors, relax};
use rsbb::toy::{toy_problem, toy_set};
use rsbb::uncertainty::SampleStore;

fn main() {
    let p = toy_problem();
    let mut store = SampleStore::nominal(&p);
    let root = relax(&p, &p.bounds, &store);
    let out = root.solve(None).unwrap();
    println!("root bound {:.4} with {} rows", out.objective, root.lp.rows.len());
    println!("errors {:?}", approximation_errors(&out.x, &root.pair_index));

    store.add_sample(0, vec![1.0], &toy_set()).unwrap();
    let cut = relax(&p, &p.bounds, &store).solve(None).unwrap();
    println!("with u = 6 sampled: {:.4}", cut.objective);

    let (left, right) = p.bounds.split(0, 0.5);
    for (name, b) in [("x1 <= 0.5", left), ("x1 >= 0.5", right)] {
        let child = relax(&p, &b, &store).solve(None).unwrap();
        println!("{name}: {:?} {:.4}", child.status, child.objective);
    }
}
