use rsbb::simplex::{solve_lp, LpProblem, LpRow, RowSense};

fn main() {
    // max 3x + 2y  s.t.  x + y <= 4,  x + 3y >= 2,  0 <= x <= 3,  0 <= y
    let lp = LpProblem {
        objective: vec![-3.0, -2.0],
        obj_constant: 0.0,
        lower: vec![0.0, 0.0],
        upper: vec![3.0, f64::INFINITY],
        rows: vec![
            LpRow::le(vec![(0, 1.0), (1, 1.0)], 4.0),
            LpRow { coeffs: vec![(0, 1.0), (1, 3.0)], sense: RowSense::Ge, rhs: 2.0 },
        ],
    };
    let out = solve_lp(&lp, None).unwrap();
    println!("{:?} after {} pivots", out.status, out.iterations);
    println!("x = {:?}  objective {}  duals {:?}", out.x, out.objective, out.duals);

    let warm = solve_lp(&lp, out.basis.as_ref()).unwrap();
    println!("warm start: {} pivots", warm.iterations);
}
