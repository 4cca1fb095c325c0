//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's solvers.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rsbb::qcqp::{QcqpProblem, QuadExpr, UncertainConstraint, VariableBox};

/// Solve the square system `m x = r` by Gaussian elimination.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(p, c);
        r.swap(p, c);
        for i in c + 1..n {
            let f = m[i][c] / m[c][c];
            for k in c..n {
                m[i][k] -= f * m[c][k];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// `min cᵀx` over `a x ≤ b`, `lo ≤ x ≤ hi` (all finite) by enumerating
/// every basic solution. Returns `None` when infeasible.
pub fn vertex_lp_min(
    c: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let n = c.len();
    // Every inequality as (coeffs, rhs) in ≤ form.
    let mut cons: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), hi[j]));
        e[j] = -1.0;
        cons.push((e, -lo[j]));
    }
    let feasible = |x: &[f64]| {
        cons.iter().all(|(row, rhs)| {
            let act: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
            act <= rhs + 1e-7 * (1.0 + rhs.abs())
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    let m = cons.len();
    if n == 0 {
        return Some((0.0, vec![]));
    }
    loop {
        let mat: Vec<Vec<f64>> = idx.iter().map(|&k| cons[k].0.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&k| cons[k].1).collect();
        if let Some(x) = solve_dense(mat, rhs) {
            if feasible(&x) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, x));
                }
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for k in i + 1..n {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Minimum of `f` over a uniform grid of the box with `steps` intervals per
/// axis, among points accepted by `feasible`.
pub fn grid_min(
    bounds: &VariableBox,
    steps: usize,
    f: impl Fn(&[f64]) -> f64,
    feasible: impl Fn(&[f64]) -> bool,
) -> Option<(f64, Vec<f64>)> {
    let n = bounds.len();
    let mut counter = vec![0usize; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut x = vec![0.0; n];
    loop {
        for i in 0..n {
            x[i] = bounds.lower[i] + bounds.width(i) * counter[i] as f64 / steps as f64;
        }
        if feasible(&x) {
            let v = f(&x);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, x.clone()));
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            counter[i] += 1;
            if counter[i] <= steps {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
    }
}

fn coef(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    (rng.gen::<f64>() * 2.0 - 1.0) * scale
}

/// Random problem on `[0,1]^n` with bilinear objective, one certain
/// bilinear row and one uncertain row `base + ξ·p(x) ≤ 0`, `ξ ∈ [-1,1]`,
/// where `p ≥ 0` on the box. The origin is always robust feasible.
pub fn random_bilinear(rng: &mut ChaCha8Rng, n: usize) -> QcqpProblem {
    let names = (0..n).map(|i| format!("x{i}")).collect();
    let mut p = QcqpProblem::new(names, VariableBox::new(vec![0.0; n], vec![1.0; n]));
    let mut obj = QuadExpr::new();
    for i in 0..n {
        obj.add_linear(i, coef(rng, 1.0));
        for j in i..n {
            obj.add_bilinear(i, j, coef(rng, 2.0));
        }
    }
    p.objective = obj;
    let mut row = QuadExpr::constant(-0.3 - rng.gen::<f64>());
    for i in 0..n {
        row.add_linear(i, coef(rng, 1.0));
        for j in i + 1..n {
            row.add_bilinear(i, j, coef(rng, 1.0));
        }
    }
    p.add_le("certain", row);
    let mut base = QuadExpr::constant(-0.2 - rng.gen::<f64>());
    let mut pert = QuadExpr::new();
    for i in 0..n {
        base.add_linear(i, coef(rng, 1.0));
        pert.add_linear(i, 0.5 * rng.gen::<f64>());
        for j in i + 1..n {
            base.add_bilinear(i, j, coef(rng, 1.5));
            pert.add_bilinear(i, j, rng.gen::<f64>());
        }
    }
    p.add_uncertain(UncertainConstraint {
        name: "uncertain".into(),
        base,
        perturbations: vec![(0, pert)],
        xi_dim: 1,
        group: 0,
    });
    p
}

/// Feasibility of a random problem at `x` for sampled values of `ξ`.
pub fn feasible_for(problem: &QcqpProblem, x: &[f64], xis: &[f64]) -> bool {
    problem.constraints.iter().all(|c| c.expr.eval(x) <= 1e-9)
        && problem.uncertain.iter().all(|u| {
            xis.iter().all(|&xi| {
                let mut v = u.base.eval(x);
                for (_, pert) in &u.perturbations {
                    v += xi * pert.eval(x);
                }
                v <= 1e-9
            })
        })
}

/// Coarse grid search followed by a fine grid on a window around the
/// coarse minimizer.
pub fn grid_min_refined(
    bounds: &VariableBox,
    steps: usize,
    fine_steps: usize,
    f: impl Fn(&[f64]) -> f64,
    feasible: impl Fn(&[f64]) -> bool,
) -> Option<(f64, Vec<f64>)> {
    let (v, x) = grid_min(bounds, steps, &f, &feasible)?;
    let lower = (0..x.len())
        .map(|i| (x[i] - 2.0 * bounds.width(i) / steps as f64).max(bounds.lower[i]))
        .collect();
    let upper = (0..x.len())
        .map(|i| (x[i] + 2.0 * bounds.width(i) / steps as f64).min(bounds.upper[i]))
        .collect();
    let window = VariableBox::new(lower, upper);
    let fine = grid_min(&window, fine_steps, &f, &feasible)?;
    Some(if fine.0 < v { fine } else { (v, x) })
}
