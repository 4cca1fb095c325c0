//! McCormick relaxation of a sampled QCQP over a node box.

use std::collections::BTreeMap;

use crate::error::LpError;
use crate::qcqp::{product_range, QcqpProblem, QuadExpr, VariableBox};
use crate::simplex::{solve_lp, Basis, LpOutcome, LpProblem, LpRow};
use crate::uncertainty::SampleStore;

/// Linear relaxation with one auxiliary column per distinct bilinear pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedLp {
    pub n_orig: usize,
    pub lp: LpProblem,
    /// `(b, j)` with `b ≤ j` mapped to its auxiliary column.
    pub pair_index: BTreeMap<(usize, usize), usize>,
}

impl RelaxedLp {
    pub fn n_total(&self) -> usize {
        self.lp.n_cols()
    }

    pub fn var_box(&self) -> VariableBox {
        VariableBox::new(self.lp.lower.clone(), self.lp.upper.clone())
    }

    pub fn solve(&self, warm_start: Option<&Basis>) -> Result<LpOutcome, LpError> {
        solve_lp(&self.lp, warm_start)
    }
}

/// Every bilinear pair appearing anywhere in the problem, in key order.
pub fn bilinear_pairs(problem: &QcqpProblem) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = problem
        .expressions()
        .flat_map(|e| e.bilinear.keys().copied())
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// The four envelope rows of `y = x_b x_j` in `≤` form.
pub fn envelope_rows(b: usize, j: usize, y: usize, bounds: &VariableBox) -> [LpRow; 4] {
    let (lb, ub) = (bounds.lower[b], bounds.upper[b]);
    let (lj, uj) = (bounds.lower[j], bounds.upper[j]);
    // Under: y >= lj xb + lb xj - lb lj and y >= uj xb + ub xj - ub uj.
    // Over:  y <= uj xb + lb xj - lb uj and y <= lj xb + ub xj - ub lj.
    let row = |cb: f64, cj: f64, cy: f64, rhs: f64| {
        let mut coeffs = BTreeMap::new();
        *coeffs.entry(b).or_insert(0.0) += cb;
        *coeffs.entry(j).or_insert(0.0) += cj;
        *coeffs.entry(y).or_insert(0.0) += cy;
        LpRow::le(coeffs.into_iter().collect(), rhs)
    };
    [
        row(lj, lb, -1.0, lb * lj),
        row(uj, ub, -1.0, ub * uj),
        row(-uj, -lb, 1.0, -lb * uj),
        row(-lj, -ub, 1.0, -ub * lj),
    ]
}

/// `expr ≤ 0` with bilinear terms replaced by their auxiliaries.
fn linear_row(expr: &QuadExpr, pair_index: &BTreeMap<(usize, usize), usize>) -> LpRow {
    let mut coeffs: BTreeMap<usize, f64> = expr.linear.clone();
    for (key, &c) in &expr.bilinear {
        *coeffs.entry(pair_index[key]).or_insert(0.0) += c;
    }
    LpRow::le(
        coeffs.into_iter().filter(|&(_, c)| c != 0.0).collect(),
        -expr.constant,
    )
}

pub fn relax(problem: &QcqpProblem, bounds: &VariableBox, store: &SampleStore) -> RelaxedLp {
    let n = problem.n_vars();
    let pairs = bilinear_pairs(problem);
    let pair_index: BTreeMap<(usize, usize), usize> = pairs
        .iter()
        .enumerate()
        .map(|(k, &p)| (p, n + k))
        .collect();

    let mut lower = bounds.lower.clone();
    let mut upper = bounds.upper.clone();
    for &(b, j) in &pairs {
        let (lo, hi) = product_range(
            bounds.lower[b],
            bounds.upper[b],
            bounds.lower[j],
            bounds.upper[j],
            b == j,
        );
        lower.push(lo);
        upper.push(hi);
    }

    let mut rows = Vec::new();
    for &(b, j) in &pairs {
        rows.extend(envelope_rows(b, j, pair_index[&(b, j)], bounds));
    }
    for c in &problem.constraints {
        rows.push(linear_row(&c.expr, &pair_index));
    }
    for (i, c) in problem.uncertain.iter().enumerate() {
        for xi in store.samples(i) {
            rows.push(linear_row(&c.at_xi(xi), &pair_index));
        }
    }

    let mut objective = vec![0.0; n + pairs.len()];
    for (&v, &c) in &problem.objective.linear {
        objective[v] += c;
    }
    for (key, &c) in &problem.objective.bilinear {
        objective[pair_index[key]] += c;
    }

    RelaxedLp {
        n_orig: n,
        lp: LpProblem {
            objective,
            obj_constant: problem.objective.constant,
            lower,
            upper,
            rows,
        },
        pair_index,
    }
}

/// `|y_bj - x_b x_j|` for every pair at an LP solution.
pub fn approximation_errors(
    lp_solution: &[f64],
    pair_index: &BTreeMap<(usize, usize), usize>,
) -> BTreeMap<(usize, usize), f64> {
    pair_index
        .iter()
        .map(|(&(b, j), &y)| {
            let err = (lp_solution[y] - lp_solution[b] * lp_solution[j]).abs();
            ((b, j), err)
        })
        .collect()
}
