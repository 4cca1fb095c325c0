//! Dense bounded-variable primal simplex.
//!
//! Rows are written as `A x - s = 0` with one slack column per row carrying
//! the row bounds, so every constraint becomes a variable bound. Phase 1
//! adds one artificial column per violated row and minimizes their sum;
//! phase 2 minimizes the real objective from the feasible basis. The basis
//! inverse is kept explicitly and refactorized periodically.

use crate::error::LpError;

pub const PRIMAL_TOL: f64 = 1e-7;
pub const DUAL_TOL: f64 = 1e-7;
pub const PIVOT_TOL: f64 = 1e-9;
/// Bound tolerance for reported points.
pub const BOUND_TOL: f64 = 1e-9;

const REFACTOR_EVERY: usize = 64;
const DEGENERATE_STREAK: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl LpRow {
    pub fn le(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self {
            coeffs,
            sense: RowSense::Le,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    fn bounds(&self) -> (f64, f64) {
        match self.sense {
            RowSense::Le => (f64::NEG_INFINITY, self.rhs),
            RowSense::Ge => (self.rhs, f64::INFINITY),
            RowSense::Eq => (self.rhs, self.rhs),
        }
    }
}

/// `min cᵀx + c0` subject to the rows and `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub obj_constant: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let (lo, hi) = row.bounds();
            let act = row.activity(x);
            worst = worst.max(lo - act).max(act - hi);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column held at zero.
    Free,
}

/// Status of every structural and slack column, usable as a warm start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<ColStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Structural values; empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with reduced costs `c - Aᵀy`.
    pub duals: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpOutcome {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        Self {
            status,
            x: Vec::new(),
            objective,
            duals: Vec::new(),
            basis: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_lp(lp: &LpProblem, warm_start: Option<&Basis>) -> Result<LpOutcome, LpError> {
    validate(lp)?;
    let mut tab = Tableau::new(lp);
    let warm = warm_start.is_some_and(|b| tab.try_warm_start(b));
    if !warm {
        tab.cold_start();
        tab.set_phase_one_costs();
        match tab.iterate()? {
            Pivoting::Optimal => {}
            Pivoting::Unbounded => {
                return Err(LpError::Malformed("phase 1 reported unbounded".into()))
            }
        }
        let infeas: f64 = tab.artificial_sum();
        if infeas > PRIMAL_TOL * (1.0 + tab.scale) {
            return Ok(LpOutcome::without_point(LpStatus::Infeasible, tab.iterations));
        }
        tab.retire_artificials();
    }
    tab.set_phase_two_costs();
    match tab.iterate()? {
        Pivoting::Unbounded => Ok(LpOutcome::without_point(LpStatus::Unbounded, tab.iterations)),
        Pivoting::Optimal => Ok(tab.outcome()),
    }
}

fn validate(lp: &LpProblem) -> Result<(), LpError> {
    let n = lp.n_cols();
    if lp.lower.len() != n || lp.upper.len() != n {
        return Err(LpError::Malformed("bound vectors do not match objective".into()));
    }
    for j in 0..n {
        if lp.lower[j].is_nan() || lp.upper[j].is_nan() || lp.objective[j].is_nan() {
            return Err(LpError::Malformed(format!("NaN in column {j}")));
        }
    }
    for (i, row) in lp.rows.iter().enumerate() {
        if !row.rhs.is_finite() {
            return Err(LpError::Malformed(format!("row {i} has non-finite rhs")));
        }
        if row.coeffs.iter().any(|&(j, a)| j >= n || !a.is_finite()) {
            return Err(LpError::Malformed(format!("row {i} has an invalid coefficient")));
        }
    }
    Ok(())
}

enum Pivoting {
    Optimal,
    Unbounded,
}

struct Tableau<'a> {
    lp: &'a LpProblem,
    m: usize,
    n: usize,
    /// Dense row-major `m × n` structural matrix.
    a: Vec<f64>,
    /// Artificial columns: (row, sign).
    artificials: Vec<(usize, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<ColStatus>,
    /// Column basic in each row position.
    basis: Vec<usize>,
    binv: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
    scale: f64,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LpProblem) -> Self {
        let m = lp.rows.len();
        let n = lp.n_cols();
        let mut a = vec![0.0; m * n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                a[i * n + j] += v;
            }
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for row in &lp.rows {
            let (lo, hi) = row.bounds();
            lower.push(lo);
            upper.push(hi);
        }
        let scale = lp
            .rows
            .iter()
            .map(|r| r.rhs.abs())
            .chain(lp.lower.iter().chain(&lp.upper).filter(|v| v.is_finite()).map(|v| v.abs()))
            .fold(1.0, f64::max);
        Self {
            lp,
            m,
            n,
            a,
            artificials: Vec::new(),
            lower,
            upper,
            cost: vec![0.0; n + m],
            x: vec![0.0; n + m],
            status: vec![ColStatus::AtLower; n + m],
            basis: Vec::new(),
            binv: vec![0.0; m * m],
            iterations: 0,
            max_iterations: 50 * (n + 2 * m) + 1000,
            since_refactor: 0,
            scale,
        }
    }

    fn n_total(&self) -> usize {
        self.n + self.m + self.artificials.len()
    }

    /// `col_j · v` for a dense `m`-vector `v`.
    fn dot_col(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for i in 0..self.m {
                s += self.a[i * self.n + j] * v[i];
            }
            s
        } else if j < self.n + self.m {
            -v[j - self.n]
        } else {
            let (r, sgn) = self.artificials[j - self.n - self.m];
            sgn * v[r]
        }
    }

    fn fill_col(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.a[i * self.n + j];
            }
        } else if j < self.n + self.m {
            out[j - self.n] = -1.0;
        } else {
            let (r, sgn) = self.artificials[j - self.n - self.m];
            out[r] = sgn;
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        let (l, u) = (self.lower[j], self.upper[j]);
        if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    fn nonbasic_status(&self, j: usize) -> ColStatus {
        if self.lower[j].is_finite() {
            ColStatus::AtLower
        } else if self.upper[j].is_finite() {
            ColStatus::AtUpper
        } else {
            ColStatus::Free
        }
    }

    /// Structurals at a bound, feasible slacks basic, artificials covering the rest.
    fn cold_start(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.x[j] = self.nonbasic_value(j);
            self.status[j] = self.nonbasic_status(j);
        }
        self.basis = vec![usize::MAX; m];
        let mut art_rows = Vec::new();
        for i in 0..m {
            let act: f64 = (0..n).map(|j| self.a[i * n + j] * self.x[j]).sum();
            let s = n + i;
            let (lo, hi) = (self.lower[s], self.upper[s]);
            if act >= lo - PRIMAL_TOL && act <= hi + PRIMAL_TOL {
                self.x[s] = act;
                self.status[s] = ColStatus::Basic;
                self.basis[i] = s;
            } else {
                let target = if act < lo { lo } else { hi };
                self.x[s] = target;
                self.status[s] = if act < lo {
                    ColStatus::AtLower
                } else {
                    ColStatus::AtUpper
                };
                // act - target + sgn * art = 0  with art = |act - target|
                let residual = act - target;
                let sgn = -residual.signum();
                art_rows.push((i, sgn, residual.abs()));
            }
        }
        for (i, sgn, value) in art_rows {
            let col = self.n_total();
            self.artificials.push((i, sgn));
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.cost.push(0.0);
            self.x.push(value);
            self.status.push(ColStatus::Basic);
            self.basis[i] = col;
        }
        // Basis is diagonal: slack -1, artificial ±1.
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            let col = self.basis[i];
            let d = if col < n + m {
                -1.0
            } else {
                self.artificials[col - n - m].1
            };
            self.binv[i * m + i] = 1.0 / d;
        }
        self.since_refactor = 0;
    }

    fn try_warm_start(&mut self, basis: &Basis) -> bool {
        let (n, m) = (self.n, self.m);
        if basis.status.len() != n + m {
            return false;
        }
        let basic: Vec<usize> = (0..n + m)
            .filter(|&j| basis.status[j] == ColStatus::Basic)
            .collect();
        if basic.len() != m {
            return false;
        }
        for j in 0..n + m {
            let st = basis.status[j];
            let ok = match st {
                ColStatus::Basic => true,
                ColStatus::AtLower => self.lower[j].is_finite(),
                ColStatus::AtUpper => self.upper[j].is_finite(),
                ColStatus::Free => true,
            };
            if !ok {
                return false;
            }
            self.status[j] = st;
            self.x[j] = match st {
                ColStatus::AtLower => self.lower[j],
                ColStatus::AtUpper => self.upper[j],
                _ => 0.0,
            };
        }
        self.basis = basic;
        if self.refactor().is_err() {
            return false;
        }
        let feasible = self.basis.iter().all(|&j| {
            self.x[j] >= self.lower[j] - PRIMAL_TOL && self.x[j] <= self.upper[j] + PRIMAL_TOL
        });
        if !feasible {
            self.status = vec![ColStatus::AtLower; n + m];
            self.x = vec![0.0; n + m];
        }
        feasible
    }

    fn set_phase_one_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for k in 0..self.artificials.len() {
            self.cost[self.n + self.m + k] = 1.0;
        }
    }

    fn set_phase_two_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..self.n].copy_from_slice(&self.lp.objective);
    }

    fn artificial_sum(&self) -> f64 {
        (0..self.artificials.len())
            .map(|k| self.x[self.n + self.m + k].max(0.0))
            .sum()
    }

    /// Fix artificials at zero and pivot basic ones out where possible.
    fn retire_artificials(&mut self) {
        let first = self.n + self.m;
        for j in first..self.n_total() {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.status[j] != ColStatus::Basic {
                self.x[j] = 0.0;
                self.status[j] = ColStatus::AtLower;
            }
        }
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for r in 0..m {
            if self.basis[r] < first {
                continue;
            }
            // Row r of B⁻¹ times each candidate column.
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let candidate = (0..first)
                .filter(|&j| self.status[j] != ColStatus::Basic)
                .map(|j| (j, self.dot_col(j, &row)))
                .filter(|&(_, v)| v.abs() > 1e-7)
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
            if let Some((q, _)) = candidate {
                self.fill_col(q, &mut alpha);
                let col = alpha.clone();
                self.ftran(&col, &mut alpha);
                let leaving = self.basis[r];
                self.x[leaving] = 0.0;
                self.status[leaving] = ColStatus::AtLower;
                self.pivot(r, q, &alpha);
            }
        }
    }

    /// `out = B⁻¹ v`
    fn ftran(&self, v: &[f64], out: &mut [f64]) {
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
        self.basis[r] = q;
        self.status[q] = ColStatus::Basic;
        self.since_refactor += 1;
    }

    /// Rebuild B⁻¹ by Gauss-Jordan and recompute the basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut mat = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            self.fill_col(j, &mut col);
            for i in 0..m {
                mat[i * m + k] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b| mat[a * m + c].abs().total_cmp(&mat[b * m + c].abs()))
                .unwrap();
            if mat[p * m + c].abs() < 1e-12 {
                return Err(LpError::Malformed("singular basis".into()));
            }
            if p != c {
                for k in 0..m {
                    mat.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = mat[c * m + c];
            for k in 0..m {
                mat[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = mat[i * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    mat[i * m + k] -= f * mat[c * m + k];
                    inv[i * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    /// `x_B = -B⁻¹ N x_N` from the homogeneous system.
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        let mut col = vec![0.0; m];
        for j in 0..self.n_total() {
            if self.status[j] == ColStatus::Basic || self.x[j] == 0.0 {
                continue;
            }
            self.fill_col(j, &mut col);
            for i in 0..m {
                rhs[i] -= col[i] * self.x[j];
            }
        }
        let mut xb = vec![0.0; m];
        self.ftran(&rhs, &mut xb);
        for (r, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[r];
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c == 0.0 {
                continue;
            }
            for k in 0..m {
                y[k] += c * self.binv[r * m + k];
            }
        }
        y
    }

    fn iterate(&mut self) -> Result<Pivoting, LpError> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        let mut col = vec![0.0; m];
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.duals();

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (col, d, dir)
            for j in 0..self.n_total() {
                let st = self.status[j];
                if st == ColStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.cost[j] - self.dot_col(j, &y);
                let dir = match st {
                    ColStatus::AtLower if d < -DUAL_TOL => 1.0,
                    ColStatus::AtUpper if d > DUAL_TOL => -1.0,
                    ColStatus::Free if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                let better = match entering {
                    None => true,
                    Some((_, best, _)) => !bland && d.abs() > best.abs(),
                };
                if better {
                    entering = Some((j, d, dir));
                }
                if bland && entering.is_some() {
                    break;
                }
            }
            let Some((q, _, dir)) = entering else {
                return Ok(Pivoting::Optimal);
            };

            self.fill_col(q, &mut col);
            self.ftran(&col, &mut alpha);

            // Harris two-pass ratio test.
            let mut theta_max = f64::INFINITY;
            for r in 0..m {
                let a = dir * alpha[r];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[r];
                let ratio = if a > 0.0 {
                    (self.x[j] - self.lower[j] + PRIMAL_TOL) / a
                } else {
                    (self.upper[j] - self.x[j] + PRIMAL_TOL) / -a
                };
                if ratio < theta_max {
                    theta_max = ratio;
                }
            }
            let flip = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64)> = None; // (row, ratio)
            if theta_max.is_finite() {
                let mut best_mag = 0.0;
                for r in 0..m {
                    let a = dir * alpha[r];
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let j = self.basis[r];
                    let ratio = if a > 0.0 {
                        (self.x[j] - self.lower[j]) / a
                    } else {
                        (self.upper[j] - self.x[j]) / -a
                    };
                    if ratio > theta_max {
                        continue;
                    }
                    let take = match leave {
                        None => true,
                        Some((r0, _)) if bland => {
                            ratio < leave.unwrap().1 - 1e-12
                                || (ratio <= leave.unwrap().1 + 1e-12 && j < self.basis[r0])
                        }
                        Some(_) => a.abs() > best_mag,
                    };
                    if take {
                        leave = Some((r, ratio.max(0.0)));
                        best_mag = a.abs();
                    }
                }
            }

            self.iterations += 1;
            match leave {
                Some((_, theta)) if flip <= theta => self.bound_flip(q, dir, flip, &alpha),
                None if flip.is_finite() => self.bound_flip(q, dir, flip, &alpha),
                None => return Ok(Pivoting::Unbounded),
                Some((r, theta)) => {
                    for i in 0..m {
                        let j = self.basis[i];
                        self.x[j] -= theta * dir * alpha[i];
                    }
                    self.x[q] += dir * theta;
                    let leaving = self.basis[r];
                    let a = dir * alpha[r];
                    if a > 0.0 {
                        self.x[leaving] = self.lower[leaving];
                        self.status[leaving] = ColStatus::AtLower;
                    } else {
                        self.x[leaving] = self.upper[leaving];
                        self.status[leaving] = ColStatus::AtUpper;
                    }
                    self.pivot(r, q, &alpha);
                    if theta <= 1e-12 {
                        degenerate += 1;
                        if degenerate >= DEGENERATE_STREAK {
                            bland = true;
                        }
                    } else {
                        degenerate = 0;
                        bland = false;
                    }
                }
            }
        }
    }

    fn bound_flip(&mut self, q: usize, dir: f64, step: f64, alpha: &[f64]) {
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] -= step * dir * alpha[i];
        }
        if dir > 0.0 {
            self.x[q] = self.upper[q];
            self.status[q] = ColStatus::AtUpper;
        } else {
            self.x[q] = self.lower[q];
            self.status[q] = ColStatus::AtLower;
        }
    }

    fn outcome(mut self) -> LpOutcome {
        // Recompute basics from a fresh factorization for an accurate point.
        if self.refactor().is_err() {
            self.recompute_basics();
        }
        let n = self.n;
        let x: Vec<f64> = (0..n)
            .map(|j| self.x[j].max(self.lower[j]).min(self.upper[j]))
            .collect();
        let objective =
            self.lp.obj_constant + x.iter().zip(&self.lp.objective).map(|(a, b)| a * b).sum::<f64>();
        let duals = self.duals();
        let mut status = self.status[..n + self.m].to_vec();
        // A redundant row may keep a retired artificial basic; its slack then
        // stays nonbasic and the basis is not reusable.
        let reusable = status.iter().filter(|s| **s == ColStatus::Basic).count() == self.m;
        if !reusable {
            status.clear();
        }
        LpOutcome {
            status: LpStatus::Optimal,
            x,
            objective,
            duals,
            basis: reusable.then_some(Basis { status }),
            iterations: self.iterations,
        }
    }
}
