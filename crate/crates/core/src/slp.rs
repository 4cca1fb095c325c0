//! Local solver for the sampled problem: successive linear programming with
//! an ℓ1 penalty merit and a box trust region.

use crate::error::SolveError;
use crate::qcqp::{QcqpProblem, QuadExpr, VariableBox};
use crate::simplex::{solve_lp, LpProblem, LpRow};
use crate::uncertainty::SampleStore;

pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SlpConfig {
    pub feas_tol: f64,
    pub initial_radius: f64,
    pub min_radius: f64,
    pub max_iterations: usize,
    pub max_penalty: f64,
}

impl Default for SlpConfig {
    fn default() -> Self {
        Self {
            feas_tol: FEAS_TOL,
            initial_radius: 0.25,
            min_radius: 1e-8,
            max_iterations: 400,
            max_penalty: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalStatus {
    LocalOptimal,
    InfeasiblePoint,
    StallLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritEntry {
    pub penalty: f64,
    pub merit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub status: LocalStatus,
    pub point: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
    /// Merit after every accepted step, tagged with the penalty in force.
    pub merit_log: Vec<MeritEntry>,
}

impl LocalOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == LocalStatus::LocalOptimal
    }

    /// Objective if the point is a certified local solution, else `+∞`.
    pub fn value(&self) -> f64 {
        if self.is_optimal() {
            self.objective
        } else {
            f64::INFINITY
        }
    }
}

/// All rows of the sampled problem in `≤ 0` form.
pub fn sampled_rows(problem: &QcqpProblem, store: &SampleStore) -> Vec<QuadExpr> {
    let mut rows: Vec<QuadExpr> = problem.constraints.iter().map(|c| c.expr.clone()).collect();
    for (i, c) in problem.uncertain.iter().enumerate() {
        rows.extend(store.samples(i).iter().map(|xi| c.at_xi(xi)));
    }
    rows
}

/// Largest positive row value at `point`.
pub fn max_violation(rows: &[QuadExpr], point: &[f64]) -> f64 {
    rows.iter().map(|r| r.eval(point)).fold(0.0, f64::max)
}

fn penalty_sum(rows: &[QuadExpr], point: &[f64]) -> f64 {
    rows.iter().map(|r| r.eval(point).max(0.0)).sum()
}

pub fn solve_local(
    problem: &QcqpProblem,
    bounds: &VariableBox,
    store: &SampleStore,
    start: &[f64],
) -> Result<LocalOutcome, SolveError> {
    solve_local_with(problem, bounds, store, start, &SlpConfig::default())
}

pub fn solve_local_with(
    problem: &QcqpProblem,
    bounds: &VariableBox,
    store: &SampleStore,
    start: &[f64],
    config: &SlpConfig,
) -> Result<LocalOutcome, SolveError> {
    problem.check_point(start)?;
    if bounds.len() != problem.n_vars() {
        return Err(crate::error::ModelError::DimensionMismatch {
            what: "variable box",
            expected: problem.n_vars(),
            got: bounds.len(),
        }
        .into());
    }
    let rows = sampled_rows(problem, store);
    let n = problem.n_vars();
    let m = rows.len();
    let f = &problem.objective;

    let mut x = bounds.project(start);
    let mut mu = 10.0 * (1.0 + f.eval(&x).abs());
    let mut rho = config.initial_radius;
    let mut merit = f.eval(&x) + mu * penalty_sum(&rows, &x);
    let mut log = vec![MeritEntry { penalty: mu, merit }];
    let mut iterations = 0;

    let finish = |status: LocalStatus, x: Vec<f64>, iterations: usize, log: Vec<MeritEntry>| {
        let viol = max_violation(&rows, &x);
        let status = match status {
            LocalStatus::LocalOptimal if viol > config.feas_tol => LocalStatus::InfeasiblePoint,
            s => s,
        };
        LocalOutcome {
            status,
            objective: f.eval(&x),
            point: x,
            max_violation: viol,
            iterations,
            merit_log: log,
        }
    };

    loop {
        if iterations >= config.max_iterations {
            return Ok(finish(LocalStatus::StallLimit, x, iterations, log));
        }
        iterations += 1;

        // Linearized elastic subproblem in (d, t).
        let grad_f = f.gradient(&x);
        let mut objective = vec![0.0; n + m];
        for (&i, &g) in &grad_f {
            objective[i] = g;
        }
        let mut lower = vec![0.0; n + m];
        let mut upper = vec![f64::INFINITY; n + m];
        for i in 0..n {
            let r = rho * bounds.width(i);
            lower[i] = (bounds.lower[i] - x[i]).max(-r).min(0.0);
            upper[i] = (bounds.upper[i] - x[i]).min(r).max(0.0);
        }
        let mut lp_rows = Vec::with_capacity(m);
        for (c, row) in rows.iter().enumerate() {
            objective[n + c] = mu;
            let mut coeffs: Vec<(usize, f64)> = row.gradient(&x).into_iter().collect();
            coeffs.push((n + c, -1.0));
            lp_rows.push(LpRow::le(coeffs, -row.eval(&x)));
        }
        let lp = LpProblem {
            objective,
            obj_constant: 0.0,
            lower,
            upper,
            rows: lp_rows,
        };
        let out = match solve_lp(&lp, None) {
            Ok(o) if o.is_optimal() => o,
            _ => return Ok(finish(LocalStatus::StallLimit, x, iterations, log)),
        };

        let fx = f.eval(&x);
        let pred = merit - (fx + out.objective);
        let stationary = pred <= 1e-10 * (1.0 + merit.abs()) || rho < config.min_radius;
        if stationary {
            if max_violation(&rows, &x) <= config.feas_tol {
                return Ok(finish(LocalStatus::LocalOptimal, x, iterations, log));
            }
            if mu >= config.max_penalty {
                return Ok(finish(LocalStatus::InfeasiblePoint, x, iterations, log));
            }
            mu = (mu * 2.0).min(config.max_penalty);
            rho = rho.max(config.initial_radius);
            merit = fx + mu * penalty_sum(&rows, &x);
            log.push(MeritEntry { penalty: mu, merit });
            continue;
        }

        let trial: Vec<f64> = (0..n)
            .map(|i| (x[i] + out.x[i]).clamp(bounds.lower[i], bounds.upper[i]))
            .collect();
        let trial_merit = f.eval(&trial) + mu * penalty_sum(&rows, &trial);
        let ared = merit - trial_merit;
        let ratio = ared / pred;
        if ared > 0.0 && ratio >= 0.1 {
            x = trial;
            merit = trial_merit;
            log.push(MeritEntry { penalty: mu, merit });
            if ratio > 0.75 {
                rho = (rho * 1.5).min(1.0);
            }
        } else {
            rho *= 0.5;
        }
    }
}

/// Run from each start in order and keep the best certified result, falling
/// back to the first outcome when none is certified.
pub fn solve_local_multistart(
    problem: &QcqpProblem,
    bounds: &VariableBox,
    store: &SampleStore,
    starts: &[Vec<f64>],
) -> Result<LocalOutcome, SolveError> {
    let mut best: Option<LocalOutcome> = None;
    for start in starts {
        let out = solve_local(problem, bounds, store, start)?;
        let better = match &best {
            None => true,
            Some(b) => {
                (out.is_optimal() && !b.is_optimal())
                    || (out.is_optimal() && out.objective < b.objective - 1e-12)
            }
        };
        if better {
            best = Some(out);
        }
    }
    best.ok_or_else(|| SolveError::Invalid("no start points given".into()))
}
