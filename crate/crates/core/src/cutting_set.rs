//! Robust cutting-set loops: the per-node infeasibility test and the
//! standalone cutting-set method.

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::qcqp::{QcqpProblem, VariableBox};
use crate::rsbb::{solve_rsbb_with_store, SolveConfig, Termination};
use crate::slp::{solve_local_multistart, LocalOutcome};
use crate::uncertainty::{extract_affine, SampleStore, UncertaintySet};

pub const DEFAULT_DELTA: f64 = 1e-6;
pub const DEFAULT_MAX_ROUNDS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatedConstraint {
    pub constraint: usize,
    pub xi: Vec<f64>,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRoundLog {
    pub round: usize,
    pub violated: Vec<ViolatedConstraint>,
    pub objective_after: f64,
}

/// Constraints whose worst case at `point` exceeds `delta`, in declaration order.
pub fn violated_constraints(
    problem: &QcqpProblem,
    point: &[f64],
    set: &UncertaintySet,
    delta: f64,
) -> Vec<ViolatedConstraint> {
    problem
        .uncertain
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let (a0, a) = extract_affine(c, point);
            let (xi, value) = set.worst_case(a0, &a);
            (value > delta).then_some(ViolatedConstraint {
                constraint: i,
                xi,
                violation: value,
            })
        })
        .collect()
}

/// Append every violator to the store; returns how many were new.
fn append_cuts(
    store: &mut SampleStore,
    violated: &[ViolatedConstraint],
    set: &UncertaintySet,
) -> Result<usize, SolveError> {
    let mut added = 0;
    for v in violated {
        if store.add_sample(v.constraint, v.xi.clone(), set)? {
            added += 1;
        }
    }
    Ok(added)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub point: Vec<f64>,
    /// `+∞` when the re-solve lost feasibility.
    pub objective: f64,
    pub rounds: Vec<CutRoundLog>,
    pub samples_added: usize,
}

impl TestOutcome {
    pub fn certified(&self) -> bool {
        self.objective.is_finite()
    }
}

/// Certify `x_star` against the oracle, cutting and re-solving locally on
/// `node_box` until no constraint is violated by more than `delta`.
#[allow(clippy::too_many_arguments)]
pub fn infeasibility_test(
    problem: &QcqpProblem,
    x_star: &[f64],
    objective: f64,
    store: &mut SampleStore,
    set: &UncertaintySet,
    delta: f64,
    node_box: &VariableBox,
    max_rounds: usize,
) -> Result<TestOutcome, SolveError> {
    if delta <= 0.0 {
        return Err(SolveError::Invalid("delta must be positive".into()));
    }
    let mut point = x_star.to_vec();
    let mut objective = objective;
    let mut rounds = Vec::new();
    let mut samples_added = 0;
    loop {
        let violated = violated_constraints(problem, &point, set, delta);
        if violated.is_empty() {
            return Ok(TestOutcome {
                point,
                objective,
                rounds,
                samples_added,
            });
        }
        if rounds.len() >= max_rounds {
            return Err(SolveError::CutRoundLimit(max_rounds));
        }
        let added = append_cuts(store, &violated, set)?;
        samples_added += added;
        let resolved = if added == 0 {
            None
        } else {
            let starts = [point.clone(), node_box.midpoint()];
            Some(solve_local_multistart(problem, node_box, store, &starts)?)
        };
        let value = resolved.as_ref().map_or(f64::INFINITY, LocalOutcome::value);
        rounds.push(CutRoundLog {
            round: rounds.len() + 1,
            violated,
            objective_after: value,
        });
        match resolved {
            Some(out) if out.is_optimal() => {
                point = out.point;
                objective = out.objective;
            }
            _ => {
                return Ok(TestOutcome {
                    point,
                    objective: f64::INFINITY,
                    rounds,
                    samples_added,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuttingSetResult {
    pub point: Vec<f64>,
    pub objective: f64,
    pub rounds: Vec<CutRoundLog>,
    pub store: SampleStore,
    /// Branch-and-bound nodes summed over all inner global solves.
    pub inner_nodes: usize,
}

/// Standalone cutting-set method. With `use_global` each inner problem is
/// solved to global optimality by branch-and-bound on the sampled problem;
/// otherwise a multistart local solve is used.
pub fn robust_cutting_set(
    problem: &QcqpProblem,
    set: &UncertaintySet,
    delta: f64,
    use_global: bool,
    config: &SolveConfig,
) -> Result<CuttingSetResult, SolveError> {
    if delta <= 0.0 {
        return Err(SolveError::Invalid("delta must be positive".into()));
    }
    let mut store = SampleStore::nominal(problem);
    let mut rounds: Vec<CutRoundLog> = Vec::new();
    let mut inner_nodes = 0;
    let inner_config = SolveConfig {
        delta,
        ..config.clone()
    };
    loop {
        let (point, objective) = if use_global {
            let inner =
                solve_rsbb_with_store(problem, &UncertaintySet::nominal(), store.clone(), &inner_config)?;
            inner_nodes += inner.nodes_explored;
            match (inner.termination, inner.point) {
                (Termination::RobustInfeasible, _) | (_, None) => {
                    return Err(SolveError::RobustInfeasible)
                }
                (_, Some(p)) => (p, inner.objective),
            }
        } else {
            let starts = [problem.bounds.midpoint(), problem.bounds.lower.clone()];
            let out = solve_local_multistart(problem, &problem.bounds, &store, &starts)?;
            if !out.is_optimal() {
                return Err(SolveError::RobustInfeasible);
            }
            (out.point, out.objective)
        };
        if let Some(last) = rounds.last_mut() {
            last.objective_after = objective;
        }
        let violated = violated_constraints(problem, &point, set, delta);
        if violated.is_empty() {
            return Ok(CuttingSetResult {
                point,
                objective,
                rounds,
                store,
                inner_nodes,
            });
        }
        if rounds.len() >= config.max_cut_rounds {
            return Err(SolveError::CutRoundLimit(config.max_cut_rounds));
        }
        if append_cuts(&mut store, &violated, set)? == 0 {
            return Err(SolveError::Invalid(
                "oracle returned an already sampled point as violated".into(),
            ));
        }
        rounds.push(CutRoundLog {
            round: rounds.len() + 1,
            violated,
            objective_after: f64::NAN,
        });
    }
}
