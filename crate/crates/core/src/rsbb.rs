//! Robust spatial branch-and-bound driver.
//!
//! Each node solves the McCormick relaxation of the sampled problem for a
//! lower bound and a local solve for an upper bound candidate. Candidates
//! that beat the incumbent go through the infeasibility test, which may grow
//! the global sample store; every waiting node is then re-bounded.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cutting_set::{infeasibility_test, DEFAULT_DELTA, DEFAULT_MAX_ROUNDS};
use crate::error::SolveError;
use crate::mccormick::{approximation_errors, relax};
use crate::qcqp::{QcqpProblem, VariableBox};
use crate::simplex::{Basis, LpStatus};
use crate::slp::solve_local_multistart;
use crate::trace::{relative_gap, ConvergenceTrace, TraceEvent};
use crate::uncertainty::{SampleStore, UncertaintySet};

/// Intervals narrower than this are not branched on.
pub const MIN_WIDTH: f64 = 1e-9;
const CLIP_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Band for best-first selection.
    pub tol: f64,
    /// Relative fathoming tolerance.
    pub epsilon: f64,
    /// Robust feasibility tolerance of the oracle.
    pub delta: f64,
    pub branch_error_tol: f64,
    pub max_nodes: usize,
    pub max_cut_rounds: usize,
    /// Seconds; `None` means unlimited.
    pub time_limit: Option<f64>,
    pub strong_branch_candidates: usize,
    /// Score an infeasible strong-branching child with a zero bound instead
    /// of treating it as the best possible outcome.
    pub infeasible_child_zero_bound: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            epsilon: 1e-4,
            delta: DEFAULT_DELTA,
            branch_error_tol: 1e-6,
            max_nodes: 100_000,
            max_cut_rounds: DEFAULT_MAX_ROUNDS,
            time_limit: None,
            strong_branch_candidates: 8,
            infeasible_child_zero_bound: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = [
            ("tol", self.tol),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("branch_error_tol", self.branch_error_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolveError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.time_limit.is_some_and(|t| !(t >= 0.0)) {
            return Err(SolveError::Invalid("time limit must be nonnegative".into()));
        }
        Ok(())
    }

    /// Fathoming margin below the incumbent value `z`. Scaled so that the
    /// final relative gap stays within `epsilon` for either sign of `z`.
    pub fn fathom_margin(&self, z: f64) -> f64 {
        if !z.is_finite() {
            return 0.0;
        }
        self.epsilon * z.abs() / (1.0 + self.epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Optimal,
    TimeLimit,
    NodeLimit,
    RobustInfeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Waiting,
    Current,
    Fathomed,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub bounds: VariableBox,
    pub lb: f64,
    pub parent: Option<usize>,
    pub depth: usize,
    pub state: NodeState,
    /// Relaxation solution, original and auxiliary columns.
    pub relaxation: Vec<f64>,
    basis: Option<Basis>,
}

/// Per-node record of the local solve and certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLog {
    pub node_id: usize,
    pub depth: usize,
    pub lb: f64,
    /// Local objective before any cut (`+∞` if the solve failed).
    pub local_objective: f64,
    pub tested: bool,
    pub cut_rounds: usize,
    /// Objective after the infeasibility test, when tested.
    pub certified_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvent {
    pub node_id: usize,
    pub constraint: usize,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolution {
    pub point: Option<Vec<f64>>,
    pub objective: f64,
    pub lb: f64,
    pub root_lb: f64,
    pub gap: f64,
    pub store: SampleStore,
    pub trace: ConvergenceTrace,
    pub termination: Termination,
    pub nodes_explored: usize,
    pub cut_rounds: usize,
    pub samples_added: usize,
    pub node_log: Vec<NodeLog>,
    pub sample_log: Vec<SampleEvent>,
}

/// Remove and return every waiting node within `tol` of the best bound, in id order.
pub fn select_current(waiting: &mut Vec<Node>, tol: f64) -> Vec<Node> {
    let z_bp = waiting.iter().map(|n| n.lb).fold(f64::INFINITY, f64::min);
    let (mut current, rest): (Vec<Node>, Vec<Node>) =
        waiting.drain(..).partition(|n| n.lb - z_bp <= tol);
    *waiting = rest;
    current.sort_by_key(|n| n.id);
    for n in &mut current {
        n.state = NodeState::Current;
    }
    current
}

fn clipped_point(bounds: &VariableBox, var: usize, value: f64) -> f64 {
    let (lo, hi) = (bounds.lower[var], bounds.upper[var]);
    let w = hi - lo;
    value.clamp(lo + CLIP_FRACTION * w, hi - CLIP_FRACTION * w)
}

struct Bound {
    lb: f64,
    point: Vec<f64>,
    basis: Option<Basis>,
}

fn bound_node(
    problem: &QcqpProblem,
    store: &SampleStore,
    bounds: &VariableBox,
    warm: Option<&Basis>,
) -> Result<Option<Bound>, SolveError> {
    let relaxed = relax(problem, bounds, store);
    let out = relaxed.solve(warm)?;
    Ok(match out.status {
        LpStatus::Optimal => Some(Bound {
            lb: out.objective,
            point: out.x,
            basis: out.basis,
        }),
        _ => None,
    })
}

/// Branching variable and point for a node whose relaxation solution is
/// `point`. `None` means no variable is wide enough to split.
pub fn select_branch_var(
    problem: &QcqpProblem,
    store: &SampleStore,
    node: &Node,
    config: &SolveConfig,
) -> Result<Option<(usize, f64)>, SolveError> {
    let relaxed = relax(problem, &node.bounds, store);
    let errors = approximation_errors(&node.relaxation, &relaxed.pair_index);
    let b = &node.bounds;
    let mut worst: Option<((usize, usize), f64)> = None;
    for (&pair, &err) in &errors {
        if worst.is_none_or(|(_, e)| err > e) {
            worst = Some((pair, err));
        }
    }
    if let Some(((i, j), err)) = worst {
        if err >= config.branch_error_tol {
            let var = if b.width(j) > b.width(i) { j } else { i };
            if b.width(var) > MIN_WIDTH {
                return Ok(Some((var, clipped_point(b, var, node.relaxation[var]))));
            }
        }
    }
    pseudoscore_branch(problem, store, node, config)
}

/// Strong branching over the most promising candidates.
fn pseudoscore_branch(
    problem: &QcqpProblem,
    store: &SampleStore,
    node: &Node,
    config: &SolveConfig,
) -> Result<Option<(usize, f64)>, SolveError> {
    let b = &node.bounds;
    let n = problem.n_vars();
    let mut in_pair = vec![false; n];
    let mut weight = vec![0.0; n];
    for e in problem.expressions() {
        for &(i, j) in e.bilinear.keys() {
            in_pair[i] = true;
            in_pair[j] = true;
        }
    }
    for (&i, &c) in &problem.objective.linear {
        weight[i] += c.abs();
    }
    for (&(i, j), &c) in &problem.objective.bilinear {
        weight[i] += c.abs();
        if j != i {
            weight[j] += c.abs();
        }
    }
    let any_pair = in_pair.iter().any(|&p| p);
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| (in_pair[i] || !any_pair) && b.width(i) > MIN_WIDTH)
        .collect();
    candidates.sort_by(|&x, &y| {
        let sx = b.width(x) * (1.0 + weight[x]);
        let sy = b.width(y) * (1.0 + weight[y]);
        sy.total_cmp(&sx).then(x.cmp(&y))
    });
    candidates.truncate(config.strong_branch_candidates.max(1));
    candidates.sort_unstable();

    let mut best: Option<(usize, f64, f64)> = None;
    for &var in &candidates {
        let at = clipped_point(b, var, node.relaxation[var]);
        let (down, up) = b.split(var, at);
        let mut score = 0.0f64;
        for (child, dist) in [(down, at - b.lower[var]), (up, b.upper[var] - at)] {
            let s = match bound_node(problem, store, &child, node.basis.as_ref())? {
                Some(bd) => (bd.lb - node.lb).max(0.0) / dist,
                None if config.infeasible_child_zero_bound => (0.0 - node.lb).max(0.0) / dist,
                None => f64::INFINITY,
            };
            score = score.max(s);
        }
        if best.is_none_or(|(_, _, s)| score > s) {
            best = Some((var, at, score));
        }
    }
    Ok(best.map(|(v, at, _)| (v, at)))
}

pub fn solve_rsbb(
    problem: &QcqpProblem,
    set: &UncertaintySet,
    config: &SolveConfig,
) -> Result<RobustSolution, SolveError> {
    solve_rsbb_with_store(problem, set, SampleStore::nominal(problem), config)
}

/// Branch-and-bound starting from an existing sample store.
pub fn solve_rsbb_with_store(
    problem: &QcqpProblem,
    set: &UncertaintySet,
    store: SampleStore,
    config: &SolveConfig,
) -> Result<RobustSolution, SolveError> {
    config.validate()?;
    let issues = problem.validate();
    if !issues.is_empty() {
        let text: Vec<String> = issues.iter().map(|v| v.to_string()).collect();
        return Err(SolveError::Invalid(text.join("; ")));
    }
    if store.n_constraints() != problem.uncertain.len() {
        return Err(SolveError::Invalid("sample store does not match the problem".into()));
    }
    Driver {
        problem,
        set,
        config,
        start: Instant::now(),
        store,
        trace: ConvergenceTrace::default(),
        node_log: Vec::new(),
        sample_log: Vec::new(),
        z_bf: f64::INFINITY,
        incumbent: None,
        lb_run: f64::NEG_INFINITY,
        closed_min: f64::INFINITY,
        nodes_explored: 0,
        cut_rounds: 0,
        samples_added: 0,
        next_id: 0,
    }
    .run()
}

struct Driver<'a> {
    problem: &'a QcqpProblem,
    set: &'a UncertaintySet,
    config: &'a SolveConfig,
    start: Instant,
    store: SampleStore,
    trace: ConvergenceTrace,
    node_log: Vec<NodeLog>,
    sample_log: Vec<SampleEvent>,
    z_bf: f64,
    incumbent: Option<Vec<f64>>,
    lb_run: f64,
    /// Smallest bound among nodes removed from the tree without branching.
    closed_min: f64,
    nodes_explored: usize,
    cut_rounds: usize,
    samples_added: usize,
    next_id: usize,
}

impl Driver<'_> {
    fn wall_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    fn record(&mut self, event: TraceEvent, node_id: Option<usize>, cut_round: Option<usize>) {
        let t = self.wall_ms();
        self.trace
            .push(t, event, self.z_bf, self.lb_run, node_id, cut_round);
    }

    fn update_lb(&mut self, waiting: &[Node], pending: &[Node]) {
        let open = waiting
            .iter()
            .chain(pending)
            .map(|n| n.lb)
            .fold(f64::INFINITY, f64::min);
        let lb = open.min(self.closed_min).min(self.z_bf);
        if lb.is_finite() {
            self.lb_run = self.lb_run.max(lb);
        }
    }

    fn make_node(&mut self, bounds: VariableBox, parent: Option<&Node>) -> Result<Option<Node>, SolveError> {
        let id = self.next_id;
        self.next_id += 1;
        let warm = parent.and_then(|p| p.basis.as_ref());
        let Some(bd) = bound_node(self.problem, &self.store, &bounds, warm)? else {
            return Ok(None);
        };
        Ok(Some(Node {
            id,
            bounds,
            lb: parent.map_or(bd.lb, |p| bd.lb.max(p.lb)),
            parent: parent.map(|p| p.id),
            depth: parent.map_or(0, |p| p.depth + 1),
            state: NodeState::Waiting,
            relaxation: bd.point,
            basis: bd.basis,
        }))
    }

    fn fathomable(&self, lb: f64) -> bool {
        self.z_bf.is_finite() && lb >= self.z_bf - self.config.fathom_margin(self.z_bf)
    }

    fn close(&mut self, node: &mut Node, state: NodeState) {
        node.state = state;
        self.closed_min = self.closed_min.min(node.lb);
    }

    fn limit_hit(&self) -> Option<Termination> {
        if self
            .config
            .time_limit
            .is_some_and(|t| self.start.elapsed().as_secs_f64() >= t)
        {
            return Some(Termination::TimeLimit);
        }
        if self.nodes_explored >= self.config.max_nodes {
            return Some(Termination::NodeLimit);
        }
        None
    }

    fn run(mut self) -> Result<RobustSolution, SolveError> {
        let root = self.make_node(self.problem.bounds.clone(), None)?;
        let Some(root) = root else {
            return Ok(self.finish(Termination::RobustInfeasible, f64::NEG_INFINITY));
        };
        let root_lb = root.lb;
        self.lb_run = root.lb;
        let mut waiting = vec![root];

        let termination = loop {
            if waiting.is_empty() {
                break if self.incumbent.is_some() {
                    Termination::Optimal
                } else {
                    Termination::RobustInfeasible
                };
            }
            if let Some(t) = self.limit_hit() {
                break t;
            }
            let mut batch = select_current(&mut waiting, self.config.tol);
            batch.reverse();
            let mut grew = false;
            while let Some(mut node) = batch.pop() {
                if self.limit_hit().is_some() {
                    node.state = NodeState::Waiting;
                    waiting.push(node);
                    continue;
                }
                self.nodes_explored += 1;
                grew |= self.process(&mut node, &mut waiting)?;
                self.update_lb(&waiting, &batch);
            }
            if grew {
                self.refresh(&mut waiting)?;
            }
            self.fathom(&mut waiting);
            self.update_lb(&waiting, &[]);
        };
        Ok(self.finish(termination, root_lb))
    }

    /// Local solve, certification and branching for one node. Returns
    /// whether the store grew.
    fn process(&mut self, node: &mut Node, waiting: &mut Vec<Node>) -> Result<bool, SolveError> {
        let n = self.problem.n_vars();
        if self.fathomable(node.lb) {
            self.close(node, NodeState::Fathomed);
            self.record(TraceEvent::NodeFathomed, Some(node.id), None);
            return Ok(false);
        }
        let mut starts = vec![node.relaxation[..n].to_vec(), node.bounds.midpoint()];
        if let Some(inc) = &self.incumbent {
            starts.push(node.bounds.project(inc));
        }
        let local = solve_local_multistart(self.problem, &node.bounds, &self.store, &starts)?;
        let z_n = local.value();
        self.record(TraceEvent::NodeSolved, Some(node.id), None);
        let mut log = NodeLog {
            node_id: node.id,
            depth: node.depth,
            lb: node.lb,
            local_objective: z_n,
            tested: false,
            cut_rounds: 0,
            certified_objective: None,
        };

        let mut grew = false;
        if z_n.is_finite() && z_n <= self.z_bf {
            let test = infeasibility_test(
                self.problem,
                &local.point,
                z_n,
                &mut self.store,
                self.set,
                self.config.delta,
                &node.bounds,
                self.config.max_cut_rounds,
            )?;
            log.tested = true;
            log.cut_rounds = test.rounds.len();
            log.certified_objective = Some(test.objective);
            self.cut_rounds += test.rounds.len();
            self.samples_added += test.samples_added;
            grew = test.samples_added > 0;
            for round in &test.rounds {
                for v in &round.violated {
                    self.sample_log.push(SampleEvent {
                        node_id: node.id,
                        constraint: v.constraint,
                        xi: v.xi.clone(),
                    });
                }
                self.record(TraceEvent::CutAdded, Some(node.id), Some(round.round));
            }
            if test.certified() && test.objective < self.z_bf {
                self.z_bf = test.objective;
                self.incumbent = Some(test.point);
                self.lb_run = self.lb_run.min(self.z_bf);
                self.record(TraceEvent::IncumbentUpdated, Some(node.id), None);
            }
        }
        self.node_log.push(log);

        if self.fathomable(node.lb) {
            self.close(node, NodeState::Fathomed);
            self.record(TraceEvent::NodeFathomed, Some(node.id), None);
            return Ok(grew);
        }
        match select_branch_var(self.problem, &self.store, node, self.config)? {
            None => self.close(node, NodeState::Closed),
            Some((var, at)) => {
                node.state = NodeState::Closed;
                let (down, up) = node.bounds.split(var, at);
                for child_box in [down, up] {
                    if let Some(child) = self.make_node(child_box, Some(node))? {
                        waiting.push(child);
                    }
                }
            }
        }
        Ok(grew)
    }

    /// Re-bound every waiting node against the grown store, in bound order.
    fn refresh(&mut self, waiting: &mut Vec<Node>) -> Result<(), SolveError> {
        waiting.sort_by(|a, b| a.lb.total_cmp(&b.lb).then(a.id.cmp(&b.id)));
        let mut kept = Vec::with_capacity(waiting.len());
        for mut node in waiting.drain(..) {
            if let Some(bd) = bound_node(self.problem, &self.store, &node.bounds, node.basis.as_ref())? {
                node.lb = node.lb.max(bd.lb);
                node.relaxation = bd.point;
                node.basis = bd.basis;
                kept.push(node);
            }
        }
        kept.sort_by_key(|n| n.id);
        *waiting = kept;
        self.update_lb(waiting, &[]);
        self.record(TraceEvent::StoreRefresh, None, None);
        Ok(())
    }

    fn fathom(&mut self, waiting: &mut Vec<Node>) {
        let mut kept = Vec::with_capacity(waiting.len());
        for mut node in waiting.drain(..) {
            if self.fathomable(node.lb) {
                self.close(&mut node, NodeState::Fathomed);
                self.record(TraceEvent::NodeFathomed, Some(node.id), None);
            } else {
                kept.push(node);
            }
        }
        *waiting = kept;
    }

    fn finish(mut self, termination: Termination, root_lb: f64) -> RobustSolution {
        if termination == Termination::Optimal {
            self.lb_run = self.lb_run.max(self.closed_min.min(self.z_bf));
        }
        let gap = relative_gap(self.z_bf, self.lb_run);
        RobustSolution {
            point: self.incumbent,
            objective: self.z_bf,
            lb: self.lb_run,
            root_lb,
            gap,
            store: self.store,
            trace: self.trace,
            termination,
            nodes_explored: self.nodes_explored,
            cut_rounds: self.cut_rounds,
            samples_added: self.samples_added,
            node_log: self.node_log,
            sample_log: self.sample_log,
        }
    }
}

/// Map pair errors for a solved node, exposed for diagnostics.
pub fn node_errors(problem: &QcqpProblem, store: &SampleStore, node: &Node) -> BTreeMap<(usize, usize), f64> {
    let relaxed = relax(problem, &node.bounds, store);
    approximation_errors(&node.relaxation, &relaxed.pair_index)
}
