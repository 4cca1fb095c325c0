//! In-memory representation of bilinear QCQPs whose constraints may carry
//! coefficients that are affine in a zero-centred uncertainty vector `ξ`.
//!
//! Every constraint is stored in `expr ≤ 0` form. Equalities are kept as a
//! pair of inequalities sharing a tag so that relaxations, linearizations and
//! cutting planes treat both sides uniformly.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::ModelError;

/// Per-variable bounds of the decision domain.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl VariableBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors differ in length");
        Self { lower, upper }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Clamp a point into the box.
    pub fn project(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&l, &u))| x.max(l).min(u))
            .collect()
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        point.len() == self.len()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&x, (&l, &u))| x >= l - tol && x <= u + tol)
    }

    /// Split along `var` at `at`, returning the (down, up) children.
    pub fn split(&self, var: usize, at: f64) -> (VariableBox, VariableBox) {
        let mut down = self.clone();
        let mut up = self.clone();
        down.upper[var] = at;
        up.lower[var] = at;
        (down, up)
    }
}

/// `constant + Σ linear + Σ bilinear`, with bilinear keys ordered `(b, j)`,
/// `b ≤ j`. A key `(b, b)` is the square `x_b²`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadExpr {
    pub constant: f64,
    pub linear: BTreeMap<usize, f64>,
    pub bilinear: BTreeMap<(usize, usize), f64>,
}

impl QuadExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            ..Self::default()
        }
    }

    pub fn with_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn with_linear(mut self, var: usize, coef: f64) -> Self {
        self.add_linear(var, coef);
        self
    }

    pub fn with_bilinear(mut self, a: usize, b: usize, coef: f64) -> Self {
        self.add_bilinear(a, b, coef);
        self
    }

    pub fn add_linear(&mut self, var: usize, coef: f64) {
        *self.linear.entry(var).or_insert(0.0) += coef;
    }

    pub fn add_bilinear(&mut self, a: usize, b: usize, coef: f64) {
        let key = if a <= b { (a, b) } else { (b, a) };
        *self.bilinear.entry(key).or_insert(0.0) += coef;
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &QuadExpr, scale: f64) {
        self.constant += scale * other.constant;
        for (&v, &c) in &other.linear {
            self.add_linear(v, scale * c);
        }
        for (&(a, b), &c) in &other.bilinear {
            self.add_bilinear(a, b, scale * c);
        }
    }

    pub fn scaled(&self, scale: f64) -> QuadExpr {
        let mut out = QuadExpr::new();
        out.add_scaled(self, scale);
        out
    }

    /// Drop exact-zero coefficients and reorder any `(j, b)` key with `j > b`.
    pub fn canonicalize(&mut self) {
        let bilinear = std::mem::take(&mut self.bilinear);
        for ((a, b), c) in bilinear {
            self.add_bilinear(a, b, c);
        }
        self.linear.retain(|_, c| *c != 0.0);
        self.bilinear.retain(|_, c| *c != 0.0);
    }

    pub fn is_canonical(&self) -> bool {
        self.bilinear.keys().all(|&(a, b)| a <= b)
    }

    pub fn is_linear(&self) -> bool {
        self.bilinear.values().all(|&c| c == 0.0)
    }

    /// Largest variable index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        let lin = self.linear.keys().next_back().copied();
        let bil = self.bilinear.keys().map(|&(_, b)| b).max();
        lin.max(bil)
    }

    /// Evaluate at `point`, which must cover every referenced index.
    pub fn eval(&self, point: &[f64]) -> f64 {
        let mut value = self.constant;
        for (&v, &c) in &self.linear {
            value += c * point[v];
        }
        for (&(a, b), &c) in &self.bilinear {
            value += c * point[a] * point[b];
        }
        value
    }

    /// Gradient at `point` as a sparse map.
    pub fn gradient(&self, point: &[f64]) -> BTreeMap<usize, f64> {
        let mut grad = self.linear.clone();
        for (&(a, b), &c) in &self.bilinear {
            *grad.entry(a).or_insert(0.0) += c * point[b];
            *grad.entry(b).or_insert(0.0) += c * point[a];
        }
        grad
    }

    /// Interval enclosure of the expression over `bounds`.
    pub fn interval(&self, bounds: &VariableBox) -> (f64, f64) {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (&v, &c) in &self.linear {
            let (a, b) = (c * bounds.lower[v], c * bounds.upper[v]);
            lo += a.min(b);
            hi += a.max(b);
        }
        for (&(a, b), &c) in &self.bilinear {
            let (pl, pu) = product_range(
                bounds.lower[a],
                bounds.upper[a],
                bounds.lower[b],
                bounds.upper[b],
                a == b,
            );
            let (x, y) = (c * pl, c * pu);
            lo += x.min(y);
            hi += x.max(y);
        }
        (lo, hi)
    }
}

/// Range of `x_a · x_b` over the rectangle, exact for squares.
pub fn product_range(la: f64, ua: f64, lb: f64, ub: f64, square: bool) -> (f64, f64) {
    if square {
        let hi = (la * la).max(ua * ua);
        let lo = if la <= 0.0 && ua >= 0.0 {
            0.0
        } else {
            (la * la).min(ua * ua)
        };
        return (lo, hi);
    }
    let corners = [la * lb, la * ub, ua * lb, ua * ub];
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// A certain constraint `expr ≤ 0`. Rows produced from one equality share
/// the same `equality_tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: QuadExpr,
    pub equality_tag: Option<usize>,
}

/// `base(x) + Σ_k ξ_k · perturbation_k(x) ≤ 0` for every `ξ` in the set.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainConstraint {
    pub name: String,
    pub base: QuadExpr,
    /// `(ξ index, expression)` pairs; indices are `< xi_dim`.
    pub perturbations: Vec<(usize, QuadExpr)>,
    pub xi_dim: usize,
    pub group: usize,
}

impl UncertainConstraint {
    /// Instantiate the constraint at a fixed `ξ`.
    pub fn at_xi(&self, xi: &[f64]) -> QuadExpr {
        let mut expr = self.base.clone();
        for (k, pert) in &self.perturbations {
            if xi[*k] != 0.0 {
                expr.add_scaled(pert, xi[*k]);
            }
        }
        expr
    }

    pub fn eval(&self, point: &[f64], xi: &[f64]) -> Result<f64, ModelError> {
        if xi.len() != self.xi_dim {
            return Err(ModelError::DimensionMismatch {
                what: "uncertainty vector",
                expected: self.xi_dim,
                got: xi.len(),
            });
        }
        let mut value = self.base.eval(point);
        for (k, pert) in &self.perturbations {
            value += xi[*k] * pert.eval(point);
        }
        Ok(value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpProblem {
    pub names: Vec<String>,
    pub bounds: VariableBox,
    /// Minimized.
    pub objective: QuadExpr,
    pub constraints: Vec<Constraint>,
    pub uncertain: Vec<UncertainConstraint>,
}

impl QcqpProblem {
    pub fn new(names: Vec<String>, bounds: VariableBox) -> Self {
        assert_eq!(names.len(), bounds.len());
        Self {
            names,
            bounds,
            objective: QuadExpr::new(),
            constraints: Vec::new(),
            uncertain: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_le(&mut self, name: impl Into<String>, expr: QuadExpr) {
        self.constraints.push(Constraint {
            name: name.into(),
            expr,
            equality_tag: None,
        });
    }

    /// Stores `expr = 0` as the pair `expr ≤ 0`, `-expr ≤ 0`.
    pub fn add_eq(&mut self, name: impl Into<String>, expr: QuadExpr) {
        let name = name.into();
        let tag = self
            .constraints
            .iter()
            .filter_map(|c| c.equality_tag)
            .max()
            .map_or(0, |t| t + 1);
        let neg = expr.scaled(-1.0);
        self.constraints.push(Constraint {
            name: format!("{name}[le]"),
            expr,
            equality_tag: Some(tag),
        });
        self.constraints.push(Constraint {
            name: format!("{name}[ge]"),
            expr: neg,
            equality_tag: Some(tag),
        });
    }

    pub fn add_uncertain(&mut self, constraint: UncertainConstraint) -> usize {
        self.uncertain.push(constraint);
        self.uncertain.len() - 1
    }

    pub fn eval_objective(&self, point: &[f64]) -> Result<f64, ModelError> {
        self.check_point(point)?;
        Ok(self.objective.eval(point))
    }

    pub fn check_point(&self, point: &[f64]) -> Result<(), ModelError> {
        if point.len() != self.n_vars() {
            return Err(ModelError::DimensionMismatch {
                what: "point",
                expected: self.n_vars(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Every expression of the problem, in a stable order.
    pub fn expressions(&self) -> impl Iterator<Item = &QuadExpr> {
        std::iter::once(&self.objective)
            .chain(self.constraints.iter().map(|c| &c.expr))
            .chain(self.uncertain.iter().flat_map(|u| {
                std::iter::once(&u.base).chain(u.perturbations.iter().map(|(_, e)| e))
            }))
    }

    /// Structural checks: finite ordered bounds, indices in range, canonical keys.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        let n = self.n_vars();
        if self.bounds.len() != n {
            report.push(Violation::IndexOutOfRange {
                location: "bounds".into(),
                index: self.bounds.len(),
                n_vars: n,
            });
        }
        for i in 0..self.bounds.len() {
            let (l, u) = (self.bounds.lower[i], self.bounds.upper[i]);
            if !l.is_finite() || !u.is_finite() {
                report.push(Violation::NonCompactDomain { var: i });
            } else if l > u {
                report.push(Violation::InvertedBounds { var: i });
            }
        }
        let mut check = |location: String, expr: &QuadExpr| {
            if let Some(idx) = expr.max_index() {
                if idx >= n {
                    report.push(Violation::IndexOutOfRange {
                        location: location.clone(),
                        index: idx,
                        n_vars: n,
                    });
                }
            }
            if !expr.is_canonical() {
                report.push(Violation::NonCanonical { location });
            }
        };
        check("objective".into(), &self.objective);
        for c in &self.constraints {
            check(format!("constraint {}", c.name), &c.expr);
        }
        for u in &self.uncertain {
            check(format!("uncertain {} base", u.name), &u.base);
            for (k, e) in &u.perturbations {
                check(format!("uncertain {} perturbation {k}", u.name), e);
            }
        }
        for u in &self.uncertain {
            if let Some(&(k, _)) = u.perturbations.iter().find(|(k, _)| *k >= u.xi_dim) {
                report.push(Violation::XiIndexOutOfRange {
                    constraint: u.name.clone(),
                    index: k,
                    dim: u.xi_dim,
                });
            }
        }
        report
    }

    /// Largest violation over certain constraints at `point`.
    pub fn certain_violation(&self, point: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.expr.eval(point))
            .fold(0.0, f64::max)
    }
}

/// One finding from [`QcqpProblem::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonCompactDomain { var: usize },
    InvertedBounds { var: usize },
    IndexOutOfRange { location: String, index: usize, n_vars: usize },
    XiIndexOutOfRange { constraint: String, index: usize, dim: usize },
    NonCanonical { location: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonCompactDomain { var } => {
                write!(f, "non-compact domain: variable {var} has an infinite bound")
            }
            Violation::InvertedBounds { var } => {
                write!(f, "inverted bounds: variable {var} has lower > upper")
            }
            Violation::IndexOutOfRange {
                location,
                index,
                n_vars,
            } => write!(
                f,
                "index out of range: {location} references variable {index} (n_vars = {n_vars})"
            ),
            Violation::XiIndexOutOfRange {
                constraint,
                index,
                dim,
            } => write!(
                f,
                "index out of range: {constraint} uses uncertainty component {index} (dim = {dim})"
            ),
            Violation::NonCanonical { location } => {
                write!(f, "non-canonical bilinear key in {location}")
            }
        }
    }
}
