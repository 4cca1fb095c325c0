//! Uncertainty sets, the closed-form worst-case oracle for constraints that
//! are affine in `ξ`, the per-constraint sample store, and dual counterpart
//! rows for box and budget sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::UncertaintyError;
use crate::qcqp::{QcqpProblem, QuadExpr, UncertainConstraint, VariableBox};

/// Sup-norm distance under which two samples are considered the same.
pub const DUPLICATE_TOL: f64 = 1e-9;
/// Slack allowed when checking that a sample lies inside its set.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    /// ℓ∞ ball of radius Ψ.
    Box,
    /// ℓ2 ball of radius Ω.
    Ellipsoidal,
    /// ℓ1 ball of radius Γ (budget set).
    Polyhedral,
}

impl SetKind {
    pub const ALL: [SetKind; 3] = [SetKind::Box, SetKind::Ellipsoidal, SetKind::Polyhedral];

    pub fn as_str(&self) -> &'static str {
        match self {
            SetKind::Box => "box",
            SetKind::Ellipsoidal => "ellipsoidal",
            SetKind::Polyhedral => "polyhedral",
        }
    }
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetKind {
    type Err = UncertaintyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "box" => Ok(SetKind::Box),
            "ellipsoidal" | "ellipsoid" => Ok(SetKind::Ellipsoidal),
            "polyhedral" | "budget" => Ok(SetKind::Polyhedral),
            other => Err(UncertaintyError::UnknownKind(other.to_string())),
        }
    }
}

/// A norm ball centred at the nominal `ξ = 0`. A size of zero is the
/// degenerate nominal set `{0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet {
    pub kind: SetKind,
    pub size: f64,
}

impl UncertaintySet {
    pub fn new(kind: SetKind, size: f64) -> Result<Self, UncertaintyError> {
        if !size.is_finite() || size < 0.0 {
            return Err(UncertaintyError::InvalidSize(size));
        }
        Ok(Self { kind, size })
    }

    pub fn nominal() -> Self {
        Self {
            kind: SetKind::Box,
            size: 0.0,
        }
    }

    /// Norm of `xi` in the set's own norm.
    pub fn norm(&self, xi: &[f64]) -> f64 {
        match self.kind {
            SetKind::Box => xi.iter().fold(0.0, |m, v| m.max(v.abs())),
            SetKind::Ellipsoidal => xi.iter().map(|v| v * v).sum::<f64>().sqrt(),
            SetKind::Polyhedral => xi.iter().map(|v| v.abs()).sum(),
        }
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        self.norm(xi) <= self.size + tol
    }

    /// Maximize `a0 + aᵀξ` over the set. Returns the maximizer and the value.
    pub fn worst_case(&self, a0: f64, a: &[f64]) -> (Vec<f64>, f64) {
        let s = self.size;
        let dim = a.len();
        match self.kind {
            SetKind::Box => {
                let xi: Vec<f64> = a.iter().map(|&ak| s * sign(ak)).collect();
                let value = a0 + s * a.iter().map(|v| v.abs()).sum::<f64>();
                (xi, value)
            }
            SetKind::Ellipsoidal => {
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return (vec![0.0; dim], a0);
                }
                let xi = a.iter().map(|&ak| s * ak / norm).collect();
                (xi, a0 + s * norm)
            }
            SetKind::Polyhedral => {
                let mut xi = vec![0.0; dim];
                let mut best: Option<(usize, f64)> = None;
                for (k, &ak) in a.iter().enumerate() {
                    if best.is_none_or(|(_, m)| ak.abs() > m) {
                        best = Some((k, ak.abs()));
                    }
                }
                match best {
                    Some((m, mag)) if mag > 0.0 => {
                        xi[m] = s * sign(a[m]);
                        (xi, a0 + s * mag)
                    }
                    _ => (xi, a0),
                }
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Closed-form lower-level solve with dimension checking.
pub fn worst_case(
    a0: f64,
    a: &[f64],
    dim: usize,
    set: &UncertaintySet,
) -> Result<(Vec<f64>, f64), UncertaintyError> {
    if a.len() != dim {
        return Err(UncertaintyError::DimensionMismatch {
            expected: dim,
            got: a.len(),
        });
    }
    Ok(set.worst_case(a0, a))
}

/// Value of the constraint as `a0 + aᵀξ` at a fixed decision point.
pub fn extract_affine(c: &UncertainConstraint, point: &[f64]) -> (f64, Vec<f64>) {
    let a0 = c.base.eval(point);
    let mut a = vec![0.0; c.xi_dim];
    for (k, pert) in &c.perturbations {
        a[*k] += pert.eval(point);
    }
    (a0, a)
}

/// Sampled `ξ` vectors for each uncertain constraint. Entry 0 of every list
/// is the nominal sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStore {
    samples: Vec<Vec<Vec<f64>>>,
}

impl SampleStore {
    /// One nominal sample per uncertain constraint of `problem`.
    pub fn nominal(problem: &QcqpProblem) -> Self {
        Self {
            samples: problem
                .uncertain
                .iter()
                .map(|c| vec![vec![0.0; c.xi_dim]])
                .collect(),
        }
    }

    pub fn n_constraints(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self, constraint: usize) -> &[Vec<f64>] {
        &self.samples[constraint]
    }

    pub fn total(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    /// Number of samples beyond the nominal ones.
    pub fn added(&self) -> usize {
        self.total() - self.samples.len()
    }

    /// Append `xi` unless an existing sample is within [`DUPLICATE_TOL`].
    pub fn add_sample(
        &mut self,
        constraint: usize,
        xi: Vec<f64>,
        set: &UncertaintySet,
    ) -> Result<bool, UncertaintyError> {
        let list = self
            .samples
            .get_mut(constraint)
            .ok_or(UncertaintyError::UnknownConstraint(constraint))?;
        let dim = list[0].len();
        if xi.len() != dim {
            return Err(UncertaintyError::DimensionMismatch {
                expected: dim,
                got: xi.len(),
            });
        }
        if !set.contains(&xi, MEMBERSHIP_TOL) {
            return Err(UncertaintyError::OutsideSet {
                excess: set.norm(&xi) - set.size,
            });
        }
        let duplicate = list.iter().any(|s| {
            s.iter()
                .zip(&xi)
                .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
        });
        if duplicate {
            return Ok(false);
        }
        list.push(xi);
        Ok(true)
    }
}

/// Rows replacing one uncertain constraint in a deterministic counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRows {
    /// All rows in `≤ 0` form.
    pub rows: Vec<QuadExpr>,
    /// Bounds of auxiliary variables requested, indexed from `first_aux`.
    pub aux_bounds: Vec<(f64, f64)>,
}

/// Sign of each perturbation over `bounds`: +1 nonnegative, -1 nonpositive.
fn perturbation_signs(
    c: &UncertainConstraint,
    bounds: &VariableBox,
) -> Result<Vec<(usize, f64, f64)>, UncertaintyError> {
    const SLACK: f64 = 1e-12;
    let mut out = Vec::with_capacity(c.perturbations.len());
    for (idx, (_, pert)) in c.perturbations.iter().enumerate() {
        let (lo, hi) = pert.interval(bounds);
        let (s, mag) = if lo >= -SLACK {
            (1.0, hi.max(0.0))
        } else if hi <= SLACK {
            (-1.0, (-lo).max(0.0))
        } else {
            return Err(UncertaintyError::SignAmbiguous {
                constraint: c.name.clone(),
                perturbation: idx,
            });
        };
        out.push((idx, s, mag));
    }
    Ok(out)
}

/// Deterministic counterpart rows for a box or budget set.
///
/// Box: `base + Ψ Σ_k |p_k| ≤ 0`. Budget: one epigraph variable `t` (index
/// `first_aux`) with `|p_k| - t ≤ 0` for every `k` and `base + Γ t ≤ 0`.
/// Each perturbation must keep a fixed sign over `bounds` so that `|p_k|`
/// is linear in the bilinear terms.
pub fn dual_rho_rows(
    c: &UncertainConstraint,
    set: &UncertaintySet,
    bounds: &VariableBox,
    first_aux: usize,
) -> Result<DualRows, UncertaintyError> {
    let signs = perturbation_signs(c, bounds)?;
    match set.kind {
        SetKind::Ellipsoidal => Err(UncertaintyError::EllipsoidalNotRepresentable),
        SetKind::Box => {
            let mut row = c.base.clone();
            for &(idx, s, _) in &signs {
                row.add_scaled(&c.perturbations[idx].1, set.size * s);
            }
            Ok(DualRows {
                rows: vec![row],
                aux_bounds: Vec::new(),
            })
        }
        SetKind::Polyhedral => {
            let t = first_aux;
            let t_max = signs.iter().map(|&(_, _, m)| m).fold(0.0, f64::max);
            let mut rows = Vec::with_capacity(signs.len() + 1);
            for &(idx, s, _) in &signs {
                rows.push(c.perturbations[idx].1.scaled(s).with_linear(t, -1.0));
            }
            rows.push(c.base.clone().with_linear(t, set.size));
            Ok(DualRows {
                rows,
                aux_bounds: vec![(0.0, t_max)],
            })
        }
    }
}

/// Replace every uncertain constraint by its dual counterpart rows.
pub fn robust_counterpart(
    problem: &QcqpProblem,
    set: &UncertaintySet,
) -> Result<QcqpProblem, UncertaintyError> {
    let mut out = problem.clone();
    out.uncertain.clear();
    for c in &problem.uncertain {
        let dual = dual_rho_rows(c, set, &out.bounds, out.n_vars())?;
        for (k, &(lo, hi)) in dual.aux_bounds.iter().enumerate() {
            out.names.push(format!("rho_t[{}]#{k}", c.name));
            out.bounds.lower.push(lo);
            out.bounds.upper.push(hi);
        }
        let n_rows = dual.rows.len();
        for (r, row) in dual.rows.into_iter().enumerate() {
            let name = if r + 1 == n_rows {
                format!("{}[robust]", c.name)
            } else {
                format!("{}[epigraph {r}]", c.name)
            };
            out.add_le(name, row);
        }
    }
    Ok(out)
}
