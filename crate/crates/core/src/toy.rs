//! Two-variable illustrative problem used throughout the tests and examples.
//!
//! ```text
//! min  -2 x1 x2
//! s.t. u x1 x2 + 2 x1 + 2 x2 <= 3      u in [2, 6], nominal 4
//!      0.1 - (x1 - 0.5)^2 - (x2 - 0.5)^2 <= 0
//!      x2 - 0.09 x2 - 0.5 <= 0
//!      x in [0, 1]^2
//! ```
//!
//! The interval uncertainty is re-centred as `u = 4 + 2ξ` with `ξ ∈ [-1, 1]`.

use crate::qcqp::{QcqpProblem, QuadExpr, UncertainConstraint, VariableBox};
use crate::uncertainty::{SetKind, UncertaintySet};

pub const X1: usize = 0;
pub const X2: usize = 1;

pub fn toy_problem() -> QcqpProblem {
    let mut p = QcqpProblem::new(
        vec!["x1".into(), "x2".into()],
        VariableBox::new(vec![0.0, 0.0], vec![1.0, 1.0]),
    );
    p.objective = QuadExpr::new().with_bilinear(X1, X2, -2.0);

    p.add_uncertain(UncertainConstraint {
        name: "blend".into(),
        base: QuadExpr::constant(-3.0)
            .with_bilinear(X1, X2, 4.0)
            .with_linear(X1, 2.0)
            .with_linear(X2, 2.0),
        perturbations: vec![(0, QuadExpr::new().with_bilinear(X1, X2, 2.0))],
        xi_dim: 1,
        group: 0,
    });

    // 0.1 - (x1 - 0.5)^2 - (x2 - 0.5)^2 expanded
    p.add_le(
        "outside_disc",
        QuadExpr::constant(0.1 - 0.25 - 0.25)
            .with_bilinear(X1, X1, -1.0)
            .with_linear(X1, 1.0)
            .with_bilinear(X2, X2, -1.0)
            .with_linear(X2, 1.0),
    );
    // Taken as printed: x2 - 0.09 x2 - 0.5 <= 0.
    p.add_le(
        "x2_cap",
        QuadExpr::constant(-0.5).with_linear(X2, 1.0 - 0.09),
    );
    p
}

/// `u ∈ [2, 6]` expressed as a unit box on `ξ`.
pub fn toy_set() -> UncertaintySet {
    UncertaintySet::new(SetKind::Box, 1.0).expect("valid size")
}

/// Map a re-centred sample back to the original parameter.
pub fn xi_to_u(xi: f64) -> f64 {
    4.0 + 2.0 * xi
}
