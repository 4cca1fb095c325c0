//! Spatial branch-and-bound for robust nonconvex quadratically constrained
//! problems, with a pooling-problem front end.

pub mod cli;
pub mod cutting_set;
pub mod error;
pub mod mccormick;
pub mod pooling;
pub mod qcqp;
pub mod rsbb;
pub mod simplex;
pub mod slp;
pub mod toy;
pub mod trace;
pub mod uncertainty;
