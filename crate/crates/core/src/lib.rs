//! Time-optimal robust MPC for linear plants whose system matrices are only
//! known up to an interval.

pub mod bounds;
pub mod controller;
pub mod error;
pub mod lp;
pub mod nested;
pub mod ocp;
pub mod setalg;
pub mod sim;

pub use bounds::{BoundsTable, ClosedLoop};
pub use controller::{run_closed_loop, Branch, RunLog, RunOutcome};
pub use error::{Error, Result};
pub use ocp::{OcpModel, OcpSolution, OcpSpec};
pub use setalg::{IntervalMatrix, Matrix, MatrixZonotope, Polytope, Vector, Zonotope};
pub use sim::{Plant, Scenario};
