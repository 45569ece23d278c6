//! Grid topology, admittance matrices, power-flow initialization and the
//! per-step algebraic network solve.

mod model;
mod powerflow;
mod solver;
mod ybus;

pub use model::{Bus, GeneratorSite, HvdcInjection, Line, Load, NetworkModel, Region};
pub use powerflow::{solve_power_flow, Dispatch, GenDispatch, PowerFlowOptions, PowerFlowSolution};
pub use solver::{NetworkSolution, NetworkSolver, SourceBranch};
pub use ybus::{build_ybus, fold_load, line_admittances, LineAdmittance, Ybus};
