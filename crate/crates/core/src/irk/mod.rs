//! Runge-Kutta tableaux and the stage-coupled Stokes operator.

mod stage;
mod step;
mod tableau;

use thiserror::Error;

pub use stage::{assemble_stage_rhs, stage_dirichlet_values, StageBoundary, StageOperator, MATERIALIZE_LIMIT};
pub use step::{advance_step, StepState};
pub use tableau::{
    consistency_check, quadrature_defect, quadrature_order, stability_function, stage_defect,
    tableau_lookup, tableau_report, ButcherTableau, ConsistencyReport, Family, CONSISTENCY_TOL,
    ORDER_TOL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrkError {
    #[error("unknown scheme family `{0}`")]
    UnknownFamily(String),
    #[error("{family} has no {stages}-stage member in the registry")]
    Unsupported { family: Family, stages: usize },
    #[error("I - zA is singular at z = {re}{im:+}i")]
    SingularResolvent { re: f64, im: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operator has {0} rows, above the materialization limit")]
    TooLarge(usize),
}
