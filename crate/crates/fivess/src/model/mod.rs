//! Linearized cycle plants, the independent numerical-linearization oracle,
//! model error metrics and continuous-trajectory reconstruction.

mod oracle;
mod plant;
mod reconstruct;
mod response;

pub use oracle::{
    fit_voltage_recursion, numerical_linearization_oracle, DEFAULT_ORACLE_DELTA_REL,
};
pub use plant::{boost_plant, buck_plant, OperatingPoint, PlantCoefficients};
pub use reconstruct::{
    reconstruct_continuous, DiscreteSample, DiscreteStateSeq, ReconstructedTrajectory,
};
pub use response::{model_error, model_step_response, ModelErrorReport};
