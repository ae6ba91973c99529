use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A circuit or scenario parameter is out of its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested operation only applies to the other topology, or the
    /// operating point is not a valid CCM point for this topology.
    #[error("topology error: {0}")]
    Topology(String),

    /// The output capacitor voltage left the positive region required for
    /// continuous-conduction-mode operation.
    #[error("ccm violation: output voltage {voltage:.6} V at t = {time:.3e} s")]
    CcmViolation { voltage: f64, time: f64 },

    /// A numeric input was NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// The least-squares fit residual exceeded the linear-regime threshold,
    /// usually because the perturbation amplitude was too large.
    #[error("nonlinearity: fit residual {residual:.3e} exceeds limit {limit:.3e}; reduce the perturbation")]
    Nonlinearity { residual: f64, limit: f64 },

    /// The sampling map cannot be inverted for these parameters.
    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    /// No point of the design grid satisfied the constraints. Carries the
    /// best candidate found for diagnosis.
    #[error("infeasible design: {reason}; best candidate gain={best_gain:.4e} zero={best_zero:.6} radius={best_radius:.6}")]
    InfeasibleDesign {
        reason: String,
        best_gain: f64,
        best_zero: f64,
        best_radius: f64,
    },

    /// The interference slope-amplitude product leaves the sector unbounded.
    #[error("unbounded sector: lambda_ub * g0 = {0:.6} >= 1")]
    UnboundedSector(f64),

    /// A staircase plan cannot be built from the given grid.
    #[error("planning error: {0}")]
    Planning(String),

    /// Scenario configuration is malformed.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure while reading or writing run artifacts.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
