use thiserror::Error;

/// One violated structural invariant of a system parameter set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    /// Short machine-friendly name, e.g. `"S_unitary"`.
    pub invariant: String,
    /// Measured residual (relative ∞-norm unless stated otherwise).
    pub residual: f64,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (residual {:.3e}): {}", self.invariant, self.residual, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid system: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("singular resolvent at s = {s}: condition estimate {condition:.3e}")]
    Singular { s: String, condition: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("ill-posed feedback loop: I - S22*S_b has condition estimate {condition:.3e}")]
    IllPosedLoop { condition: f64 },

    #[error("reduced system fails validation: {}", join_violations(.0))]
    ReducedStructure(Vec<Violation>),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("integrator instability: clipped negative mass {clipped:.3e} exceeds {limit:.1e}; try a smaller dt")]
    Instability { clipped: f64, limit: f64 },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
