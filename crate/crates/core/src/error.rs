use thiserror::Error;

/// Which half of the two-sided candidate match could not be satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Plus => write!(f, "+"),
            Side::Minus => write!(f, "-"),
        }
    }
}

/// Location of a failed candidate search inside a construction.
///
/// Populated incrementally as the failure bubbles up: a scalar-level miss
/// knows its coordinate and side, the enclosing layer adds the neuron, the
/// deep construction adds the layer index.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FailurePoint {
    pub layer: Option<usize>,
    pub neuron: Option<usize>,
    pub coordinate: Option<usize>,
    pub side: Option<Side>,
    /// Stage label for multi-stage constructions ("output-coefficient",
    /// "inner-linear", ...).
    pub stage: Option<&'static str>,
}

impl std::fmt::Display for FailurePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        if let Some(l) = self.layer {
            parts.push(format!("layer {l}"));
        }
        if let Some(n) = self.neuron {
            parts.push(format!("neuron {n}"));
        }
        if let Some(c) = self.coordinate {
            parts.push(format!("coordinate {c}"));
        }
        if let Some(s) = self.side {
            parts.push(format!("side {s}"));
        }
        if let Some(st) = self.stage {
            parts.push(format!("stage {st}"));
        }
        if parts.is_empty() {
            write!(f, "unlocated")
        } else {
            write!(f, "{}", parts.join(", "))
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    Shape {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    /// No candidate satisfied a lemma's matching condition. This is the
    /// probability-<= delta event of the theorems, a reportable outcome
    /// rather than a bug; harnesses count it against the 1 - delta guarantee.
    #[error("construction failed: no admissible candidate at {0}")]
    ConstructionFailed(FailurePoint),

    #[error("gram matrix numerically singular (lambda_min estimate {lambda_min:.3e})")]
    SingularGram { lambda_min: f64 },

    /// The assembled neuron subnetwork missed its epsilon contract on the
    /// training points. Probabilistic failure, counted against delta.
    #[error("construction degraded: measured sup error {measured_sup_error:.6} exceeds contract")]
    ConstructionDegraded { measured_sup_error: f64 },

    #[error("matrix not symmetric: max asymmetry {max_asymmetry:.3e}")]
    NonSymmetric { max_asymmetry: f64 },

    #[error("mask enumeration budget exceeded: {weights} weights > {limit} allowed")]
    BudgetExceeded { weights: usize, limit: usize },

    #[error("infeasible target spec: {0}")]
    InfeasibleTarget(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
