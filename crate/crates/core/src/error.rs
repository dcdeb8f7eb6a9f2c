use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BidomainError>;

#[derive(Debug, Error)]
pub enum BidomainError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("conductivity tensor at node {node} is not symmetric (s12 = {s12}, s21 = {s21})")]
    NonSymmetricTensor { node: usize, s12: f64, s21: f64 },

    #[error("conductivity tensor at node {node} has eigenvalues ({lo}, {hi}) outside [{bound_lo:e}, {bound_hi}]")]
    EllipticityViolation {
        node: usize,
        lo: f64,
        hi: f64,
        bound_lo: f64,
        bound_hi: f64,
    },

    #[error("boundary node {node} carries an off-diagonal conductivity s12 = {s12}; zero-flux closure needs axis-aligned tensors on the boundary")]
    BoundaryTensorNotAxisAligned { node: usize, s12: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("factorization of {what} failed")]
    Factorization { what: &'static str },

    #[error("eigensolver did not converge: worst residual {worst_residual:.3e} at mode {mode}")]
    EigenNonConvergence { mode: usize, worst_residual: f64 },

    #[error("grid with {nodes} nodes exceeds the dense eigensolver limit of {limit}")]
    GridTooLarge { nodes: usize, limit: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("certificate infeasible: {0}")]
    CertificateInfeasible(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); stiffest error contribution from component {component}")]
    StepSizeUnderflow { t: f64, h: f64, component: usize },

    #[error("non-finite state at t = {t:.6e}")]
    NonFinite { t: f64 },

    #[error("fixed-point iteration diverged at iteration {iteration}: weighted norm {norm:.6e} exceeds {limit:.6e}")]
    Divergence {
        iteration: usize,
        norm: f64,
        limit: f64,
        history: Vec<f64>,
    },

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{context}: {message}")]
    Context { context: String, message: String },

    #[error("{context}: {source}")]
    Within {
        context: String,
        source: Box<BidomainError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BidomainError {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        BidomainError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Prefixes the message with the module that raised it.
    pub fn within(self, context: &str) -> Self {
        match self {
            BidomainError::Context { .. } | BidomainError::Within { .. } => self,
            other => BidomainError::Within {
                context: context.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// The error underneath any `within` wrapping.
    pub fn root(&self) -> &BidomainError {
        match self {
            BidomainError::Within { source, .. } => source.root(),
            other => other,
        }
    }
}
