use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ocp::Diagnostic;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {position} near `{token}`: {message}")]
    Syntax {
        position: usize,
        token: String,
        message: String,
    },

    #[error("unknown identifier `{name}` at {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("parameter `{0}` shadows a built-in variable or function")]
    ReservedParameter(String),

    #[error("arity mismatch in {what}: expected {expected}, found {found}")]
    ArityMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: &'static str },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("at node {node}{}: {source}", s.map(|s| alloc::format!(", s = {s}")).unwrap_or_default())]
    AtNode {
        node: usize,
        s: Option<f64>,
        source: Box<Error>,
    },

    #[error("pointwise check needs d/dt of `{0}`, which depends on the control; verify along an arc instead")]
    ControlDependentMap(String),

    #[error("invalid problem: {}", list(.0))]
    InvalidProblem(Vec<Diagnostic>),

    #[error("{what} = {value:e} exceeds tolerance {tolerance:e}")]
    ToleranceExceeded {
        what: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("no example named `{0}`")]
    NotFound(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn at(self, node: usize, s: Option<f64>) -> Self {
        Error::AtNode {
            node,
            s,
            source: Box::new(self),
        }
    }

    /// Strips any `AtNode` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtNode { source, .. } => source.root(),
            e => e,
        }
    }
}

fn list(diags: &[Diagnostic]) -> String {
    let mut out = String::new();
    for (i, d) in diags.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&alloc::format!("{d}"));
    }
    out
}
