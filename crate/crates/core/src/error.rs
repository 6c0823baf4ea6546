use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while loading or solving a polyhedral complex.
///
/// The constraint failures ([`Error::InconsistentConstraints`],
/// [`Error::NoSolutionForArea`], [`Error::NoFreeEdge`] and
/// [`Error::OverConstrained`]) are expected outcomes of user input rather
/// than bugs; see [`Error::is_constraint_failure`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("{kind} index {index} out of range (referenced by {owner})")]
    DanglingIndex {
        kind: &'static str,
        index: usize,
        owner: String,
    },

    #[error("face {face}: edge loop is not closed between loop positions {position} and {next}")]
    OpenFaceLoop {
        face: usize,
        position: usize,
        next: usize,
    },

    #[error("face {face}: needs at least 3 edges, found {found}")]
    TooFewEdges { face: usize, found: usize },

    #[error("face {face}: not planar (deviation {deviation:.3e} exceeds {allowed:.3e})")]
    NonPlanarFace {
        face: usize,
        deviation: f64,
        allowed: f64,
    },

    #[error("face {face}: all loop edges are collinear, no normal can be chosen")]
    DegenerateFace { face: usize },

    #[error("edge {edge}: zero length in the loaded geometry")]
    ZeroLengthEdge { edge: usize },

    #[error("cell {cell}: boundary is not closed at edge {edge} ({count} member faces share it)")]
    OpenCell {
        cell: usize,
        edge: usize,
        count: usize,
    },

    #[error("cell {cell}: faces sharing edge {edge} are inconsistently oriented")]
    InconsistentCellOrientation { cell: usize, edge: usize },

    #[error("face {face}: belongs to {count} cells, at most 2 allowed")]
    NonManifoldFace { face: usize, count: usize },

    #[error("edge {edge} is not an edge of face {face}")]
    EdgeNotOnFace { face: usize, edge: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("vertex reconstruction failed: closure error {error:.3e} exceeds {allowed:.3e}")]
    ClosureFailure { error: f64, allowed: f64 },

    #[error("edge {edge}: attached faces cannot be ordered around it ({reason})")]
    FanOrder { edge: usize, reason: String },

    #[error("face {face}: fixed edge lengths are contradictory (CGDoF = -inf)")]
    InconsistentConstraints { face: usize },

    #[error("face {face}: no free edge left to solve the area equation (CGDoF = {cgdof})")]
    NoFreeEdge { face: usize, cgdof: usize },

    #[error(
        "face {face}: target area {target} is unreachable (a = {a}, b = {b}, c = {c}, discriminant = {discriminant})"
    )]
    NoSolutionForArea {
        face: usize,
        target: f64,
        a: f64,
        b: f64,
        c: f64,
        discriminant: f64,
    },

    #[error("polyhedron over-constrained by edges {recent:?} (residual {residual:.3e})")]
    OverConstrained { recent: Vec<usize>, residual: f64 },

    #[error("dual diagram is degenerate: only the zero solution satisfies its closure equations")]
    DegenerateDual,

    #[error("numerical check failed: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures caused by the user's constraints rather than by bad input.
    pub fn is_constraint_failure(&self) -> bool {
        matches!(
            self,
            Error::InconsistentConstraints { .. }
                | Error::NoFreeEdge { .. }
                | Error::NoSolutionForArea { .. }
                | Error::OverConstrained { .. }
        )
    }

    /// Short machine-readable tag for constraint failures.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InconsistentConstraints { .. } | Error::NoFreeEdge { .. } => "cgdof",
            Error::NoSolutionForArea { .. } => "no_solution",
            Error::OverConstrained { .. } => "over_constrained",
            _ => "invalid_input",
        }
    }
}
