use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown dimension tag `{0}`")]
    UnknownDimension(String),

    #[error("temperature is undefined for an empty system")]
    UndefinedTemperature,

    #[error("singular overlap: two interaction sites coincide")]
    SingularOverlap,

    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("box edge {length} along axis {axis} is too small for cutoff {cutoff} (need > 2 rc)")]
    BoxTooSmall { axis: usize, length: f64, cutoff: f64 },

    #[error("instability at molecule {id}: {reason}; try a smaller time step")]
    Instability { id: u64, reason: String },

    #[error("cannot rescale velocities: current temperature is zero")]
    CannotRescale,

    #[error("species {species}: zero moment of inertia about a non-degenerate axis")]
    ZeroInertia { species: usize },

    #[error("profile of length {len} cannot be split with at least {min_cells} cells per side")]
    IndivisibleVolume { len: usize, min_cells: usize },

    #[error("cannot decompose {cells:?} cells into {workers} subvolumes of at least 2 cells per axis")]
    OverDecomposed { cells: [usize; 3], workers: usize },

    #[error("infeasible density: {0}")]
    InfeasibleDensity(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("worker failure: {0}")]
    Worker(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
