use thiserror::Error;

/// Errors raised by grid, cover, partition, level-set and linear algebra routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field is not constant on the pole-adjacent row {row}")]
    PoleSingularity { row: usize },
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid cover: {0}")]
    InvalidCover(String),
    #[error("invalid partition of unity: {0}")]
    InvalidPartition(String),
    #[error("set is not enclosable: no complement component exceeds half of the total area")]
    NotEnclosable,
    #[error("operation requires a connected set, got {components} components")]
    RequiresConnected { components: usize },
    #[error("node {node} is too close to the boundary of every covering set")]
    UncoveredInterior { node: usize },
    #[error("grid resolution {have} below the required {need} nodes per axis")]
    UnderResolved { have: usize, need: usize },
    #[error("relaxation parameter too large: 2*N*delta = {0} must be < 1")]
    DeltaTooLarge(f64),
    #[error("hypothesis violated by set {id}: {reason}")]
    HypothesisViolation { id: usize, reason: String },
    #[error("level {level} stayed degenerate after {attempts} nudges")]
    DegenerateLevel { level: f64, attempts: usize },
    #[error("configuration not in generic position: {0}")]
    GenericityFailure(String),
    #[error("numerical rank is ambiguous: singular value ratio {0:e} near the tolerance")]
    RankAmbiguous(f64),
    #[error("cone cover with half-angle {theta} not certified after {centers} centers")]
    CoverageUncertified { theta: f64, centers: usize },
    #[error("vectors span a subspace of dimension {rank} < {dim}")]
    RequiresSpanning { rank: usize, dim: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
