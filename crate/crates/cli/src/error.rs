use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// One problem found while checking a problem file.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    ZeroRow { node: usize, row: usize },
    DimensionMismatch { node: usize, row: usize, expected: usize, found: usize },
    RhsLength { node: usize, rows: usize, rhs: usize },
    NonFinite { node: usize },
    NoRows { node: usize },
    DuplicateNode { node: usize },
    MissingNode { node: usize },
    NodeOutOfRange { node: usize, count: usize },
    ReferenceLength { expected: usize, found: usize },
    /// Tree-level problem; the text names the nodes or edges involved.
    Tree(String),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::ZeroRow { node, row } => write!(f, "node {node}, row {row}: zero row"),
            Issue::DimensionMismatch {
                node,
                row,
                expected,
                found,
            } => write!(
                f,
                "node {node}, row {row}: dimension mismatch (expected {expected}, found {found})"
            ),
            Issue::RhsLength { node, rows, rhs } => {
                write!(f, "node {node}: {rows} row(s) but {rhs} right-hand side value(s)")
            }
            Issue::NonFinite { node } => write!(f, "node {node}: non-finite value"),
            Issue::NoRows { node } => write!(f, "node {node}: no equations"),
            Issue::DuplicateNode { node } => write!(f, "node {node} is listed twice"),
            Issue::MissingNode { node } => write!(f, "node {node} is missing"),
            Issue::NodeOutOfRange { node, count } => {
                write!(f, "node id {node} is out of range for {count} node(s)")
            }
            Issue::ReferenceLength { expected, found } => {
                write!(f, "reference has length {found}, expected {expected}")
            }
            Issue::Tree(msg) => f.write_str(msg),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid problem:\n{}", list(.0))]
    Validation(Vec<Issue>),

    #[error("{0}")]
    Usage(String),

    #[error("size mismatch: the tree has {tree} nodes but the matrix has {rows} rows")]
    SizeMismatch { tree: usize, rows: usize },

    #[error(transparent)]
    Core(#[from] tree_kaczmarz::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn list(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    /// 2 for anything the user can fix in the input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Usage(_) | CliError::SizeMismatch { .. } => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
