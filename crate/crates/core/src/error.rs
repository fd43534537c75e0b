use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("template parse error: {0}")]
    TemplateParse(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },

    #[error("skin weights of vertex {vertex} sum to {sum}, expected 1")]
    SkinWeightSum { vertex: usize, sum: f64 },

    #[error("skin weight of vertex {vertex} for joint {joint} is negative ({value})")]
    NegativeSkinWeight { vertex: usize, joint: usize, value: f64 },

    #[error("face {face} references vertex {vertex}, but the template has {num_vertices} vertices")]
    FaceIndex {
        face: usize,
        vertex: usize,
        num_vertices: usize,
    },

    #[error("joint hierarchy is not a tree rooted at joint 0: {0}")]
    JointHierarchy(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid camera: {0}")]
    Camera(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not a checkpoint file (bad magic {0:?})")]
    BadMagic([u8; 4]),

    #[error("unsupported checkpoint version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("checkpoint truncated in section {section}")]
    Truncated { section: String },

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("frame {index}: {msg}")]
    Frame { index: usize, msg: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Numerical(_) | Error::NonFinite(_) => ErrorKind::Numerical,
            Error::InvalidInput(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            got,
        }
    }
}
