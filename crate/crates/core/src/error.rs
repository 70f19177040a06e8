use thiserror::Error;

use crate::geom::Index;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: expected 2 or 3")]
    InvalidDimension(usize),
    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("direction with polar angle {theta} lies outside the observation aperture")]
    OutsideAperture { theta: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid quadrature order {0}: must be at least 1")]
    InvalidOrder(usize),
    #[error("point lies on the interface (last coordinate is zero)")]
    PointOnInterface,
    #[error("quadrature rule does not match the source box")]
    BoxMismatch,
    #[error("near-singular retrieval system: |det D| = {det:e}")]
    NearSingular { det: f64 },
    #[error("invalid scaling factor {0}: must be positive")]
    InvalidScaling(f64),
    #[error("degenerate frequency: far-field sup-norm {0:e} below threshold")]
    DegenerateFrequency(f64),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no lattice entry for index {0}")]
    MissingEntry(Index),
    #[error("missing entries for indices: {}", format_indices(.0))]
    MissingEntries(Vec<Index>),
    #[error("entry {index}: {source}")]
    Entry { index: Index, source: Box<Error> },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

fn format_indices(ix: &[Index]) -> String {
    let shown: Vec<String> = ix.iter().take(20).map(|i| i.to_string()).collect();
    if ix.len() > 20 {
        format!("{} ... ({} total)", shown.join(" "), ix.len())
    } else {
        shown.join(" ")
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn at(self, index: Index) -> Self {
        Error::Entry {
            index,
            source: Box::new(self),
        }
    }
}
