//! Exact bivariate polynomial arithmetic, the vector-field input language and
//! the float/interval evaluation forms used by the numerical stages.

mod dense;
mod field;
mod interval;
mod parse;
mod poly;

pub use dense::{interval_eval, CompiledPoly, DensePoly};
pub use field::{FieldError, SearchBox, VectorField};
pub use interval::{IBox, Interval};
pub use parse::{parse_poly, parse_vector_field, ParseError, ParseErrorKind, MAX_EXPONENT};
pub use poly::{jacobian_det, rational_from_f64, rational_to_f64, AffineMap, Monomial, Poly2, Var};

/// Reads and parses a `.vf` file.
pub fn load_vector_field(path: &std::path::Path) -> Result<VectorField, LoadError> {
    let src = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.display().to_string(), e))?;
    parse_vector_field(&src).map_err(|e| LoadError::Parse(path.display().to_string(), e))
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}:{1}")]
    Parse(String, #[source] ParseError),
}
