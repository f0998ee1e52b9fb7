//! XQuery-subset frontend: parsing and twig detection.

pub mod ast;
mod detect;
mod lexer;
mod parser;

use thiserror::Error;

pub use ast::QueryAst;
pub use detect::{detect_tpq, DetectionResult};
pub use parser::parse_query;

/// Query rejection. The display form starts with the error code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("SyntaxError at offset {position}: {message}")]
    SyntaxError { position: usize, message: String },
    #[error("UnsupportedConstruct: {0}")]
    UnsupportedConstruct(String),
    #[error("NotSingleTwig: {0}")]
    NotSingleTwig(String),
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::SyntaxError { .. } => "SyntaxError",
            QueryError::UnsupportedConstruct(_) => "UnsupportedConstruct",
            QueryError::NotSingleTwig(_) => "NotSingleTwig",
        }
    }
}

/// Parses and detects in one go.
pub fn compile(text: &str) -> Result<(QueryAst, DetectionResult), QueryError> {
    let ast = parse_query(text)?;
    let det = detect_tpq(&ast)?;
    Ok((ast, det))
}

/// Whether both queries detect to the same canonical twig.
pub fn equivalent_form_check(q1: &str, q2: &str) -> Result<bool, QueryError> {
    let a = compile(q1)?.1.tpq.render();
    let b = compile(q2)?.1.tpq.render();
    Ok(a == b)
}
