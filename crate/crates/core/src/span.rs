//! Source positions.

use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// A half-open region of a source file. Lines and columns are 1-based;
/// `end_col` points one past the last character of the region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Span {
    pub file: Arc<String>,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn new(file: Arc<String>, start: (u32, u32), end: (u32, u32)) -> Self {
        debug_assert!(start <= end, "span start after end");
        debug_assert!(start.1 >= 1 && end.1 >= 1, "columns are 1-based");
        Span {
            file,
            start_line: start.0,
            start_col: start.1,
            end_line: end.0,
            end_col: end.1,
        }
    }

    /// A synthetic span for nodes that have no source location (tests,
    /// internally generated expressions).
    pub fn synthetic() -> Self {
        Span::new(Arc::new(String::from("<internal>")), (1, 1), (1, 1))
    }

    /// Smallest span covering both `self` and `other`.
    pub fn merge(&self, other: &Span) -> Span {
        let start = (self.start_line, self.start_col).min((other.start_line, other.start_col));
        let end = (self.end_line, self.end_col).max((other.end_line, other.end_col));
        Span::new(self.file.clone(), start, end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.start_line, self.start_col)
    }
}
