//! Diagnostics: the one error currency shared by every pipeline stage.
//!
//! Human-readable rendering follows the fixed format
//! `file:line:col: severity[CODE]: message`.

use crate::span::Span;
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Warning => write!(f, "warning"),
            Severity::Error => write!(f, "error"),
        }
    }
}

/// Stable diagnostic codes. The frame/ghost codes are part of the tool's
/// contract and are matched verbatim by the corpus manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Code {
    UnknownChar,
    UnterminatedComment,
    Syntax,
    DuplicateName,
    UnknownIdentifier,
    TypeMismatch,
    AssignToInParam,
    MethodInExpr,
    GhostInCompiled,
    ReadsViolation,
    ModifiesViolation,
    CallFrameViolation,
    ReadsOnMethod,
    MissingDecreases,
    VcFailed,
    VcUnknown,
    Internal,
}

impl Code {
    pub fn as_str(&self) -> &'static str {
        match self {
            Code::UnknownChar => "UNKNOWN_CHAR",
            Code::UnterminatedComment => "UNTERMINATED_COMMENT",
            Code::Syntax => "SYNTAX",
            Code::DuplicateName => "DUPLICATE_NAME",
            Code::UnknownIdentifier => "UNKNOWN_IDENTIFIER",
            Code::TypeMismatch => "TYPE_MISMATCH",
            Code::AssignToInParam => "ASSIGN_TO_IN_PARAM",
            Code::MethodInExpr => "METHOD_IN_EXPR",
            Code::GhostInCompiled => "GHOST_IN_COMPILED",
            Code::ReadsViolation => "READS_VIOLATION",
            Code::ModifiesViolation => "MODIFIES_VIOLATION",
            Code::CallFrameViolation => "CALL_FRAME_VIOLATION",
            Code::ReadsOnMethod => "READS_ON_METHOD",
            Code::MissingDecreases => "MISSING_DECREASES",
            Code::VcFailed => "VC_FAILED",
            Code::VcUnknown => "VC_UNKNOWN",
            Code::Internal => "INTERNAL",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub span: Span,
    pub severity: Severity,
    pub code: Code,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, code: Code, message: impl Into<String>) -> Self {
        Diagnostic {
            span,
            severity: Severity::Error,
            code,
            message: message.into(),
        }
    }

    pub fn warning(span: Span, code: Code, message: impl Into<String>) -> Self {
        Diagnostic {
            span,
            severity: Severity::Warning,
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}[{}]: {}",
            self.span.file,
            self.span.start_line,
            self.span.start_col,
            self.severity,
            self.code,
            self.message
        )
    }
}

/// Sort diagnostics into reporting order: by file, position, then code.
pub fn sort_diagnostics(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (&a.span, a.code, &a.message).cmp(&(&b.span, b.code, &b.message))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn display_matches_contract_format() {
        let span = Span::new(Arc::new("demo.mdfy".into()), (3, 7), (3, 9));
        let d = Diagnostic::error(span, Code::TypeMismatch, "expected int, found bool");
        assert_eq!(
            d.to_string(),
            "demo.mdfy:3:7: error[TYPE_MISMATCH]: expected int, found bool"
        );
    }
}
