use std::fmt;

use serde::Serialize;

use crate::ast::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Stable diagnostic codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Code {
    Syntax,
    Duplicate,
    UnknownSymbol,
    Arity,
    TypeMismatch,
    Scope,
    Position,
    Label,
    DeadBranch,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syntax => "syntax",
            Code::Duplicate => "duplicate",
            Code::UnknownSymbol => "unknown-symbol",
            Code::Arity => "arity",
            Code::TypeMismatch => "type-mismatch",
            Code::Scope => "scope",
            Code::Position => "position",
            Code::Label => "label",
            Code::DeadBranch => "dead-branch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub col: usize,
    pub code: Code,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, code: Code, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Error, line: span.line, col: span.col, code, message: message.into() }
    }

    pub fn warning(span: Span, code: Code, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Warning, line: span.line, col: span.col, code, message: message.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{}:{}: {}: {}", self.line, self.col, self.severity, self.message)
    }

    /// One-line JSON record.
    pub fn record(&self, file: &str) -> String {
        serde_json::json!({
            "file": file,
            "line": self.line,
            "col": self.col,
            "severity": self.severity,
            "code": self.code.as_str(),
            "message": self.message,
        })
        .to_string()
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.severity, self.message)
    }
}

pub fn has_errors(ds: &[Diagnostic]) -> bool {
    ds.iter().any(Diagnostic::is_error)
}
