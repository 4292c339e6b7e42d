use avar_core::{Error, ErrorClass};
use serde_json::{json, Value};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_STATISTICAL: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// A failed invocation: exit code plus a machine-readable diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
    pub detail: Box<Value>,
}

impl Failure {
    pub fn usage(message: String) -> Self {
        Self {
            code: EXIT_INPUT,
            kind: "Usage".into(),
            message,
            detail: Box::new(Value::Null),
        }
    }

    pub fn input(kind: &str, message: String, detail: Value) -> Self {
        Self {
            code: EXIT_INPUT,
            kind: kind.into(),
            message,
            detail: Box::new(detail),
        }
    }

    pub fn to_json(&self) -> String {
        let mut v = json!({
            "error": self.kind,
            "exit_code": self.code,
            "message": self.message,
        });
        if !self.detail.is_null() {
            v["detail"] = (*self.detail).clone();
        }
        v.to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Input => EXIT_INPUT,
            ErrorClass::Statistical => EXIT_STATISTICAL,
            ErrorClass::Numerical => EXIT_NUMERICAL,
        };
        let detail = match &e {
            Error::Invalid { violations, .. } => {
                json!({ "violations": violations.iter().map(|v| json!({"error": v.kind(), "message": v.to_string()})).collect::<Vec<_>>() })
            }
            Error::Expression { offset, .. } => json!({ "byte_offset": offset }),
            Error::TooFewBatches { got, needed } => json!({ "got": got, "needed": needed }),
            _ => Value::Null,
        };
        Self {
            code,
            kind: e.kind().into(),
            message: e.to_string(),
            detail: Box::new(detail),
        }
    }
}

/// Prints a non-fatal diagnostic on stderr.
pub fn warn(kind: &str, message: &str) {
    eprintln!("{}", json!({ "warning": kind, "message": message }));
}
