use serde_json::{json, Value};
use thermlab::analysis::AnalysisError;
use thermlab::dynamics::{DynamicsError, OdeError};
use thermlab::generator::BlochError;
use thermlab::micro::MicroError;
use thermlab::model::ValidationError;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    Config(String),
    Validation(ValidationError),
    /// A solver failed on valid input.
    Numerical { kind: &'static str, message: String },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, message) = match self {
            CliError::Config(m) => ("ConfigError", m.clone()),
            CliError::Validation(e) => ("ValidationError", e.to_string()),
            CliError::Numerical { kind, message } => (*kind, message.clone()),
            CliError::Io(m) => ("IoError", m.clone()),
        };
        let mut v = json!({ "error": kind, "message": message, "exit_code": self.exit_code() });
        if let CliError::Validation(e) = self {
            v["violations"] = e
                .violations
                .iter()
                .map(|x| json!({ "kind": x.name(), "message": x.to_string() }))
                .collect();
        }
        v
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Validation(e)
    }
}

fn from_ode(e: OdeError) -> CliError {
    let kind = match e {
        OdeError::StepUnderflow { .. } => "StepUnderflow",
        OdeError::StepBudgetExceeded { .. } => "StepBudgetExceeded",
        OdeError::InvalidTolerance { .. } | OdeError::BadSampleTimes => return CliError::Config(e.to_string()),
    };
    CliError::Numerical { kind, message: e.to_string() }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        let kind = match e {
            DynamicsError::Ode(o) => return from_ode(o),
            DynamicsError::DefectiveMatrix(_) => "DefectiveMatrix",
            DynamicsError::NoConvergence(_) => "NoConvergence",
            _ => return CliError::Config(e.to_string()),
        };
        CliError::Numerical { kind, message: e.to_string() }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Validation(v) => CliError::Validation(v),
            AnalysisError::Dynamics(d) => d.into(),
            AnalysisError::NoConvergence { .. } => CliError::Numerical { kind: "NoConvergence", message: e.to_string() },
            AnalysisError::NotAState { .. } => CliError::Numerical { kind: "NotAState", message: e.to_string() },
            AnalysisError::BothZero | AnalysisError::InvalidInput(_) => CliError::Config(e.to_string()),
        }
    }
}

impl From<BlochError> for CliError {
    fn from(e: BlochError) -> Self {
        match e {
            BlochError::DivergentOccupation => CliError::Config(e.to_string()),
            _ => CliError::Numerical { kind: "BlochError", message: e.to_string() },
        }
    }
}

impl From<MicroError> for CliError {
    fn from(e: MicroError) -> Self {
        match e {
            MicroError::Ode(o) => from_ode(o),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
