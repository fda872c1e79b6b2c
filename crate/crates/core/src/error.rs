use thiserror::Error;

/// Lookup and consistency failures against a [`ClusterState`](crate::model::ClusterState).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{kind} `{namespace}/{name}` not found")]
    NotFound {
        kind: &'static str,
        namespace: String,
        name: String,
    },
    #[error("cluster state violates {} invariant(s): {}", .0.len(), .0.join("; "))]
    Invariant(Vec<String>),
}

impl ModelError {
    pub(crate) fn not_found(kind: &'static str, namespace: &str, name: &str) -> Self {
        ModelError::NotFound {
            kind,
            namespace: namespace.to_owned(),
            name: name.to_owned(),
        }
    }
}

/// Returned by [`authorize`](crate::rbac::authorize) when the credential does not
/// belong to any principal issued by the fixture. Distinct from a plain `false`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuthzError {
    #[error("unknown principal `{0}`")]
    UnknownPrincipal(String),
}

/// A YAML document (fixture, scenario or policy) that failed to parse or validate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("{document}: {message}{}", location_suffix(*.line, *.column))]
    Parse {
        document: &'static str,
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },
    #[error("{document}: {message}")]
    Invalid {
        document: &'static str,
        message: String,
    },
}

fn location_suffix(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" (line {l}, column {c})"),
        (Some(l), None) => format!(" (line {l})"),
        _ => String::new(),
    }
}

impl DocumentError {
    pub(crate) fn from_yaml(document: &'static str, err: serde_yaml::Error) -> Self {
        let loc = err.location();
        let mut message = err.to_string();
        // the position is carried separately
        if let Some(cut) = loc.as_ref().and(message.rfind(" at line ")) {
            message.truncate(cut);
        }
        DocumentError::Parse {
            document,
            message,
            line: loc.as_ref().map(|l| l.line()),
            column: loc.as_ref().map(|l| l.column()),
        }
    }

    pub(crate) fn invalid(document: &'static str, message: impl Into<String>) -> Self {
        DocumentError::Invalid {
            document,
            message: message.into(),
        }
    }

    pub fn message(&self) -> &str {
        match self {
            DocumentError::Parse { message, .. } | DocumentError::Invalid { message, .. } => {
                message
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("prerequisite principal `{0}` is not issued by the fixture")]
    UnresolvedPrerequisite(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("scenario `{scenario}` is not capability-mappable: {reason}")]
    Unsupported { scenario: String, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("unknown capability `{given}`; valid capabilities: {valid}")]
    UnknownCapability { given: String, valid: String },
}
