//! Loading and saving cluster fixture documents.

use crate::error::{DocumentError, ModelError};
use crate::model::ClusterState;

/// Parses a fixture and checks every load-time invariant.
pub fn load_fixture(document: &str) -> Result<ClusterState, DocumentError> {
    const DOC: &str = "fixture";
    let state: ClusterState =
        serde_yaml::from_str(document).map_err(|e| DocumentError::from_yaml(DOC, e))?;
    match state.validate_fixture() {
        Ok(()) => Ok(state),
        Err(ModelError::Invariant(v)) => Err(DocumentError::invalid(DOC, v.join("; "))),
        Err(e) => Err(DocumentError::invalid(DOC, e.to_string())),
    }
}

pub fn fixture_to_yaml(state: &ClusterState) -> String {
    serde_yaml::to_string(state).expect("fixture serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{CANONICAL_FIXTURE_YAML, SMALL_FIXTURE_YAML};

    #[test]
    fn shipped_fixtures_load() {
        let canonical = load_fixture(CANONICAL_FIXTURE_YAML).unwrap();
        assert_eq!(canonical.nodes.len(), 2);
        assert_eq!(canonical.namespaces.len(), 4);
        let small = load_fixture(SMALL_FIXTURE_YAML).unwrap();
        assert_eq!(small.nodes.len(), 1);
        assert_eq!(small.namespaces.len(), 3);
    }

    #[test]
    fn round_trip_preserves_state() {
        let s = load_fixture(CANONICAL_FIXTURE_YAML).unwrap();
        assert_eq!(load_fixture(&fixture_to_yaml(&s)).unwrap(), s);
    }

    #[test]
    fn invariant_violations_are_reported() {
        let broken = CANONICAL_FIXTURE_YAML.replace("image: pc-app:1\n", "image: pc-app:99\n");
        let err = load_fixture(&broken).unwrap_err();
        assert!(err.message().contains("pc-app:99"), "{err}");

        let exposed = CANONICAL_FIXTURE_YAML.replace(
            "port: 9092\n    exposure: { type: internalOnly }",
            "port: 9092\n    exposure: { type: nodePort, nodePort: 31111 }",
        );
        let err = load_fixture(&exposed).unwrap_err();
        assert!(err.message().contains("must start internal-only"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = load_fixture("nodes: [\n  - oops").unwrap_err();
        assert!(
            matches!(err, DocumentError::Parse { line: Some(_), .. }),
            "{err:?}"
        );
    }
}
