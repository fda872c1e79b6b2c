//! Verb × kind × namespace authorization.

use crate::error::AuthzError;
use crate::model::{ClusterState, Credential, CredentialLevel, ResourceKind, Verb};

/// Whether `credential` may perform `verb` on `kind` in `namespace`.
///
/// Cluster-admin credentials are allowed everything; anyone else needs a
/// [`RoleRule`](crate::model::RoleRule) naming their subject. A credential the
/// fixture never issued is an error rather than a denial.
pub fn authorize(
    state: &ClusterState,
    credential: &Credential,
    verb: Verb,
    kind: ResourceKind,
    namespace: &str,
) -> Result<bool, AuthzError> {
    if !state.is_issued(credential) {
        return Err(AuthzError::UnknownPrincipal(credential.subject.clone()));
    }
    if credential.level == CredentialLevel::ClusterAdmin {
        return Ok(true);
    }
    Ok(state
        .role_rules
        .iter()
        .any(|r| r.covers(&credential.subject, verb, kind, namespace)))
}

/// Like [`authorize`], treating unknown principals as denied.
pub fn allowed(
    state: &ClusterState,
    credential: &Credential,
    verb: Verb,
    kind: ResourceKind,
    namespace: &str,
) -> bool {
    authorize(state, credential, verb, kind, namespace).unwrap_or(false)
}
