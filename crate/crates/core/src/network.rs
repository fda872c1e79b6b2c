//! Two-zone network model: outside the cluster, and inside it (pods and nodes).
//! There are no per-pod network policies.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{ClusterState, Exposure, Service, ServiceRef};

/// Where a session's traffic originates.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(
    tag = "zone",
    rename_all = "camelCase",
    rename_all_fields = "camelCase"
)]
pub enum Location {
    #[default]
    External,
    InCluster {
        namespace: String,
    },
    OnNode {
        node: String,
    },
}

impl Location {
    pub fn in_cluster(namespace: impl Into<String>) -> Self {
        Location::InCluster {
            namespace: namespace.into(),
        }
    }

    pub fn on_node(node: impl Into<String>) -> Self {
        Location::OnNode { node: node.into() }
    }

    pub fn is_internal(&self) -> bool {
        !matches!(self, Location::External)
    }
}

/// Internal-only services answer in-cluster and on-node callers; NodePort
/// services answer everyone.
pub fn reachable(from: &Location, to: &Service) -> bool {
    match to.exposure {
        Exposure::NodePort { .. } => true,
        Exposure::InternalOnly => from.is_internal(),
    }
}

pub fn reachable_ref(
    state: &ClusterState,
    from: &Location,
    to: &ServiceRef,
) -> Result<bool, ModelError> {
    state
        .service_by_ref(to)
        .map(|s| reachable(from, s))
        .ok_or_else(|| ModelError::not_found("service", &to.namespace, &to.name))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Endpoint {
    pub service: ServiceRef,
    #[serde(rename = "clusterIP")]
    pub cluster_ip: String,
    pub port: u16,
    pub exposure: Exposure,
}

impl Endpoint {
    pub fn of(service: &Service) -> Self {
        Endpoint {
            service: service.service_ref(),
            cluster_ip: service.cluster_ip.clone(),
            port: service.port,
            exposure: service.exposure,
        }
    }
}

/// `kubectl get services`: the current endpoint of a named service.
pub fn resolve_service(
    state: &ClusterState,
    name: &str,
    namespace: &str,
) -> Result<Endpoint, ModelError> {
    state
        .service(namespace, name)
        .map(Endpoint::of)
        .ok_or_else(|| ModelError::not_found("service", namespace, name))
}
