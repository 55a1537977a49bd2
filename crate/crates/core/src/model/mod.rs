//! Substrate networks, service templates, overlays and their scoring.

mod config;
mod function;
mod overlay;
mod score;
mod substrate;
mod template;

pub use config::{validate_configuration, ConfigIssue, IssueKind, ServiceState, SystemConfiguration};
pub use function::{InputTerm, Piece, PiecewiseTerm, ResourceFunction};
pub use overlay::{EdgeId, FlowRouting, Instance, InstanceId, Overlay, OverlayEdge};
pub use score::{
    churn, count_violations, default_weights, score, total_over_instances, violations_from_usage, ConfigurationScore,
    RateBounds, ResourceUsage, ViolationReport, Weights,
};
pub use substrate::{Link, LinkId, Node, NodeId, SubstrateNetwork};
pub use template::{validate_template, Arc, ArcId, Component, ComponentId, Service, Source, Template, TemplateIssue};

/// Absolute tolerance for rate and load comparisons.
pub const TOL: f64 = 1e-9;

/// Equality up to [`TOL`], widened proportionally for large magnitudes.
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * (1.0 + a.abs().max(b.abs()))
}
