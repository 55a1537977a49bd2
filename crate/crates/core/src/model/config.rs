use std::collections::BTreeMap;
use std::fmt;

use super::approx_eq;
use super::overlay::{EdgeId, InstanceId, Overlay};
use super::substrate::{NodeId, SubstrateNetwork};
use super::template::{ComponentId, Service, Source, Template};
use crate::error::{Error, Result};

/// Overlay and bookkeeping of one embedded service.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceState {
    pub template: Template,
    pub sources: Vec<Source>,
    pub overlay: Overlay,
}

impl ServiceState {
    pub fn source_rate(&self, component: ComponentId, node: NodeId) -> Option<f64> {
        self.sources.iter().find(|s| s.component == component && s.node == node).map(|s| s.rate)
    }
}

/// All overlays and their mappings on one substrate network.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfiguration {
    pub substrate: SubstrateNetwork,
    pub services: BTreeMap<String, ServiceState>,
}

impl SystemConfiguration {
    pub fn empty(substrate: SubstrateNetwork) -> Self {
        SystemConfiguration { substrate, services: BTreeMap::new() }
    }

    /// Services as (template, sources) pairs, in name order.
    pub fn service_specs(&self) -> Vec<Service> {
        self.services.values().map(|s| Service::new(s.template.clone(), s.sources.clone())).collect()
    }

    pub fn instance_count(&self) -> usize {
        self.services.values().map(|s| s.overlay.instance_count()).sum()
    }

    pub fn total_source_rate(&self) -> f64 {
        self.services.values().flat_map(|s| s.sources.iter()).map(|s| s.rate).fold(0.0, |a, r| a + r)
    }

    /// Recomputes every instance's input rates, output rates and loads from
    /// the edge rates and the component functions, visiting instances in
    /// topological order of each overlay.
    pub fn propagate_rates(&mut self) -> Result<()> {
        for (name, svc) in self.services.iter_mut() {
            let order = svc.overlay.topo_order().ok_or_else(|| Error::OverlayCycle(name.clone()))?;
            for id in order {
                let inst = svc.overlay.instance(id).expect("instance in topo order");
                let (component, node) = (inst.component, inst.node);
                let comp = svc.template.component(component);
                let in_rates = svc.overlay.input_sums(&svc.template, id);
                let out_rates = if comp.source {
                    vec![svc.source_rate(component, node).unwrap_or(0.0)]
                } else {
                    comp.output_rates(&in_rates)
                };
                let cpu = comp.cpu.eval(&in_rates);
                let mem = comp.mem.eval(&in_rates);
                let inst = svc.overlay.instance_mut(id).expect("instance in topo order");
                inst.in_rates = in_rates;
                inst.out_rates = out_rates;
                inst.cpu_load = cpu;
                inst.mem_load = mem;
            }
        }
        Ok(())
    }
}

/// Problem found by [`validate_configuration`]. Variants that correspond to
/// a constraint family of the mixed-integer program say so through
/// [`IssueKind::constraint_family`].
#[derive(Debug, Clone, PartialEq)]
pub enum IssueKind {
    UnknownReference(String),
    ArcMismatch { edge: EdgeId },
    DuplicateEdge { edge: EdgeId },
    DuplicatePlacement { component: ComponentId, node: NodeId },
    Cycle,
    NegativeRate { edge: EdgeId },
    MissingSourceInstance { component: ComponentId, node: NodeId },
    ExtraSourceInstance { instance: InstanceId },
    SourceRate { instance: InstanceId },
    OutputFunction { instance: InstanceId, output: usize },
    InputSum { instance: InstanceId, input: usize },
    OutputSum { instance: InstanceId, output: usize },
    FlowConservation { edge: EdgeId, node: NodeId },
    CpuLoad { instance: InstanceId },
    MemLoad { instance: InstanceId },
}

impl IssueKind {
    /// Number of the MILP constraint family expressing the same rule.
    pub fn constraint_family(&self) -> Option<u8> {
        match self {
            IssueKind::MissingSourceInstance { .. } | IssueKind::ExtraSourceInstance { .. } => Some(1),
            IssueKind::SourceRate { .. } => Some(2),
            IssueKind::OutputFunction { .. } => Some(7),
            IssueKind::InputSum { .. } => Some(8),
            IssueKind::OutputSum { .. } => Some(9),
            IssueKind::FlowConservation { .. } => Some(10),
            IssueKind::CpuLoad { .. } => Some(12),
            IssueKind::MemLoad { .. } => Some(13),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub service: String,
    pub kind: IssueKind,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {:?}", self.service, self.kind)
    }
}

/// Checks every structural and consistency rule of a configuration:
/// arc correspondence, placement uniqueness, acyclicity, source fidelity,
/// rate propagation, output discharge, flow conservation and load
/// consistency. Capacity overloads are not issues; see `count_violations`.
pub fn validate_configuration(cfg: &SystemConfiguration) -> Vec<ConfigIssue> {
    let mut issues = Vec::new();
    let sub = &cfg.substrate;
    for (name, svc) in &cfg.services {
        let mut push = |kind| issues.push(ConfigIssue { service: name.clone(), kind });
        let t = &svc.template;
        let ov = &svc.overlay;

        let mut structural_ok = true;
        let mut seen = BTreeMap::new();
        for inst in ov.instances() {
            if inst.component.0 >= t.components.len() || inst.node.0 >= sub.node_count() {
                push(IssueKind::UnknownReference(format!("instance {}", inst.id.0)));
                structural_ok = false;
                continue;
            }
            let c = t.component(inst.component);
            if inst.in_rates.len() != c.inputs || inst.out_rates.len() != c.outputs {
                push(IssueKind::UnknownReference(format!("instance {} rate vector arity", inst.id.0)));
                structural_ok = false;
            }
            if seen.insert((inst.component, inst.node), inst.id).is_some() {
                push(IssueKind::DuplicatePlacement { component: inst.component, node: inst.node });
            }
        }
        for e in ov.edges() {
            let ends = (ov.instance(e.src), ov.instance(e.dst));
            let (Some(src), Some(dst)) = ends else {
                push(IssueKind::UnknownReference(format!("edge {} endpoint", e.id.0)));
                structural_ok = false;
                continue;
            };
            if e.arc.0 >= t.arcs.len() {
                push(IssueKind::UnknownReference(format!("edge {} arc", e.id.0)));
                structural_ok = false;
                continue;
            }
            let arc = t.arc(e.arc);
            if arc.from != src.component || arc.to != dst.component {
                push(IssueKind::ArcMismatch { edge: e.id });
                structural_ok = false;
            }
            if ov.edges().any(|o| o.id < e.id && o.arc == e.arc && o.src == e.src && o.dst == e.dst) {
                push(IssueKind::DuplicateEdge { edge: e.id });
            }
            if e.rate < -approx_eq_slack(e.rate) || e.routing.links.values().any(|&r| r < 0.0) {
                push(IssueKind::NegativeRate { edge: e.id });
            }
            if e.routing.links.keys().any(|l| l.0 >= sub.link_count()) {
                push(IssueKind::UnknownReference(format!("edge {} link", e.id.0)));
                structural_ok = false;
                continue;
            }
            if let Some(v) = e.routing.conservation_violation(sub, src.node, dst.node, e.rate) {
                push(IssueKind::FlowConservation { edge: e.id, node: v });
            }
        }
        if !structural_ok {
            continue;
        }
        if ov.topo_order().is_none() {
            push(IssueKind::Cycle);
        }

        for s in &svc.sources {
            if ov.find(s.component, s.node).is_none() {
                push(IssueKind::MissingSourceInstance { component: s.component, node: s.node });
            }
        }
        for inst in ov.instances() {
            let c = t.component(inst.component);
            if c.source {
                match svc.source_rate(inst.component, inst.node) {
                    None => push(IssueKind::ExtraSourceInstance { instance: inst.id }),
                    Some(rate) if !approx_eq(inst.out_rates[0], rate) => {
                        push(IssueKind::SourceRate { instance: inst.id })
                    }
                    Some(_) => {}
                }
            } else {
                for (k, f) in c.out.iter().enumerate() {
                    if !approx_eq(inst.out_rates[k], f.eval(&inst.in_rates)) {
                        push(IssueKind::OutputFunction { instance: inst.id, output: k });
                    }
                }
            }
            let ins = ov.input_sums(t, inst.id);
            for (k, (&have, &sum)) in inst.in_rates.iter().zip(&ins).enumerate() {
                if !approx_eq(have, sum) {
                    push(IssueKind::InputSum { instance: inst.id, input: k });
                }
            }
            let outs = ov.output_sums(t, inst.id);
            for (k, (&have, &sum)) in inst.out_rates.iter().zip(&outs).enumerate() {
                if !t.is_exit(inst.component, k) && !approx_eq(have, sum) {
                    push(IssueKind::OutputSum { instance: inst.id, output: k });
                }
            }
            if !approx_eq(inst.cpu_load, c.cpu.eval(&inst.in_rates)) {
                push(IssueKind::CpuLoad { instance: inst.id });
            }
            if !approx_eq(inst.mem_load, c.mem.eval(&inst.in_rates)) {
                push(IssueKind::MemLoad { instance: inst.id });
            }
        }
    }
    issues
}

fn approx_eq_slack(x: f64) -> f64 {
    super::TOL * (1.0 + x.abs())
}
