//! Capacity violations and the weighted lexicographic objective.
//!
//! The objective has three priority levels: the number of violated node or
//! link capacities (weight `m1`), then total path delay plus instance churn
//! (weight `m2`), then the maximum over-subscription per resource and the
//! total CPU, memory and link usage (weight 1).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::config::SystemConfiguration;
use super::function::ResourceFunction;
use super::substrate::{LinkId, NodeId, SubstrateNetwork};
use super::template::{Service, Template};
use super::TOL;
use crate::error::{Error, Result};

/// Aggregated resource use of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceUsage {
    pub cpu: Vec<f64>,
    pub mem: Vec<f64>,
    pub link: Vec<f64>,
}

impl ResourceUsage {
    pub fn of(cfg: &SystemConfiguration) -> Self {
        let sub = &cfg.substrate;
        let mut usage = ResourceUsage {
            cpu: vec![0.0; sub.node_count()],
            mem: vec![0.0; sub.node_count()],
            link: vec![0.0; sub.link_count()],
        };
        for svc in cfg.services.values() {
            for inst in svc.overlay.instances() {
                usage.cpu[inst.node.0] += inst.cpu_load;
                usage.mem[inst.node.0] += inst.mem_load;
            }
            for e in svc.overlay.edges() {
                for (&l, &r) in &e.routing.links {
                    usage.link[l.0] += r;
                }
            }
        }
        usage
    }
}

/// Which capacities are exceeded and by how much.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViolationReport {
    pub n_violations: usize,
    pub psi_cpu: f64,
    pub psi_mem: f64,
    pub psi_dr: f64,
    pub cpu_overloaded: Vec<NodeId>,
    pub mem_overloaded: Vec<NodeId>,
    pub link_overloaded: Vec<LinkId>,
}

/// Counts node CPU, node memory and link rate overloads. Boundaries are
/// feasible: a load equal to its capacity is not a violation.
pub fn count_violations(cfg: &SystemConfiguration) -> ViolationReport {
    violations_from_usage(&cfg.substrate, &ResourceUsage::of(cfg))
}

pub fn violations_from_usage(sub: &SubstrateNetwork, usage: &ResourceUsage) -> ViolationReport {
    let mut rep = ViolationReport::default();
    for v in sub.node_ids() {
        let node = sub.node(v);
        let over_cpu = usage.cpu[v.0] - node.cpu;
        let over_mem = usage.mem[v.0] - node.mem;
        if over_cpu > TOL {
            rep.cpu_overloaded.push(v);
            rep.psi_cpu = rep.psi_cpu.max(over_cpu);
        }
        if over_mem > TOL {
            rep.mem_overloaded.push(v);
            rep.psi_mem = rep.psi_mem.max(over_mem);
        }
    }
    for l in sub.link_ids() {
        let over = usage.link[l.0] - sub.link(l).rate;
        if over > TOL {
            rep.link_overloaded.push(l);
            rep.psi_dr = rep.psi_dr.max(over);
        }
    }
    rep.n_violations = rep.cpu_overloaded.len() + rep.mem_overloaded.len() + rep.link_overloaded.len();
    rep
}

/// Weights of the first two priority levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationScore {
    pub n_violations: usize,
    pub total_delay: f64,
    pub churn: usize,
    pub psi_cpu: f64,
    pub psi_mem: f64,
    pub psi_dr: f64,
    pub total_cpu: f64,
    pub total_mem: f64,
    pub total_rate: f64,
    pub objective: f64,
}

impl ConfigurationScore {
    pub fn priority2(&self) -> f64 {
        self.total_delay + self.churn as f64
    }

    pub fn priority3(&self) -> f64 {
        self.psi_cpu + self.psi_mem + self.psi_dr + self.total_cpu + self.total_mem + self.total_rate
    }

    /// Compares by violations, then delay plus churn, then the rest.
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.n_violations
            .cmp(&other.n_violations)
            .then(self.priority2().total_cmp(&other.priority2()))
            .then(self.priority3().total_cmp(&other.priority3()))
    }
}

/// Scores a configuration whose rates have been propagated. Churn counts
/// (component, node) pairs whose occupancy differs from `reference`, only
/// for services that already exist there.
pub fn score(
    cfg: &SystemConfiguration,
    reference: Option<&SystemConfiguration>,
    weights: Weights,
) -> ConfigurationScore {
    let rep = count_violations(cfg);
    let mut total_delay = 0.0;
    let mut total_cpu = 0.0;
    let mut total_mem = 0.0;
    let mut total_rate = 0.0;
    for svc in cfg.services.values() {
        for inst in svc.overlay.instances() {
            total_cpu += inst.cpu_load;
            total_mem += inst.mem_load;
        }
        for e in svc.overlay.edges() {
            for (l, r) in e.routing.used_links() {
                total_delay += cfg.substrate.link(l).delay;
                total_rate += r;
            }
        }
    }
    let churn = reference.map_or(0, |r| churn(cfg, r));
    let mut s = ConfigurationScore {
        n_violations: rep.n_violations,
        total_delay,
        churn,
        psi_cpu: rep.psi_cpu,
        psi_mem: rep.psi_mem,
        psi_dr: rep.psi_dr,
        total_cpu,
        total_mem,
        total_rate,
        objective: 0.0,
    };
    s.objective = weights.m1 * s.n_violations as f64 + weights.m2 * s.priority2() + s.priority3();
    s
}

/// Number of instance starts and stops between `reference` and `cfg`.
pub fn churn(cfg: &SystemConfiguration, reference: &SystemConfiguration) -> usize {
    cfg.services
        .iter()
        .filter_map(|(name, svc)| reference.services.get(name).map(|old| (svc, old)))
        .map(|(svc, old)| {
            let now: BTreeSet<_> = svc.overlay.instances().map(|i| (i.component, i.node)).collect();
            let before: BTreeSet<_> = old.overlay.instances().map(|i| (i.component, i.node)).collect();
            now.symmetric_difference(&before).count()
        })
        .sum()
}

/// Upper bounds on data rates for one service, derived by pushing the
/// source rates through the template in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBounds {
    /// Per component and input: bound on the rate seen by one instance.
    pub input: Vec<Vec<f64>>,
    /// Per component and output: bound on the rate emitted by one instance.
    pub output: Vec<Vec<f64>>,
    /// Per component and output: bound on the rate summed over all instances.
    pub output_total: Vec<Vec<f64>>,
}

impl RateBounds {
    pub fn compute(template: &Template, sources: &[super::template::Source], n_nodes: usize) -> Result<Self> {
        let n = template.components.len();
        let mut b =
            RateBounds { input: vec![Vec::new(); n], output: vec![Vec::new(); n], output_total: vec![Vec::new(); n] };
        for j in template.topo_order()? {
            let c = template.component(j);
            if c.source {
                let rates: Vec<f64> = sources.iter().filter(|s| s.component == j).map(|s| s.rate).collect();
                b.input[j.0] = Vec::new();
                b.output[j.0] = vec![rates.iter().copied().fold(0.0, f64::max)];
                b.output_total[j.0] = vec![rates.iter().sum()];
                continue;
            }
            let mut input = vec![0.0; c.inputs];
            for a in &template.arcs {
                if a.to == j {
                    input[a.input] += b.output_total[a.from.0][a.output];
                }
            }
            b.output[j.0] = c.out.iter().map(|f| f.eval(&input)).collect();
            b.output_total[j.0] = c.out.iter().map(|f| total_over_instances(f, &input, n_nodes)).collect();
            b.input[j.0] = input;
        }
        let all = b.input.iter().chain(&b.output).chain(&b.output_total).flatten();
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::Unbounded(format!("rate bound of template `{}`", template.name)));
        }
        Ok(b)
    }

    /// Largest single-instance rate bound.
    pub fn max_rate(&self) -> f64 {
        self.input.iter().chain(&self.output).flatten().copied().fold(0.0, f64::max)
    }
}

/// Bound on `sum_v f(x_v)` over at most `n_nodes` instances whose inputs sum
/// to at most `input` per coordinate.
pub fn total_over_instances(f: &ResourceFunction, input: &[f64], n_nodes: usize) -> f64 {
    match f.coefficients() {
        Some(coef) => n_nodes as f64 * f.constant + coef.iter().zip(input).map(|(c, x)| c * x).sum::<f64>(),
        None => n_nodes as f64 * f.eval(input),
    }
}

/// Weights that make the objective strictly lexicographic: `m2` exceeds
/// every attainable priority-3 total and `m1` exceeds every attainable
/// `m2`-weighted priority-2 total plus priority-3 total.
pub fn default_weights(substrate: &SubstrateNetwork, services: &[Service]) -> Result<Weights> {
    let nv = substrate.node_count();
    let nl = substrate.link_count();
    let caps: f64 =
        substrate.total_cpu() + substrate.total_mem() + substrate.links().iter().map(|l| l.rate).sum::<f64>();
    let mut demand = 0.0;
    let mut n_components = 0usize;
    let mut n_arcs = 0usize;
    for svc in services {
        let t = &svc.template;
        let bounds = RateBounds::compute(t, &svc.sources, nv)?;
        n_components += t.components.len();
        n_arcs += t.arcs.len();
        for (j, c) in t.components.iter().enumerate() {
            demand += total_over_instances(&c.cpu, &bounds.input[j], nv);
            demand += total_over_instances(&c.mem, &bounds.input[j], nv);
        }
        for a in &t.arcs {
            demand += nl as f64 * bounds.output_total[a.from.0][a.output];
        }
    }
    // Each over-subscription is at most the corresponding total load.
    let priority3 = caps + 2.0 * demand;
    let delay_sum: f64 = substrate.links().iter().map(|l| l.delay).sum();
    let priority2 = delay_sum * (n_arcs * nv * nv) as f64 + (n_components * nv) as f64;
    if !priority3.is_finite() || !priority2.is_finite() {
        return Err(Error::Unbounded("objective weight bound".into()));
    }
    let m2 = 1.0 + priority3;
    let m1 = 1.0 + m2 * (priority2 + 1.0);
    Ok(Weights { m1, m2 })
}

impl SystemConfiguration {
    pub fn default_weights(&self) -> Result<Weights> {
        default_weights(&self.substrate, &self.service_specs())
    }
}
