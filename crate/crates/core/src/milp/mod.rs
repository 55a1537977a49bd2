//! Mixed-integer linear program of the embedding problem, its LP-format
//! export and the import of solver solutions.
//!
//! Instances are identified by (component, node), so the program only
//! allows one instance of a component per node. Components and arcs of all
//! services are numbered globally in service-name order; variable names
//! carry these global indices.

mod lp;
mod solution;

pub use lp::{emit_lp, format_number};
pub use solution::{
    assignment_from_config, config_from_values, import_solution, parse_solution, ConstraintCheck, ImportedSolution,
    ParsedSolution,
};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{
    ArcId, ComponentId, RateBounds, ResourceFunction, Service, SubstrateNetwork, SystemConfiguration, Weights,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    /// Continuous and non-negative.
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Constraint family, numbered as in the formulation (1 to 19).
    pub family: u8,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Big-M constants. Each dominates every value the bounded quantity can
/// take in a configuration of the given services.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigM {
    pub rate_m: f64,
    pub cpu_m: f64,
    pub mem_m: f64,
    pub dr_m: f64,
}

/// Where a global component or arc index comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n_nodes: usize,
    pub n_links: usize,
    /// (service name, local component id) per global component.
    pub components: Vec<(String, ComponentId)>,
    /// (service name, local arc id) per global arc.
    pub arcs: Vec<(String, ArcId)>,
    /// First global component and arc index of each service.
    pub offsets: HashMap<String, (usize, usize)>,
}

impl Layout {
    pub fn component(&self, service: &str, j: ComponentId) -> usize {
        self.offsets[service].0 + j.0
    }

    pub fn arc(&self, service: &str, a: ArcId) -> usize {
        self.offsets[service].1 + a.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimised.
    pub objective: Vec<(usize, f64)>,
    pub big_m: BigM,
    pub weights: Weights,
    pub layout: Layout,
    pub services: Vec<Service>,
    pub substrate: SubstrateNetwork,
    /// Previous configuration that churn is measured against.
    pub reference: Option<SystemConfiguration>,
    index: HashMap<String, usize>,
}

impl MilpModel {
    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn count_named(&self, prefix: &str) -> usize {
        self.variables.iter().filter(|v| v.name.split('_').next() == Some(prefix)).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * values[i]).sum()
    }

    fn add_var(&mut self, name: String, kind: VarKind) -> usize {
        let i = self.variables.len();
        self.index.insert(name.clone(), i);
        self.variables.push(Variable { name, kind, upper: None });
        i
    }

    fn add_row(&mut self, name: String, family: u8, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        let terms: Vec<_> = terms.into_iter().filter(|&(_, c)| c != 0.0).collect();
        if !terms.is_empty() {
            self.constraints.push(Constraint { name, family, terms, relation, rhs });
        }
    }
}

fn affine_parts(f: &ResourceFunction, locator: impl Fn() -> String) -> Result<(f64, Vec<f64>)> {
    f.coefficients().map(|c| (f.constant, c)).ok_or_else(|| Error::NonAffine { locator: locator() })
}

fn check_affine(services: &[Service]) -> Result<()> {
    for s in services {
        for c in &s.template.components {
            let at = |what: &str| format!("{}/{}/{}", s.name(), c.name, what);
            affine_parts(&c.cpu, || at("cpu"))?;
            affine_parts(&c.mem, || at("mem"))?;
            for (k, f) in c.out.iter().enumerate() {
                affine_parts(f, || at(&format!("out{k}")))?;
            }
        }
    }
    Ok(())
}

/// Big-M values from per-instance rate bounds of every service.
pub fn compute_big_m(substrate: &SubstrateNetwork, services: &[Service]) -> Result<BigM> {
    check_affine(services)?;
    let nv = substrate.node_count();
    let mut rate_m: f64 = 0.0;
    let mut cpu_bound = 0.0;
    let mut mem_bound = 0.0;
    let mut dr_m = 0.0;
    for s in services {
        let t = &s.template;
        let b = RateBounds::compute(t, &s.sources, nv)?;
        rate_m = rate_m.max(b.max_rate());
        for (j, c) in t.components.iter().enumerate() {
            cpu_bound += c.cpu.eval(&b.input[j]);
            mem_bound += c.mem.eval(&b.input[j]);
        }
        dr_m += t.arcs.iter().map(|a| b.output_total[a.from.0][a.output]).sum::<f64>();
    }
    // Every node hosts at most one instance of each component.
    let min_cpu = substrate.nodes().iter().map(|n| n.cpu).fold(f64::INFINITY, f64::min);
    let min_mem = substrate.nodes().iter().map(|n| n.mem).fold(f64::INFINITY, f64::min);
    let over = |bound: f64, cap: f64| if cap.is_finite() { (bound - cap).max(0.0) } else { 0.0 };
    Ok(BigM { rate_m, cpu_m: over(cpu_bound, min_cpu), mem_m: over(mem_bound, min_mem), dr_m })
}

/// Builds the program for embedding `services` on `substrate`. Components of
/// services already present in `prev` get churn indicators against the
/// previous placement; new services contribute no churn term.
pub fn build_model(
    substrate: &SubstrateNetwork,
    services: &[Service],
    prev: Option<&SystemConfiguration>,
    weights: Weights,
) -> Result<MilpModel> {
    let mut services = services.to_vec();
    services.sort_by(|a, b| a.name().cmp(b.name()));
    for s in &services {
        s.validate(substrate)?;
    }
    let big_m = compute_big_m(substrate, &services)?;
    let nv = substrate.node_count();
    let nl = substrate.link_count();

    let mut layout =
        Layout { n_nodes: nv, n_links: nl, components: Vec::new(), arcs: Vec::new(), offsets: HashMap::new() };
    for s in &services {
        layout.offsets.insert(s.name().to_string(), (layout.components.len(), layout.arcs.len()));
        for j in 0..s.template.components.len() {
            layout.components.push((s.name().to_string(), ComponentId(j)));
        }
        for a in 0..s.template.arcs.len() {
            layout.arcs.push((s.name().to_string(), ArcId(a)));
        }
    }
    let mut m = MilpModel {
        variables: Vec::new(),
        constraints: Vec::new(),
        objective: Vec::new(),
        big_m,
        weights,
        layout: layout.clone(),
        services: services.clone(),
        substrate: substrate.clone(),
        reference: prev.cloned(),
        index: HashMap::new(),
    };

    // Variables, family by family.
    let comps: Vec<(&Service, usize)> =
        services.iter().flat_map(|s| (0..s.template.components.len()).map(move |j| (s, j))).collect();
    let arcs: Vec<(&Service, usize)> =
        services.iter().flat_map(|s| (0..s.template.arcs.len()).map(move |a| (s, a))).collect();
    let mut x = vec![vec![0; nv]; comps.len()];
    let mut lam = vec![vec![Vec::new(); nv]; comps.len()];
    let mut lamp = vec![vec![Vec::new(); nv]; comps.len()];
    let mut rho = vec![vec![0; nv]; comps.len()];
    let mut mu = vec![vec![0; nv]; comps.len()];
    for (g, &(s, j)) in comps.iter().enumerate() {
        let c = &s.template.components[j];
        for v in 0..nv {
            x[g][v] = m.add_var(format!("x_{g}_{v}"), VarKind::Binary);
            lam[g][v] = (0..c.inputs).map(|k| m.add_var(format!("Lam_{g}_{v}_{k}"), VarKind::Continuous)).collect();
            lamp[g][v] = (0..c.outputs).map(|k| m.add_var(format!("LamP_{g}_{v}_{k}"), VarKind::Continuous)).collect();
            rho[g][v] = m.add_var(format!("rho_{g}_{v}"), VarKind::Continuous);
            mu[g][v] = m.add_var(format!("mu_{g}_{v}"), VarKind::Continuous);
        }
    }
    let mut y = vec![vec![vec![0; nv]; nv]; arcs.len()];
    let mut z = vec![vec![vec![Vec::new(); nv]; nv]; arcs.len()];
    let mut zeta = vec![vec![vec![Vec::new(); nv]; nv]; arcs.len()];
    for g in 0..arcs.len() {
        for v1 in 0..nv {
            for v2 in 0..nv {
                y[g][v1][v2] = m.add_var(format!("y_{g}_{v1}_{v2}"), VarKind::Continuous);
                z[g][v1][v2] =
                    (0..nl).map(|l| m.add_var(format!("z_{g}_{v1}_{v2}_{l}"), VarKind::Continuous)).collect();
                zeta[g][v1][v2] =
                    (0..nl).map(|l| m.add_var(format!("zeta_{g}_{v1}_{v2}_{l}"), VarKind::Binary)).collect();
            }
        }
    }
    let om_cpu: Vec<usize> = (0..nv).map(|v| m.add_var(format!("om_cpu_{v}"), VarKind::Binary)).collect();
    let om_mem: Vec<usize> = (0..nv).map(|v| m.add_var(format!("om_mem_{v}"), VarKind::Binary)).collect();
    let om_l: Vec<usize> = (0..nl).map(|l| m.add_var(format!("om_{l}"), VarKind::Binary)).collect();
    let psi_cpu = m.add_var("psi_cpu".into(), VarKind::Continuous);
    let psi_mem = m.add_var("psi_mem".into(), VarKind::Continuous);
    let psi_dr = m.add_var("psi_dr".into(), VarKind::Continuous);

    // Previous placement of services that already exist.
    let mut delta: Vec<Option<Vec<(usize, f64)>>> = vec![None; comps.len()];
    for (g, &(s, j)) in comps.iter().enumerate() {
        let Some(old) = prev.and_then(|p| p.services.get(s.name())) else { continue };
        let mut row = Vec::with_capacity(nv);
        for v in 0..nv {
            let had = old.overlay.find(ComponentId(j), crate::model::NodeId(v)).is_some();
            row.push((m.add_var(format!("del_{g}_{v}"), VarKind::Binary), if had { 1.0 } else { 0.0 }));
        }
        delta[g] = Some(row);
    }

    // (1), (2): source placement and rate; unsourced nodes host no source instance.
    for (g, &(s, j)) in comps.iter().enumerate() {
        if !s.template.components[j].source {
            continue;
        }
        for v in 0..nv {
            let src = s.sources.iter().find(|src| src.component.0 == j && src.node.0 == v);
            match src {
                Some(src) => {
                    m.add_row(format!("c1_{g}_{v}"), 1, vec![(x[g][v], 1.0)], Relation::Eq, 1.0);
                    m.add_row(format!("c2_{g}_{v}"), 2, vec![(lamp[g][v][0], 1.0)], Relation::Eq, src.rate);
                }
                None => m.add_row(format!("c1x_{g}_{v}"), 1, vec![(x[g][v], 1.0)], Relation::Eq, 0.0),
            }
        }
    }
    // (3), (4): rates only on placed instances.
    for g in 0..comps.len() {
        for v in 0..nv {
            for (k, &var) in lam[g][v].iter().enumerate() {
                m.add_row(format!("c3_{g}_{v}_{k}"), 3, vec![(var, 1.0), (x[g][v], -big_m.rate_m)], Relation::Le, 0.0);
            }
            for (k, &var) in lamp[g][v].iter().enumerate() {
                m.add_row(format!("c4_{g}_{v}_{k}"), 4, vec![(var, 1.0), (x[g][v], -big_m.rate_m)], Relation::Le, 0.0);
            }
        }
    }
    // (5), (6): churn indicators.
    for g in 0..comps.len() {
        let Some(row) = &delta[g] else { continue };
        for v in 0..nv {
            let (d, prior) = row[v];
            m.add_row(format!("c5_{g}_{v}"), 5, vec![(x[g][v], 1.0), (d, -1.0)], Relation::Le, prior);
            m.add_row(format!("c6_{g}_{v}"), 6, vec![(x[g][v], -1.0), (d, -1.0)], Relation::Le, -prior);
        }
    }
    // (7), (12), (13): affine functions, constant paid only when placed.
    let affine_row = |f: &ResourceFunction, lhs: usize, g: usize, v: usize| -> Vec<(usize, f64)> {
        let coef = f.coefficients().expect("checked affine");
        let mut terms = vec![(lhs, 1.0), (x[g][v], -f.constant)];
        terms.extend(lam[g][v].iter().zip(coef).map(|(&var, c)| (var, -c)));
        terms
    };
    let mut rows = Vec::new();
    for (g, &(s, j)) in comps.iter().enumerate() {
        let c = &s.template.components[j];
        for v in 0..nv {
            if !c.source {
                for (k, f) in c.out.iter().enumerate() {
                    rows.push((format!("c7_{g}_{v}_{k}"), 7, affine_row(f, lamp[g][v][k], g, v)));
                }
            }
            rows.push((format!("c12_{g}_{v}"), 12, affine_row(&c.cpu, rho[g][v], g, v)));
            rows.push((format!("c13_{g}_{v}"), 13, affine_row(&c.mem, mu[g][v], g, v)));
        }
    }
    // (8), (9): instance rates are sums of edge rates.
    for (g, &(s, j)) in comps.iter().enumerate() {
        let c = &s.template.components[j];
        let off = layout.offsets[s.name()].1;
        for v in 0..nv {
            for k in 0..c.inputs {
                let mut terms = vec![(lam[g][v][k], 1.0)];
                for (a, _) in s.template.arcs.iter().enumerate().filter(|(_, a)| a.to.0 == j && a.input == k) {
                    terms.extend((0..nv).map(|v1| (y[off + a][v1][v], -1.0)));
                }
                rows.push((format!("c8_{g}_{v}_{k}"), 8, terms));
            }
            // Outputs without arcs leave the service and are unconstrained.
            for k in (0..c.outputs).filter(|&k| !s.template.is_exit(ComponentId(j), k)) {
                let mut terms = vec![(lamp[g][v][k], 1.0)];
                for (a, _) in s.template.arcs.iter().enumerate().filter(|(_, a)| a.from.0 == j && a.output == k) {
                    terms.extend((0..nv).map(|v2| (y[off + a][v][v2], -1.0)));
                }
                rows.push((format!("c9_{g}_{v}_{k}"), 9, terms));
            }
        }
    }
    for (name, family, terms) in rows {
        m.add_row(name, family, terms, Relation::Eq, 0.0);
    }
    // (10), (11): flow conservation and link-use indicators.
    for g in 0..arcs.len() {
        for v1 in 0..nv {
            for v2 in 0..nv {
                for v in 0..nv {
                    if v == v2 && v1 != v2 {
                        continue;
                    }
                    let mut terms: Vec<(usize, f64)> = Vec::new();
                    for &l in substrate.out_links(crate::model::NodeId(v)) {
                        terms.push((z[g][v1][v2][l.0], 1.0));
                    }
                    for (l, link) in substrate.links().iter().enumerate() {
                        if link.dst.0 == v {
                            terms.push((z[g][v1][v2][l], -1.0));
                        }
                    }
                    if v == v1 && v1 != v2 {
                        terms.push((y[g][v1][v2], -1.0));
                    }
                    terms.sort_by_key(|t| t.0);
                    m.add_row(format!("c10_{g}_{v1}_{v2}_{v}"), 10, terms, Relation::Eq, 0.0);
                }
                for l in 0..nl {
                    let terms = vec![(z[g][v1][v2][l], 1.0), (zeta[g][v1][v2][l], -big_m.rate_m)];
                    m.add_row(format!("c11_{g}_{v1}_{v2}_{l}"), 11, terms, Relation::Le, 0.0);
                }
            }
        }
    }
    // (14)-(19): overload indicators and maximum over-subscription.
    for v in 0..nv {
        let node = substrate.node(crate::model::NodeId(v));
        let loads =
            |vars: &Vec<Vec<usize>>| -> Vec<(usize, f64)> { (0..comps.len()).map(|g| (vars[g][v], 1.0)).collect() };
        let with = |mut t: Vec<(usize, f64)>, extra: (usize, f64)| {
            t.push(extra);
            t
        };
        m.add_row(format!("c14_{v}"), 14, with(loads(&rho), (om_cpu[v], -big_m.cpu_m)), Relation::Le, node.cpu);
        m.add_row(format!("c15_{v}"), 15, with(loads(&rho), (psi_cpu, -1.0)), Relation::Le, node.cpu);
        m.add_row(format!("c16_{v}"), 16, with(loads(&mu), (om_mem[v], -big_m.mem_m)), Relation::Le, node.mem);
        m.add_row(format!("c17_{v}"), 17, with(loads(&mu), (psi_mem, -1.0)), Relation::Le, node.mem);
    }
    for l in 0..nl {
        let rate = substrate.links()[l].rate;
        let mut flows = Vec::new();
        for g in 0..arcs.len() {
            for v1 in 0..nv {
                for v2 in 0..nv {
                    flows.push((z[g][v1][v2][l], 1.0));
                }
            }
        }
        let mut row18 = flows.clone();
        row18.push((om_l[l], -big_m.dr_m));
        m.add_row(format!("c18_{l}"), 18, row18, Relation::Le, rate);
        flows.push((psi_dr, -1.0));
        m.add_row(format!("c19_{l}"), 19, flows, Relation::Le, rate);
    }

    // Objective.
    let mut obj = Vec::new();
    for v in 0..nv {
        obj.push((om_cpu[v], weights.m1));
        obj.push((om_mem[v], weights.m1));
    }
    obj.extend(om_l.iter().map(|&o| (o, weights.m1)));
    for g in 0..arcs.len() {
        for v1 in 0..nv {
            for v2 in 0..nv {
                for l in 0..nl {
                    obj.push((zeta[g][v1][v2][l], weights.m2 * substrate.links()[l].delay));
                    obj.push((z[g][v1][v2][l], 1.0));
                }
            }
        }
    }
    for row in delta.iter().flatten() {
        obj.extend(row.iter().map(|&(d, _)| (d, weights.m2)));
    }
    obj.extend([(psi_cpu, 1.0), (psi_mem, 1.0), (psi_dr, 1.0)]);
    for g in 0..comps.len() {
        for v in 0..nv {
            obj.push((rho[g][v], 1.0));
            obj.push((mu[g][v], 1.0));
        }
    }
    obj.retain(|&(_, c)| c != 0.0);
    obj.sort_by_key(|t| t.0);
    m.objective = obj;
    Ok(m)
}
