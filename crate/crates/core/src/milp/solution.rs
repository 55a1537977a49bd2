use std::collections::HashMap;

use super::{MilpModel, Relation};
use crate::error::{Error, Result};
use crate::model::{
    count_violations, score, ArcId, ComponentId, ConfigurationScore, InstanceId, LinkId, NodeId, Overlay, ServiceState,
    SystemConfiguration, TOL,
};

/// Values below this are treated as solver noise when reading solutions.
const NOISE: f64 = 1e-9;
/// Relative slack for flow conservation in imported solutions.
const IMPORT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSolution {
    /// One value per model variable; absent names are zero.
    pub values: Vec<f64>,
    /// Objective stated in the file, if any.
    pub claimed_objective: Option<f64>,
}

/// Reads `name value` lines. `#` starts a comment, except that a comment of
/// the form `# Objective value = X` records the objective. Lines naming
/// constraints, single-word status lines and everything after a dual
/// solution header are skipped, so HiGHS solution files load as well.
pub fn parse_solution(model: &MilpModel, text: &str) -> Result<ParsedSolution> {
    let rows: std::collections::HashSet<&str> = model.constraints.iter().map(|c| c.name.as_str()).collect();
    let mut values = vec![0.0; model.var_count()];
    let mut claimed = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if comment.to_ascii_lowercase().starts_with("dual") {
                break;
            }
            if let Some(rest) = comment.strip_prefix("Objective value") {
                let number = rest.trim_start_matches([' ', '=', ':']).trim();
                claimed = Some(number.parse().map_err(|_| Error::Parse(format!("line {}: bad objective", n + 1)))?);
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else { continue };
        let Ok(value) = value.parse::<f64>() else { continue };
        if name == "Objective" || name == "obj" {
            claimed = Some(value);
        } else if let Some(i) = model.var(name) {
            values[i] = value;
        } else if !rows.contains(name) {
            return Err(Error::Solution(format!("line {}: unknown variable `{name}`", n + 1)));
        }
    }
    Ok(ParsedSolution { values, claimed_objective: claimed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedSolution {
    pub config: SystemConfiguration,
    pub claimed_objective: Option<f64>,
    /// Objective of the program evaluated at the imported values.
    pub model_objective: f64,
    /// Score of the reconstructed configuration.
    pub score: ConfigurationScore,
}

/// Turns a solver solution into a configuration: `x` gives instances, `y`
/// edge rates and `z` per-link routing. Solutions that break a constraint of
/// the program by more than a relative 1e-6, whose flows do not conserve
/// rate, or that route traffic between unplaced instances are rejected.
pub fn import_solution(model: &MilpModel, text: &str) -> Result<ImportedSolution> {
    let parsed = parse_solution(model, text)?;
    if let Some(c) = model.violations_within(&parsed.values, IMPORT_TOL).first() {
        return Err(Error::Solution(format!("constraint {} violated: lhs {} rhs {}", c.name, c.lhs, c.rhs)));
    }
    let config = config_from_values(model, &parsed.values)?;
    let score = score(&config, model.reference.as_ref(), model.weights);
    Ok(ImportedSolution {
        config,
        claimed_objective: parsed.claimed_objective,
        model_objective: model.objective_value(&parsed.values),
        score,
    })
}

fn value(model: &MilpModel, values: &[f64], name: &str) -> f64 {
    model.var(name).map_or(0.0, |i| values[i])
}

pub fn config_from_values(model: &MilpModel, values: &[f64]) -> Result<SystemConfiguration> {
    let sub = &model.substrate;
    let nv = sub.node_count();
    let mut cfg = SystemConfiguration::empty(sub.clone());
    for s in &model.services {
        let (c_off, a_off) = model.layout.offsets[s.name()];
        let t = &s.template;
        let mut overlay = Overlay::new();
        let mut placed: HashMap<(usize, usize), InstanceId> = HashMap::new();
        for j in 0..t.components.len() {
            for v in 0..nv {
                if value(model, values, &format!("x_{}_{v}", c_off + j)) > 0.5 {
                    placed.insert((j, v), overlay.add_instance(t, ComponentId(j), NodeId(v)));
                }
            }
        }
        for (a, arc) in t.arcs.iter().enumerate() {
            let g = a_off + a;
            for v1 in 0..nv {
                for v2 in 0..nv {
                    let y = value(model, values, &format!("y_{g}_{v1}_{v2}"));
                    let z: Vec<(LinkId, f64)> = (0..sub.link_count())
                        .map(|l| (LinkId(l), value(model, values, &format!("z_{g}_{v1}_{v2}_{l}"))))
                        .filter(|&(_, r)| r > NOISE)
                        .collect();
                    if y <= NOISE && z.is_empty() {
                        continue;
                    }
                    let ends = (placed.get(&(arc.from.0, v1)), placed.get(&(arc.to.0, v2)));
                    let (Some(&src), Some(&dst)) = ends else {
                        return Err(Error::Solution(format!("flow y_{g}_{v1}_{v2} between unplaced instances")));
                    };
                    let e = overlay.add_edge(ArcId(a), src, dst);
                    let edge = overlay.edge_mut(e).expect("new edge");
                    edge.rate = y.max(0.0);
                    for (l, r) in z {
                        edge.routing.add(l, r);
                    }
                    let net = edge.routing.net_outflow(sub);
                    // Between distinct nodes the start emits the rate and the end is
                    // implied; otherwise every node balances.
                    let bad = sub.node_ids().find(|&v| {
                        let expected = match (v1 != v2, v.0) {
                            (true, n) if n == v2 => return false,
                            (true, n) if n == v1 => edge.rate,
                            _ => 0.0,
                        };
                        (net[v.0] - expected).abs() > IMPORT_TOL * (1.0 + edge.rate)
                    });
                    if let Some(v) = bad {
                        return Err(Error::Solution(format!("flow y_{g}_{v1}_{v2} is not conserved at node {}", v.0)));
                    }
                }
            }
        }
        cfg.services
            .insert(s.name().to_string(), ServiceState { template: t.clone(), sources: s.sources.clone(), overlay });
    }
    cfg.propagate_rates()?;
    Ok(cfg)
}

/// Variable values describing `cfg` in the program: placements, rates,
/// loads, routing, link-use indicators, overload indicators and churn.
/// Configuration values are copied as they are, so inconsistencies in
/// `cfg` show up as violated constraints.
pub fn assignment_from_config(model: &MilpModel, cfg: &SystemConfiguration) -> Result<Vec<f64>> {
    let mut values = vec![0.0; model.var_count()];
    let idx = |name: String| -> Result<usize> {
        model.var(&name).ok_or_else(|| Error::Contract(format!("configuration needs unknown variable {name}")))
    };
    for s in &model.services {
        let Some(state) = cfg.services.get(s.name()) else { continue };
        let (c_off, a_off) = model.layout.offsets[s.name()];
        for inst in state.overlay.instances() {
            let (g, v) = (c_off + inst.component.0, inst.node.0);
            values[idx(format!("x_{g}_{v}"))?] = 1.0;
            for (k, &r) in inst.in_rates.iter().enumerate() {
                values[idx(format!("Lam_{g}_{v}_{k}"))?] = r;
            }
            for (k, &r) in inst.out_rates.iter().enumerate() {
                values[idx(format!("LamP_{g}_{v}_{k}"))?] = r;
            }
            values[idx(format!("rho_{g}_{v}"))?] = inst.cpu_load;
            values[idx(format!("mu_{g}_{v}"))?] = inst.mem_load;
        }
        for e in state.overlay.edges() {
            let (Some(src), Some(dst)) = (state.overlay.instance(e.src), state.overlay.instance(e.dst)) else {
                return Err(Error::Contract(format!("edge {} has a dangling endpoint", e.id.0)));
            };
            let g = a_off + e.arc.0;
            let (v1, v2) = (src.node.0, dst.node.0);
            values[idx(format!("y_{g}_{v1}_{v2}"))?] += e.rate;
            for (&l, &r) in &e.routing.links {
                let zi = idx(format!("z_{g}_{v1}_{v2}_{}", l.0))?;
                values[zi] += r;
                if values[zi] > TOL {
                    values[idx(format!("zeta_{g}_{v1}_{v2}_{}", l.0))?] = 1.0;
                }
            }
        }
        if let Some(old) = model.reference.as_ref().and_then(|r| r.services.get(s.name())) {
            for j in 0..s.template.components.len() {
                for v in 0..model.layout.n_nodes {
                    let now = state.overlay.find(ComponentId(j), NodeId(v)).is_some();
                    let before = old.overlay.find(ComponentId(j), NodeId(v)).is_some();
                    values[idx(format!("del_{}_{v}", c_off + j))?] = if now != before { 1.0 } else { 0.0 };
                }
            }
        }
    }
    let rep = count_violations(cfg);
    for v in &rep.cpu_overloaded {
        values[idx(format!("om_cpu_{}", v.0))?] = 1.0;
    }
    for v in &rep.mem_overloaded {
        values[idx(format!("om_mem_{}", v.0))?] = 1.0;
    }
    for l in &rep.link_overloaded {
        values[idx(format!("om_{}", l.0))?] = 1.0;
    }
    values[idx("psi_cpu".into())?] = rep.psi_cpu;
    values[idx("psi_mem".into())?] = rep.psi_mem;
    values[idx("psi_dr".into())?] = rep.psi_dr;
    Ok(values)
}

/// A constraint violated by an assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub index: usize,
    pub name: String,
    pub family: u8,
    pub lhs: f64,
    pub rhs: f64,
}

impl MilpModel {
    /// Constraints violated by `values` beyond `TOL`, scaled by the
    /// magnitude of the terms involved.
    pub fn violations(&self, values: &[f64]) -> Vec<ConstraintCheck> {
        self.violations_within(values, TOL)
    }

    /// Like [`MilpModel::violations`] with a caller-chosen relative tolerance.
    pub fn violations_within(&self, values: &[f64], tol: f64) -> Vec<ConstraintCheck> {
        let mut out = Vec::new();
        for (index, c) in self.constraints.iter().enumerate() {
            let lhs: f64 = c.terms.iter().map(|&(i, k)| k * values[i]).sum();
            let scale = 1.0 + c.rhs.abs() + c.terms.iter().map(|&(i, k)| (k * values[i]).abs()).sum::<f64>();
            let excess = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            if excess > tol * scale {
                out.push(ConstraintCheck { index, name: c.name.clone(), family: c.family, lhs, rhs: c.rhs });
            }
        }
        out
    }
}
