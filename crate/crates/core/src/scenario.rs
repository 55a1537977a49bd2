//! Event-driven re-embedding experiments.
//!
//! A scenario is a sequence of events that add or remove services and
//! sources or change source rates. After every event the active services
//! are embedded again, starting from the configuration left by the previous
//! event, and one [`ScenarioRecord`] is written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::{embed, HeuristicParams};
use crate::milp::{build_model, emit_lp};
use crate::model::{
    default_weights, score, ComponentId, NodeId, Service, Source, SubstrateNetwork, SystemConfiguration, Template,
    Weights,
};
use crate::oracle::{brute_force_embed, OracleLimits};

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Starts service `service` from the declared template `template`.
    AddService {
        service: String,
        template: String,
        sources: Vec<Source>,
    },
    RemoveService {
        service: String,
    },
    AddSource {
        service: String,
        source: Source,
    },
    RemoveSource {
        service: String,
        node: NodeId,
        component: ComponentId,
    },
    ChangeRate {
        service: String,
        node: NodeId,
        component: ComponentId,
        rate: f64,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::AddService { .. } => "service-add",
            Event::RemoveService { .. } => "service-remove",
            Event::AddSource { .. } => "source-add",
            Event::RemoveSource { .. } => "source-remove",
            Event::ChangeRate { .. } => "source-rate-change",
        }
    }
}

/// Measurements after one event. CSV columns follow the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub event: usize,
    pub kind: String,
    /// Total source rate.
    pub demand: f64,
    /// CPU load summed over all instances.
    pub allocated_cpu: f64,
    pub allocated_mem: f64,
    /// Delay summed over every link used by every overlay edge.
    pub total_latency: f64,
    pub total_link_rate: f64,
    pub instances: usize,
    pub churn: usize,
    pub violations: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Heuristic(HeuristicParams),
    Oracle(OracleLimits),
    /// Writes `event_NNN.lp` per event into the directory instead of
    /// solving. The configuration carried between events comes from the
    /// heuristic so each program has a previous configuration to measure
    /// churn against; the recorded runtime is the export time.
    ExportLp(PathBuf),
}

/// Active services between events.
#[derive(Debug, Clone, Default)]
struct Active {
    services: BTreeMap<String, Service>,
}

impl Active {
    fn apply(
        &mut self,
        index: usize,
        event: &Event,
        templates: &BTreeMap<String, Template>,
        sub: &SubstrateNetwork,
    ) -> Result<()> {
        let fail = |reason: String| Error::Event { index, reason };
        match event {
            Event::AddService { service, template, sources } => {
                if self.services.contains_key(service) {
                    return Err(fail(format!("service `{service}` is already active")));
                }
                let mut t =
                    templates.get(template).ok_or_else(|| fail(format!("unknown template `{template}`")))?.clone();
                t.name = service.clone();
                let svc = Service::new(t, sources.clone());
                svc.validate(sub).map_err(|e| fail(e.to_string()))?;
                self.services.insert(service.clone(), svc);
            }
            Event::RemoveService { service } => {
                self.services.remove(service).ok_or_else(|| fail(format!("service `{service}` is not active")))?;
            }
            Event::AddSource { service, source } => {
                let svc =
                    self.services.get_mut(service).ok_or_else(|| fail(format!("service `{service}` is not active")))?;
                svc.sources.push(*source);
                if let Err(e) = svc.validate(sub) {
                    svc.sources.pop();
                    return Err(fail(e.to_string()));
                }
            }
            Event::RemoveSource { service, node, component } => {
                let svc =
                    self.services.get_mut(service).ok_or_else(|| fail(format!("service `{service}` is not active")))?;
                let before = svc.sources.len();
                svc.sources.retain(|s| !(s.node == *node && s.component == *component));
                if svc.sources.len() == before {
                    return Err(fail(format!("no source on node {} in `{service}`", node.0)));
                }
            }
            Event::ChangeRate { service, node, component, rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(fail("new rate must be positive".into()));
                }
                let svc =
                    self.services.get_mut(service).ok_or_else(|| fail(format!("service `{service}` is not active")))?;
                let src = svc
                    .sources
                    .iter_mut()
                    .find(|s| s.node == *node && s.component == *component)
                    .ok_or_else(|| fail(format!("no source on node {} in `{service}`", node.0)))?;
                src.rate = *rate;
            }
        }
        Ok(())
    }

    fn list(&self) -> Vec<Service> {
        self.services.values().cloned().collect()
    }
}

/// Applies `events` in order, re-embedding after each one.
pub fn run_scenario(
    substrate: &SubstrateNetwork,
    templates: &[Template],
    events: &[Event],
    algo: &Algorithm,
) -> Result<Vec<ScenarioRecord>> {
    Ok(run_scenario_with_configs(substrate, templates, events, algo)?.0)
}

/// Like [`run_scenario`], also returning the configuration after each event.
pub fn run_scenario_with_configs(
    substrate: &SubstrateNetwork,
    templates: &[Template],
    events: &[Event],
    algo: &Algorithm,
) -> Result<(Vec<ScenarioRecord>, Vec<SystemConfiguration>)> {
    let catalog: BTreeMap<String, Template> = templates.iter().map(|t| (t.name.clone(), t.clone())).collect();
    if let Algorithm::ExportLp(dir) = algo {
        std::fs::create_dir_all(dir)?;
    }
    let mut active = Active::default();
    let mut cfg = SystemConfiguration::empty(substrate.clone());
    let mut records = Vec::with_capacity(events.len());
    let mut configs = Vec::with_capacity(events.len());
    for (index, event) in events.iter().enumerate() {
        active.apply(index, event, &catalog, substrate)?;
        let services = active.list();
        let weights = default_weights(substrate, &services)?;
        let started = Instant::now();
        let next = match algo {
            Algorithm::Heuristic(params) => embed(&cfg, &services, params)?,
            Algorithm::Oracle(limits) => brute_force_embed(substrate, &services, Some(&cfg), limits)?.config,
            Algorithm::ExportLp(dir) => {
                let model = build_model(substrate, &services, Some(&cfg), weights)?;
                std::fs::write(dir.join(format!("event_{index:03}.lp")), emit_lp(&model))?;
                let runtime = started.elapsed().as_secs_f64();
                let next = embed(&cfg, &services, &HeuristicParams::default())?;
                records.push(record(index, event, &next, &cfg, weights, runtime));
                cfg = next;
                configs.push(cfg.clone());
                continue;
            }
        };
        let runtime = started.elapsed().as_secs_f64();
        records.push(record(index, event, &next, &cfg, weights, runtime));
        cfg = next;
        configs.push(cfg.clone());
    }
    Ok((records, configs))
}

fn record(
    index: usize,
    event: &Event,
    cfg: &SystemConfiguration,
    prev: &SystemConfiguration,
    weights: Weights,
    runtime_s: f64,
) -> ScenarioRecord {
    let s = score(cfg, Some(prev), weights);
    ScenarioRecord {
        event: index,
        kind: event.kind().to_string(),
        demand: cfg.total_source_rate(),
        allocated_cpu: s.total_cpu,
        allocated_mem: s.total_mem,
        total_latency: s.total_delay,
        total_link_rate: s.total_rate,
        instances: cfg.instance_count(),
        churn: s.churn,
        violations: s.n_violations,
        runtime_s,
    }
}

/// Connected substrate with reciprocal links. A random spanning tree is
/// completed with random extra node pairs until there are about
/// `avg_degree * n_nodes` directed links. Node CPU and memory are drawn
/// from 50..=150, link rates from 20..=100 and delays from 1..=10, all
/// integers. The same seed gives the same graph.
pub fn generate_substrate(n_nodes: usize, avg_degree: f64, seed: u64) -> Result<SubstrateNetwork> {
    if n_nodes < 2 {
        return Err(Error::Substrate("a generated substrate needs at least 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = SubstrateNetwork::new();
    for i in 0..n_nodes {
        let cpu = rng.gen_range(50..=150) as f64;
        let mem = rng.gen_range(50..=150) as f64;
        net.add_node(format!("v{i}"), cpu, mem)?;
    }
    let max_pairs = n_nodes * (n_nodes - 1) / 2;
    let target = ((n_nodes as f64 * avg_degree / 2.0).round() as usize).clamp(n_nodes - 1, max_pairs);
    let mut pairs = std::collections::BTreeSet::new();
    for i in 1..n_nodes {
        pairs.insert((rng.gen_range(0..i), i));
    }
    while pairs.len() < target {
        let a = rng.gen_range(0..n_nodes);
        let b = rng.gen_range(0..n_nodes);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in pairs {
        let rate = rng.gen_range(20..=100) as f64;
        let delay = rng.gen_range(1..=10) as f64;
        net.add_duplex(NodeId(a), NodeId(b), rate, delay)?;
    }
    Ok(net)
}

/// Writes a header row and one row per record.
pub fn write_metrics_csv(records: &[ScenarioRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    if records.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(|e| Error::Io(e.to_string()))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub const CSV_COLUMNS: [&str; 11] = [
    "event",
    "kind",
    "demand",
    "allocated_cpu",
    "allocated_mem",
    "total_latency",
    "total_link_rate",
    "instances",
    "churn",
    "violations",
    "runtime_s",
];

pub fn read_metrics_csv(path: &Path) -> Result<Vec<ScenarioRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| Error::Parse(e.to_string()))).collect()
}

#[cfg(test)]
mod tests;
