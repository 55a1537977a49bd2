//! Constructive embedding heuristic.
//!
//! [`embed`] turns a previous configuration and the current set of services
//! into a new configuration through local changes: overlays are created or
//! dropped, source instances follow the sources, and every instance is then
//! visited once in topological order so that changed output rates are
//! discharged by shrinking or growing its outgoing flows.

mod path;

pub use path::{best_first_path, PathResult, SearchTree};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    ArcId, ComponentId, EdgeId, InstanceId, LinkId, NodeId, Overlay, ResourceUsage, Service, ServiceState,
    SubstrateNetwork, SystemConfiguration, TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicParams {
    pub rng_seed: u64,
    /// Pick arcs round-robin in declaration order instead of at random.
    pub deterministic_arc_choice: bool,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        HeuristicParams { rng_seed: 0, deterministic_arc_choice: true }
    }
}

/// Embeds `services` starting from `prev`. Capacity shortfalls never fail
/// the call; they show up as violations of the returned configuration.
pub fn embed(
    prev: &SystemConfiguration,
    services: &[Service],
    params: &HeuristicParams,
) -> Result<SystemConfiguration> {
    let mut em = Embedder::new(prev.clone(), *params);
    em.sync_services(services)?;
    let names: Vec<String> = em.cfg.services.keys().cloned().collect();
    for name in names {
        em.process_service(&name)?;
    }
    em.finish()
}

/// Mutable embedding state: the configuration under construction and the
/// resource usage of everything placed so far.
pub struct Embedder {
    cfg: SystemConfiguration,
    usage: ResourceUsage,
    params: HeuristicParams,
    rng: ChaCha8Rng,
}

impl Embedder {
    pub fn new(cfg: SystemConfiguration, params: HeuristicParams) -> Self {
        let usage = ResourceUsage::of(&cfg);
        Embedder { cfg, usage, params, rng: ChaCha8Rng::seed_from_u64(params.rng_seed) }
    }

    pub fn config(&self) -> &SystemConfiguration {
        &self.cfg
    }

    pub fn usage(&self) -> &ResourceUsage {
        &self.usage
    }

    /// Recomputes output rates and loads and returns the configuration.
    pub fn finish(mut self) -> Result<SystemConfiguration> {
        self.cfg.propagate_rates()?;
        Ok(self.cfg)
    }

    fn state(&self, svc: &str) -> Result<&ServiceState> {
        self.cfg.services.get(svc).ok_or_else(|| Error::Contract(format!("unknown service `{svc}`")))
    }

    fn parts(&mut self, svc: &str) -> Result<Parts<'_>> {
        let Embedder { cfg, usage, .. } = self;
        let state = cfg.services.get_mut(svc).ok_or_else(|| Error::Contract(format!("unknown service `{svc}`")))?;
        Ok(Parts { state, usage })
    }

    /// Drops overlays of vanished services, creates empty overlays for new
    /// ones, and aligns source instances with the sources.
    pub fn sync_services(&mut self, services: &[Service]) -> Result<()> {
        for (i, s) in services.iter().enumerate() {
            s.validate(&self.cfg.substrate)?;
            if services[..i].iter().any(|o| o.name() == s.name()) {
                return Err(Error::Service { service: s.name().to_string(), reason: "declared twice".into() });
            }
        }
        let stale: Vec<String> = self
            .cfg
            .services
            .iter()
            .filter(|(name, state)| !services.iter().any(|s| s.name() == *name && s.template == state.template))
            .map(|(name, _)| name.clone())
            .collect();
        for name in stale {
            self.drop_service(&name)?;
        }
        for s in services {
            let state = self.cfg.services.entry(s.name().to_string()).or_insert_with(|| ServiceState {
                template: s.template.clone(),
                sources: Vec::new(),
                overlay: Overlay::new(),
            });
            state.sources = s.sources.clone();
            let mut p = self.parts(s.name())?;
            for src in &s.sources {
                let id = match p.state.overlay.find(src.component, src.node) {
                    Some(id) => id,
                    None => p.state.overlay.add_instance(&p.state.template, src.component, src.node),
                };
                p.state.overlay.instance_mut(id).expect("source instance").out_rates = vec![src.rate];
            }
            let orphaned: Vec<InstanceId> = p
                .state
                .overlay
                .instances()
                .filter(|i| p.state.template.component(i.component).source)
                .filter(|i| p.state.source_rate(i.component, i.node).is_none())
                .map(|i| i.id)
                .collect();
            for id in orphaned {
                p.remove_instance(id);
            }
        }
        Ok(())
    }

    fn drop_service(&mut self, name: &str) -> Result<()> {
        let mut p = self.parts(name)?;
        let ids: Vec<InstanceId> = p.state.overlay.instances().map(|i| i.id).collect();
        for id in ids {
            p.remove_instance(id);
        }
        self.cfg.services.remove(name);
        Ok(())
    }

    /// Visits the instances of one service in topological order, removing
    /// instances without input and re-discharging changed outputs.
    pub fn process_service(&mut self, svc: &str) -> Result<()> {
        let template = self.state(svc)?.template.clone();
        for j in template.topo_order()? {
            let c = template.component(j);
            for id in self.state(svc)?.overlay.instances_of(j) {
                let mut p = self.parts(svc)?;
                let out = if c.source {
                    let inst = p.state.overlay.instance(id).expect("listed instance");
                    vec![p.state.source_rate(j, inst.node).unwrap_or(0.0)]
                } else {
                    p.refresh(id);
                    let inputs = &p.state.overlay.instance(id).expect("listed instance").in_rates;
                    if inputs.iter().all(|&x| x <= TOL) {
                        p.remove_instance(id);
                        continue;
                    }
                    c.output_rates(inputs)
                };
                p.state.overlay.instance_mut(id).expect("listed instance").out_rates = out.clone();
                for (k, &target) in out.iter().enumerate() {
                    if template.is_exit(j, k) {
                        continue;
                    }
                    let ov = &self.state(svc)?.overlay;
                    let edges = ov.out_edges(&template, id, k);
                    let current: f64 = edges.iter().map(|&e| ov.edge(e).expect("edge").rate).sum();
                    let eps = TOL * (1.0 + target.max(current));
                    if target < current - eps {
                        self.decrease(svc, &edges, current - target)?;
                    } else if target > current + eps {
                        self.increase(svc, id, k, target - current)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Lowers the total rate of `edges` by `delta`: smallest edges are
    /// removed while they fit into the remaining delta, then the next edge
    /// is scaled down uniformly on every link it uses.
    pub fn decrease(&mut self, svc: &str, edges: &[EdgeId], delta: f64) -> Result<()> {
        let mut p = self.parts(svc)?;
        let mut sorted: Vec<(f64, EdgeId)> = edges
            .iter()
            .map(|&e| p.state.overlay.edge(e).map(|x| (x.rate, e)))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Contract("decrease on unknown edge".into()))?;
        let total: f64 = sorted.iter().map(|x| x.0).sum();
        let eps = TOL * (1.0 + total);
        if delta > total + eps {
            return Err(Error::Contract(format!("decrease by {delta} exceeds total rate {total}")));
        }
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut left = delta;
        let mut rest = sorted.into_iter();
        for (rate, e) in rest.by_ref() {
            if rate <= left + eps {
                left -= rate;
                p.remove_edge(e);
                continue;
            }
            if left > eps {
                p.scale_edge(e, (rate - left) / rate);
            }
            break;
        }
        Ok(())
    }

    /// Raises the rate leaving output `k` of `inst` by `delta`. Arcs without
    /// any edge get a successor first, then existing flows are grown, then
    /// further successors are created until the delta is discharged. What
    /// cannot be placed is pushed onto an existing flow as overload.
    pub fn increase(&mut self, svc: &str, inst: InstanceId, k: usize, delta: f64) -> Result<()> {
        let state = self.state(svc)?;
        let template = &state.template;
        let component =
            state.overlay.instance(inst).ok_or_else(|| Error::Contract("unknown instance".into()))?.component;
        let arcs = template.arcs_from(component, k);
        let mut flows = state.overlay.out_edges(template, inst, k);
        if arcs.is_empty() {
            return Err(Error::Contract(format!("output {k} has no arcs")));
        }
        let eps = TOL * (1.0 + delta);
        let mut left = delta;

        for &a in &arcs {
            let covered = flows.iter().any(|&e| self.cfg.services[svc].overlay.edge(e).is_some_and(|x| x.arc == a));
            if covered || left <= eps {
                continue;
            }
            if let Some((_, e, rate)) = self.create_instance_and_flow(svc, a, inst, left)? {
                left -= rate;
                if !flows.contains(&e) {
                    flows.push(e);
                }
            }
        }
        for &e in &flows {
            if left <= eps {
                break;
            }
            left -= self.incr_flow(svc, e, left)?;
        }

        let n_links = self.cfg.substrate.link_count();
        let n_nodes = self.cfg.substrate.node_count();
        let mut budget = 4 * (n_links + 2 * n_nodes) + 16;
        let mut turn = 0usize;
        while left > eps && budget > 0 {
            budget -= 1;
            let start = if self.params.deterministic_arc_choice { turn } else { self.rng.gen_range(0..arcs.len()) };
            turn += 1;
            let mut placed = false;
            for step in 0..arcs.len() {
                let a = arcs[(start + step) % arcs.len()];
                if let Some((_, _, rate)) = self.create_instance_and_flow(svc, a, inst, left)? {
                    left -= rate;
                    placed = true;
                    break;
                }
            }
            if !placed {
                break;
            }
        }
        if left > eps {
            self.overload(svc, inst, k, &arcs, left)?;
        }
        Ok(())
    }

    /// Puts `rate` onto the busiest flow leaving output `k`, or onto an
    /// intra-node edge to a co-located successor when there is none.
    fn overload(&mut self, svc: &str, inst: InstanceId, k: usize, arcs: &[ArcId], rate: f64) -> Result<()> {
        let mut p = self.parts(svc)?;
        let busiest = p
            .state
            .overlay
            .out_edges(&p.state.template, inst, k)
            .into_iter()
            .map(|e| (p.state.overlay.edge(e).expect("edge").rate, e))
            .filter(|&(r, _)| r > TOL)
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        match busiest {
            Some((r, e)) => p.scale_edge(e, (r + rate) / r),
            None => {
                let arc = *p.state.template.arc(arcs[0]);
                let node = p.state.overlay.instance(inst).expect("instance").node;
                let dst = match p.state.overlay.find(arc.to, node) {
                    Some(d) => d,
                    None => p.state.overlay.add_instance(&p.state.template, arc.to, node),
                };
                let e = match p.state.overlay.find_edge(arcs[0], inst, dst) {
                    Some(e) => e,
                    None => p.state.overlay.add_edge(arcs[0], inst, dst),
                };
                p.add_flow(e, &[], rate);
            }
        }
        Ok(())
    }

    /// Finds the node whose instance of the arc's target component would
    /// receive the best flow from `src` (higher rate up to `cutoff`, then
    /// lower latency, then lower node id), and realises that flow. Nodes
    /// already hosting the component are candidates too; their existing
    /// instance is reused. Returns `None` when no candidate gets any flow.
    pub fn create_instance_and_flow(
        &mut self,
        svc: &str,
        arc: ArcId,
        src: InstanceId,
        cutoff: f64,
    ) -> Result<Option<(InstanceId, EdgeId, f64)>> {
        let sub = &self.cfg.substrate;
        let state = self.state(svc)?;
        let a = *state.template.arc(arc);
        let u = state.overlay.instance(src).ok_or_else(|| Error::Contract("unknown instance".into()))?.node;
        if !(cutoff > TOL) {
            return Ok(None);
        }

        // Rate each node could absorb, capped at the cutoff.
        let mut caps: Vec<(NodeId, f64)> = Vec::new();
        for v in sub.node_ids() {
            let existing = state.overlay.find(a.to, v);
            let c = headroom(sub, state, &self.usage, a.to, v, existing, a.input).min(cutoff);
            if c > TOL {
                caps.push((v, c));
            }
        }
        let residual = residuals(sub, &self.usage);
        let mut best: Option<Candidate> = None;
        let consider = |best: &mut Option<Candidate>, cand: Candidate| {
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                *best = Some(cand);
            }
        };
        if let Some(&(v, c)) = caps.iter().find(|(v, _)| *v == u) {
            consider(&mut best, Candidate { node: v, flow: c, latency: 0.0, cap: c });
        }
        let full: Vec<_> = caps.iter().filter(|(v, c)| *v != u && *c >= cutoff).collect();
        if !full.is_empty() {
            let tree = SearchTree::grow(sub, &residual, u, cutoff, None);
            for &&(v, c) in &full {
                if let Some((b, lat)) = tree.label(v) {
                    consider(&mut best, Candidate { node: v, flow: b.min(c), latency: lat, cap: c });
                }
            }
        }
        let mut partial: Vec<_> = caps.iter().filter(|(v, c)| *v != u && *c < cutoff).copied().collect();
        partial.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        for (v, c) in partial {
            if best.as_ref().is_some_and(|b| c < b.flow) {
                break;
            }
            let tree = SearchTree::grow(sub, &residual, u, c, Some(v));
            if let Some((b, lat)) = tree.label(v) {
                consider(&mut best, Candidate { node: v, flow: b.min(c), latency: lat, cap: c });
            }
        }
        let Some(best) = best.filter(|b| b.flow > TOL) else {
            return Ok(None);
        };

        let links = if best.node == u {
            Vec::new()
        } else {
            best_first_path(sub, &residual, u, best.node, best.cap).map(|p| p.links).unwrap_or_default()
        };
        let mut p = self.parts(svc)?;
        let dst = match p.state.overlay.find(a.to, best.node) {
            Some(d) => d,
            None => p.state.overlay.add_instance(&p.state.template, a.to, best.node),
        };
        let e = match p.state.overlay.find_edge(arc, src, dst) {
            Some(e) => e,
            None => p.state.overlay.add_edge(arc, src, dst),
        };
        p.add_flow(e, &links, best.flow);
        Ok(Some((dst, e, best.flow)))
    }

    /// Grows `edge` by at most `d` along one best-first path, limited by
    /// the CPU and memory headroom at the destination. Returns the increase.
    pub fn incr_flow(&mut self, svc: &str, edge: EdgeId, d: f64) -> Result<f64> {
        let sub = &self.cfg.substrate;
        let state = self.state(svc)?;
        let e = state.overlay.edge(edge).ok_or_else(|| Error::Contract("unknown edge".into()))?;
        let a = state.template.arc(e.arc);
        let u = state.overlay.instance(e.src).expect("edge source").node;
        let dst = state.overlay.instance(e.dst).expect("edge target");
        let v = dst.node;
        let d = d.min(headroom(sub, state, &self.usage, a.to, v, Some(dst.id), a.input));
        if !(d > TOL) {
            return Ok(0.0);
        }
        let (links, inc) = if u == v {
            (Vec::new(), d)
        } else {
            match best_first_path(sub, &residuals(sub, &self.usage), u, v, d) {
                Some(path) => (path.links, path.bottleneck.min(d)),
                None => return Ok(0.0),
            }
        };
        self.parts(svc)?.add_flow(edge, &links, inc);
        Ok(inc)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    node: NodeId,
    flow: f64,
    latency: f64,
    cap: f64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.flow
            .total_cmp(&other.flow)
            .then(other.latency.total_cmp(&self.latency))
            .then(other.node.cmp(&self.node))
            .is_gt()
    }
}

fn residuals(sub: &SubstrateNetwork, usage: &ResourceUsage) -> Vec<f64> {
    sub.links().iter().zip(&usage.link).map(|(l, used)| l.rate - used).collect()
}

/// Extra rate on input `input` that an instance of `component` on `node`
/// (the existing one, or a fresh one) can take within the node's spare CPU
/// and memory.
fn headroom(
    sub: &SubstrateNetwork,
    state: &ServiceState,
    usage: &ResourceUsage,
    component: ComponentId,
    node: NodeId,
    existing: Option<InstanceId>,
    input: usize,
) -> f64 {
    let c = state.template.component(component);
    let (rates, cpu, mem) = match existing.and_then(|i| state.overlay.instance(i)) {
        Some(i) => (i.in_rates.clone(), i.cpu_load, i.mem_load),
        None => (vec![0.0; c.inputs], 0.0, 0.0),
    };
    let n = sub.node(node);
    let by_cpu = c.cpu.max_increase(&rates, input, n.cpu - (usage.cpu[node.0] - cpu));
    let by_mem = c.mem.max_increase(&rates, input, n.mem - (usage.mem[node.0] - mem));
    by_cpu.min(by_mem)
}

/// Borrowed view of one service plus the shared usage counters. Every
/// mutation keeps the counters and the target instance's loads current.
struct Parts<'a> {
    state: &'a mut ServiceState,
    usage: &'a mut ResourceUsage,
}

impl Parts<'_> {
    /// Recomputes input rates and loads of `id` from its incoming edges.
    fn refresh(&mut self, id: InstanceId) {
        let Some(inst) = self.state.overlay.instance(id) else { return };
        let c = self.state.template.component(inst.component);
        let ins = self.state.overlay.input_sums(&self.state.template, id);
        let (cpu, mem) = (c.cpu.eval(&ins), c.mem.eval(&ins));
        let inst = self.state.overlay.instance_mut(id).expect("checked above");
        self.usage.cpu[inst.node.0] += cpu - inst.cpu_load;
        self.usage.mem[inst.node.0] += mem - inst.mem_load;
        inst.in_rates = ins;
        inst.cpu_load = cpu;
        inst.mem_load = mem;
    }

    fn add_flow(&mut self, e: EdgeId, links: &[LinkId], amount: f64) {
        let edge = self.state.overlay.edge_mut(e).expect("edge");
        edge.rate += amount;
        for &l in links {
            edge.routing.add(l, amount);
            self.usage.link[l.0] += amount;
        }
        let dst = edge.dst;
        self.refresh(dst);
    }

    fn scale_edge(&mut self, e: EdgeId, factor: f64) {
        let edge = self.state.overlay.edge_mut(e).expect("edge");
        for (l, r) in edge.routing.links.iter_mut() {
            self.usage.link[l.0] += *r * (factor - 1.0);
            *r *= factor;
        }
        edge.rate *= factor;
        let dst = edge.dst;
        self.refresh(dst);
    }

    fn remove_edge(&mut self, e: EdgeId) {
        if let Some(edge) = self.state.overlay.remove_edge(e) {
            for (l, r) in &edge.routing.links {
                self.usage.link[l.0] -= r;
            }
            self.refresh(edge.dst);
        }
    }

    fn remove_instance(&mut self, id: InstanceId) {
        let touching: Vec<EdgeId> =
            self.state.overlay.edges().filter(|e| e.src == id || e.dst == id).map(|e| e.id).collect();
        for e in touching {
            self.remove_edge(e);
        }
        if let Some(inst) = self.state.overlay.instance(id) {
            self.usage.cpu[inst.node.0] -= inst.cpu_load;
            self.usage.mem[inst.node.0] -= inst.mem_load;
        }
        self.state.overlay.remove_instance(id);
    }
}

#[cfg(test)]
mod tests;
