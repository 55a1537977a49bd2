//! Exhaustive reference solver for desk-scale instances.
//!
//! Instances are visited in template topological order. Once an instance's
//! inputs are final, each of its outputs is cut into chunks of the rate
//! granularity and every chunk is assigned to an option: a template arc
//! leaving that output, a destination node and one of the k shortest paths
//! to it. Destination instances come into existence when the first chunk
//! arrives. Chunks of equal size are interchangeable, so only non-decreasing
//! option sequences are enumerated.
//!
//! All resource functions are non-negative and non-decreasing, so the score
//! of a partial assignment never exceeds the score of any completion. The
//! search prunes every branch whose partial score is already no better than
//! the best complete assignment, compared lexicographically by violations,
//! then delay plus churn, then the remaining terms.

mod paths;

pub use paths::{k_shortest_paths, CandidatePath};

use crate::error::{Error, Result};
use crate::model::{
    default_weights, score, ArcId, ComponentId, ConfigurationScore, LinkId, NodeId, Overlay, RateBounds, Service,
    ServiceState, SubstrateNetwork, SystemConfiguration, TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLimits {
    pub max_nodes: usize,
    /// Components summed over all services.
    pub max_components: usize,
    /// Potential instances: source placements plus every (component, node)
    /// pair of the other components.
    pub max_total_instances: usize,
    /// Data-rate quantum of the routing enumeration.
    pub rate_granularity: f64,
    pub paths_per_pair: usize,
    /// Refuse when the unpruned search space exceeds this many leaves.
    pub max_estimate: f64,
    /// Abort after visiting this many search nodes.
    pub max_search_nodes: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_nodes: 12,
            max_components: 8,
            max_total_instances: 40,
            rate_granularity: 1.0,
            paths_per_pair: 4,
            max_estimate: 1e40,
            max_search_nodes: 500_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub config: SystemConfiguration,
    pub score: ConfigurationScore,
    /// Search nodes visited.
    pub explored: u64,
    /// Unpruned search space size.
    pub estimate: f64,
}

/// Best configuration over all placements and chunked routings. Churn is
/// measured against `reference` when given.
pub fn brute_force_embed(
    substrate: &SubstrateNetwork,
    services: &[Service],
    reference: Option<&SystemConfiguration>,
    limits: &OracleLimits,
) -> Result<OracleSolution> {
    let problem = Problem::new(substrate, services, reference, limits)?;
    let estimate = problem.estimate();
    if estimate > limits.max_estimate {
        return Err(Error::OracleLimits { reason: format!("search space above {:e}", limits.max_estimate), estimate });
    }
    let mut search = Search::new(&problem, limits.max_search_nodes);
    search.dfs(Pos { slot: 0, out: 0, chunk: 0, min_opt: 0 });
    if search.explored > limits.max_search_nodes {
        return Err(Error::OracleLimits {
            reason: format!("search budget of {} nodes exhausted", limits.max_search_nodes),
            estimate,
        });
    }
    let best = search.best.expect("the search always reaches a leaf");
    let config = problem.build(&best.1)?;
    let weights = default_weights(substrate, services)?;
    let score = score(&config, reference, weights);
    Ok(OracleSolution { config, score, explored: search.explored, estimate })
}

/// Unpruned search space size, for reporting before a run.
pub fn estimate_search_space(substrate: &SubstrateNetwork, services: &[Service], limits: &OracleLimits) -> Result<f64> {
    Ok(Problem::new(substrate, services, None, limits)?.estimate())
}

struct Slot {
    svc: usize,
    comp: usize,
    node: usize,
    source_rate: Option<f64>,
    /// Occupied in the reference configuration.
    in_reference: bool,
}

struct Opt {
    input: usize,
    dst: usize,
    edge: usize,
    links: Vec<LinkId>,
}

struct Problem<'a> {
    sub: &'a SubstrateNetwork,
    services: &'a [Service],
    q: f64,
    slots: Vec<Slot>,
    /// Per slot and output: assignment options, best first.
    options: Vec<Vec<Vec<Opt>>>,
    /// Per slot and output: bound on the emitted rate.
    out_bound: Vec<Vec<f64>>,
    edge_offset: Vec<usize>,
    n_edges: usize,
    /// Reference instances that no slot can reproduce.
    lost_reference: usize,
    /// Without a reference churn is zero.
    has_reference: bool,
}

impl<'a> Problem<'a> {
    fn new(
        sub: &'a SubstrateNetwork,
        services: &'a [Service],
        reference: Option<&SystemConfiguration>,
        limits: &OracleLimits,
    ) -> Result<Self> {
        if !(limits.rate_granularity > 0.0 && limits.rate_granularity.is_finite()) || limits.paths_per_pair == 0 {
            return Err(Error::Contract("oracle granularity and path count must be positive".into()));
        }
        let n = sub.node_count();
        let refuse = |reason: String| Err(Error::OracleLimits { reason, estimate: f64::NAN });
        if n > limits.max_nodes {
            return refuse(format!("{n} nodes, at most {}", limits.max_nodes));
        }
        let n_components: usize = services.iter().map(|s| s.template.components.len()).sum();
        if n_components > limits.max_components {
            return refuse(format!("{n_components} components, at most {}", limits.max_components));
        }
        for (i, s) in services.iter().enumerate() {
            s.validate(sub)?;
            if services[..i].iter().any(|o| o.name() == s.name()) {
                return Err(Error::Contract(format!("service `{}` given twice", s.name())));
            }
        }

        let mut slots = Vec::new();
        let mut slot_of: Vec<Vec<Option<usize>>> = Vec::new();
        let mut lost_reference = 0;
        let mut out_bound = Vec::new();
        for (si, s) in services.iter().enumerate() {
            let t = &s.template;
            let bounds = RateBounds::compute(t, &s.sources, n)?;
            let old = reference.and_then(|r| r.services.get(s.name()));
            let mut index = vec![None; t.components.len() * n];
            for j in t.topo_order()? {
                for v in 0..n {
                    let source_rate =
                        s.sources.iter().find(|src| src.component == j && src.node.0 == v).map(|src| src.rate);
                    let in_reference = old.is_some_and(|o| o.overlay.find(j, NodeId(v)).is_some());
                    if t.component(j).source && source_rate.is_none() {
                        lost_reference += usize::from(in_reference);
                        continue;
                    }
                    index[j.0 * n + v] = Some(slots.len());
                    out_bound.push(match source_rate {
                        Some(r) => vec![r],
                        None => bounds.output[j.0].clone(),
                    });
                    slots.push(Slot { svc: si, comp: j.0, node: v, source_rate, in_reference });
                }
            }
            slot_of.push(index);
        }
        if slots.len() > limits.max_total_instances {
            return refuse(format!("{} potential instances, at most {}", slots.len(), limits.max_total_instances));
        }

        let mut edge_offset = Vec::new();
        let mut n_edges = 0;
        for s in services {
            edge_offset.push(n_edges);
            n_edges += s.template.arcs.len() * n * n;
        }
        let paths: Vec<Vec<Vec<CandidatePath>>> = (0..n)
            .map(|a| (0..n).map(|b| k_shortest_paths(sub, NodeId(a), NodeId(b), limits.paths_per_pair)).collect())
            .collect();
        let mut options = Vec::with_capacity(slots.len());
        for slot in &slots {
            let t = &services[slot.svc].template;
            let comp = t.component(ComponentId(slot.comp));
            let mut per_output = Vec::new();
            for k in 0..comp.outputs {
                let mut opts: Vec<(f64, Opt)> = Vec::new();
                for a in t.arcs_from(ComponentId(slot.comp), k) {
                    let arc = t.arc(a);
                    for v2 in 0..n {
                        let Some(dst) = slot_of[slot.svc][arc.to.0 * n + v2] else { continue };
                        let edge = edge_offset[slot.svc] + (a.0 * n + slot.node) * n + v2;
                        for p in &paths[slot.node][v2] {
                            opts.push((p.delay, Opt { input: arc.input, dst, edge, links: p.links.clone() }));
                        }
                    }
                }
                opts.sort_by(|(da, a), (db, b)| {
                    da.total_cmp(db)
                        .then(a.links.len().cmp(&b.links.len()))
                        .then(a.edge.cmp(&b.edge))
                        .then(a.links.cmp(&b.links))
                });
                per_output.push(opts.into_iter().map(|(_, o)| o).collect());
            }
            options.push(per_output);
        }
        Ok(Problem {
            sub,
            services,
            q: limits.rate_granularity,
            slots,
            options,
            out_bound,
            edge_offset,
            n_edges,
            lost_reference,
            has_reference: reference.is_some(),
        })
    }

    fn chunks(&self, rate: f64) -> usize {
        if rate <= TOL {
            0
        } else {
            ((rate / self.q) - 1e-9).ceil().max(1.0) as usize
        }
    }

    fn estimate(&self) -> f64 {
        let mut total = 1.0;
        for (s, per_output) in self.options.iter().enumerate() {
            for (k, opts) in per_output.iter().enumerate() {
                let n = self.chunks(self.out_bound[s][k]);
                if opts.is_empty() {
                    continue;
                }
                // multisets of size n over opts.len() options
                let m = opts.len();
                let mut c = 1.0;
                for i in 0..n {
                    c = c * (m + i) as f64 / (i + 1) as f64;
                }
                total *= c;
            }
        }
        total
    }

    fn decode_edge(&self, edge: usize) -> (usize, usize, usize, usize) {
        let n = self.sub.node_count();
        let svc = self.edge_offset.iter().rposition(|&o| o <= edge).expect("edge offset");
        let rel = edge - self.edge_offset[svc];
        (svc, rel / (n * n), (rel / n) % n, rel % n)
    }

    fn build(&self, snap: &Snapshot) -> Result<SystemConfiguration> {
        let mut cfg = SystemConfiguration::empty(self.sub.clone());
        let mut overlays: Vec<Overlay> = self.services.iter().map(|_| Overlay::new()).collect();
        let mut ids = vec![None; self.slots.len()];
        for &s in &snap.instances {
            let slot = &self.slots[s];
            let t = &self.services[slot.svc].template;
            ids[s] = Some(overlays[slot.svc].add_instance(t, ComponentId(slot.comp), NodeId(slot.node)));
        }
        for (edge, rate, links) in &snap.edges {
            let (svc, a, v1, v2) = self.decode_edge(*edge);
            let arc = self.services[svc].template.arc(ArcId(a));
            let find = |comp: ComponentId, v: usize| {
                self.slots
                    .iter()
                    .position(|s| s.svc == svc && s.comp == comp.0 && s.node == v)
                    .and_then(|i| ids[i])
                    .expect("edge endpoint instantiated")
            };
            let (src, dst) = (find(arc.from, v1), find(arc.to, v2));
            let ov = &mut overlays[svc];
            let e = ov.add_edge(ArcId(a), src, dst);
            let edge = ov.edge_mut(e).expect("new edge");
            edge.rate = *rate;
            for &(l, r) in links {
                edge.routing.add(l, r);
            }
        }
        for (s, overlay) in self.services.iter().zip(overlays) {
            cfg.services.insert(
                s.name().to_string(),
                ServiceState { template: s.template.clone(), sources: s.sources.clone(), overlay },
            );
        }
        cfg.propagate_rates()?;
        Ok(cfg)
    }
}

/// Lexicographic score: violations, delay plus churn, the rest.
#[derive(Debug, Clone, Copy)]
struct Key {
    violations: usize,
    p2: f64,
    p3: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * (1.0 + a.abs().max(b.abs()))
}

impl Key {
    fn better_than(&self, other: &Key) -> bool {
        if self.violations != other.violations {
            return self.violations < other.violations;
        }
        if !close(self.p2, other.p2) {
            return self.p2 < other.p2;
        }
        !close(self.p3, other.p3) && self.p3 < other.p3
    }
}

/// Edge index, rate and per-link rates.
type RoutedEdge = (usize, f64, Vec<(LinkId, f64)>);

struct Snapshot {
    instances: Vec<usize>,
    edges: Vec<RoutedEdge>,
}

enum Undo {
    Input(usize, usize, f64),
    Arrivals(usize, u32),
    Link(usize, f64),
    Edge(usize, f64),
    EdgeLink(usize, f64),
    Delay(f64),
    Rate(f64),
}

#[derive(Clone, Copy)]
struct Pos {
    slot: usize,
    out: usize,
    chunk: usize,
    min_opt: usize,
}

struct Search<'p, 'a> {
    p: &'p Problem<'a>,
    inputs: Vec<Vec<f64>>,
    arrivals: Vec<u32>,
    outs: Vec<Vec<f64>>,
    link_load: Vec<f64>,
    edge_rate: Vec<f64>,
    edge_link: Vec<f64>,
    delay: f64,
    rate: f64,
    log: Vec<Undo>,
    best: Option<(Key, Snapshot)>,
    explored: u64,
    budget: u64,
    cpu: Vec<f64>,
    mem: Vec<f64>,
}

impl<'p, 'a> Search<'p, 'a> {
    fn new(p: &'p Problem<'a>, budget: u64) -> Self {
        let inputs = p.slots.iter().map(|s| vec![0.0; p.services[s.svc].template.components[s.comp].inputs]).collect();
        let nl = p.sub.link_count();
        Search {
            p,
            inputs,
            arrivals: vec![0; p.slots.len()],
            outs: vec![Vec::new(); p.slots.len()],
            link_load: vec![0.0; nl],
            edge_rate: vec![0.0; p.n_edges],
            edge_link: vec![0.0; p.n_edges * nl],
            delay: 0.0,
            rate: 0.0,
            log: Vec::new(),
            best: None,
            explored: 0,
            budget,
            cpu: vec![0.0; p.sub.node_count()],
            mem: vec![0.0; p.sub.node_count()],
        }
    }

    fn exists(&self, s: usize) -> bool {
        self.p.slots[s].source_rate.is_some() || self.arrivals[s] > 0
    }

    /// Advances to the next chunk that needs an option, or `None` at a leaf.
    fn next_task(&mut self, mut pos: Pos) -> Option<Pos> {
        loop {
            if pos.slot == self.p.slots.len() {
                return None;
            }
            if !self.exists(pos.slot) {
                pos = Pos { slot: pos.slot + 1, out: 0, chunk: 0, min_opt: 0 };
                continue;
            }
            let slot = &self.p.slots[pos.slot];
            if pos.out == 0 && pos.chunk == 0 {
                let comp = &self.p.services[slot.svc].template.components[slot.comp];
                self.outs[pos.slot] = match slot.source_rate {
                    Some(r) => vec![r; comp.outputs],
                    None => comp.output_rates(&self.inputs[pos.slot]),
                };
            }
            if pos.out >= self.outs[pos.slot].len() {
                pos = Pos { slot: pos.slot + 1, out: 0, chunk: 0, min_opt: 0 };
                continue;
            }
            let rate = self.outs[pos.slot][pos.out];
            if self.p.options[pos.slot][pos.out].is_empty() || pos.chunk >= self.p.chunks(rate) {
                pos = Pos { out: pos.out + 1, chunk: 0, min_opt: 0, ..pos };
                continue;
            }
            return Some(pos);
        }
    }

    fn dfs(&mut self, pos: Pos) {
        self.explored += 1;
        if self.explored > self.budget {
            return;
        }
        let Some(pos) = self.next_task(pos) else {
            self.leaf();
            return;
        };
        let rate = self.outs[pos.slot][pos.out];
        let n = self.p.chunks(rate);
        let remainder = rate - self.p.q * (n - 1) as f64;
        let all_equal = close(remainder, self.p.q);
        let size = if pos.chunk == 0 { remainder } else { self.p.q };
        let start = match pos.chunk {
            0 => 0,
            1 if !all_equal => 0,
            _ => pos.min_opt,
        };
        for o in start..self.p.options[pos.slot][pos.out].len() {
            let mark = self.log.len();
            self.apply(pos.slot, pos.out, o, size);
            let bound = self.best.as_ref().map(|(k, _)| *k);
            let promising = bound.is_none_or(|best| self.key(false).better_than(&best));
            if promising {
                self.dfs(Pos { chunk: pos.chunk + 1, min_opt: o, ..pos });
            }
            self.undo(mark);
            if self.explored > self.budget {
                return;
            }
        }
    }

    fn apply(&mut self, slot: usize, out: usize, o: usize, size: f64) {
        let opt = &self.p.options[slot][out][o];
        let nl = self.p.sub.link_count();
        self.log.push(Undo::Input(opt.dst, opt.input, self.inputs[opt.dst][opt.input]));
        self.inputs[opt.dst][opt.input] += size;
        self.log.push(Undo::Arrivals(opt.dst, self.arrivals[opt.dst]));
        self.arrivals[opt.dst] += 1;
        self.log.push(Undo::Edge(opt.edge, self.edge_rate[opt.edge]));
        self.edge_rate[opt.edge] += size;
        self.log.push(Undo::Delay(self.delay));
        self.log.push(Undo::Rate(self.rate));
        for &l in &opt.links {
            let i = opt.edge * nl + l.0;
            if self.edge_link[i] <= 0.0 {
                self.delay += self.p.sub.link(l).delay;
            }
            self.log.push(Undo::EdgeLink(i, self.edge_link[i]));
            self.edge_link[i] += size;
            self.log.push(Undo::Link(l.0, self.link_load[l.0]));
            self.link_load[l.0] += size;
            self.rate += size;
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.log.len() > mark {
            match self.log.pop().expect("log entry") {
                Undo::Input(s, k, v) => self.inputs[s][k] = v,
                Undo::Arrivals(s, v) => self.arrivals[s] = v,
                Undo::Link(l, v) => self.link_load[l] = v,
                Undo::Edge(e, v) => self.edge_rate[e] = v,
                Undo::EdgeLink(i, v) => self.edge_link[i] = v,
                Undo::Delay(v) => self.delay = v,
                Undo::Rate(v) => self.rate = v,
            }
        }
    }

    /// Score of the current assignment. Churn of instances that may still
    /// appear is only counted when `complete`.
    fn key(&mut self, complete: bool) -> Key {
        self.cpu.iter_mut().for_each(|x| *x = 0.0);
        self.mem.iter_mut().for_each(|x| *x = 0.0);
        let mut churn = if complete { self.p.lost_reference } else { 0 };
        let mut total = 0.0;
        for (s, slot) in self.p.slots.iter().enumerate() {
            let here = self.exists(s);
            if self.p.has_reference && here != slot.in_reference && (here || complete) {
                churn += 1;
            }
            if !here {
                continue;
            }
            let comp = &self.p.services[slot.svc].template.components[slot.comp];
            let c = comp.cpu.eval(&self.inputs[s]);
            let m = comp.mem.eval(&self.inputs[s]);
            self.cpu[slot.node] += c;
            self.mem[slot.node] += m;
            total += c + m;
        }
        let mut violations = 0;
        let (mut psi_cpu, mut psi_mem, mut psi_dr) = (0.0f64, 0.0f64, 0.0f64);
        for (v, node) in self.p.sub.nodes().iter().enumerate() {
            let oc = self.cpu[v] - node.cpu;
            let om = self.mem[v] - node.mem;
            if oc > TOL {
                violations += 1;
                psi_cpu = psi_cpu.max(oc);
            }
            if om > TOL {
                violations += 1;
                psi_mem = psi_mem.max(om);
            }
        }
        for (l, link) in self.p.sub.links().iter().enumerate() {
            let o = self.link_load[l] - link.rate;
            if o > TOL {
                violations += 1;
                psi_dr = psi_dr.max(o);
            }
        }
        Key { violations, p2: self.delay + churn as f64, p3: psi_cpu + psi_mem + psi_dr + total + self.rate }
    }

    fn leaf(&mut self) {
        let key = self.key(true);
        if self.best.as_ref().is_some_and(|(b, _)| !key.better_than(b)) {
            return;
        }
        let nl = self.p.sub.link_count();
        let instances = (0..self.p.slots.len()).filter(|&s| self.exists(s)).collect();
        let edges = (0..self.p.n_edges)
            .filter(|&e| self.edge_rate[e] > 0.0)
            .map(|e| {
                let links = (0..nl)
                    .filter(|&l| self.edge_link[e * nl + l] > 0.0)
                    .map(|l| (LinkId(l), self.edge_link[e * nl + l]))
                    .collect();
                (e, self.edge_rate[e], links)
            })
            .collect();
        self.best = Some((key, Snapshot { instances, edges }));
    }
}
