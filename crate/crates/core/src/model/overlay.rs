use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::substrate::{LinkId, NodeId, SubstrateNetwork};
use super::template::{ArcId, ComponentId, Template};
use super::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

/// One replica of a component placed on a substrate node, with its current
/// input/output rates and resource loads.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: InstanceId,
    pub component: ComponentId,
    pub node: NodeId,
    pub in_rates: Vec<f64>,
    pub out_rates: Vec<f64>,
    pub cpu_load: f64,
    pub mem_load: f64,
}

/// Splittable routing of one overlay edge: data rate per substrate link.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowRouting {
    pub links: BTreeMap<LinkId, f64>,
}

impl FlowRouting {
    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn add(&mut self, link: LinkId, rate: f64) {
        *self.links.entry(link).or_insert(0.0) += rate;
    }

    /// Multiplies every per-link rate by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for r in self.links.values_mut() {
            *r *= factor;
        }
    }

    pub fn total(&self) -> f64 {
        self.links.values().sum()
    }

    /// Links carrying a positive rate.
    pub fn used_links(&self) -> impl Iterator<Item = (LinkId, f64)> + '_ {
        self.links.iter().filter(|(_, &r)| r > TOL).map(|(&l, &r)| (l, r))
    }

    /// Outflow minus inflow at every node.
    pub fn net_outflow(&self, substrate: &SubstrateNetwork) -> Vec<f64> {
        let mut net = vec![0.0; substrate.node_count()];
        for (&l, &r) in &self.links {
            let link = substrate.link(l);
            net[link.src.0] += r;
            net[link.dst.0] -= r;
        }
        net
    }

    /// Node on which conservation fails, if any. Between distinct endpoints
    /// the start node must emit `rate` and intermediate nodes balance; for
    /// coinciding endpoints every node balances.
    pub fn conservation_violation(
        &self,
        substrate: &SubstrateNetwork,
        from: NodeId,
        to: NodeId,
        rate: f64,
    ) -> Option<NodeId> {
        let net = self.net_outflow(substrate);
        substrate.node_ids().find(|&v| {
            let expected = if from == to {
                0.0
            } else if v == from {
                rate
            } else if v == to {
                return false;
            } else {
                0.0
            };
            (net[v.0] - expected).abs() > TOL * (1.0 + rate.abs())
        })
    }
}

/// Overlay edge from an output of `src` to an input of `dst`, realising
/// template arc `arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayEdge {
    pub id: EdgeId,
    pub arc: ArcId,
    pub src: InstanceId,
    pub dst: InstanceId,
    pub rate: f64,
    pub routing: FlowRouting,
}

/// Scaled instantiation of a template: instances and the edges between them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Overlay {
    instances: BTreeMap<InstanceId, Instance>,
    edges: BTreeMap<EdgeId, OverlayEdge>,
    next_instance: u32,
    next_edge: u32,
}

impl Overlay {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.instances.values()
    }

    pub fn instances_mut(&mut self) -> impl Iterator<Item = &mut Instance> {
        self.instances.values_mut()
    }

    pub fn edges(&self) -> impl Iterator<Item = &OverlayEdge> {
        self.edges.values()
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn instance(&self, id: InstanceId) -> Option<&Instance> {
        self.instances.get(&id)
    }

    pub fn instance_mut(&mut self, id: InstanceId) -> Option<&mut Instance> {
        self.instances.get_mut(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&OverlayEdge> {
        self.edges.get(&id)
    }

    pub fn edge_mut(&mut self, id: EdgeId) -> Option<&mut OverlayEdge> {
        self.edges.get_mut(&id)
    }

    /// Instance of `component` on `node`, if any.
    pub fn find(&self, component: ComponentId, node: NodeId) -> Option<InstanceId> {
        self.instances.values().find(|i| i.component == component && i.node == node).map(|i| i.id)
    }

    pub fn instances_of(&self, component: ComponentId) -> Vec<InstanceId> {
        let mut ids: Vec<_> = self.instances.values().filter(|i| i.component == component).collect();
        ids.sort_by_key(|i| (i.node, i.id));
        ids.into_iter().map(|i| i.id).collect()
    }

    /// Adds an idle instance (all rates and loads zero).
    pub fn add_instance(&mut self, template: &Template, component: ComponentId, node: NodeId) -> InstanceId {
        let c = template.component(component);
        self.insert_instance(Instance {
            id: InstanceId(0),
            component,
            node,
            in_rates: vec![0.0; c.inputs],
            out_rates: vec![0.0; c.outputs],
            cpu_load: 0.0,
            mem_load: 0.0,
        })
    }

    /// Inserts an instance, assigning it a fresh id.
    pub fn insert_instance(&mut self, mut instance: Instance) -> InstanceId {
        let id = InstanceId(self.next_instance);
        self.next_instance += 1;
        instance.id = id;
        self.instances.insert(id, instance);
        id
    }

    /// Inserts an instance keeping its id. Used when loading dumps.
    pub fn restore_instance(&mut self, instance: Instance) {
        self.next_instance = self.next_instance.max(instance.id.0 + 1);
        self.instances.insert(instance.id, instance);
    }

    pub fn restore_edge(&mut self, edge: OverlayEdge) {
        self.next_edge = self.next_edge.max(edge.id.0 + 1);
        self.edges.insert(edge.id, edge);
    }

    /// Removes an instance and every edge touching it; returns the removed edges.
    pub fn remove_instance(&mut self, id: InstanceId) -> Vec<OverlayEdge> {
        self.instances.remove(&id);
        let touching: Vec<EdgeId> = self.edges.values().filter(|e| e.src == id || e.dst == id).map(|e| e.id).collect();
        touching.into_iter().filter_map(|e| self.edges.remove(&e)).collect()
    }

    pub fn add_edge(&mut self, arc: ArcId, src: InstanceId, dst: InstanceId) -> EdgeId {
        let id = EdgeId(self.next_edge);
        self.next_edge += 1;
        self.edges.insert(id, OverlayEdge { id, arc, src, dst, rate: 0.0, routing: FlowRouting::default() });
        id
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Option<OverlayEdge> {
        self.edges.remove(&id)
    }

    /// Edge from `src` to `dst` realising `arc`.
    pub fn find_edge(&self, arc: ArcId, src: InstanceId, dst: InstanceId) -> Option<EdgeId> {
        self.edges.values().find(|e| e.arc == arc && e.src == src && e.dst == dst).map(|e| e.id)
    }

    /// Edges leaving output `output` of instance `src`, in id order.
    pub fn out_edges(&self, template: &Template, src: InstanceId, output: usize) -> Vec<EdgeId> {
        self.edges.values().filter(|e| e.src == src && template.arc(e.arc).output == output).map(|e| e.id).collect()
    }

    pub fn in_edges(&self, dst: InstanceId) -> Vec<EdgeId> {
        self.edges.values().filter(|e| e.dst == dst).map(|e| e.id).collect()
    }

    /// Sum of incoming edge rates per input of `dst`.
    pub fn input_sums(&self, template: &Template, dst: InstanceId) -> Vec<f64> {
        let inst = &self.instances[&dst];
        let mut sums = vec![0.0; template.component(inst.component).inputs];
        for e in self.edges.values().filter(|e| e.dst == dst) {
            sums[template.arc(e.arc).input] += e.rate;
        }
        sums
    }

    /// Sum of outgoing edge rates per output of `src`.
    pub fn output_sums(&self, template: &Template, src: InstanceId) -> Vec<f64> {
        let inst = &self.instances[&src];
        let mut sums = vec![0.0; template.component(inst.component).outputs];
        for e in self.edges.values().filter(|e| e.src == src) {
            sums[template.arc(e.arc).output] += e.rate;
        }
        sums
    }

    /// Instances in topological order of the overlay edges, ties by
    /// (component, node). `None` if the overlay has a cycle.
    pub fn topo_order(&self) -> Option<Vec<InstanceId>> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut indeg: BTreeMap<InstanceId, usize> = self.instances.keys().map(|&k| (k, 0)).collect();
        for e in self.edges.values() {
            if let Some(d) = indeg.get_mut(&e.dst) {
                *d += 1;
            }
        }
        let key = |id: InstanceId| {
            let i = &self.instances[&id];
            Reverse((i.component, i.node, id))
        };
        let mut ready: BinaryHeap<_> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| key(k)).collect();
        let mut order = Vec::with_capacity(self.instances.len());
        while let Some(Reverse((_, _, id))) = ready.pop() {
            order.push(id);
            for e in self.edges.values().filter(|e| e.src == id) {
                if let Some(d) = indeg.get_mut(&e.dst) {
                    *d -= 1;
                    if *d == 0 {
                        ready.push(key(e.dst));
                    }
                }
            }
        }
        (order.len() == self.instances.len()).then_some(order)
    }
}
