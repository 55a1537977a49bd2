//! Best-first path search preferring high (capped) bandwidth, then low
//! latency.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{LinkId, NodeId, SubstrateNetwork, TOL};

/// Path found by [`best_first_path`]. An empty link list means source and
/// destination coincide; its bottleneck is infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub bottleneck: f64,
    pub latency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    bottleneck: f64,
    latency: f64,
}

impl Label {
    /// Ordering where `Greater` means preferred.
    fn rank(&self, other: &Label, cutoff: f64) -> Ordering {
        self.bottleneck
            .min(cutoff)
            .total_cmp(&other.bottleneck.min(cutoff))
            .then(other.latency.total_cmp(&self.latency))
    }
}

struct Entry {
    label: Label,
    node: NodeId,
    cutoff: f64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.label.rank(&other.label, self.cutoff).then(other.node.cmp(&self.node))
    }
}

/// Labels of one best-first search from a single source.
#[derive(Debug, Clone)]
pub struct SearchTree {
    src: NodeId,
    labels: Vec<Option<Label>>,
    parent: Vec<Option<LinkId>>,
}

impl SearchTree {
    /// Best-first search from `src`. Links with residual at most `TOL` are
    /// unusable. Nodes are expanded once, in order of capped bottleneck
    /// (higher first), then latency, then node id. Stops once `stop_at` is
    /// expanded.
    pub fn grow(sub: &SubstrateNetwork, residual: &[f64], src: NodeId, cutoff: f64, stop_at: Option<NodeId>) -> Self {
        let n = sub.node_count();
        let mut tree = SearchTree { src, labels: vec![None; n], parent: vec![None; n] };
        let mut done = vec![false; n];
        let start = Label { bottleneck: f64::INFINITY, latency: 0.0 };
        tree.labels[src.0] = Some(start);
        let mut heap = BinaryHeap::new();
        heap.push(Entry { label: start, node: src, cutoff });
        while let Some(Entry { label, node, .. }) = heap.pop() {
            if done[node.0] || tree.labels[node.0] != Some(label) {
                continue;
            }
            done[node.0] = true;
            if Some(node) == stop_at {
                break;
            }
            for &l in sub.out_links(node) {
                let r = residual[l.0];
                if r <= TOL {
                    continue;
                }
                let link = sub.link(l);
                if done[link.dst.0] {
                    continue;
                }
                let next = Label { bottleneck: label.bottleneck.min(r), latency: label.latency + link.delay };
                let better = match tree.labels[link.dst.0] {
                    None => true,
                    Some(old) => next.rank(&old, cutoff) == Ordering::Greater,
                };
                if better {
                    tree.labels[link.dst.0] = Some(next);
                    tree.parent[link.dst.0] = Some(l);
                    heap.push(Entry { label: next, node: link.dst, cutoff });
                }
            }
        }
        tree
    }

    pub fn reached(&self, dst: NodeId) -> bool {
        self.labels[dst.0].is_some()
    }

    /// Bottleneck and latency of the path to `dst`.
    pub fn label(&self, dst: NodeId) -> Option<(f64, f64)> {
        self.labels[dst.0].map(|l| (l.bottleneck, l.latency))
    }

    pub fn path_to(&self, sub: &SubstrateNetwork, dst: NodeId) -> Option<PathResult> {
        let label = self.labels[dst.0]?;
        let mut links = Vec::new();
        let mut nodes = vec![dst];
        let mut at = dst;
        while at != self.src {
            let l = self.parent[at.0]?;
            links.push(l);
            at = sub.link(l).src;
            nodes.push(at);
        }
        links.reverse();
        nodes.reverse();
        Some(PathResult { nodes, links, bottleneck: label.bottleneck, latency: label.latency })
    }
}

/// Path from `src` to `dst` of high bandwidth (counted up to `cutoff`) and,
/// among equals, low latency. `residual[l]` is the spare rate on link `l`.
pub fn best_first_path(
    sub: &SubstrateNetwork,
    residual: &[f64],
    src: NodeId,
    dst: NodeId,
    cutoff: f64,
) -> Option<PathResult> {
    SearchTree::grow(sub, residual, src, cutoff, Some(dst)).path_to(sub, dst)
}
