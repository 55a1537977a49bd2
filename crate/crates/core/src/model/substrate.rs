use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub cpu: f64,
    pub mem: f64,
}

/// Directed substrate link with a maximum data rate and a propagation delay.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: f64,
    pub delay: f64,
}

/// Directed graph of capacitated nodes and links. Node and link ids are
/// dense indices in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubstrateNetwork {
    nodes: Vec<Node>,
    links: Vec<Link>,
    out_links: Vec<Vec<LinkId>>,
}

impl SubstrateNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: impl Into<String>, cpu: f64, mem: f64) -> Result<NodeId> {
        let name = name.into();
        if !(cpu.is_finite() && cpu >= 0.0 && mem.is_finite() && mem >= 0.0) {
            return Err(Error::Substrate(format!("node `{name}` needs finite non-negative capacities")));
        }
        self.nodes.push(Node { name, cpu, mem });
        self.out_links.push(Vec::new());
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn add_link(&mut self, src: NodeId, dst: NodeId, rate: f64, delay: f64) -> Result<LinkId> {
        if src.0 >= self.nodes.len() || dst.0 >= self.nodes.len() {
            return Err(Error::Substrate(format!("link {}->{} references a missing node", src.0, dst.0)));
        }
        if src == dst {
            return Err(Error::Substrate(format!("self-loop on node `{}`", self.nodes[src.0].name)));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Substrate(format!("link {}->{} needs a positive finite rate", src.0, dst.0)));
        }
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(Error::Substrate(format!("link {}->{} needs a non-negative delay", src.0, dst.0)));
        }
        let id = LinkId(self.links.len());
        self.links.push(Link { src, dst, rate, delay });
        self.out_links[src.0].push(id);
        Ok(id)
    }

    /// Adds a pair of opposite links with identical parameters.
    pub fn add_duplex(&mut self, a: NodeId, b: NodeId, rate: f64, delay: f64) -> Result<(LinkId, LinkId)> {
        Ok((self.add_link(a, b, rate, delay)?, self.add_link(b, a, rate, delay)?))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.links.len()).map(LinkId)
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn find_link(&self, src: NodeId, dst: NodeId) -> Option<LinkId> {
        self.out_links[src.0].iter().copied().find(|&l| self.links[l.0].dst == dst)
    }

    pub fn total_cpu(&self) -> f64 {
        self.nodes.iter().map(|n| n.cpu).sum()
    }

    pub fn total_mem(&self) -> f64 {
        self.nodes.iter().map(|n| n.mem).sum()
    }

    /// True if every node reaches every other node.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return true;
        }
        let forward = self.reachable_from(NodeId(0), false);
        let backward = self.reachable_from(NodeId(0), true);
        forward.iter().all(|&r| r) && backward.iter().all(|&r| r)
    }

    fn reachable_from(&self, start: NodeId, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        seen[start.0] = true;
        while let Some(v) = stack.pop() {
            for link in &self.links {
                let (from, to) = if reverse { (link.dst, link.src) } else { (link.src, link.dst) };
                if from == v && !seen[to.0] {
                    seen[to.0] = true;
                    stack.push(to);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_links() {
        let mut net = SubstrateNetwork::new();
        let a = net.add_node("a", 1.0, 1.0).unwrap();
        let b = net.add_node("b", 0.0, 0.0).unwrap();
        assert!(net.add_link(a, a, 1.0, 0.0).is_err());
        assert!(net.add_link(a, b, 0.0, 0.0).is_err());
        assert!(net.add_link(a, b, 1.0, -1.0).is_err());
        assert!(net.add_link(a, NodeId(7), 1.0, 0.0).is_err());
        assert!(net.add_node("c", -1.0, 0.0).is_err());
        let (ab, ba) = net.add_duplex(a, b, 5.0, 2.0).unwrap();
        assert_eq!(net.out_links(a), &[ab]);
        assert_eq!(net.find_link(b, a), Some(ba));
        assert!(net.is_strongly_connected());
    }
}
