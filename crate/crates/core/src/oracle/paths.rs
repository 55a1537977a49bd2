//! Candidate routing paths between node pairs.

use crate::model::{LinkId, NodeId, SubstrateNetwork};

/// Simple paths explored per node pair before the enumeration gives up on
/// finding shorter ones. Far above anything a desk-scale graph produces.
const MAX_ENUMERATED: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    pub links: Vec<LinkId>,
    pub delay: f64,
}

/// Up to `k` simple paths from `src` to `dst`, shortest first by total
/// delay, then hop count, then link ids. A node reaches itself only through
/// the empty path.
pub fn k_shortest_paths(sub: &SubstrateNetwork, src: NodeId, dst: NodeId, k: usize) -> Vec<CandidatePath> {
    if src == dst {
        return vec![CandidatePath { links: Vec::new(), delay: 0.0 }];
    }
    let mut found = Vec::new();
    let mut on_path = vec![false; sub.node_count()];
    let mut links = Vec::new();
    on_path[src.0] = true;
    walk(sub, src, dst, &mut on_path, &mut links, &mut found);
    found.sort_by(|a: &CandidatePath, b| {
        a.delay.total_cmp(&b.delay).then(a.links.len().cmp(&b.links.len())).then(a.links.cmp(&b.links))
    });
    found.truncate(k);
    found
}

fn walk(
    sub: &SubstrateNetwork,
    at: NodeId,
    dst: NodeId,
    on_path: &mut [bool],
    links: &mut Vec<LinkId>,
    found: &mut Vec<CandidatePath>,
) {
    for &l in sub.out_links(at) {
        if found.len() >= MAX_ENUMERATED {
            return;
        }
        let next = sub.link(l).dst;
        if on_path[next.0] {
            continue;
        }
        links.push(l);
        if next == dst {
            let delay = links.iter().map(|&l| sub.link(l).delay).sum();
            found.push(CandidatePath { links: links.clone(), delay });
        } else {
            on_path[next.0] = true;
            walk(sub, next, dst, on_path, links, found);
            on_path[next.0] = false;
        }
        links.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> SubstrateNetwork {
        // 0 -> 1 -> 3 (delay 2), 0 -> 2 -> 3 (delay 4), 0 -> 3 (delay 5)
        let mut net = SubstrateNetwork::new();
        let v: Vec<_> = (0..4).map(|i| net.add_node(format!("n{i}"), 1.0, 1.0).unwrap()).collect();
        net.add_link(v[0], v[1], 1.0, 1.0).unwrap();
        net.add_link(v[1], v[3], 1.0, 1.0).unwrap();
        net.add_link(v[0], v[2], 1.0, 2.0).unwrap();
        net.add_link(v[2], v[3], 1.0, 2.0).unwrap();
        net.add_link(v[0], v[3], 1.0, 5.0).unwrap();
        net
    }

    #[test]
    fn ordered_by_delay() {
        let net = diamond();
        let p = k_shortest_paths(&net, NodeId(0), NodeId(3), 4);
        let delays: Vec<f64> = p.iter().map(|p| p.delay).collect();
        assert_eq!(delays, vec![2.0, 4.0, 5.0]);
        assert_eq!(p[0].links, vec![LinkId(0), LinkId(1)]);
    }

    #[test]
    fn truncated_to_k() {
        assert_eq!(k_shortest_paths(&diamond(), NodeId(0), NodeId(3), 1).len(), 1);
    }

    #[test]
    fn self_and_unreachable() {
        let net = diamond();
        assert_eq!(k_shortest_paths(&net, NodeId(2), NodeId(2), 4)[0].links, vec![]);
        assert!(k_shortest_paths(&net, NodeId(3), NodeId(0), 4).is_empty());
    }
}
