//! Ready-made substrates, templates and random instances for examples,
//! scenarios and tests.

use rand::Rng;

use crate::model::{Component, ComponentId, NodeId, ResourceFunction, Service, Source, SubstrateNetwork, Template};

/// Ten nodes named `1`..`10` with CPU and memory 100, joined by ten
/// reciprocal link pairs (20 directed links) of rate 100. Node 3 is node
/// 1's closest neighbour; node 9 reaches node 3 over nodes 7 and 5.
pub fn illustrative_network() -> SubstrateNetwork {
    let mut net = SubstrateNetwork::new();
    let v: Vec<NodeId> = (1..=10).map(|i| net.add_node(i.to_string(), 100.0, 100.0).expect("fresh node")).collect();
    let pairs = [
        (1, 3, 1.0),
        (1, 2, 2.0),
        (2, 4, 2.0),
        (3, 4, 2.0),
        (3, 5, 1.0),
        (4, 6, 2.0),
        (5, 7, 1.0),
        (6, 8, 2.0),
        (7, 9, 1.0),
        (8, 10, 2.0),
    ];
    for (a, b, delay) in pairs {
        net.add_duplex(v[a - 1], v[b - 1], 100.0, delay).expect("valid link");
    }
    net
}

/// Source, firewall, deep packet inspection, anti-virus and parental
/// control in a chain. Every stage forwards its input rate; CPU grows by
/// 0.5 (firewall, parental control) or 1 (inspection, anti-virus) per unit
/// of rate on top of a constant 2, memory by 0.2 per unit on top of 1.
pub fn security_chain() -> Template {
    let mut t = Template::new("security");
    let s = t.add_component(Component::source("S"));
    let mut prev = s;
    for (name, slope) in [("FW", 0.5), ("DPI", 1.0), ("AV", 1.0), ("PC", 0.5)] {
        let c = t.add_component(Component::processing(
            name,
            ResourceFunction::affine(2.0, &[slope]),
            ResourceFunction::affine(1.0, &[0.2]),
            vec![ResourceFunction::affine(0.0, &[1.0])],
        ));
        t.connect(prev, 0, c, 0);
        prev = c;
    }
    t
}

/// Video delivery service: a streaming server feeding inspection, a video
/// optimizer that shrinks the stream to 80 %, and a cache at the edge.
pub fn video_cdn(name: &str) -> Template {
    let mut t = Template::new(name);
    let server = t.add_component(Component::source("server"));
    let dpi = t.add_component(Component::processing(
        "dpi",
        ResourceFunction::affine(1.0, &[0.5]),
        ResourceFunction::affine(1.0, &[0.1]),
        vec![ResourceFunction::affine(0.0, &[1.0])],
    ));
    let optimizer = t.add_component(Component::processing(
        "optimizer",
        ResourceFunction::affine(2.0, &[1.0]),
        ResourceFunction::affine(2.0, &[0.2]),
        vec![ResourceFunction::affine(0.0, &[0.8])],
    ));
    let cache = t.add_component(Component::processing(
        "cache",
        ResourceFunction::affine(1.0, &[0.2]),
        ResourceFunction::affine(4.0, &[0.5]),
        vec![ResourceFunction::affine(0.0, &[1.0])],
    ));
    t.connect(server, 0, dpi, 0);
    t.connect(dpi, 0, optimizer, 0);
    t.connect(optimizer, 0, cache, 0);
    t
}

/// Size bounds for [`random_instance`]. All drawn numbers are integers.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstanceParams {
    pub max_nodes: usize,
    /// Components per template, the source included.
    pub max_components: usize,
    pub max_sources: usize,
    pub max_source_rate: u32,
    pub max_node_capacity: u32,
    pub max_link_rate: u32,
    pub max_delay: u32,
}

impl Default for RandomInstanceParams {
    fn default() -> Self {
        RandomInstanceParams {
            max_nodes: 5,
            max_components: 4,
            max_sources: 2,
            max_source_rate: 2,
            max_node_capacity: 8,
            max_link_rate: 3,
            max_delay: 3,
        }
    }
}

/// Small substrate with a reciprocal ring plus random chords, and one
/// service with affine functions whose template is a chain or, with four
/// components, possibly a fork. Output functions forward their input so
/// rates stay within the source totals.
pub fn random_instance(rng: &mut impl Rng, p: &RandomInstanceParams) -> (SubstrateNetwork, Service) {
    let n = rng.gen_range(2..=p.max_nodes.max(2));
    let mut net = SubstrateNetwork::new();
    for i in 0..n {
        let cpu = rng.gen_range(0..=p.max_node_capacity) as f64;
        let mem = rng.gen_range(0..=p.max_node_capacity) as f64;
        net.add_node(format!("n{i}"), cpu, mem).expect("fresh node");
    }
    let link = |net: &mut SubstrateNetwork, rng: &mut dyn rand::RngCore, a: usize, b: usize| {
        let rate = rng.gen_range(1..=p.max_link_rate) as f64;
        let delay = rng.gen_range(1..=p.max_delay) as f64;
        net.add_duplex(NodeId(a), NodeId(b), rate, delay).expect("valid link");
    };
    for i in 0..n.saturating_sub(1) {
        link(&mut net, rng, i, i + 1);
    }
    if n > 2 {
        link(&mut net, rng, n - 1, 0);
    }
    for a in 0..n {
        for b in a + 2..n {
            if (a, b) != (0, n - 1) && rng.gen_bool(0.2) {
                link(&mut net, rng, a, b);
            }
        }
    }

    let n_comp = rng.gen_range(2..=p.max_components.max(2));
    let mut t = Template::new("random");
    let s = t.add_component(Component::source("S"));
    let fork = n_comp == 4 && rng.gen_bool(0.3);
    let mut prev = s;
    for j in 1..n_comp {
        let cpu = ResourceFunction::affine(rng.gen_range(0..=1) as f64, &[rng.gen_range(0..=2) as f64]);
        let mem = ResourceFunction::affine(rng.gen_range(0..=1) as f64, &[rng.gen_range(0..=1) as f64]);
        let last = j == n_comp - 1 || (fork && j == 2);
        let out = if last { vec![] } else { vec![ResourceFunction::affine(0.0, &[1.0])] };
        let c = t.add_component(Component::processing(format!("C{j}"), cpu, mem, out));
        let from = if fork && j == 3 { ComponentId(1) } else { prev };
        t.connect(from, 0, c, 0);
        prev = c;
    }
    let n_src = rng.gen_range(1..=p.max_sources.max(1)).min(n);
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut sources = Vec::new();
    for _ in 0..n_src {
        let node = nodes.swap_remove(rng.gen_range(0..nodes.len()));
        sources.push(Source { node: NodeId(node), component: s, rate: rng.gen_range(1..=p.max_source_rate) as f64 });
    }
    (net, Service::new(t, sources))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn illustrative_network_shape() {
        let net = illustrative_network();
        assert_eq!(net.node_count(), 10);
        assert_eq!(net.link_count(), 20);
        assert!(net.is_strongly_connected());
    }

    #[test]
    fn templates_are_valid_and_affine() {
        for t in [security_chain(), video_cdn("cdn")] {
            assert!(t.ensure_valid().is_ok());
            assert!(t.is_affine());
        }
        assert_eq!(security_chain().components.len(), 5);
        assert_eq!(video_cdn("cdn").components.len(), 4);
    }

    #[test]
    fn random_instances_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let (net, svc) = random_instance(&mut rng, &RandomInstanceParams::default());
            assert!(net.node_count() <= 5 && net.is_strongly_connected());
            assert!(svc.template.components.len() <= 4);
            svc.validate(&net).unwrap();
        }
    }
}
