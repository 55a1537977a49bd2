use super::*;
use crate::model::{count_violations, validate_configuration, Component, ResourceFunction, Source, Template};

/// S -> A where A is a sink with cpu `cpu_const + cpu_coef * x`.
fn sink_template(cpu_const: f64, cpu_coef: f64) -> Template {
    let mut t = Template::new("svc");
    let s = t.add_component(Component::source("S"));
    let a = t.add_component(Component::processing(
        "A",
        ResourceFunction::affine(cpu_const, &[cpu_coef]),
        ResourceFunction::zero(1),
        vec![],
    ));
    t.connect(s, 0, a, 0);
    t
}

fn with_service(net: SubstrateNetwork, t: Template, src_node: NodeId, rate: f64) -> (Embedder, InstanceId) {
    let mut ov = Overlay::new();
    let s = ov.add_instance(&t, ComponentId(0), src_node);
    ov.instance_mut(s).unwrap().out_rates = vec![rate];
    let mut cfg = SystemConfiguration::empty(net);
    let sources = vec![Source { node: src_node, component: ComponentId(0), rate }];
    cfg.services.insert("svc".into(), ServiceState { template: t, sources, overlay: ov });
    (Embedder::new(cfg, HeuristicParams::default()), s)
}

fn nodes(net: &mut SubstrateNetwork, cpus: &[f64]) -> Vec<NodeId> {
    cpus.iter().enumerate().map(|(i, &c)| net.add_node(format!("v{i}"), c, 100.0).unwrap()).collect()
}

fn overlay(em: &Embedder) -> &Overlay {
    &em.config().services["svc"].overlay
}

/// Source on v0 feeding A on v1 (rate 2) and A on v2 (rate 5).
fn two_flows() -> (Embedder, EdgeId, EdgeId, LinkId, LinkId) {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[100.0, 100.0, 100.0]);
    let l1 = net.add_link(v[0], v[1], 10.0, 1.0).unwrap();
    let l2 = net.add_link(v[0], v[2], 10.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(0.0, 1.0), v[0], 7.0);
    let mut p = em.parts("svc").unwrap();
    let t = p.state.template.clone();
    let a1 = p.state.overlay.add_instance(&t, ComponentId(1), v[1]);
    let a2 = p.state.overlay.add_instance(&t, ComponentId(1), v[2]);
    let e1 = p.state.overlay.add_edge(ArcId(0), s, a1);
    let e2 = p.state.overlay.add_edge(ArcId(0), s, a2);
    p.add_flow(e1, &[l1], 2.0);
    p.add_flow(e2, &[l2], 5.0);
    (em, e1, e2, l1, l2)
}

#[test]
fn decrease_removes_exact_small_edge() {
    let (mut em, e1, e2, _, l2) = two_flows();
    em.decrease("svc", &[e1, e2], 2.0).unwrap();
    assert!(overlay(&em).edge(e1).is_none());
    let e = overlay(&em).edge(e2).unwrap();
    assert_eq!(e.rate, 5.0);
    assert_eq!(e.routing.links[&l2], 5.0);
}

#[test]
fn decrease_scales_next_edge() {
    let (mut em, e1, e2, l1, l2) = two_flows();
    em.decrease("svc", &[e2, e1], 4.0).unwrap();
    assert!(overlay(&em).edge(e1).is_none());
    let e = overlay(&em).edge(e2).unwrap();
    assert!((e.rate - 3.0).abs() < 1e-12);
    assert!((e.routing.links[&l2] - 3.0).abs() < 1e-12);
    assert!((em.usage().link[l2.0] - 3.0).abs() < 1e-12);
    assert_eq!(em.usage().link[l1.0], 0.0);
    let dst = overlay(&em).instance(e.dst).unwrap();
    assert!((dst.in_rates[0] - 3.0).abs() < 1e-12);
}

#[test]
fn decrease_by_zero_is_noop() {
    let (mut em, e1, e2, _, _) = two_flows();
    let before = em.config().clone();
    em.decrease("svc", &[e1, e2], 0.0).unwrap();
    assert_eq!(em.config(), &before);
}

#[test]
fn decrease_beyond_total_is_rejected() {
    let (mut em, e1, e2, _, _) = two_flows();
    assert!(matches!(em.decrease("svc", &[e1, e2], 8.0), Err(Error::Contract(_))));
}

#[test]
fn incr_flow_capped_by_destination_cpu() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 10.0]);
    net.add_link(v[0], v[1], 1000.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(0.0, 2.0), v[0], 100.0);
    let p = em.parts("svc").unwrap();
    let t = p.state.template.clone();
    let a = p.state.overlay.add_instance(&t, ComponentId(1), v[1]);
    let e = p.state.overlay.add_edge(ArcId(0), s, a);
    assert_eq!(em.incr_flow("svc", e, 100.0).unwrap(), 5.0);
    assert_eq!(em.incr_flow("svc", e, 100.0).unwrap(), 0.0);
    assert_eq!(em.usage().cpu[1], 10.0);
}

#[test]
fn incr_flow_limited_by_bottleneck() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 100.0]);
    net.add_link(v[0], v[1], 3.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(0.0, 0.0), v[0], 5.0);
    let p = em.parts("svc").unwrap();
    let t = p.state.template.clone();
    let a = p.state.overlay.add_instance(&t, ComponentId(1), v[1]);
    let e = p.state.overlay.add_edge(ArcId(0), s, a);
    assert_eq!(em.incr_flow("svc", e, 5.0).unwrap(), 3.0);
}

#[test]
fn repeated_incr_flow_splits_over_disjoint_paths() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 0.0, 0.0, 100.0]);
    net.add_link(v[0], v[1], 4.0, 1.0).unwrap();
    net.add_link(v[1], v[3], 4.0, 1.0).unwrap();
    net.add_link(v[0], v[2], 4.0, 2.0).unwrap();
    net.add_link(v[2], v[3], 4.0, 2.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(0.0, 0.0), v[0], 6.0);
    let p = em.parts("svc").unwrap();
    let t = p.state.template.clone();
    let a = p.state.overlay.add_instance(&t, ComponentId(1), v[3]);
    let e = p.state.overlay.add_edge(ArcId(0), s, a);
    assert_eq!(em.incr_flow("svc", e, 6.0).unwrap(), 4.0);
    assert_eq!(em.incr_flow("svc", e, 2.0).unwrap(), 2.0);
    let edge = overlay(&em).edge(e).unwrap();
    assert_eq!(edge.routing.links.len(), 4);
    assert_eq!(edge.rate, 6.0);
    assert!(edge.routing.conservation_violation(&em.config().substrate, v[0], v[3], 6.0).is_none());
}

#[test]
fn create_on_only_eligible_node() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 100.0]);
    net.add_duplex(v[0], v[1], 10.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(1.0, 1.0), v[0], 4.0);
    let (inst, _, rate) = em.create_instance_and_flow("svc", ArcId(0), s, 4.0).unwrap().unwrap();
    assert_eq!(overlay(&em).instance(inst).unwrap().node, v[1]);
    assert_eq!(rate, 4.0);
}

/// Source node without CPU, two candidates reached over direct links.
fn fork(rate_a: f64, delay_a: f64, rate_b: f64, delay_b: f64) -> (Embedder, InstanceId, Vec<NodeId>) {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 100.0, 100.0]);
    net.add_link(v[0], v[1], rate_a, delay_a).unwrap();
    net.add_link(v[0], v[2], rate_b, delay_b).unwrap();
    let (em, s) = with_service(net, sink_template(0.0, 1.0), v[0], 30.0);
    (em, s, v)
}

#[test]
fn create_prefers_lower_latency_on_equal_flow() {
    let (mut em, s, v) = fork(10.0, 5.0, 10.0, 3.0);
    let (inst, _, rate) = em.create_instance_and_flow("svc", ArcId(0), s, 10.0).unwrap().unwrap();
    assert_eq!(overlay(&em).instance(inst).unwrap().node, v[2]);
    assert_eq!(rate, 10.0);
}

#[test]
fn cutoff_turns_flow_difference_into_tie() {
    let (mut em, s, v) = fork(20.0, 5.0, 8.0, 3.0);
    let (inst, _, rate) = em.create_instance_and_flow("svc", ArcId(0), s, 5.0).unwrap().unwrap();
    assert_eq!(overlay(&em).instance(inst).unwrap().node, v[2]);
    assert_eq!(rate, 5.0);

    let (mut em, s, v) = fork(20.0, 5.0, 8.0, 3.0);
    let (inst, _, rate) = em.create_instance_and_flow("svc", ArcId(0), s, 10.0).unwrap().unwrap();
    assert_eq!(overlay(&em).instance(inst).unwrap().node, v[1]);
    assert_eq!(rate, 10.0);
}

#[test]
fn create_flow_respects_destination_cpu() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 6.0, 100.0]);
    net.add_link(v[0], v[1], 100.0, 1.0).unwrap();
    net.add_link(v[0], v[2], 100.0, 9.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(2.0, 1.0), v[0], 10.0);
    // v1 fits only 4 units (2 + x <= 6), so the slower v2 wins on rate.
    let (inst, _, rate) = em.create_instance_and_flow("svc", ArcId(0), s, 10.0).unwrap().unwrap();
    assert_eq!(overlay(&em).instance(inst).unwrap().node, v[2]);
    assert_eq!(rate, 10.0);
    // With cutoff 4 both tie and the faster v1 wins.
    let (inst, _, rate) = em.create_instance_and_flow("svc", ArcId(0), s, 4.0).unwrap().unwrap();
    assert_eq!(overlay(&em).instance(inst).unwrap().node, v[1]);
    assert_eq!(rate, 4.0);
}

#[test]
fn increase_uses_existing_successor_first() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 100.0, 100.0]);
    let l = net.add_link(v[0], v[1], 10.0, 1.0).unwrap();
    net.add_link(v[0], v[2], 10.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(0.0, 1.0), v[0], 5.0);
    let mut p = em.parts("svc").unwrap();
    let t = p.state.template.clone();
    let a = p.state.overlay.add_instance(&t, ComponentId(1), v[1]);
    let e = p.state.overlay.add_edge(ArcId(0), s, a);
    p.add_flow(e, &[l], 2.0);
    em.increase("svc", s, 0, 3.0).unwrap();
    assert_eq!(overlay(&em).instance_count(), 2);
    assert_eq!(overlay(&em).edge(e).unwrap().rate, 5.0);
}

#[test]
fn increase_creates_missing_successor_once() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[100.0, 100.0]);
    net.add_duplex(v[0], v[1], 10.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(0.0, 1.0), v[0], 3.0);
    em.increase("svc", s, 0, 3.0).unwrap();
    let ov = overlay(&em);
    assert_eq!(ov.instances_of(ComponentId(1)).len(), 1);
    assert_eq!(ov.edge_count(), 1);
    // co-location costs no link and no latency
    assert_eq!(ov.instance(ov.instances_of(ComponentId(1))[0]).unwrap().node, v[0]);
}

#[test]
fn increase_spreads_when_one_node_is_full() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[4.0, 100.0]);
    net.add_duplex(v[0], v[1], 6.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(0.0, 1.0), v[0], 10.0);
    em.increase("svc", s, 0, 10.0).unwrap();
    let ov = overlay(&em);
    let placed: Vec<_> = ov.instances_of(ComponentId(1)).iter().map(|&i| ov.instance(i).unwrap().in_rates[0]).collect();
    assert_eq!(placed, vec![4.0, 6.0]);
}

#[test]
fn exhaustion_overloads_instead_of_dropping() {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[0.0, 0.0]);
    net.add_duplex(v[0], v[1], 10.0, 1.0).unwrap();
    let (mut em, s) = with_service(net, sink_template(1.0, 1.0), v[0], 3.0);
    em.increase("svc", s, 0, 3.0).unwrap();
    let ov = overlay(&em);
    let a = ov.instances_of(ComponentId(1));
    assert_eq!(a.len(), 1);
    assert_eq!(ov.instance(a[0]).unwrap().node, v[0]);
    assert_eq!(ov.instance(a[0]).unwrap().in_rates, vec![3.0]);
    assert_eq!(count_violations(em.config()).n_violations, 1);
}

fn small_net() -> SubstrateNetwork {
    let mut net = SubstrateNetwork::new();
    let v = nodes(&mut net, &[10.0, 10.0, 10.0]);
    net.add_duplex(v[0], v[1], 10.0, 1.0).unwrap();
    net.add_duplex(v[1], v[2], 10.0, 1.0).unwrap();
    net
}

fn chain_service(rate: f64) -> Service {
    let mut t = Template::new("svc");
    let s = t.add_component(Component::source("S"));
    let a = t.add_component(Component::processing(
        "A",
        ResourceFunction::affine(1.0, &[1.0]),
        ResourceFunction::affine(0.0, &[1.0]),
        vec![ResourceFunction::affine(0.0, &[0.5])],
    ));
    let b = t.add_component(Component::processing(
        "B",
        ResourceFunction::affine(0.0, &[1.0]),
        ResourceFunction::zero(1),
        vec![],
    ));
    t.connect(s, 0, a, 0);
    t.connect(a, 0, b, 0);
    Service::new(t, vec![Source { node: NodeId(0), component: s, rate }])
}

#[test]
fn embed_from_scratch_is_valid_and_idempotent() {
    let prev = SystemConfiguration::empty(small_net());
    let params = HeuristicParams::default();
    let svc = [chain_service(6.0)];
    let first = embed(&prev, &svc, &params).unwrap();
    assert!(validate_configuration(&first).is_empty(), "{:?}", validate_configuration(&first));
    assert_eq!(count_violations(&first).n_violations, 0);
    let second = embed(&first, &svc, &params).unwrap();
    assert_eq!(first, second);
}

#[test]
fn removing_the_source_empties_the_overlay() {
    let prev = SystemConfiguration::empty(small_net());
    let params = HeuristicParams::default();
    let first = embed(&prev, &[chain_service(6.0)], &params).unwrap();
    assert!(first.instance_count() > 1);
    let mut gone = chain_service(6.0);
    gone.sources.clear();
    let after = embed(&first, &[gone], &params).unwrap();
    assert_eq!(after.instance_count(), 0);
    assert!(ResourceUsage::of(&after).link.iter().all(|&x| x == 0.0));
}

#[test]
fn shrinking_rate_keeps_configuration_valid() {
    let prev = SystemConfiguration::empty(small_net());
    let params = HeuristicParams::default();
    let big = embed(&prev, &[chain_service(12.0)], &params).unwrap();
    let small = embed(&big, &[chain_service(3.0)], &params).unwrap();
    assert!(validate_configuration(&small).is_empty(), "{:?}", validate_configuration(&small));
    assert_eq!(count_violations(&small).n_violations, 0);
}

#[test]
fn dropping_a_service_frees_everything() {
    let prev = SystemConfiguration::empty(small_net());
    let params = HeuristicParams::default();
    let cfg = embed(&prev, &[chain_service(6.0)], &params).unwrap();
    let cleared = embed(&cfg, &[], &params).unwrap();
    assert!(cleared.services.is_empty());
}

#[test]
fn seeded_arc_choice_is_reproducible() {
    let params = HeuristicParams { rng_seed: 7, deterministic_arc_choice: false };
    let prev = SystemConfiguration::empty(small_net());
    let a = embed(&prev, &[chain_service(14.0)], &params).unwrap();
    let b = embed(&prev, &[chain_service(14.0)], &params).unwrap();
    assert_eq!(a, b);
}
