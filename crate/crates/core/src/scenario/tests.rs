use super::*;
use crate::catalog::{illustrative_network, security_chain, video_cdn};

fn heuristic() -> Algorithm {
    Algorithm::Heuristic(HeuristicParams::default())
}

fn source(node: usize, rate: f64) -> Source {
    Source { node: NodeId(node), component: ComponentId(0), rate }
}

fn placements(cfg: &SystemConfiguration, service: &str) -> Vec<(String, usize)> {
    let s = &cfg.services[service];
    let mut v: Vec<_> =
        s.overlay.instances().map(|i| (s.template.components[i.component.0].name.clone(), i.node.0 + 1)).collect();
    v.sort();
    v
}

#[test]
fn no_events_no_records() {
    let recs = run_scenario(&illustrative_network(), &[], &[], &heuristic()).unwrap();
    assert!(recs.is_empty());
}

#[test]
fn demand_rises_and_falls() {
    let net = illustrative_network();
    let events = vec![
        Event::AddService { service: "cdn".into(), template: "cdn".into(), sources: vec![] },
        Event::AddSource { service: "cdn".into(), source: source(4, 10.0) },
        Event::RemoveSource { service: "cdn".into(), node: NodeId(4), component: ComponentId(0) },
    ];
    let (recs, cfgs) = run_scenario_with_configs(&net, &[video_cdn("cdn")], &events, &heuristic()).unwrap();
    let demand: Vec<f64> = recs.iter().map(|r| r.demand).collect();
    assert_eq!(demand, vec![0.0, 10.0, 0.0]);
    assert!(recs[1].allocated_cpu > 0.0);
    assert_eq!(recs[2].allocated_cpu, 0.0);
    assert_eq!(cfgs[2].instance_count(), 0);
    assert_eq!(recs[2].churn, recs[1].instances);
}

/// The security chain on the ten-node network. Rate 20 fits node 1 alone
/// (2 + 20 * 0.5 + 2 * (2 + 20) + 2 + 10 = 68 CPU). Raising it to 45 leaves
/// the inspection stage 19.5 units of room on node 1, so inspection,
/// anti-virus and parental control spill to node 3, node 1's closest
/// neighbour. A rate-40 source on node 9 gets a local firewall and
/// inspection; the remaining stages no longer fit on node 9 and go to its
/// neighbour 7.
#[test]
fn illustrative_narrative() {
    let events = vec![
        Event::AddService { service: "security".into(), template: "security".into(), sources: vec![source(0, 20.0)] },
        Event::ChangeRate { service: "security".into(), node: NodeId(0), component: ComponentId(0), rate: 45.0 },
        Event::AddSource { service: "security".into(), source: source(8, 40.0) },
    ];
    let (recs, cfgs) =
        run_scenario_with_configs(&illustrative_network(), &[security_chain()], &events, &heuristic()).unwrap();
    assert!(recs.iter().all(|r| r.violations == 0));
    let at = |step: usize, node: usize| -> Vec<String> {
        placements(&cfgs[step], "security").into_iter().filter(|(_, v)| *v == node).map(|(c, _)| c).collect()
    };
    assert_eq!(at(0, 1), ["AV", "DPI", "FW", "PC", "S"]);
    assert_eq!(cfgs[0].instance_count(), 5);
    assert_eq!(at(1, 3), ["AV", "DPI", "PC"]);
    assert_eq!(cfgs[1].instance_count(), 8);
    assert_eq!(at(2, 9), ["DPI", "FW", "S"]);
    assert_eq!(at(2, 7), ["AV", "PC"]);
    assert_eq!(at(2, 1), at(1, 1));
    assert_eq!(at(2, 3), at(1, 3));
}

#[test]
fn invalid_events_abort_with_index() {
    let net = illustrative_network();
    let templates = [video_cdn("cdn")];
    let cases = [
        Event::RemoveService { service: "ghost".into() },
        Event::AddService { service: "x".into(), template: "missing".into(), sources: vec![] },
        Event::AddSource { service: "cdn".into(), source: source(99, 1.0) },
        Event::ChangeRate { service: "cdn".into(), node: NodeId(1), component: ComponentId(0), rate: -1.0 },
        Event::RemoveSource { service: "cdn".into(), node: NodeId(3), component: ComponentId(0) },
    ];
    for bad in cases {
        let events = vec![
            Event::AddService { service: "cdn".into(), template: "cdn".into(), sources: vec![source(1, 2.0)] },
            bad,
        ];
        match run_scenario(&net, &templates, &events, &heuristic()) {
            Err(Error::Event { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected event error, got {other:?}"),
        }
    }
}

#[test]
fn untouched_services_keep_their_overlay() {
    let net = illustrative_network();
    let events = vec![
        Event::AddService { service: "a".into(), template: "cdn".into(), sources: vec![source(0, 5.0)] },
        Event::AddService { service: "b".into(), template: "cdn".into(), sources: vec![source(5, 5.0)] },
        Event::ChangeRate { service: "b".into(), node: NodeId(5), component: ComponentId(0), rate: 30.0 },
    ];
    let (_, cfgs) = run_scenario_with_configs(&net, &[video_cdn("cdn")], &events, &heuristic()).unwrap();
    assert_eq!(cfgs[2].services["a"].overlay, cfgs[0].services["a"].overlay);
    assert_ne!(cfgs[2].services["b"].overlay, cfgs[1].services["b"].overlay);
}

#[test]
fn allocation_tracks_rising_demand() {
    let net = illustrative_network();
    let mut events =
        vec![Event::AddService { service: "cdn".into(), template: "cdn".into(), sources: vec![source(2, 1.0)] }];
    for rate in [5.0, 10.0, 20.0, 40.0, 60.0] {
        events.push(Event::ChangeRate { service: "cdn".into(), node: NodeId(2), component: ComponentId(0), rate });
    }
    let recs = run_scenario(&net, &[video_cdn("cdn")], &events, &heuristic()).unwrap();
    for w in recs.windows(2) {
        assert!(w[1].allocated_cpu >= w[0].allocated_cpu);
    }
}

#[test]
fn oracle_and_export_modes() {
    let mut net = SubstrateNetwork::new();
    let a = net.add_node("a", 10.0, 10.0).unwrap();
    let b = net.add_node("b", 10.0, 10.0).unwrap();
    net.add_duplex(a, b, 5.0, 1.0).unwrap();
    let events = vec![
        Event::AddService { service: "cdn".into(), template: "cdn".into(), sources: vec![source(0, 2.0)] },
        Event::ChangeRate { service: "cdn".into(), node: NodeId(0), component: ComponentId(0), rate: 3.0 },
    ];
    let templates = [video_cdn("cdn")];
    let recs = run_scenario(&net, &templates, &events, &Algorithm::Oracle(OracleLimits::default())).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs.iter().all(|r| r.violations == 0));

    let dir = tempfile::tempdir().unwrap();
    let recs = run_scenario(&net, &templates, &events, &Algorithm::ExportLp(dir.path().to_path_buf())).unwrap();
    assert_eq!(recs.len(), 2);
    for i in 0..2 {
        let text = std::fs::read_to_string(dir.path().join(format!("event_{i:03}.lp"))).unwrap();
        assert!(text.starts_with("\\ template embedding model"));
    }
    // the second program measures churn against the first configuration
    let second = std::fs::read_to_string(dir.path().join("event_001.lp")).unwrap();
    assert!(second.contains("del_"));
}

#[test]
fn generated_substrates() {
    let two = generate_substrate(2, 2.5, 0).unwrap();
    assert_eq!((two.node_count(), two.link_count()), (2, 2));
    let big = generate_substrate(1000, 2.53, 7).unwrap();
    assert_eq!(big.link_count(), 2530);
    assert!(big.is_strongly_connected());
    assert_eq!(generate_substrate(50, 3.0, 11).unwrap(), generate_substrate(50, 3.0, 11).unwrap());
    assert_ne!(generate_substrate(50, 3.0, 11).unwrap(), generate_substrate(50, 3.0, 12).unwrap());
    assert!(generate_substrate(1, 2.0, 0).is_err());
    for l in big.links() {
        assert!((20.0..=100.0).contains(&l.rate) && (1.0..=10.0).contains(&l.delay));
    }
}

fn sample_record(event: usize) -> ScenarioRecord {
    ScenarioRecord {
        event,
        kind: "source-add".into(),
        demand: 12.5,
        allocated_cpu: 1.0 / 3.0,
        allocated_mem: 7.0,
        total_latency: 0.1 + 0.2,
        total_link_rate: 1e-7,
        instances: 4,
        churn: 2,
        violations: 0,
        runtime_s: 0.000123,
    }
}

#[test]
fn csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    write_metrics_csv(&[], &empty).unwrap();
    assert_eq!(std::fs::read_to_string(&empty).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));

    let one = dir.path().join("one.csv");
    write_metrics_csv(&[sample_record(0)], &one).unwrap();
    let text = std::fs::read_to_string(&one).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));

    let many = dir.path().join("many.csv");
    let recs: Vec<_> = (0..5).map(sample_record).collect();
    write_metrics_csv(&recs, &many).unwrap();
    assert_eq!(read_metrics_csv(&many).unwrap(), recs);
}
