//! Solves exported programs with HiGHS through its Python bindings and
//! imports the result. Skipped when `highspy` is not installed.

use std::path::Path;
use std::process::Command;

use tembed::milp::{build_model, emit_lp, import_solution};
use tembed::model::{
    validate_configuration, Component, NodeId, ResourceFunction, Service, Source, SubstrateNetwork, Template, Weights,
};

const SOLVE: &str = r#"
import sys, highspy
h = highspy.Highs()
h.setOptionValue("output_flag", False)
h.setOptionValue("mip_rel_gap", 0.0)
h.setOptionValue("time_limit", 60.0)
h.readModel(sys.argv[1])
h.run()
print(h.modelStatusToString(h.getModelStatus()))
h.writeSolution(sys.argv[2], 0)
"#;

fn have_highspy() -> bool {
    Command::new("python3").args(["-c", "import highspy"]).output().is_ok_and(|o| o.status.success())
}

fn solve(lp: &Path, sol: &Path) -> String {
    let out = Command::new("python3").arg("-c").arg(SOLVE).arg(lp).arg(sol).output().expect("python3 runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

/// A source of rate 4 at n0 feeding a sink with CPU 1 + input. n0 has no
/// CPU and n1 only 4, so the sink belongs on n2, reached directly (delay 5)
/// or through n1 (delay 2). `direct_only` drops the n1 detour.
fn triangle(direct_only: bool) -> (SubstrateNetwork, Service) {
    let mut net = SubstrateNetwork::new();
    let a = net.add_node("n0", 0.0, 10.0).unwrap();
    let b = net.add_node("n1", 4.0, 10.0).unwrap();
    let c = net.add_node("n2", 10.0, 10.0).unwrap();
    net.add_link(a, c, 10.0, 5.0).unwrap();
    if !direct_only {
        net.add_link(a, b, 10.0, 1.0).unwrap();
        net.add_link(b, c, 10.0, 1.0).unwrap();
    }
    let mut t = Template::new("sink");
    let s = t.add_component(Component::source("S"));
    let sink = t.add_component(Component::processing(
        "A",
        ResourceFunction::affine(1.0, &[1.0]),
        ResourceFunction::zero(1),
        vec![],
    ));
    t.connect(s, 0, sink, 0);
    (net, Service::new(t, vec![Source { node: a, component: s, rate: 4.0 }]))
}

fn round_trip(direct_only: bool, expected: f64) {
    let (net, svc) = triangle(direct_only);
    let model = build_model(&net, &[svc], None, Weights { m1: 1e6, m2: 100.0 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("model.lp");
    let sol = dir.path().join("model.sol");
    std::fs::write(&lp, emit_lp(&model)).unwrap();
    assert_eq!(solve(&lp, &sol), "Optimal");
    let imported = import_solution(&model, &std::fs::read_to_string(&sol).unwrap()).unwrap();
    assert!((imported.model_objective - expected).abs() < 1e-6, "model objective {}", imported.model_objective);
    assert!((imported.score.objective - expected).abs() < 1e-6, "score {}", imported.score.objective);
    if let Some(claimed) = imported.claimed_objective {
        assert!((claimed - expected).abs() < 1e-6);
    }
    assert!(validate_configuration(&imported.config).is_empty());
    assert!(imported.config.services["sink"].overlay.find(tembed::model::ComponentId(1), NodeId(2)).is_some());
}

#[test]
fn highs_solves_the_detour_instance() {
    if !have_highspy() {
        eprintln!("highspy not installed, skipping");
        return;
    }
    // 100 * delay 2 + cpu 5 + rate 4 on two links
    round_trip(false, 213.0);
}

#[test]
fn highs_solves_the_direct_instance() {
    if !have_highspy() {
        eprintln!("highspy not installed, skipping");
        return;
    }
    // 100 * delay 5 + cpu 5 + rate 4 on one link
    round_trip(true, 509.0);
}
