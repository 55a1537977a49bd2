//! Runs a demand ramp for the video service on a generated substrate and
//! writes per-event metrics to `video_cdn.csv` (or the path given).

use tembed::catalog::video_cdn;
use tembed::heuristic::HeuristicParams;
use tembed::model::{ComponentId, NodeId, Source};
use tembed::scenario::{generate_substrate, run_scenario, write_metrics_csv, Algorithm, Event};

fn main() -> tembed::Result<()> {
    let net = generate_substrate(20, 3.0, 4)?;
    let at = |node: usize, rate: f64| Source { node: NodeId(node), component: ComponentId(0), rate };
    let mut events =
        vec![Event::AddService { service: "cdn".into(), template: "cdn".into(), sources: vec![at(0, 20.0)] }];
    for node in [5, 10, 15] {
        events.push(Event::AddSource { service: "cdn".into(), source: at(node, 20.0) });
    }
    for rate in [40.0, 80.0, 40.0, 10.0] {
        for node in [0, 5, 10, 15] {
            events.push(Event::ChangeRate {
                service: "cdn".into(),
                node: NodeId(node),
                component: ComponentId(0),
                rate,
            });
        }
    }
    let records = run_scenario(&net, &[video_cdn("cdn")], &events, &Algorithm::Heuristic(HeuristicParams::default()))?;
    println!("event  kind                demand  cpu     instances  churn  violations");
    for r in &records {
        println!(
            "{:>5}  {:<18}  {:>6.1}  {:>6.1}  {:>9}  {:>5}  {:>10}",
            r.event, r.kind, r.demand, r.allocated_cpu, r.instances, r.churn, r.violations
        );
    }
    let path = std::env::args().nth(1).unwrap_or_else(|| "video_cdn.csv".into());
    write_metrics_csv(&records, std::path::Path::new(&path))?;
    println!("wrote {path}");
    Ok(())
}
