//! Times the heuristic on generated substrates of growing size.

use std::time::Instant;

use tembed::catalog::video_cdn;
use tembed::heuristic::{embed, HeuristicParams};
use tembed::model::{ComponentId, NodeId, Service, Source, SystemConfiguration};
use tembed::scenario::generate_substrate;

fn main() -> tembed::Result<()> {
    println!("nodes  links  sources  instances  violations  seconds");
    for n in [100, 250, 500, 1000, 2000] {
        let net = generate_substrate(n, 2.53, 5)?;
        let sources = (0..10)
            .map(|i| Source { node: NodeId(i * n / 10), component: ComponentId(0), rate: 5.0 + i as f64 })
            .collect();
        let services = [Service::new(video_cdn("cdn"), sources)];
        let start = Instant::now();
        let cfg = embed(&SystemConfiguration::empty(net.clone()), &services, &HeuristicParams::default())?;
        let secs = start.elapsed().as_secs_f64();
        let violations = tembed::model::count_violations(&cfg).n_violations;
        println!(
            "{n:>5}  {:>5}  {:>7}  {:>9}  {violations:>10}  {secs:.4}",
            net.link_count(),
            10,
            cfg.instance_count()
        );
    }
    Ok(())
}
