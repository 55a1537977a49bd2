//! Embeds the security chain on the ten-node network, then doubles the
//! source rate and re-embeds from the previous configuration.

use tembed::catalog::{illustrative_network, security_chain};
use tembed::heuristic::{embed, HeuristicParams};
use tembed::model::{default_weights, score, ComponentId, NodeId, Service, Source, SystemConfiguration};

fn show(cfg: &SystemConfiguration) {
    for (name, state) in &cfg.services {
        for inst in state.overlay.instances() {
            println!(
                "  {name}: {} on node {} (in {:?}, cpu {:.1})",
                state.template.component(inst.component).name,
                cfg.substrate.node(inst.node).name,
                inst.in_rates,
                inst.cpu_load
            );
        }
    }
}

fn main() -> tembed::Result<()> {
    let net = illustrative_network();
    let params = HeuristicParams::default();
    let service =
        |rate| Service::new(security_chain(), vec![Source { node: NodeId(0), component: ComponentId(0), rate }]);

    let first = [service(45.0)];
    let w = default_weights(&net, &first)?;
    let cfg = embed(&SystemConfiguration::empty(net.clone()), &first, &params)?;
    println!("rate 45: {:?}", score(&cfg, None, w));
    show(&cfg);

    let second = [service(90.0)];
    let next = embed(&cfg, &second, &params)?;
    println!("rate 90: {:?}", score(&next, Some(&cfg), default_weights(&net, &second)?));
    show(&next);
    Ok(())
}
