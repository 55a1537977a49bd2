//! Writes the mixed-integer program for a small instance in LP format.
//! Pass a path to write a file, otherwise the program goes to stdout.
//! Solve it with any LP-format solver and load the result with
//! `tembed import-sol`.

use tembed::catalog::{illustrative_network, security_chain};
use tembed::milp::{build_model, emit_lp};
use tembed::model::{default_weights, ComponentId, NodeId, Service, Source};

fn main() -> tembed::Result<()> {
    let net = illustrative_network();
    let services =
        [Service::new(security_chain(), vec![Source { node: NodeId(0), component: ComponentId(0), rate: 45.0 }])];
    let weights = default_weights(&net, &services)?;
    let model = build_model(&net, &services, None, weights)?;
    eprintln!("{} variables, {} constraints, weights {weights:?}", model.var_count(), model.constraint_count());
    let lp = emit_lp(&model);
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(path, lp)?,
        None => print!("{lp}"),
    }
    Ok(())
}
