//! Compares heuristic and exhaustive embeddings on random small instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tembed::catalog::{random_instance, RandomInstanceParams};
use tembed::heuristic::{embed, HeuristicParams};
use tembed::model::{default_weights, score, SystemConfiguration};
use tembed::oracle::{brute_force_embed, OracleLimits};

fn main() -> tembed::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = RandomInstanceParams::default();
    println!("case  h.viol  o.viol  h.obj      o.obj      ratio");
    for case in 0..20 {
        let (net, svc) = random_instance(&mut rng, &params);
        let services = [svc];
        let w = default_weights(&net, &services)?;
        let h = embed(&SystemConfiguration::empty(net.clone()), &services, &HeuristicParams::default())?;
        let hs = score(&h, None, w);
        let o = brute_force_embed(&net, &services, None, &OracleLimits::default())?;
        let ratio = if o.score.objective > 0.0 { hs.objective / o.score.objective } else { 1.0 };
        println!(
            "{case:>4}  {:>6}  {:>6}  {:<9.1}  {:<9.1}  {ratio:.3}",
            hs.n_violations, o.score.n_violations, hs.objective, o.score.objective
        );
    }
    Ok(())
}
