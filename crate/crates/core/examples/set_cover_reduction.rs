//! Turns a Set Covering instance into an embedding instance and checks that
//! the oracle finds a violation-free embedding exactly when a cover of the
//! allowed size exists.

use tembed::oracle::{brute_force_embed, OracleLimits};
use tembed::reduction::{brute_force_set_cover, to_embedding, SetCoverInstance};

fn main() -> tembed::Result<()> {
    let sets = vec![vec![1, 2], vec![2, 3], vec![3, 4], vec![1, 4]];
    for k in 1..=3 {
        let sc = SetCoverInstance::new(4, sets.clone(), k)?;
        let cover = brute_force_set_cover(&sc)?;
        let r = to_embedding(&sc)?;
        let sol = brute_force_embed(&r.substrate, &[r.service()], None, &OracleLimits::default())?;
        println!(
            "k = {k}: smallest cover {cover}, embedding violations {}, {} search nodes",
            sol.score.n_violations, sol.explored
        );
    }
    Ok(())
}
