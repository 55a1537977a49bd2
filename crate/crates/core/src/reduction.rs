//! Set Covering instances and their translation into embedding instances.
//!
//! The embedding instance has a zero-capacity node `s_i` per element, a node
//! `a_j` per subset with room for exactly one `A` instance, and a node `b`
//! whose CPU fits `B` only while at most `k` `A` instances feed it. Every
//! element node emits one unit of traffic that must reach an `A` over a
//! membership link, so the instance is solvable without violations exactly
//! when `k` subsets cover the universe.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    Component, InputTerm, NodeId, PiecewiseTerm, ResourceFunction, Service, Source, SubstrateNetwork, Template,
};

/// Largest family [`brute_force_set_cover`] accepts.
pub const MAX_BRUTE_FORCE_SETS: usize = 20;

/// Elements are numbered `1..=universe`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetCoverInstance {
    pub universe: usize,
    pub sets: Vec<Vec<usize>>,
    pub k: usize,
}

impl SetCoverInstance {
    pub fn new(universe: usize, sets: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        let sc = SetCoverInstance { universe, sets, k };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Contract(format!("set cover instance: {m}")));
        if self.universe == 0 {
            return fail("empty universe".into());
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        let mut covered = vec![false; self.universe + 1];
        for (j, set) in self.sets.iter().enumerate() {
            for &e in set {
                if e == 0 || e > self.universe {
                    return fail(format!("subset {} has element {e} outside 1..={}", j + 1, self.universe));
                }
                covered[e] = true;
            }
        }
        if let Some(e) = (1..=self.universe).find(|&e| !covered[e]) {
            return fail(format!("element {e} is in no subset"));
        }
        Ok(())
    }

    fn masks(&self) -> Vec<u64> {
        self.sets.iter().map(|s| s.iter().fold(0u64, |m, &e| m | 1 << (e - 1))).collect()
    }

    /// Random instance with `universe <= max_universe`, at most `max_sets`
    /// subsets and `k <= max_k`. Elements no subset picked are added to a
    /// random subset so the family covers the universe.
    pub fn random(rng: &mut impl Rng, max_universe: usize, max_sets: usize, max_k: usize) -> Self {
        let universe = rng.gen_range(1..=max_universe);
        let n_sets = rng.gen_range(1..=max_sets);
        let mut sets: Vec<Vec<usize>> =
            (0..n_sets).map(|_| (1..=universe).filter(|_| rng.gen_bool(0.4)).collect()).collect();
        for e in 1..=universe {
            if !sets.iter().any(|s| s.contains(&e)) {
                let j = rng.gen_range(0..n_sets);
                sets[j].push(e);
                sets[j].sort_unstable();
            }
        }
        let k = rng.gen_range(1..=max_k);
        SetCoverInstance { universe, sets, k }
    }
}

/// Smallest number of subsets covering the universe, by trying every
/// subfamily in order of size.
pub fn brute_force_set_cover(sc: &SetCoverInstance) -> Result<usize> {
    sc.validate()?;
    if sc.sets.len() > MAX_BRUTE_FORCE_SETS {
        return Err(Error::SetCoverSize(sc.sets.len()));
    }
    let masks = sc.masks();
    let full = (1u64 << sc.universe) - 1;
    let mut best = usize::MAX;
    for pick in 0u32..(1 << masks.len()) {
        let size = pick.count_ones() as usize;
        if size >= best {
            continue;
        }
        let union = masks.iter().enumerate().filter(|(j, _)| pick >> j & 1 == 1).fold(0, |u, (_, m)| u | m);
        if union == full {
            best = size;
        }
    }
    Ok(best)
}

/// Size of the cover built by repeatedly taking the subset with the most
/// uncovered elements. Never below the optimum.
pub fn greedy_set_cover(sc: &SetCoverInstance) -> Result<usize> {
    sc.validate()?;
    let masks = sc.masks();
    let full = (1u64 << sc.universe) - 1;
    let mut covered = 0u64;
    let mut used = 0;
    while covered != full {
        let best = masks.iter().max_by_key(|&&m| (m & !covered).count_ones()).expect("validated family");
        covered |= best;
        used += 1;
    }
    Ok(used)
}

/// An embedding instance produced from a Set Covering input.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedInstance {
    pub substrate: SubstrateNetwork,
    pub template: Template,
    pub sources: Vec<Source>,
}

impl ReducedInstance {
    pub fn service(&self) -> Service {
        Service::new(self.template.clone(), self.sources.clone())
    }
}

/// Builds the embedding instance. `B`'s CPU is a step function, so the
/// result is for the heuristic and the oracle; the MILP rejects it.
pub fn to_embedding(sc: &SetCoverInstance) -> Result<ReducedInstance> {
    sc.validate()?;
    let mut net = SubstrateNetwork::new();
    let s: Vec<NodeId> = (1..=sc.universe).map(|i| net.add_node(format!("s{i}"), 0.0, 0.0)).collect::<Result<_>>()?;
    let a: Vec<NodeId> = (1..=sc.sets.len()).map(|j| net.add_node(format!("a{j}"), 0.0, 1.0)).collect::<Result<_>>()?;
    let b = net.add_node("b", 1.0, 0.0)?;
    for (i, &si) in s.iter().enumerate() {
        for (j, set) in sc.sets.iter().enumerate() {
            if set.contains(&(i + 1)) {
                net.add_link(si, a[j], 1.0, 0.0)?;
            }
        }
    }
    for &aj in &a {
        net.add_link(aj, b, 1.0, 0.0)?;
    }

    let mut t = Template::new("set-cover");
    let cs = t.add_component(Component::source("S"));
    let ca = t.add_component(Component::processing(
        "A",
        ResourceFunction::zero(1),
        ResourceFunction::constant(1.0, 1),
        vec![ResourceFunction::constant(1.0, 1)],
    ));
    let cpu_b = ResourceFunction {
        constant: 1.0,
        terms: vec![InputTerm::Piecewise(PiecewiseTerm::step(sc.k as f64, 0.0, 1.0))],
    };
    let cb = t.add_component(Component::processing("B", cpu_b, ResourceFunction::zero(1), vec![]));
    t.connect(cs, 0, ca, 0);
    t.connect(ca, 0, cb, 0);
    let sources = s.iter().map(|&node| Source { node, component: cs, rate: 1.0 }).collect();
    Ok(ReducedInstance { substrate: net, template: t, sources })
}
