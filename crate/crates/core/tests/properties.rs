//! Property tests across modules.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tembed::catalog::{random_instance, RandomInstanceParams};
use tembed::heuristic::{embed, HeuristicParams};
use tembed::io::{
    configuration_to_json, network_to_json, parse_configuration, parse_network, parse_template, template_to_json,
};
use tembed::milp::{assignment_from_config, build_model, emit_lp};
use tembed::model::{
    default_weights, score, InputTerm, Piece, PiecewiseTerm, ResourceFunction, Service, SystemConfiguration,
};
use tembed::oracle::{brute_force_embed, OracleLimits};
use tembed::reduction::{brute_force_set_cover, greedy_set_cover, to_embedding, SetCoverInstance};
use tembed::scenario::{generate_substrate, run_scenario_with_configs, Algorithm, Event};

fn instance(seed: u64, params: &RandomInstanceParams) -> (tembed::model::SubstrateNetwork, Service) {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), params)
}

/// Non-decreasing piecewise term vanishing at zero, built from segment lengths,
/// slopes and upward jumps.
fn piecewise() -> impl Strategy<Value = PiecewiseTerm> {
    prop::collection::vec((0.5..5.0f64, 0.0..3.0f64, 0.0..2.0f64), 1..4).prop_map(|segs| {
        let mut pieces = Vec::new();
        let (mut x, mut y) = (0.0, 0.0);
        for (i, &(len, slope, jump)) in segs.iter().enumerate() {
            let last = i + 1 == segs.len();
            let y0 = y + if i == 0 { 0.0 } else { jump };
            pieces.push(Piece { upto: (!last).then_some(x + len), intercept: y0 - slope * x, slope });
            x += len;
            y = y0 + slope * len;
        }
        PiecewiseTerm { pieces }
    })
}

fn resource_function() -> impl Strategy<Value = ResourceFunction> {
    let term = prop_oneof![(0.0..3.0f64).prop_map(InputTerm::Linear), piecewise().prop_map(InputTerm::Piecewise)];
    (0.0..4.0f64, prop::collection::vec(term, 1..3)).prop_map(|(constant, terms)| ResourceFunction { constant, terms })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn functions_are_monotone_and_invertible(
        f in resource_function(),
        base in prop::collection::vec(0.0..10.0f64, 2),
        extra in 0.0..10.0f64,
        budget in 0.0..60.0f64,
    ) {
        prop_assert!(f.check(f.inputs()).is_ok());
        let rates = &base[..f.inputs()];
        let lo = f.eval(rates);
        prop_assert!(lo >= 0.0);
        let mut more = rates.to_vec();
        more[0] += extra;
        prop_assert!(f.eval(&more) >= lo - 1e-12);

        let d = f.max_increase(rates, 0, budget);
        prop_assert!(d >= 0.0);
        if d.is_finite() && d > 0.0 {
            let mut at = rates.to_vec();
            at[0] += d;
            prop_assert!(f.eval(&at) <= budget + 1e-6, "f = {} over budget {}", f.eval(&at), budget);
        }
    }

    #[test]
    fn program_and_score_agree_on_heuristic_outputs(seed in any::<u64>(), cap in 0u32..=12) {
        let params = RandomInstanceParams { max_nodes: 4, max_node_capacity: cap, ..RandomInstanceParams::default() };
        let (net, svc) = instance(seed, &params);
        let services = [svc];
        let w = default_weights(&net, &services).unwrap();
        let cfg = embed(&SystemConfiguration::empty(net.clone()), &services, &HeuristicParams::default()).unwrap();
        let model = build_model(&net, &services, None, w).unwrap();
        let values = assignment_from_config(&model, &cfg).unwrap();
        let broken = model.violations(&values);
        prop_assert!(broken.is_empty(), "{:?}", broken);
        let s = score(&cfg, None, w);
        prop_assert!((model.objective_value(&values) - s.objective).abs() <= 1e-9 * (1.0 + s.objective));
        prop_assert_eq!(emit_lp(&model), emit_lp(&build_model(&net, &services, None, w).unwrap()));
    }

    #[test]
    fn json_round_trips(seed in any::<u64>()) {
        let (net, svc) = instance(seed, &RandomInstanceParams::default());
        prop_assert_eq!(&parse_network(&network_to_json(&net)).unwrap(), &net);
        prop_assert_eq!(&parse_template(&template_to_json(&svc.template)).unwrap(), &svc.template);
        let cfg = embed(&SystemConfiguration::empty(net.clone()), &[svc], &HeuristicParams::default()).unwrap();
        let back = parse_configuration(&configuration_to_json(&cfg, None), &net).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn generated_substrates_are_connected_and_reciprocal(n in 2usize..60, degree in 1.0..6.0f64, seed in any::<u64>()) {
        let net = generate_substrate(n, degree, seed).unwrap();
        prop_assert_eq!(net.node_count(), n);
        prop_assert!(net.is_strongly_connected());
        for l in net.links() {
            prop_assert!(net.find_link(l.dst, l.src).is_some());
        }
        prop_assert_eq!(generate_substrate(n, degree, seed).unwrap(), net);
    }

    #[test]
    fn untouched_services_keep_their_overlays(seed in any::<u64>(), rate in 1u32..=30) {
        let net = generate_substrate(12, 3.0, seed).unwrap();
        let mut a = tembed::catalog::video_cdn("a");
        a.name = "a".into();
        let b = tembed::catalog::video_cdn("b");
        let src = |node: usize, rate: f64| tembed::model::Source {
            node: tembed::model::NodeId(node),
            component: tembed::model::ComponentId(0),
            rate,
        };
        let events = vec![
            Event::AddService { service: "a".into(), template: "a".into(), sources: vec![src(0, 5.0)] },
            Event::AddService { service: "b".into(), template: "b".into(), sources: vec![src(6, 5.0)] },
            Event::ChangeRate {
                service: "b".into(),
                node: tembed::model::NodeId(6),
                component: tembed::model::ComponentId(0),
                rate: rate as f64,
            },
        ];
        let algo = Algorithm::Heuristic(HeuristicParams::default());
        let (_, cfgs) = run_scenario_with_configs(&net, &[a, b], &events, &algo).unwrap();
        prop_assert_eq!(&cfgs[2].services["a"].overlay, &cfgs[1].services["a"].overlay);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    /// Whenever the heuristic's routing lies inside the oracle's search
    /// space, the oracle is at least as good. With at most four nodes five
    /// paths per pair cover every simple path, so only the rate quantum can
    /// exclude a heuristic configuration.
    #[test]
    fn oracle_never_loses_to_the_heuristic(seed in any::<u64>()) {
        let params = RandomInstanceParams { max_nodes: 4, max_components: 3, ..RandomInstanceParams::default() };
        let (net, svc) = instance(seed, &params);
        let services = [svc];
        let w = default_weights(&net, &services).unwrap();
        let h = embed(&SystemConfiguration::empty(net.clone()), &services, &HeuristicParams::default()).unwrap();
        let limits = OracleLimits { rate_granularity: 0.5, paths_per_pair: 5, ..OracleLimits::default() };
        let on_grid = |r: f64| ((r / limits.rate_granularity).round() * limits.rate_granularity - r).abs() < 1e-9;
        let representable = h.services.values().flat_map(|s| s.overlay.edges()).all(|e| {
            on_grid(e.rate) && e.routing.used_links().all(|(_, r)| on_grid(r))
        });
        prop_assume!(representable);
        let hs = score(&h, None, w);
        let o = brute_force_embed(&net, &services, None, &limits).unwrap();
        prop_assert!(o.score.lex_cmp(&hs).is_le(), "oracle {:?} heuristic {:?}", o.score, hs);
        prop_assert!(o.score.objective <= hs.objective * (1.0 + 1e-12));
    }

    #[test]
    fn reduction_matches_set_cover(seed in any::<u64>()) {
        let sc = SetCoverInstance::random(&mut ChaCha8Rng::seed_from_u64(seed), 5, 4, 3);
        let exact = brute_force_set_cover(&sc).unwrap();
        prop_assert!(greedy_set_cover(&sc).unwrap() >= exact);
        let r = to_embedding(&sc).unwrap();
        let sol = brute_force_embed(&r.substrate, &[r.service()], None, &OracleLimits::default()).unwrap();
        prop_assert_eq!(sol.score.n_violations == 0, exact <= sc.k);
    }
}
