//! Property tests over randomly generated layered nets.

use std::collections::BTreeMap;

use num_traits::Zero;
use pfnet::bags::verify_witnesses;
use pfnet::fixtures::{random_pi3, RandomNetOptions};
use pfnet::net::{enabled, fire, marking_literal, parse_marking, parse_net, serialize_net, Marking, NetFile};
use pfnet::normalizer::{normalizing_constant, steady_prob};
use pfnet::oracle::{enumerate_reachable, is_balanced, stationary_direct};
use pfnet::qualitative::{canonical_marking, dot, is_live, is_reachable};
use pfnet::rational::{q, Q};
use pfnet::stochastic::weight;
use pfnet::{Model, RateTable};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net_from(seed: u64, open: bool) -> NetFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_pi3(&mut rng, &RandomNetOptions { open, ..Default::default() })
}

/// A seeded random firing sequence of at most `len` steps.
fn walk(m: &Model, seed: u64, len: usize) -> Vec<Marking> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = m.m0.clone();
    let mut out = vec![cur.clone()];
    for _ in 0..len {
        let en: Vec<usize> = (0..m.net.transition_count()).filter(|&t| enabled(&m.net, &cur, t)).collect();
        if en.is_empty() {
            break;
        }
        cur = fire(&m.net, &cur, en[rng.random_range(0..en.len())]).unwrap();
        out.push(cur.clone());
    }
    out
}

/// Bounded closed instances small enough for exact global solves.
fn small_closed(seed: u64) -> Option<(Model, Vec<Marking>)> {
    let m = Model::new(&net_from(seed, false)).unwrap();
    let r = enumerate_reachable(&m.net, &m.m0, u64::MAX);
    (r.markings.len() <= 150).then_some((m, r.markings))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn firing_adds_the_incidence_column(seed in any::<u64>(), open in any::<bool>(), walk_seed in any::<u64>()) {
        let m = Model::new(&net_from(seed, open)).unwrap();
        let path = walk(&m, walk_seed, 30);
        for pair in path.windows(2) {
            let t = (0..m.net.transition_count())
                .find(|&t| enabled(&m.net, &pair[0], t) && fire(&m.net, &pair[0], t).unwrap() == pair[1])
                .unwrap();
            for (p, d) in m.net.delta(t).iter().enumerate() {
                prop_assert_eq!(pair[1].get(p) as i64, pair[0].get(p) as i64 + d);
            }
        }
    }

    #[test]
    fn enabledness_is_monotone(seed in any::<u64>(), extra in proptest::collection::vec(0u32..3, 12), walk_seed in any::<u64>()) {
        let m = Model::new(&net_from(seed, false)).unwrap();
        let base = walk(&m, walk_seed, 10).pop().unwrap();
        let bigger = Marking(base.0.iter().zip(&extra).map(|(a, b)| a + b).collect());
        for t in 0..m.net.transition_count() {
            if enabled(&m.net, &base, t) {
                prop_assert!(enabled(&m.net, &bigger, t));
            }
        }
    }

    #[test]
    fn text_format_round_trips(seed in any::<u64>(), open in any::<bool>()) {
        let f = net_from(seed, open);
        let text = serialize_net(&f);
        let back = parse_net(&text).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(serialize_net(&back), text);
        let lit = marking_literal(&f.net, &f.initial);
        let m = if lit.is_empty() { Marking::zero(f.net.place_count()) } else { parse_marking(&f.net, &lit).unwrap() };
        prop_assert_eq!(m, f.initial);
    }

    #[test]
    fn witnesses_and_flows_are_exact(seed in any::<u64>(), open in any::<bool>()) {
        let m = Model::new(&net_from(seed, open)).unwrap();
        prop_assert!(verify_witnesses(&m.net, &m.graph, &m.witnesses).is_ok());
        for v in &m.invariants().vectors {
            for t in 0..m.net.transition_count() {
                prop_assert_eq!(v.iter().zip(m.net.delta(t)).map(|(a, b)| a * b).sum::<i64>(), 0);
            }
        }
    }

    #[test]
    fn firing_preserves_liveness_and_invariants(seed in any::<u64>(), open in any::<bool>(), walk_seed in any::<u64>()) {
        let m = Model::new(&net_from(seed, open)).unwrap();
        let inv = m.invariants();
        for mk in walk(&m, walk_seed, 40) {
            prop_assert!(is_live(&m.structure, &mk).live);
            prop_assert!(inv.holds(&mk));
            prop_assert!(is_reachable(&m.structure, &m.m0, &mk).unwrap());
        }
    }

    #[test]
    fn canonical_markings_are_reachable(seed in any::<u64>(), open in any::<bool>(), walk_seed in any::<u64>()) {
        let m = Model::new(&net_from(seed, open)).unwrap();
        let inv = m.invariants();
        let top = if open { m.structure.n_layers() - 1 } else { m.structure.n_layers() };
        let mk = walk(&m, walk_seed, 20).pop().unwrap();
        for i in 0..=top {
            let c = canonical_marking(&m.structure, &mk, i).unwrap();
            for v in &inv.vectors {
                prop_assert_eq!(dot(v, &c), dot(v, &mk));
            }
            prop_assert!(is_reachable(&m.structure, &m.m0, &c).unwrap());
        }
    }

    #[test]
    fn search_stays_inside_characterization(seed in any::<u64>(), open in any::<bool>()) {
        let m = Model::new(&net_from(seed, open)).unwrap();
        let r = enumerate_reachable(&m.net, &m.m0, m.m0.norm() + 3);
        for mk in r.markings.iter().take(400) {
            prop_assert!(is_reachable(&m.structure, &m.m0, mk).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_rates_keeps_probabilities(seed in any::<u64>(), num in 1i64..20, den in 1i64..20) {
        let Some((m, states)) = small_closed(seed) else { return Ok(()) };
        let c = q(num, den);
        let scaled = m.with_rates(RateTable(m.rates.0.iter().map(|r| r * &c).collect())).unwrap();
        for mk in states.iter().take(20) {
            prop_assert_eq!(
                steady_prob(&m.structure, &m.net, &m.pf, &m.m0, mk).unwrap(),
                steady_prob(&scaled.structure, &scaled.net, &scaled.pf, &scaled.m0, mk).unwrap()
            );
        }
    }

    #[test]
    fn product_form_balances_the_generator(seed in any::<u64>()) {
        let Some((m, states)) = small_closed(seed) else { return Ok(()) };
        let z = normalizing_constant(&m.structure, &m.net, &m.pf, &m.m0).unwrap();
        let pi: BTreeMap<Marking, Q> = states.iter().map(|s| (s.clone(), weight(&m.pf, &s.0) / &z)).collect();
        prop_assert!(is_balanced(&m.net, &m.rates, &pi));
        prop_assert_eq!(pi.values().sum::<Q>(), q(1, 1));
        let direct = stationary_direct(&m.net, &m.rates, &states).unwrap();
        prop_assert!(is_balanced(&m.net, &m.rates, &direct));
        prop_assert_eq!(direct, pi);
    }

    #[test]
    fn weights_are_positive(seed in any::<u64>(), open in any::<bool>()) {
        let m = Model::new(&net_from(seed, open)).unwrap();
        prop_assert!(m.pf.mu.iter().all(|u| !u.is_zero() && *u > Q::zero()));
    }
}
