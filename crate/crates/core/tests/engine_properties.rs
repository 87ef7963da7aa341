use std::collections::BTreeSet;

use oppnet_core::engine::{audit, expected_deliveries, run, Scenario, TransferModel};
use oppnet_core::model::{Addressing, Capacity, Contact, InterestId, Message, MessageId, NodeId, SimTime, SECONDS_PER_DAY};
use oppnet_core::protocols::{Protocol, ProtocolKind};
use oppnet_core::report::summarize;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn contact(a: u32, b: u32, start: f64, end: f64) -> Contact {
    Contact::new(NodeId(a), NodeId(b), SimTime::from_secs(start), SimTime::from_secs(end)).unwrap()
}

fn random_trace(rng: &mut ChaCha8Rng, nodes: u32, horizon: f64, per_pair: u32) -> Vec<Contact> {
    let mut trace = Vec::new();
    for a in 0..nodes {
        for b in a + 1..nodes {
            let mut t = 0.0;
            for _ in 0..rng.random_range(0..=per_pair) {
                let start = t + rng.random_range(1.0..horizon / 4.0);
                let end = (start + rng.random_range(1.0..3600.0)).min(horizon);
                if start >= end {
                    break;
                }
                trace.push(contact(a, b, start.round(), end.round().max(start.round() + 1.0).min(horizon)));
                t = end + 1.0;
            }
        }
    }
    trace.retain(|c| c.end().secs() <= horizon);
    trace
}

fn random_scenario(seed: u64, kind: ProtocolKind) -> (Scenario, Vec<Contact>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.random_range(3..=9u32);
    let horizon = 2.0 * SECONDS_PER_DAY;
    let mut s = Scenario::new(nodes as usize, Protocol::with_defaults(kind), horizon);
    s.buffer = Capacity::Limited(rng.random_range(50_000..=1_000_000));
    if rng.random_bool(0.5) {
        s.transfer = TransferModel::Bandwidth {
            bytes_per_sec: rng.random_range(100.0..20_000.0),
        };
    }
    for set in s.interests.iter_mut() {
        for x in 0..3 {
            if rng.random_bool(0.4) {
                set.insert(InterestId(x));
            }
        }
    }
    for id in 0..rng.random_range(1..=15u64) {
        let source = rng.random_range(0..nodes);
        let addressing = if kind.is_receiver_driven() {
            Addressing::ContentType(InterestId(rng.random_range(0..3)))
        } else {
            Addressing::Destination(NodeId((source + rng.random_range(1..nodes)) % nodes))
        };
        s.messages.push(Message {
            id: MessageId(id),
            source: NodeId(source),
            addressing,
            size: rng.random_range(1_000..=200_000),
            created_at: SimTime::from_secs(rng.random_range(0.0..horizon / 2.0).round()),
            ttl: rng.random_range(600.0..horizon),
        });
    }
    let trace = random_trace(&mut rng, nodes, horizon, 5);
    (s, trace)
}

fn any_kind() -> impl Strategy<Value = ProtocolKind> {
    prop::sample::select(ProtocolKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_hop_is_causal(seed in any::<u64>(), kind in any_kind()) {
        let (s, trace) = random_scenario(seed, kind);
        let r = run(&s, &trace, seed).unwrap();
        prop_assert_eq!(audit(&s, &trace, &r), Ok(()));
        prop_assert!(r.deliveries.len() as u64 <= expected_deliveries(&s));
    }

    #[test]
    fn reruns_are_identical(seed in any::<u64>(), kind in any_kind()) {
        let (s, trace) = random_scenario(seed, kind);
        prop_assert_eq!(run(&s, &trace, seed).unwrap(), run(&s, &trace, seed).unwrap());
    }

    #[test]
    fn cost_times_deliveries_is_forwardings(seed in any::<u64>(), kind in any_kind()) {
        let (s, trace) = random_scenario(seed, kind);
        let r = run(&s, &trace, seed).unwrap();
        let expected = expected_deliveries(&s);
        prop_assume!(expected > 0);
        let summary = summarize(std::slice::from_ref(&r), expected).unwrap();
        match summary.cost {
            Some(cost) => prop_assert_eq!((cost.mean * r.deliveries.len() as f64).round() as u64, r.forwardings),
            None => prop_assert!(r.deliveries.is_empty()),
        }
    }

    #[test]
    fn spray_copies_are_conserved(seed in any::<u64>()) {
        let (mut s, trace) = random_scenario(seed, ProtocolKind::SprayAndWait);
        s.buffer = Capacity::Unlimited;
        s.transfer = TransferModel::Instantaneous;
        for m in &mut s.messages {
            m.ttl = 10.0 * SECONDS_PER_DAY;
        }
        let r = run(&s, &trace, seed).unwrap();
        prop_assert_eq!(r.drops.eviction + r.drops.ttl + r.drops.no_fit, 0);
        for m in &s.messages {
            prop_assert_eq!(r.peak_copies.get(&m.id).copied(), Some(10));
            prop_assert_eq!(r.final_copies.get(&m.id).copied(), Some(10));
        }
    }
}

#[test]
fn flooding_delivers_everything() {
    // every node wants every type; everyone meets everyone hourly
    let nodes = 8u32;
    let mut s = Scenario::new(nodes as usize, Protocol::Scorp, SECONDS_PER_DAY);
    s.buffer = Capacity::Unlimited;
    let all: BTreeSet<InterestId> = (0..4).map(InterestId).collect();
    s.interests = vec![all; nodes as usize];
    s.messages = (0..4)
        .map(|x| Message {
            id: MessageId(u64::from(x)),
            source: NodeId(x % nodes),
            addressing: Addressing::ContentType(InterestId(x)),
            size: 10_000,
            created_at: SimTime::from_secs(60.0),
            ttl: f64::MAX,
        })
        .collect();
    let mut trace = Vec::new();
    for hour in 0..23 {
        let base = f64::from(hour) * 3600.0 + 600.0;
        for a in 0..nodes {
            for b in a + 1..nodes {
                trace.push(contact(a, b, base, base + 300.0));
            }
        }
    }
    let r = run(&s, &trace, 0).unwrap();
    assert_eq!(expected_deliveries(&s), 4 * 7);
    assert_eq!(r.deliveries.len(), 28);
    assert_eq!(audit(&s, &trace, &r), Ok(()));
}

#[test]
fn bandwidth_transfers_take_time() {
    let mut s = Scenario::new(2, Protocol::with_defaults(ProtocolKind::SprayAndWait), SECONDS_PER_DAY);
    s.transfer = TransferModel::Bandwidth { bytes_per_sec: 100.0 };
    s.messages = vec![Message {
        id: MessageId(0),
        source: NodeId(0),
        addressing: Addressing::Destination(NodeId(1)),
        size: 1_000,
        created_at: SimTime::from_secs(0.0),
        ttl: SECONDS_PER_DAY,
    }];
    let r = run(&s, &[contact(0, 1, 100.0, 200.0)], 0).unwrap();
    assert_eq!(r.deliveries.len(), 1);
    assert_eq!(r.deliveries[0].delivered_at.secs(), 110.0);
}
