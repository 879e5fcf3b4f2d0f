//! Packet generators shared by the codec property tests and the acceptance run.
#![allow(dead_code)]

use ndncan::ndn::{Data, Interest, Nack, NackReason, Name, Nonce, Packet, SigType};
use proptest::prelude::*;

pub fn name() -> impl Strategy<Value = Name> {
    prop::collection::vec(prop::collection::vec(any::<u8>(), 0..12), 1..6).prop_map(Name::from_components)
}

pub fn sig_type() -> impl Strategy<Value = SigType> {
    prop_oneof![
        Just(SigType::Unsigned),
        Just(SigType::HmacSha256),
        Just(SigType::Ed25519),
        Just(SigType::RsaSha256),
    ]
}

pub fn data() -> impl Strategy<Value = Data> {
    (
        name(),
        any::<u64>(),
        prop::collection::vec(any::<u8>(), 0..300),
        sig_type(),
        prop::collection::vec(prop::collection::vec(any::<u8>(), 0..8), 0..4),
        any::<u64>(),
    )
        .prop_map(|(name, freshness_ms, content, sig_type, loc, fill)| {
            let len = match sig_type {
                SigType::Unsigned => 0,
                SigType::HmacSha256 => 32,
                SigType::Ed25519 => 64,
                SigType::RsaSha256 => [128, 256][fill as usize % 2],
            };
            let sig_value = (0..len).map(|i| (fill >> (i % 8)) as u8 ^ i as u8).collect();
            Data {
                name,
                freshness_ms,
                content,
                sig_type,
                key_locator: Name::from_components(loc),
                sig_value,
            }
        })
}

pub fn packet() -> impl Strategy<Value = Packet> {
    let reason = prop_oneof![
        Just(NackReason::Congestion),
        Just(NackReason::NoRoute),
        Just(NackReason::RateLimit)
    ];
    prop_oneof![
        (name(), any::<[u8; 4]>(), 1..u64::MAX)
            .prop_map(|(n, nonce, l)| Packet::Interest(Interest::new(n, Nonce(nonce)).with_lifetime(l))),
        data().prop_map(Packet::Data),
        (name(), any::<[u8; 4]>(), reason).prop_map(|(name, nonce, reason)| Packet::Nack(Nack {
            name,
            nonce: Nonce(nonce),
            reason
        })),
    ]
}

#[derive(Clone, Debug)]
pub enum Mutation {
    Truncate(usize),
    Flip(usize, u8),
    Insert(usize, u8),
    Delete(usize),
}

pub fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        any::<usize>().prop_map(Mutation::Truncate),
        (any::<usize>(), 1..=255u8).prop_map(|(i, x)| Mutation::Flip(i, x)),
        (any::<usize>(), any::<u8>()).prop_map(|(i, b)| Mutation::Insert(i, b)),
        any::<usize>().prop_map(Mutation::Delete),
    ]
}

pub fn apply(mut wire: Vec<u8>, m: &Mutation) -> Vec<u8> {
    let len = wire.len();
    match *m {
        Mutation::Truncate(i) => wire.truncate(i % len),
        Mutation::Flip(i, x) => wire[i % len] ^= x,
        Mutation::Insert(i, b) => wire.insert(i % (len + 1), b),
        Mutation::Delete(i) => {
            wire.remove(i % len);
        }
    }
    wire
}
