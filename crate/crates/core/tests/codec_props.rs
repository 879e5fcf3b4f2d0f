mod common;

use common::{apply, mutation, packet};
use ndncan::can::CanFrame;
use ndncan::gateway::{decode_frame, encode_frame};
use ndncan::ndn::decode_packet;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12_000))]

    #[test]
    fn packets_round_trip(p in packet()) {
        let wire = p.encode();
        prop_assert_eq!(decode_packet(&wire).unwrap(), p);
    }

    #[test]
    fn mutated_packets_never_panic(p in packet(), ms in prop::collection::vec(mutation(), 1..4)) {
        let wire = ms.iter().fold(p.encode(), |w, m| if w.is_empty() { w } else { apply(w, m) });
        // Anything accepted must be a stable packet.
        if let Ok(q) = decode_packet(&wire) {
            prop_assert_eq!(decode_packet(&q.encode()).unwrap(), q);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn every_strict_prefix_is_rejected(p in packet()) {
        let wire = p.encode();
        for cut in 0..wire.len() {
            prop_assert!(decode_packet(&wire[..cut]).is_err());
        }
    }

    #[test]
    fn can_content_round_trips(ext in any::<bool>(), raw in any::<u32>(), payload in prop::collection::vec(any::<u8>(), 0..=8)) {
        let aid = if ext { raw & 0x1FFF_FFFF } else { raw & 0x7FF };
        let f = CanFrame::new(aid, ext, &payload).unwrap();
        let wire = encode_frame(&f);
        prop_assert_eq!(wire.len(), 6 + payload.len());
        let g = decode_frame(&wire).unwrap();
        prop_assert!(g.same_content(&f));
    }

    #[test]
    fn can_content_garbage_is_an_error_not_a_panic(bytes in prop::collection::vec(any::<u8>(), 0..20)) {
        if let Ok(f) = decode_frame(&bytes) {
            prop_assert_eq!(encode_frame(&f), bytes);
        }
    }
}
