use ndncan::ndn::{Data, Name, SigType};
use ndncan::trust::{sign_data, validate_data, KeyRecord, KeyStore, RejectStage, TrustSchema, TrustedKey};
use proptest::prelude::*;

fn n(s: &str) -> Name {
    s.parse().unwrap()
}

fn key(t: SigType, name: &str, seed: u8) -> KeyRecord {
    KeyRecord::from_seed(n(name), t, &[seed; 32], 1024).unwrap()
}

struct Setup {
    producer: KeyRecord,
    other: KeyRecord,
    store: KeyStore,
    schema: TrustSchema,
}

/// A consumer trusting `/left/KEY` for `/left/can` and `/other/KEY` for `/other`.
fn setup(t: SigType) -> Setup {
    let producer = key(t, "/left/KEY", 1);
    let other = key(t, "/other/KEY", 2);
    let mut store = KeyStore::new();
    store.trust(n("/left/KEY"), TrustedKey::from(&producer)).unwrap();
    store.trust(n("/other/KEY"), TrustedKey::from(&other)).unwrap();
    let mut schema = TrustSchema::new();
    schema.add_rule(n("/left/can"), n("/left/KEY")).unwrap();
    schema.add_rule(n("/other"), n("/other/KEY")).unwrap();
    Setup {
        producer,
        other,
        store,
        schema,
    }
}

fn signed(k: &KeyRecord, name: &str, content: &[u8]) -> Data {
    let d = Data::unsigned(n(name), content.to_vec(), 1000, k.sig_type(), k.key_name().clone());
    sign_data(d, k).unwrap()
}

const TYPES: [SigType; 3] = [SigType::HmacSha256, SigType::Ed25519, SigType::RsaSha256];

#[test]
fn genuine_data_is_accepted() {
    for t in TYPES {
        let s = setup(t);
        let d = signed(&s.producer, "/left/can/123/0", b"\x00\x00\x00\x01\x23\x01\xAA");
        assert!(validate_data(&d, &s.store, &s.schema).is_accept(), "{t}");
    }
}

#[test]
fn each_stage_rejects_its_forgery() {
    for t in TYPES {
        let s = setup(t);
        let stage = |d: &Data| validate_data(d, &s.store, &s.schema).stage();

        // Unknown signer claiming its own locator.
        let stranger = key(t, "/mallory/KEY", 9);
        assert_eq!(
            stage(&signed(&stranger, "/left/can/1/0", b"x")),
            Some(RejectStage::Type)
        );

        // Declared type disagrees with the registered key.
        let mut wrong_type = signed(&s.producer, "/left/can/1/0", b"x");
        wrong_type.sig_type = if t == SigType::Ed25519 {
            SigType::HmacSha256
        } else {
            SigType::Ed25519
        };
        assert_eq!(stage(&wrong_type), Some(RejectStage::Type));

        // A trusted key signing outside its namespace.
        assert_eq!(
            stage(&signed(&s.other, "/left/can/1/0", b"x")),
            Some(RejectStage::KeyName)
        );
        // No rule at all.
        assert_eq!(
            stage(&signed(&s.producer, "/right/can/1/0", b"x")),
            Some(RejectStage::KeyName)
        );

        // Someone else's signature bytes under the producer's locator.
        let mut forged = signed(&s.other, "/left/can/1/0", b"x");
        forged.key_locator = n("/left/KEY");
        assert_eq!(stage(&forged), Some(RejectStage::Signature));

        // Tampered content.
        let mut tampered = signed(&s.producer, "/left/can/1/0", b"x");
        tampered.content[0] ^= 0x80;
        assert_eq!(stage(&tampered), Some(RejectStage::Signature));
    }
}

#[test]
fn signing_refuses_mismatched_metadata() {
    let k = key(SigType::Ed25519, "/left/KEY", 1);
    let wrong_loc = Data::unsigned(n("/a"), vec![], 0, SigType::Ed25519, n("/b/KEY"));
    assert!(sign_data(wrong_loc, &k).is_err());
    let wrong_type = Data::unsigned(n("/a"), vec![], 0, SigType::HmacSha256, n("/left/KEY"));
    assert!(sign_data(wrong_type, &k).is_err());
}

#[test]
fn keys_are_deterministic_in_their_seed() {
    for t in TYPES {
        let a = signed(&key(t, "/left/KEY", 7), "/left/can/1/0", b"x");
        let b = signed(&key(t, "/left/KEY", 7), "/left/can/1/0", b"x");
        let c = signed(&key(t, "/left/KEY", 8), "/left/can/1/0", b"x");
        assert_eq!(a.sig_value, b.sig_value, "{t}");
        assert_ne!(a.sig_value, c.sig_value, "{t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn any_single_change_to_signed_fields_is_caught(
        ti in 0..2usize,
        content in prop::collection::vec(any::<u8>(), 1..16),
        which in 0..4usize,
        at in any::<usize>(),
        bit in 0..8u8,
    ) {
        let t = [SigType::HmacSha256, SigType::Ed25519][ti];
        let s = setup(t);
        let mut d = signed(&s.producer, "/left/can/1/0", &content);
        match which {
            0 => { let i = at % d.content.len(); d.content[i] ^= 1 << bit; }
            1 => d.freshness_ms ^= 1 << bit,
            2 => d.name = d.name.child(vec![bit]),
            _ => { let i = at % d.sig_value.len(); d.sig_value[i] ^= 1 << bit; }
        }
        prop_assert_eq!(validate_data(&d, &s.store, &s.schema).stage(), Some(RejectStage::Signature));
    }
}
