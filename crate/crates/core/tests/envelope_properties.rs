// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

use breakit_core::envelope::{open, open_with_key, seal, EnvelopeError, LogKey};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip(plain in prop::collection::vec(any::<u8>(), 0..512), salt in any::<[u8; 16]>(), nonce in any::<[u8; 12]>()) {
        let key = LogKey::derive(b"token", salt);
        let env = seal(&key, nonce, &plain);
        prop_assert_eq!(open_with_key(&key, &env).unwrap(), plain);
    }

    #[test]
    fn any_single_flip_is_detected(plain in prop::collection::vec(any::<u8>(), 0..128), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let key = LogKey::derive(b"token", [5; 16]);
        let mut env = seal(&key, [6; 12], &plain);
        let i = pos.index(env.len());
        env[i] ^= 1 << bit;
        // Header flips change the derived key, so go through the full path.
        prop_assert_eq!(open(b"token", &env).unwrap_err(), EnvelopeError::Integrity);
    }
}
