// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Exact two-decimal currency amounts.
//!
//! Amounts are written `(0|[1-9][0-9]*).[0-9]{2}` and range over
//! `0.00..=4294967295.99`.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative amount held as whole cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Amount(u64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AmountError {
    #[error("malformed amount {0:?}")]
    Malformed(String),
    #[error("amount out of range")]
    OutOfRange,
}

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const MAX: Amount = Amount(4_294_967_295 * 100 + 99);

    pub fn from_cents(cents: u64) -> Result<Self, AmountError> {
        if cents > Self::MAX.0 {
            Err(AmountError::OutOfRange)
        } else {
            Ok(Amount(cents))
        }
    }

    /// A whole number of currency units; always in range.
    pub const fn from_whole(units: u32) -> Self {
        Amount(units as u64 * 100)
    }

    pub fn cents(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, other: Amount) -> Option<Amount> {
        self.0.checked_add(other.0).and_then(|c| Amount::from_cents(c).ok())
    }

    pub fn checked_sub(self, other: Amount) -> Option<Amount> {
        self.0.checked_sub(other.0).map(Amount)
    }
}

impl FromStr for Amount {
    type Err = AmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || AmountError::Malformed(s.into());
        let (whole, frac) = s.split_once('.').ok_or_else(malformed)?;
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(whole) || frac.len() != 2 || !digits(frac) {
            return Err(malformed());
        }
        if whole.len() > 1 && whole.starts_with('0') {
            return Err(malformed());
        }
        if whole.len() > 10 {
            return Err(AmountError::OutOfRange);
        }
        let whole: u64 = whole.parse().map_err(|_| malformed())?;
        let frac: u64 = frac.parse().map_err(|_| malformed())?;
        Amount::from_cents(whole * 100 + frac)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parses_canonical_forms() {
        assert_eq!("0.00".parse::<Amount>().unwrap().cents(), 0);
        assert_eq!("100.00".parse::<Amount>().unwrap().cents(), 10_000);
        assert_eq!("4294967295.99".parse::<Amount>().unwrap(), Amount::MAX);
        assert_eq!("12.05".parse::<Amount>().unwrap().to_string(), "12.05");
    }

    #[test]
    fn rejects_malformed_and_out_of_range() {
        for bad in ["", "1", "1.0", "1.000", "01.00", "-1.00", "+1.00", "1,00", ".50", "1.5a", " 1.00"] {
            assert!(matches!(bad.parse::<Amount>(), Err(AmountError::Malformed(_))), "{bad}");
        }
        assert_eq!("4294967296.00".parse::<Amount>(), Err(AmountError::OutOfRange));
        assert_eq!("99999999999.00".parse::<Amount>(), Err(AmountError::OutOfRange));
    }

    #[test]
    fn arithmetic_respects_bounds() {
        let max = Amount::MAX;
        assert_eq!(max.checked_add(Amount::from_cents(1).unwrap()), None);
        assert_eq!(Amount::ZERO.checked_sub(Amount::from_cents(1).unwrap()), None);
    }
}
