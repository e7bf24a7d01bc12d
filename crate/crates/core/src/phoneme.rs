//! Closed ARPAbet-style phoneme inventory.
//!
//! The inventory is a fixed, versioned table of the 39 stress-free ARPAbet
//! symbols. Every phoneme the engine handles is an index into this table,
//! so membership is checked once at parse time and never again.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Version tag of the shipped inventory table. Bump when symbols change.
pub const INVENTORY_VERSION: &str = "arpabet-39/1";

/// The inventory, in table order.
pub const INVENTORY: [&str; 39] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY", "F", "G", "HH",
    "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH",
    "UW", "V", "W", "Y", "Z", "ZH",
];

/// A phoneme from [`INVENTORY`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Phoneme(u8);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown phoneme symbol {0:?}")]
pub struct UnknownPhoneme(pub String);

impl Phoneme {
    pub fn from_index(index: usize) -> Option<Self> {
        (index < INVENTORY.len()).then_some(Phoneme(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn symbol(self) -> &'static str {
        INVENTORY[self.index()]
    }

    /// Iterates the whole inventory in table order.
    pub fn all() -> impl Iterator<Item = Phoneme> {
        (0..INVENTORY.len()).map(|i| Phoneme(i as u8))
    }
}

impl FromStr for Phoneme {
    type Err = UnknownPhoneme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        INVENTORY
            .iter()
            .position(|sym| *sym == s)
            .map(|i| Phoneme(i as u8))
            .ok_or_else(|| UnknownPhoneme(s.to_string()))
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for Phoneme {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Phoneme {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
