//! The six-vowel / 23-consonant inventory of the consonant-vowel corpus.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One of the six vowel classes. The discriminant is the one-hot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VowelLabel {
    A = 0,
    I = 1,
    U = 2,
    Ae = 3,
    E = 4,
    O = 5,
}

impl VowelLabel {
    pub const COUNT: usize = 6;
    pub const ALL: [VowelLabel; 6] = [
        VowelLabel::A,
        VowelLabel::I,
        VowelLabel::U,
        VowelLabel::Ae,
        VowelLabel::E,
        VowelLabel::O,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Symbol as written in the corpus inventory (`A I U æ e o`).
    pub fn symbol(self) -> &'static str {
        match self {
            VowelLabel::A => "A",
            VowelLabel::I => "I",
            VowelLabel::U => "U",
            VowelLabel::Ae => "æ",
            VowelLabel::E => "e",
            VowelLabel::O => "o",
        }
    }

    /// ASCII spelling, safe for file names on case-insensitive filesystems.
    pub fn ascii(self) -> &'static str {
        match self {
            VowelLabel::A => "A",
            VowelLabel::I => "I",
            VowelLabel::U => "U",
            VowelLabel::Ae => "ae",
            VowelLabel::E => "e",
            VowelLabel::O => "o",
        }
    }

    pub fn one_hot(self) -> [f64; 6] {
        let mut t = [0.0; 6];
        t[self.index()] = 1.0;
        t
    }
}

impl fmt::Display for VowelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown vowel label {0:?}")]
pub struct UnknownVowel(pub String);

impl FromStr for VowelLabel {
    type Err = UnknownVowel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        VowelLabel::ALL
            .into_iter()
            .find(|v| v.symbol() == t || v.ascii() == t)
            .ok_or_else(|| UnknownVowel(t.to_string()))
    }
}

impl Serialize for VowelLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for VowelLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Broad articulation class, used only to shape the synthetic consonant surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsonantKind {
    Stop,
    Affricate,
    Fricative,
    Sonorant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Consonant {
    pub symbol: &'static str,
    pub ascii: &'static str,
    pub kind: ConsonantKind,
}

const fn c(symbol: &'static str, ascii: &'static str, kind: ConsonantKind) -> Consonant {
    Consonant { symbol, ascii, kind }
}

use ConsonantKind::*;

/// The 23 consonants in inventory order; the position is the consonant id.
pub const CONSONANTS: [Consonant; 23] = [
    c("P", "P", Stop),
    c("B", "B", Stop),
    c("T", "T", Stop),
    c("D", "D", Stop),
    c("tʃ", "Ch", Affricate),
    c("dʒ", "Dj", Affricate),
    c("K", "K", Stop),
    c("G", "G", Stop),
    c("F", "F", Fricative),
    c("V", "V", Fricative),
    c("Kh", "Kh", Fricative),
    c("Gh", "Gh", Fricative),
    c("S", "S", Fricative),
    c("Z", "Z", Fricative),
    c("ʃ", "Sh", Fricative),
    c("ʒ", "Zh", Fricative),
    c("M", "M", Sonorant),
    c("N", "N", Sonorant),
    c("H", "H", Fricative),
    c("L", "L", Sonorant),
    c("R", "R", Sonorant),
    c("Q", "Q", Stop),
    c("j", "Y", Sonorant),
];

pub fn consonant_by_symbol(s: &str) -> Option<(usize, &'static Consonant)> {
    CONSONANTS
        .iter()
        .enumerate()
        .find(|(_, c)| c.symbol.eq_ignore_ascii_case(s) || c.ascii.eq_ignore_ascii_case(s))
}
