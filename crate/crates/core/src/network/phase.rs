use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Phase {
        Phase::ALL[i]
    }

    fn bit(self) -> u8 {
        1 << self.index()
    }

    pub fn letter(self) -> char {
        ['a', 'b', 'c'][self.index()]
    }
}

/// Non-empty subset of {a, b, c}, always iterated in a-b-c order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);

    pub fn from_mask(mask: u8) -> Option<PhaseSet> {
        (mask != 0 && mask & !0b111 == 0).then_some(PhaseSet(mask))
    }

    pub fn single(p: Phase) -> PhaseSet {
        PhaseSet(p.bit())
    }

    pub fn from_phases(phases: &[Phase]) -> Option<PhaseSet> {
        PhaseSet::from_mask(phases.iter().fold(0, |m, p| m | p.bit()))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_three_phase(self) -> bool {
        self.0 == 0b111
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Position of `p` within this set's a-b-c ordering.
    pub fn position(self, p: Phase) -> Option<usize> {
        self.contains(p)
            .then(|| self.iter().take_while(|q| *q != p).count())
    }

    /// Positions of this set's phases inside `outer`; `None` unless subset.
    pub fn positions_in(self, outer: PhaseSet) -> Option<Vec<usize>> {
        self.iter().map(|p| outer.position(p)).collect()
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhaseSet({self})")
    }
}

impl FromStr for PhaseSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mask = 0u8;
        for ch in s.trim().chars() {
            let p = match ch.to_ascii_lowercase() {
                'a' | '1' => Phase::A,
                'b' | '2' => Phase::B,
                'c' | '3' => Phase::C,
                _ => return Err(Error::InvalidModel(format!("bad phase letter `{ch}` in `{s}`"))),
            };
            if mask & p.bit() != 0 {
                return Err(Error::InvalidModel(format!("repeated phase in `{s}`")));
            }
            mask |= p.bit();
        }
        PhaseSet::from_mask(mask).ok_or_else(|| Error::InvalidModel("empty phase set".into()))
    }
}

impl TryFrom<String> for PhaseSet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PhaseSet> for String {
    fn from(p: PhaseSet) -> String {
        p.to_string()
    }
}
