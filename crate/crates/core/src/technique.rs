use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::StcError;

/// The four singing techniques; each one is a conversion domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Chest,
    Falsetto,
    Whistle,
    Raspy,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::Chest,
        Technique::Falsetto,
        Technique::Whistle,
        Technique::Raspy,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            Technique::Chest => 0,
            Technique::Falsetto => 1,
            Technique::Whistle => 2,
            Technique::Raspy => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Technique> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Technique::Chest => "chest",
            Technique::Falsetto => "falsetto",
            Technique::Whistle => "whistle",
            Technique::Raspy => "raspy",
        }
    }

    /// One-letter code used in pair labels such as `C2F`.
    pub fn letter(self) -> char {
        match self {
            Technique::Chest => 'C',
            Technique::Falsetto => 'F',
            Technique::Whistle => 'W',
            Technique::Raspy => 'R',
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = StcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                StcError::Argument(format!(
                    "unknown technique '{s}', expected one of {{chest, falsetto, whistle, raspy}}"
                ))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for t in Technique::ALL {
            assert_eq!(Technique::from_index(t.index()), Some(t));
            assert_eq!(t.name().parse::<Technique>().unwrap(), t);
        }
        assert!(Technique::from_index(4).is_none());
    }

    #[test]
    fn unknown_name_lists_choices() {
        let err = "belt".parse::<Technique>().unwrap_err().to_string();
        assert!(err.contains("chest, falsetto, whistle, raspy"));
    }
}
