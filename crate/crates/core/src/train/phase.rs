// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Which hardware constraints are active in a training phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QatPhase {
    /// 2-bit weights and 6-bit biases; identity gradient inside the clip range.
    pub quantize_weights: bool,
    /// Heaviside outputs; gradient 1 where `|h - theta| <= 1`.
    pub binarize_output: bool,
    /// Piece-wise linear gate instead of the logistic sigmoid.
    pub hard_sigmoid_gate: bool,
    /// 6-bit gate; identity gradient.
    pub quantize_gate: bool,
}

impl QatPhase {
    pub const FLOAT: Self = Self {
        quantize_weights: false,
        binarize_output: false,
        hard_sigmoid_gate: false,
        quantize_gate: false,
    };
    pub const WEIGHTS: Self = Self {
        quantize_weights: true,
        ..Self::FLOAT
    };
    pub const BINARY: Self = Self {
        binarize_output: true,
        ..Self::WEIGHTS
    };
    pub const HARDWARE: Self = Self {
        hard_sigmoid_gate: true,
        quantize_gate: true,
        ..Self::BINARY
    };

    pub const ALL: [Self; 4] = [Self::FLOAT, Self::WEIGHTS, Self::BINARY, Self::HARDWARE];

    fn flags(self) -> [bool; 4] {
        [
            self.quantize_weights,
            self.binarize_output,
            self.hard_sigmoid_gate,
            self.quantize_gate,
        ]
    }

    /// Every constraint of `other` is also active here.
    pub fn contains(self, other: Self) -> bool {
        self.flags()
            .iter()
            .zip(other.flags())
            .all(|(&a, b)| a || !b)
    }

    pub fn is_hardware(self) -> bool {
        self == Self::HARDWARE
    }

    pub fn name(self) -> String {
        match self {
            Self::FLOAT => "float".into(),
            Self::WEIGHTS => "weights".into(),
            Self::BINARY => "binary".into(),
            Self::HARDWARE => "hardware".into(),
            _ => {
                let names = ["qw", "bo", "hs", "qz"];
                let on: Vec<&str> = self
                    .flags()
                    .iter()
                    .zip(names)
                    .filter(|(f, _)| **f)
                    .map(|(_, n)| n)
                    .collect();
                on.join("+")
            }
        }
    }
}

impl fmt::Display for QatPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for QatPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "float" => Ok(Self::FLOAT),
            "weights" => Ok(Self::WEIGHTS),
            "binary" => Ok(Self::BINARY),
            "hardware" => Ok(Self::HARDWARE),
            _ => Err(Error::Config(format!(
                "unknown phase {s:?} (expected float, weights, binary or hardware)"
            ))),
        }
    }
}

impl Serialize for QatPhase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for QatPhase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_only_add_constraints() {
        for w in QatPhase::ALL.windows(2) {
            assert!(w[1].contains(w[0]));
            assert!(!w[0].contains(w[1]));
        }
        for p in QatPhase::ALL {
            assert_eq!(p.name().parse::<QatPhase>().unwrap(), p);
        }
    }
}
