use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Spin-operator channel through which phonons couple to the triplet.
///
/// `SingleQuantum` (S_z S_+) drives Ω, `DoubleQuantum` (S_+²) drives γ and
/// `Dephasing` (S_z² − S²/3) has no population-transfer role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionChannel {
    SingleQuantum,
    DoubleQuantum,
    Dephasing,
}

impl TransitionChannel {
    pub const ALL: [TransitionChannel; 3] = [
        TransitionChannel::SingleQuantum,
        TransitionChannel::DoubleQuantum,
        TransitionChannel::Dephasing,
    ];

    /// Name of the relaxation rate this channel feeds, if any.
    pub fn rate_name(self) -> Option<&'static str> {
        match self {
            TransitionChannel::SingleQuantum => Some("omega"),
            TransitionChannel::DoubleQuantum => Some("gamma"),
            TransitionChannel::Dephasing => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TransitionChannel::SingleQuantum => "sq",
            TransitionChannel::DoubleQuantum => "dq",
            TransitionChannel::Dephasing => "dephasing",
        }
    }
}

impl fmt::Display for TransitionChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown transition channel `{0}` (expected sq, dq or dephasing)")]
pub struct UnknownChannel(pub String);

impl FromStr for TransitionChannel {
    type Err = UnknownChannel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sq" | "single-quantum" | "single_quantum" | "omega" | "szs+" => {
                Ok(TransitionChannel::SingleQuantum)
            }
            "dq" | "double-quantum" | "double_quantum" | "gamma" | "s+2" => {
                Ok(TransitionChannel::DoubleQuantum)
            }
            "dephasing" | "dp" | "sz2" => Ok(TransitionChannel::Dephasing),
            _ => Err(UnknownChannel(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse_back() {
        for c in TransitionChannel::ALL {
            assert_eq!(c.as_str().parse::<TransitionChannel>().unwrap(), c);
        }
        assert!("xx".parse::<TransitionChannel>().is_err());
        assert_eq!(TransitionChannel::Dephasing.rate_name(), None);
    }
}
