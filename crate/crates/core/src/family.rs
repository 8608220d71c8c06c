use std::fmt;
use std::str::FromStr;

use crate::Error;

/// Which of the two diversity ingredients an ensemble uses.
///
/// `N` uses neither prior functions nor bootstrapping, `P` uses prior
/// functions only and `BP` uses both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnsembleFamily {
    N,
    P,
    BP,
}

impl EnsembleFamily {
    pub const ALL: [EnsembleFamily; 3] = [EnsembleFamily::N, EnsembleFamily::P, EnsembleFamily::BP];

    pub fn uses_prior(self) -> bool {
        !matches!(self, EnsembleFamily::N)
    }

    pub fn uses_bootstrap(self) -> bool {
        matches!(self, EnsembleFamily::BP)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnsembleFamily::N => "ensemble-n",
            EnsembleFamily::P => "ensemble-p",
            EnsembleFamily::BP => "ensemble-bp",
        }
    }
}

impl fmt::Display for EnsembleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "n" | "ensemble-n" => Ok(EnsembleFamily::N),
            "p" | "ensemble-p" => Ok(EnsembleFamily::P),
            "bp" | "ensemble-bp" => Ok(EnsembleFamily::BP),
            other => Err(Error::InvalidArgument(format!("unknown ensemble family `{other}`"))),
        }
    }
}
