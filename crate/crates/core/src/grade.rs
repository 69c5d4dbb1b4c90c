use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Outcome label of a delivered task, including the `Decline` outcome for
/// tasks that were refused or not attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    Good,
    Mediocre,
    Bad,
    Decline,
}

impl Grade {
    pub const ALL: [Grade; 4] = [Grade::Good, Grade::Mediocre, Grade::Bad, Grade::Decline];

    pub fn as_str(self) -> &'static str {
        match self {
            Grade::Good => "Good",
            Grade::Mediocre => "Mediocre",
            Grade::Bad => "Bad",
            Grade::Decline => "Decline",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Ok(Grade::Good),
            "mediocre" => Ok(Grade::Mediocre),
            "bad" => Ok(Grade::Bad),
            "decline" | "declined" => Ok(Grade::Decline),
            other => Err(format!("unknown grade `{other}`")),
        }
    }
}

/// Quality of produced work. Unlike [`Grade`] it has no decline state: a
/// worker that declines produces nothing to grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quality {
    Good,
    Mediocre,
    Bad,
}

impl Quality {
    /// One level better, saturating at `Good`.
    pub fn upgraded(self) -> Quality {
        match self {
            Quality::Bad => Quality::Mediocre,
            Quality::Mediocre | Quality::Good => Quality::Good,
        }
    }
}

impl From<Quality> for Grade {
    fn from(q: Quality) -> Self {
        match q {
            Quality::Good => Grade::Good,
            Quality::Mediocre => Grade::Mediocre,
            Quality::Bad => Grade::Bad,
        }
    }
}
