use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Five-way frame label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlitchClass {
    Normal,
    Stretched,
    LowRes,
    Missing,
    Placeholder,
}

impl GlitchClass {
    pub const COUNT: usize = 5;
    pub const ALL: [GlitchClass; 5] = [
        GlitchClass::Normal,
        GlitchClass::Stretched,
        GlitchClass::LowRes,
        GlitchClass::Missing,
        GlitchClass::Placeholder,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            GlitchClass::Normal => "normal",
            GlitchClass::Stretched => "stretched",
            GlitchClass::LowRes => "low_res",
            GlitchClass::Missing => "missing",
            GlitchClass::Placeholder => "placeholder",
        }
    }

    pub fn is_glitch(self) -> bool {
        self != GlitchClass::Normal
    }
}

impl fmt::Display for GlitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GlitchClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown glitch class `{s}`"))
    }
}
