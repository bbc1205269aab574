use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Ground-truth latent functions of the benchmark experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionId {
    /// `-x sin(x/3)`, the 8-point illustration.
    Demo8,
    /// `½ x sin(x)`
    A,
    /// `e^{-x/5} (sin(x) + x)`
    B,
    /// `-7 sin(x/3) + 2 sin(10x/9)`
    C,
    /// `½ log((sin(2x) + 2) x² + 1)`
    D,
}

impl FunctionId {
    pub const BENCHMARK: [FunctionId; 4] = [FunctionId::A, FunctionId::B, FunctionId::C, FunctionId::D];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            FunctionId::Demo8 => -x * (x / 3.0).sin(),
            FunctionId::A => 0.5 * x * x.sin(),
            FunctionId::B => (-x / 5.0).exp() * (x.sin() + x),
            FunctionId::C => -7.0 * (x / 3.0).sin() + 2.0 * (10.0 * x / 9.0).sin(),
            FunctionId::D => 0.5 * (((2.0 * x).sin() + 2.0) * x * x + 1.0).ln(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FunctionId::Demo8 => "demo8",
            FunctionId::A => "a",
            FunctionId::B => "b",
            FunctionId::C => "c",
            FunctionId::D => "d",
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "demo8" => Ok(FunctionId::Demo8),
            "a" => Ok(FunctionId::A),
            "b" => Ok(FunctionId::B),
            "c" => Ok(FunctionId::C),
            "d" => Ok(FunctionId::D),
            _ => Err(Error::UnknownFunction(s.to_string())),
        }
    }
}

/// Evaluates the named latent function.
pub fn latent(id: FunctionId, x: f64) -> f64 {
    id.eval(x)
}
