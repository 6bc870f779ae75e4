use std::fmt;
use std::str::FromStr;

use crate::error::Error;

use super::block::{ConvBn, ResidualBlock};
use super::conv::ConvLayer;
use super::dense::DenseLayer;

/// `Paper` counts conv and dense weights only; `Full` adds every other
/// trainable value (batch-norm gamma and beta).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamMode {
    #[default]
    Paper,
    Full,
}

impl fmt::Display for ParamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamMode::Paper => "paper",
            ParamMode::Full => "full",
        })
    }
}

impl FromStr for ParamMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "paper" => Ok(ParamMode::Paper),
            "full" => Ok(ParamMode::Full),
            other => Err(Error::Parse(format!("unknown parameter mode `{other}`"))),
        }
    }
}

pub trait CountParams {
    fn count_params(&self, mode: ParamMode) -> u64;
}

pub fn count_params<T: CountParams + ?Sized>(item: &T, mode: ParamMode) -> u64 {
    item.count_params(mode)
}

impl CountParams for ConvLayer {
    fn count_params(&self, _: ParamMode) -> u64 {
        self.param_count()
    }
}

impl CountParams for DenseLayer {
    fn count_params(&self, _: ParamMode) -> u64 {
        self.param_count()
    }
}

impl CountParams for ConvBn {
    fn count_params(&self, mode: ParamMode) -> u64 {
        match mode {
            ParamMode::Paper => self.conv.param_count(),
            ParamMode::Full => self.conv.param_count() + self.bn.param_count(),
        }
    }
}

impl CountParams for ResidualBlock {
    fn count_params(&self, mode: ParamMode) -> u64 {
        self.a.count_params(mode) + self.b.count_params(mode)
    }
}
