//! The four published EdgeSpeechNet layer tables, transcribed row by row
//! together with their printed parameter counts.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::spec::{ArchitectureSpec, LayerSpec, DEFAULT_INPUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinArch {
    A,
    B,
    C,
    D,
}

impl BuiltinArch {
    pub const ALL: [BuiltinArch; 4] = [BuiltinArch::A, BuiltinArch::B, BuiltinArch::C, BuiltinArch::D];

    pub fn spec(self) -> ArchitectureSpec {
        match self {
            BuiltinArch::A => edgespeechnet_a(),
            BuiltinArch::B => edgespeechnet_b(),
            BuiltinArch::C => edgespeechnet_c(),
            BuiltinArch::D => edgespeechnet_d(),
        }
    }
}

impl fmt::Display for BuiltinArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for BuiltinArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim();
        let short = name
            .strip_prefix("EdgeSpeechNet-")
            .or_else(|| name.strip_prefix("edgespeechnet-"))
            .unwrap_or(name);
        match short.to_ascii_uppercase().as_str() {
            "A" => Ok(BuiltinArch::A),
            "B" => Ok(BuiltinArch::B),
            "C" => Ok(BuiltinArch::C),
            "D" => Ok(BuiltinArch::D),
            _ => Err(Error::UnknownArchitecture(s.to_string())),
        }
    }
}

pub fn builtin_spec(name: &str) -> Result<ArchitectureSpec> {
    Ok(name.parse::<BuiltinArch>()?.spec())
}

fn conv(n: usize, params: u64) -> LayerSpec {
    LayerSpec::conv(3, 3, n).with_params(params)
}

fn head() -> [LayerSpec; 3] {
    [LayerSpec::global_pool(), LayerSpec::dense(12).with_params(540), LayerSpec::softmax()]
}

fn assemble(name: &str, body: Vec<LayerSpec>, total: &str) -> ArchitectureSpec {
    let mut layers = body;
    layers.extend(head());
    ArchitectureSpec {
        name: name.to_string(),
        input: DEFAULT_INPUT,
        layers,
        reported_total: Some(total.to_string()),
    }
}

fn edgespeechnet_a() -> ArchitectureSpec {
    assemble(
        "EdgeSpeechNet-A",
        vec![
            conv(39, 351),
            conv(20, 7020),
            conv(39, 7020),
            conv(15, 5265),
            conv(39, 5265),
            conv(25, 8775),
            conv(39, 8775),
            conv(22, 7722),
            conv(39, 7722),
            conv(22, 7722),
            conv(39, 7722),
            conv(25, 8775),
            conv(39, 8775),
            conv(45, 15795),
        ],
        "107K",
    )
}

fn edgespeechnet_b() -> ArchitectureSpec {
    assemble(
        "EdgeSpeechNet-B",
        vec![
            conv(30, 270),
            conv(8, 2160),
            conv(30, 2160),
            conv(9, 2430),
            conv(30, 2430),
            conv(11, 2970),
            conv(30, 2970),
            conv(10, 2700),
            conv(30, 2700),
            conv(8, 2160),
            conv(30, 2160),
            conv(11, 2970),
            conv(30, 2970),
            conv(45, 12150),
        ],
        "43.7K",
    )
}

fn edgespeechnet_c() -> ArchitectureSpec {
    assemble(
        "EdgeSpeechNet-C",
        vec![
            conv(24, 216),
            conv(6, 1296),
            conv(24, 1296),
            conv(9, 1944),
            conv(24, 1944),
            conv(12, 2592),
            conv(24, 2592),
            conv(6, 1296),
            conv(24, 1296),
            conv(5, 1080),
            conv(24, 1080),
            conv(6, 1296),
            conv(24, 1296),
            conv(2, 432),
            conv(24, 432),
            conv(45, 9720),
        ],
        "30.3K",
    )
}

/// Early pooling window for EdgeSpeechNet-D; the table gives no size.
pub const D_EARLY_POOL: [usize; 2] = [4, 3];

fn edgespeechnet_d() -> ArchitectureSpec {
    assemble(
        "EdgeSpeechNet-D",
        vec![
            conv(45, 405),
            LayerSpec::avg_pool(D_EARLY_POOL[0], D_EARLY_POOL[1]),
            conv(30, 12150),
            conv(45, 12150),
            conv(33, 13365),
            conv(45, 13365),
            conv(35, 14175),
            conv(45, 14175),
        ],
        "80.3k",
    )
}
