//! Architecture specs, the four built-in EdgeSpeechNet tables, residual
//! topology inference, parameter verification and network instantiation.

pub mod builtin;
pub mod network;
pub mod spec;
pub mod topology;
pub mod verify;
pub mod weights;

pub use builtin::{builtin_spec, BuiltinArch};
pub use network::{build_network, Classifier, FoldedNetwork, FoldedStage, Gradients, Network, Stage, TrainCache};
pub use spec::{parse_spec, serialize_spec, ArchitectureSpec, FeatureShape, LayerKind, LayerSpec, DEFAULT_INPUT};
pub use topology::{infer_residual_topology, ResidualTopology};
pub use verify::{verify_params, ParamReport, ParamRow};
pub use weights::{decode_records, encode_records, WeightRecord};
