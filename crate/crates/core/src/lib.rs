//! Tagged-token dataflow: graphs, a cycle-level engine, a composer that
//! merges several applications into one reconfigurable graph, AES kernels,
//! and performance and energy models.

pub mod aes;
pub mod aes_graph;
pub mod composer;
pub mod energy;
pub mod engine;
pub mod fifo;
pub mod format;
pub mod graph;
pub mod kernel;
pub mod perf;
pub mod token;
pub mod workload;

pub use aes::{AesStandard, Block};
pub use composer::{
    extract_config, merge, ComposeError, ConfigEntry, MergedGraph, SBoxKind, SBoxSpec,
};
pub use energy::{BatteryModel, Mode, PowerProfile, Scenario};
pub use engine::{
    Engine, EngineError, EngineMetrics, EngineOptions, ReadMode, RunReport, TagMetrics,
};
pub use fifo::TaggedFifo;
pub use format::{parse_document, Document};
pub use graph::{ActorSpec, DataflowGraph, EdgeSpec, Endpoint, PortSpec};
pub use kernel::{Kernel, KernelError, KernelRegistry};
pub use perf::{ClockModel, DesignModel};
pub use token::{ConfigId, ConfigRegisterFile, TagId, Token};
pub use workload::{parse_workload, Workload};
