//! Computational kernels that give actors their behaviour.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::aes_graph;
use crate::graph::ActorSpec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("kernel {kind} on actor {actor}: {message}")]
pub struct KernelError {
    pub actor: String,
    pub kind: String,
    pub message: String,
}

impl KernelError {
    pub fn new(actor: &ActorSpec, message: impl Into<String>) -> Self {
        Self {
            actor: actor.id.clone(),
            kind: actor.kind.clone(),
            message: message.into(),
        }
    }
}

/// A pure function from the payloads consumed on each input port (in port
/// order) to one payload per output port.
pub trait Kernel: Send + Sync {
    fn apply(&self, actor: &ActorSpec, inputs: &[&[u8]]) -> Result<Vec<Vec<u8>>, KernelError>;
}

impl<F> Kernel for F
where
    F: Fn(&ActorSpec, &[&[u8]]) -> Result<Vec<Vec<u8>>, KernelError> + Send + Sync,
{
    fn apply(&self, actor: &ActorSpec, inputs: &[&[u8]]) -> Result<Vec<Vec<u8>>, KernelError> {
        self(actor, inputs)
    }
}

#[derive(Clone, Default)]
pub struct KernelRegistry {
    kernels: BTreeMap<String, Arc<dyn Kernel>>,
}

impl fmt::Debug for KernelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.kernels.keys()).finish()
    }
}

impl KernelRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding `identity` and the AES kernels.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("identity", identity);
        aes_graph::register_kernels(&mut r);
        r
    }

    pub fn register(&mut self, kind: &str, kernel: impl Kernel + 'static) -> &mut Self {
        self.kernels.insert(kind.to_string(), Arc::new(kernel));
        self
    }

    pub fn get(&self, kind: &str) -> Option<Arc<dyn Kernel>> {
        self.kernels.get(kind).cloned()
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.kernels.keys().map(String::as_str)
    }
}

/// Copies input `i` to output `i`.
fn identity(actor: &ActorSpec, inputs: &[&[u8]]) -> Result<Vec<Vec<u8>>, KernelError> {
    if inputs.len() != actor.outputs.len() {
        return Err(KernelError::new(
            actor,
            format!(
                "identity needs as many outputs as inputs ({} vs {})",
                actor.outputs.len(),
                inputs.len()
            ),
        ));
    }
    Ok(inputs.iter().map(|p| p.to_vec()).collect())
}
