//! Pluggable backend implementations and the name-keyed registry that
//! selects them at runtime.

pub mod http;
pub mod mock;
pub mod registry;

pub use mock::{prompt_hash, text_hash, HashedEmbedder, ScriptedGenerator, ScriptedVerifier};
pub use registry::{BackendRegistry, BuildContext};
