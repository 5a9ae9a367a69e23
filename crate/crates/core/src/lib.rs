//! Extended bipartite matching models.
//!
//! Customers and servers arrive in pairs drawn from an arrival graph `F` and
//! are matched along a compatibility graph `E` by a matching policy. The crate
//! simulates such systems exactly and checks structural properties of the
//! policies (sub-additivity, non-expansiveness, erasing words), stability
//! conditions, and builds stationary solutions by backward coupling.

pub mod analysis;
pub mod engine;
pub mod loynes;
pub mod model;
pub mod policy;
pub mod stability;
pub mod state;

pub use model::{Customer, MatchingStructure, Server, Vertex};
pub use policy::{Policy, PolicyKind, PreferenceMode};
pub use state::{ArrivalQuadruple, BufferDetail, ClassDetail, CustomerWord, PreferenceProfile, ServerWord, Word};
