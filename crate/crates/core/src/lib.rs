//! Simulation, bounding and design of two-copy distributed purification
//! protocols for depolarized two-qubit states.

pub mod certificates;
pub mod channels;
pub mod error;
pub mod experiment;
pub mod gates;
pub mod protocols;
pub mod sdp;
pub mod tensor;
pub mod variational;

pub use error::{Error, Result};
pub use tensor::{Operator, SubsystemSelector, C64};
