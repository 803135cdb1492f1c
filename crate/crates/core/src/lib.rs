//! Symbolic machinery for the decorated trees of regularity structures.
//!
//! The crate covers typed decorated trees and their canonical codes, rules
//! and conforming-tree enumeration, the noise and kernel-dual extensions of a
//! rule, the tree-level shift/differentiation/dualization operators, a small
//! symbolic calculus for nonlinearities and counterterms, and generators for
//! the renormalized, tangent and dual equations together with exact checks of
//! the identities relating their counterterms.

pub mod equations;
pub mod error;
pub mod extensions;
pub mod q;
pub mod rules;
pub mod specfile;
pub mod symbolic;
pub mod tree;
pub mod types;

pub use error::{Error, Result};
pub use q::Q;
pub use tree::{DecoratedTree, NodeId, TreeCode};
pub use types::{Kind, Mark, MultiIndex, Scaling, TypeId, TypeTable};
