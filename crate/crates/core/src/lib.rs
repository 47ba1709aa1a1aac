//! Numerical verification of jet-calculus identities: gauge sequences on Lie
//! groups, Spencer operators and algebroid brackets of Lie pseudogroups,
//! vortex dynamics and couple-stress elasticity.
//!
//! Every derivative of a user-supplied closed form is taken exactly through
//! truncated Taylor arithmetic ([`taylor`]); finite differences only appear
//! as independent oracles for variational formulas.

pub mod dynamics;
pub mod elasticity;
pub mod error;
pub mod expr;
pub mod jet;
pub mod lie_group;
pub mod linalg;
pub mod poly;
pub mod pseudogroup;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod suite;
pub mod taylor;

pub use error::{Error, Result};
pub use expr::{Expr, ExprMap};
pub use jet::{jet_compose, jet_invert, Jet, JetSectionSpec};
