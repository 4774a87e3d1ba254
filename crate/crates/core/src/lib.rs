//! Exact majority-vote probabilities and group-size optimization for
//! representative democracies.
//!
//! Voters are split into groups, each group elects a representative whose
//! expected competence is given by a group competence function `μ(K)`, and
//! the representatives decide by strict majority. The modules cover the
//! probability machinery ([`prob`]), numerical checks of the inequalities
//! the analysis relies on ([`audit`]), competence functions
//! ([`competence`]), partition search ([`partition`]) and the multi-issue
//! extension ([`multi`]).

pub mod audit;
pub mod competence;
pub mod error;
pub mod mc;
pub mod multi;
pub mod partition;
pub mod prob;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
