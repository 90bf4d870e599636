//! Rank-two commutative semifield search library.
//!
//! The geometry side classifies F_q-linear sets of internal points of a conic
//! in PG(2, q^n); the algebra side verifies the known semifield families and
//! their associated flocks.  The two meet in the linear set W attached to a
//! semifield pair, which the searches try to locate among the classified sets.

pub mod conic;
pub mod conway;
pub mod error;
pub mod field;
pub mod linset;
pub mod semifield;
pub mod subline;

pub use error::{Error, Result};
