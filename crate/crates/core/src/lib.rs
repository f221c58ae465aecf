//! Invariance-constrained learning as automatic data augmentation.
//!
//! A classifier is trained to minimize its clean loss subject to a bound on
//! its loss under transformed inputs. Transformations are drawn from the
//! loss-proportional distribution over a finite transformation set using
//! independent Metropolis-Hastings, and the constraint is enforced by
//! primal-dual updates. Exact oracles over the enumerated set back every
//! closed-form quantity.

pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod trainer;
pub mod transform;

pub use error::{Error, Result};
