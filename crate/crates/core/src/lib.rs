//! One-shot data-driven tuning of fractional-order and integer-order PID
//! controllers from a single closed-loop experiment.

pub mod benchlab;
#[cfg(feature = "cli")]
pub mod cli;
pub mod folib;
pub mod idfrit;
pub mod lti;
pub mod swarm;
pub mod tuning;
