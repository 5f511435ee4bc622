//! Compliant-contact multibody dynamics with regularized friction, implicit
//! integrators with a transition-aware line search, and work-precision
//! benchmarking tools.

pub mod bench;
pub mod checks;
pub mod cli;
pub mod contact;
pub mod solver;
pub mod system;
