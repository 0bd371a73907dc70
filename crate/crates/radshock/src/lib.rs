// NaN inputs must fail the validity checks, which `!(x > 0.0)` does and `x <= 0.0` does not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evolution;
pub mod flux;
pub mod ode;
pub mod profile;
pub mod regularity;
pub mod shock;
pub mod system;
