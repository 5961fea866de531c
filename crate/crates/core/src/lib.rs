//! Fair allocation of optical circuit capacity between every ingress-egress
//! pair of a backbone network, with flow disaggregation into per-pair circuits
//! and a fluid simulator that compares circuit switching against shortest-path
//! packet routing.

mod conic;
pub mod alloc;
pub mod circuits;
pub mod error;
pub mod lp;
pub mod net;
pub mod pipeline;
pub mod sim;
pub mod synth;
pub mod utility;

pub use error::{Error, Result};
