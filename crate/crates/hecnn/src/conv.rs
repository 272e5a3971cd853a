//! Conv-layer packing and the two-party evaluation protocol.

pub mod pack;
pub mod protocol;
