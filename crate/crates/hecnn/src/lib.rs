//! Rotation-free homomorphically encrypted CNN inference.
//!
//! A CKKS-style cryptosystem over Z_Q[X]/(X^N + 1), coefficient packings for
//! convolution and fully connected layers that need zero ciphertext rotations,
//! two-party client/server evaluation protocols built on half (c0-only)
//! ciphertexts, a masked ReLU bridge, an instrumented cost model with
//! closed-form predictions, a byte-exact transport layer, and a plaintext
//! oracle for end-to-end verification.

pub mod ckks;
pub mod conv;
pub mod cost;
pub mod error;
pub mod fc;
pub mod io;
pub mod net;
pub mod oracle;
pub mod relu;
pub mod ring;
pub mod transport;

pub use error::{Error, Result};
