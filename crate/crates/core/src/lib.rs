//! Acid-base chemistry and pH-responsive material simulation.

pub mod calibration;
pub mod chemistry;
pub mod color;
pub mod controller;
pub mod fluidics;
pub mod materials;
pub mod roots;
pub mod scene;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lowercase hex SHA-256 of `bytes`, as recorded in run manifests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
