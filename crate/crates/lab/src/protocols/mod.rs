//! Theorem-by-theorem verification protocols.

pub mod concentration;
pub mod density;
pub mod diversity;
pub mod exact;
pub mod ldp;
pub mod predictive;
pub mod rate;
pub mod sieve;
