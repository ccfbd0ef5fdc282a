//! The guide's chapters, compiled as doc comments so `cargo test` runs every
//! Rust snippet in them.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/measurement.md")]
pub mod measurement {}
#[doc = include_str!("../../../book/src/trajectories.md")]
pub mod trajectories {}
#[doc = include_str!("../../../book/src/correlations.md")]
pub mod correlations {}
#[doc = include_str!("../../../book/src/resolution.md")]
pub mod resolution {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
