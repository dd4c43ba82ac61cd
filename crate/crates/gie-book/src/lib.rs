//! Runs every Rust snippet in the book as a doc-test, so the guide can
//! never drift from the library. mdBook itself does not execute snippets
//! against the workspace crates; including each chapter as module docs
//! here makes `cargo test --doc` do it instead.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/getting-started.md")]
pub mod getting_started {}

#[doc = include_str!("../../../book/src/parameters.md")]
pub mod parameters {}

#[doc = include_str!("../../../book/src/gaussian-states.md")]
pub mod gaussian_states {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/steady-state.md")]
pub mod steady_state {}

#[doc = include_str!("../../../book/src/budget.md")]
pub mod budget {}

#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}

#[doc = include_str!("../../../book/src/cli-reference.md")]
pub mod cli_reference {}
