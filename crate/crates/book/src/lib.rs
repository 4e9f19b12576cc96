//! The `fsva` guide. Each chapter is included here so its code listings run as
//! doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/correction.md")]
pub mod correction {}

#[doc = include_str!("../../../book/src/classifier.md")]
pub mod classifier {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
