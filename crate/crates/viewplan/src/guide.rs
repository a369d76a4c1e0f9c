//! The long-form guide, one module per chapter of `book/`.
//!
//! mdbook renders the same Markdown files; including them here makes every
//! code block in the book a doc-test, so the guide cannot drift from the
//! API it describes.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/viewsphere.md")]
pub mod viewsphere {}

#[doc = include_str!("../../../book/src/sensing.md")]
pub mod sensing {}

#[doc = include_str!("../../../book/src/detector.md")]
pub mod detector {}

#[doc = include_str!("../../../book/src/observation-model.md")]
pub mod observation_model {}

#[doc = include_str!("../../../book/src/beliefs-and-costs.md")]
pub mod beliefs_and_costs {}

#[doc = include_str!("../../../book/src/planning.md")]
pub mod planning {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
