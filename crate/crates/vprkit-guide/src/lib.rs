//! Doctest shim for the guide in `book/`: every chapter is attached as
//! module documentation, so `cargo test --doc -p vprkit-guide` compiles and
//! runs the book's code blocks against the current library. mdBook itself
//! does not test snippets; this crate keeps the book honest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-and-formats.md")]
pub mod data_and_formats {}

#[doc = include_str!("../../../book/src/descriptors.md")]
pub mod descriptors {}

#[doc = include_str!("../../../book/src/similarity.md")]
pub mod similarity {}

#[doc = include_str!("../../../book/src/matching.md")]
pub mod matching {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/synthetic-data.md")]
pub mod synthetic_data {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
