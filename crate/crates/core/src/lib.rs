pub mod cfgen;
pub mod checkpoint;
mod codec;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod generator;
pub mod numkit;
pub mod reranker;
pub mod stampgen;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};

// Runs the guide's listings as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/generators.md")]
    mod generators {}
    #[doc = include_str!("../../../book/src/reranking.md")]
    mod reranking {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
