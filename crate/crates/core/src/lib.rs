//! Plurisubharmonic defining functions whose complex Monge-Ampere
//! determinant vanishes to high order at the boundary of a strictly
//! pseudoconvex domain, a radial Monge-Ampere solver, and numerical checks
//! for holomorphic maps and the associated manifold of a hypersurface.
//!
//! The `book/` directory explains the constructions; its snippets run as
//! doc-tests.

pub mod domain;
pub mod error;
pub mod expr;
pub mod flatten;
pub mod hermitian;
pub mod jet;
pub mod mapping;
pub mod radial;
pub mod report;
pub mod run;
pub mod scalar;
pub mod wirtinger;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/jets.md")]
    mod jets {}
    #[doc = include_str!("../../../book/src/domains.md")]
    mod domains {}
    #[doc = include_str!("../../../book/src/hermitian.md")]
    mod hermitian {}
    #[doc = include_str!("../../../book/src/flattening.md")]
    mod flattening {}
    #[doc = include_str!("../../../book/src/radial.md")]
    mod radial {}
    #[doc = include_str!("../../../book/src/mappings.md")]
    mod mappings {}
    #[doc = include_str!("../../../book/src/reports.md")]
    mod reports {}
}
