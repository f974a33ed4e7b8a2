//! Span programs composed along graphs, evaluated through electrical networks.
//!
//! A composed program is a graph whose edges carry span programs. Its witness
//! sizes are effective resistances of a network built from the edge witness
//! sizes, so [`graphcomp::Program`] evaluates compositions lazily and only
//! [`graphcomp::compose`] builds the explicit state space.
//!
//! ```
//! use spanflow::catalog::threshold;
//! use spanflow::graphcomp::Program;
//!
//! let p = Program::graph(threshold(5, 2).unwrap()).unwrap();
//! let e = p.evaluate(b"01001").unwrap();
//! assert!(e.positive);
//! assert!((e.size - 1.0).abs() < 1e-12);
//! ```
//!
//! The guide in `book/` walks through each module with runnable examples.

pub mod catalog;
pub mod cli;
pub mod decomp;
pub mod error;
pub mod frameworks;
pub mod graphcomp;
pub mod io;
pub mod linalg;
pub mod netlab;
pub mod quantsim;
pub mod spanprog;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    pub mod networks {}
    #[doc = include_str!("../../../book/src/span-programs.md")]
    pub mod span_programs {}
    #[doc = include_str!("../../../book/src/composition.md")]
    pub mod composition {}
    #[doc = include_str!("../../../book/src/decomposition.md")]
    pub mod decomposition {}
    #[doc = include_str!("../../../book/src/algorithm.md")]
    pub mod algorithm {}
    #[doc = include_str!("../../../book/src/converters.md")]
    pub mod converters {}
    #[doc = include_str!("../../../book/src/catalog.md")]
    pub mod catalog {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
