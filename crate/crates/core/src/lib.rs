//! Quasi-stationary distributions of perturbed discrete-time semi-Markov
//! processes with an absorbing state `0`, and their asymptotic power-series
//! expansions in the perturbation parameter `ε`.
//!
//! The crate is `no_std` (it needs `alloc`). Every algorithm is generic over
//! [`Scalar`]; use [`Rational`] for exact coefficients and `f64` when the
//! limiting root is not zero.
//!
//! ```
//! use qsd_core::{compute_qsd_expansion, example::perturbed_cycle, Rational};
//!
//! let model = perturbed_cycle::<Rational>();
//! let x = compute_qsd_expansion(&model, 2).unwrap();
//! assert_eq!(*x.coefficient(1, 1), Rational::new((-8).into(), 125.into()));
//! ```
#![no_std]

extern crate alloc;

pub mod error;
pub mod example;
pub mod expand;
mod linalg;
pub mod model;
pub mod moments;
pub mod oracle;
pub mod rootfind;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use expand::{compute_qsd_expansion, compute_qsd_expansion_with, ExpansionOptions, QsdExpansion};
pub use model::{ConcreteKernel, PerturbedSemiMarkovModel, Transition, ValidationReport};
pub use oracle::{qsd_direct, qsd_iterative, remainder_report, remainder_report_with, QsdPoint};
pub use rootfind::{detect_zero_root, solve_characteristic, RootResult};
pub use scalar::{Backend, Rational, Scalar};
pub use series::{taylor_substitute, PowerSeries};
