//! Energy-efficient precoder design for rate-splitting multiple access.

pub mod channel;
pub mod conic;
pub mod error;
pub mod harness;
pub mod model;
pub mod optimizer;
pub mod subproblems;
pub mod surrogate;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/surrogates.md")]
    mod surrogates {}
    #[doc = include_str!("../../../book/src/conic.md")]
    mod conic {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

/// Complex matrix; channels and precoders are stored one column per user or stream.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
