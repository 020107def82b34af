//! Occupation-number dynamics of a fermionic or bosonic oscillator fully coupled to
//! N fermionic/bosonic Drude baths.

// negated float comparisons are there to reject NaN; quadrature nodes are kept as tabulated
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod analysis;
pub mod bath;
pub mod config;
pub mod error;
pub mod evolution;
pub mod kernels;
pub mod model;
pub mod oracle;
pub mod output;
pub mod polyroots;
pub mod presets;
pub mod quad;
pub mod scenario;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
