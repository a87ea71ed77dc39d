//! Effective Frostman measures on Cantor-type sets, random-walk approximants of
//! Brownian paths, and the Fourier transform of the image measures they induce.
//!
//! The crate is organised bottom-up:
//!
//! * [`dyadic`] builds Cantor sets in exact rational arithmetic, represents their
//!   natural measures as flows on the dyadic tree and produces the atomic
//!   `n`-step approximations used everywhere else.
//! * [`walk`] holds binary codes, the `±√N` piecewise-linear walks they decode to,
//!   a seeded refinement ladder and a compression-based incompressibility proxy.
//! * [`spectral`] evaluates transforms of pushout measures, the exact and Monte
//!   Carlo moment computations, the summation-by-parts identity and decay fits.
//! * [`dimension`] estimates box-counting, capacity and Fourier-decay dimensions
//!   and assembles them into a single report.
//!
//! Every type is immutable after construction and every randomized routine is a
//! pure function of its seed.

pub mod dimension;
pub mod dyadic;
pub mod error;
pub mod fit;
pub mod numeric;
pub mod rng;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
