//! Direct sampling of single-mode phase space by photon counting.
//!
//! A signal mode is mixed with a probe on a beam splitter of power
//! transmission `T` and the counted output port is measured with a detector
//! of quantum efficiency `eta`. The alternating photocount series
//! `sum (-1)^n p_n` then equals a phase-space integral of the signal and
//! (rescaled) probe Wigner functions, and for a coherent probe it samples
//! the signal's `s = -(1-T)/T` ordered quasidistribution at a single point.
//!
//! Module map:
//!
//! * [`fockspace`]: truncated Fock-basis states, displacement operators.
//! * [`quasiprob`]: Wigner / s-ordered quasidistributions and the overlap
//!   quadrature.
//! * [`optics`]: beam splitter, attenuation and detector loss, parity.
//! * [`sampling`]: Monte Carlo photocounts and weighted-series estimators.
//! * [`scan`]: experiment configuration, per-point pipeline, CSV/JSON output.

pub mod error;
pub mod fockspace;
pub mod optics;
pub mod quasiprob;
pub mod sampling;
pub mod scan;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
