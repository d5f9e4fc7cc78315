//! Spectral laboratory for the decay of one-dimensional damped wave
//! equations `u_tt - u_xx + u_t + V u = 0` with nonnegative potentials.
//!
//! Everything is built on a uniform grid and the full (or windowed)
//! eigendecomposition of the Dirichlet-truncated Schrödinger operator, so
//! both the heat flow `e^{-tS}` and the damped wave flow are evaluated
//! exactly in time.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod grid;
pub mod harmonic;
pub mod heatflow;
pub mod inequalities;
pub mod operator;
mod par;
#[cfg(feature = "parallel")]
pub use par::set_threads;
pub mod potential;
pub mod profiles;
pub mod ratefit;
pub mod tridiag;
pub mod waveflow;

pub use error::{Error, Result};
pub use grid::{Field, Grid, Norm};
pub use harmonic::{AsymptoticsReport, HarmonicPair};
pub use operator::{SchrodingerOperator, SpectralDecomposition};
pub use potential::{ClassReport, Potential, PotentialKind};
pub use heatflow::{DecayStudy, HeatFlow, TimeLadder};
pub use profiles::{Profile, RandomFamily};
pub use ratefit::{DecaySeries, FitResult};
pub use waveflow::{EnergyReport, ModalWaveEvolver, WaveState};
pub use inequalities::{Inequality, InequalityContext, RatioStudy};
pub use experiment::{run, ExperimentBundle, ExperimentConfig, Manifest, Study};
