//! Chaotic 2D Kuramoto-Sivashinsky trajectories, a Fourier neural operator
//! surrogate trained on them, and spectral diagnostics of surrogate error.
//!
//! Modules, bottom-up:
//! - [`field`]: real fields, half/full spectra and the FFT conventions.
//! - [`solver`]: finite-difference stencils and explicit Euler time stepping.
//! - [`dataset`]: seeded sample generation, splits and the `KSD1` file format.
//! - [`fno`]: the operator network, forward pass and reverse-mode gradients.
//! - [`checkpoint`]: the `KSF1` parameter file format.
//! - [`training`]: losses, Adam, the step schedule and the training loop.
//! - [`spectra`]: log power, radial power and (normalized) error spectra.

pub mod checkpoint;
mod codec;
pub mod dataset;
pub mod error;
pub mod field;
pub mod fno;
pub mod rng;
pub mod solver;
pub mod spectra;
pub mod training;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use dataset::{assign_split, generate_dataset, generate_initial, load_dataset, save_dataset, Dataset, Sample, Split};
pub use error::{Error, Result};
pub use field::{fft2_real, fftshift_center, full_power, ifft2_real, FullSpectrum2D, ScalarField2D, SpectralField2D};
pub use fno::{init_params, param_count, Activation, FnoConfig, FnoModel, FnoParams};
pub use solver::{evolve, SolverConfig, Trajectory};
pub use spectra::{cutoff_ordering, radial_power, CutoffOrdering, RadialSpectrum};
pub use training::{train, TrainConfig, TrainHistory, TrainOutcome};
