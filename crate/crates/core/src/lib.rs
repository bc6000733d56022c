//! Hysteresis identification toolkit.
//!
//! * [`operators`]: stop, play, relay, deteriorating-stop and NDS kernels.
//! * [`refmodels`]: Prandtl-Ishlinskii, generalized Prandtl, Preisach and
//!   rate-dependent generators used as ground truth.
//! * [`epnn`]: the extended Preisach neural network and its output layer.
//! * [`training`]: objective, genetic algorithm, space-dilation subgradient
//!   method and the hybrid trainer.
//! * [`excitation`]: synthetic input waveforms.
//! * [`signals`]: CSV ingest, rate estimation, normalization and splits.

pub mod epnn;
pub mod excitation;
pub mod operators;
pub mod refmodels;
pub mod signals;
pub mod training;
