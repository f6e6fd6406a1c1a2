//! Black-box quantization of one-port impedance data and classical RCSJ
//! simulation of Josephson junctions.
//!
//! The quantization chain runs
//! [`network`] → [`ratfit`] → [`synthesis`] → [`quantize`]:
//! sampled scattering or impedance data is fitted with a stable pole-residue
//! model, each conjugate pole pair becomes a parallel RLC resonator, the
//! lossless resonators are quantized as harmonic modes, and a single
//! Josephson junction shunting the chain supplies the self- and cross-Kerr
//! nonlinearity. [`rcsj`] is independent of the chain.

pub mod constants;
pub mod network;
pub mod quantize;
pub mod ratfit;
pub mod rcsj;
pub mod synthesis;

pub use num_complex::Complex64;
