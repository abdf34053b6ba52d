//! Benchmark chaotic systems, their integration and observation noise.

mod noise;
mod rk45;
mod systems;

pub use noise::{add_noise, NoiseSpec, Snr};
pub use rk45::{integrate_interval, simulate, simulate_with, Rk45Options};
pub use systems::{builtin_system, sample_initial_condition, DynamicalSystem, SYSTEM_NAMES};
