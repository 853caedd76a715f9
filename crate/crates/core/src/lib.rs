//! Phase-space diffusion model of a quantum particle on a periodic line.
//!
//! A configuration wave function `ψ(y)` is lifted to a phase-space field
//! `φ(x, p)` that sits in the kernel of a gauge-twisted diffusion operator.
//! Hamiltonian transport drives `φ` off that kernel and diffusion pulls it
//! back; the projected motion is Schrödinger evolution with a smoothed
//! potential. The crate provides the operators, the time integrators, the
//! effective configuration-space Hamiltonian, a stochastic path estimator and
//! conversions from physical units.
//!
//! Units are arbitrary but consistent; `ħ` is a parameter. Only one spatial
//! dimension is supported.

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod diffusion;
pub mod effective;
pub mod error;
pub mod evolution;
pub mod io;
pub mod model;
pub mod physical;
pub mod projection;
pub mod spectral;
pub mod stochastic;
pub mod transport;

pub use diffusion::{apply_diffusion_generator, diffusion_spectrum, evolve_diffusion, DiffusionPropagator, DiffusionSpectrum};
pub use error::{Error, Result};
pub use model::{
    eval_hamiltonian, rotation_frequency, ConfigWaveFunction, GridSpec, HamiltonianFields, HamiltonianSpec,
    ModelParams, PhaseGrid, PhaseWaveFunction, Potential, XAxis,
};
pub use projection::{
    chi_kernel, config_density, lift_to_phase, phase_density, project_to_config, ChiKernel, PhaseDensity, Projector,
};
pub use effective::{
    apply_h_approx, apply_h_integral, solve_schrodinger, solve_schrodinger_traced, ApproxTerms, HOperator,
    IntegralHamiltonian, SchrodingerSample,
};
pub use evolution::{evolve_full, fast_slow_decompose, EvolutionTrace, FullPropagator};
pub use physical::{InternalUnits, PhysicalEnvironment, PhysicalReport};
pub use stochastic::{
    complex_weight, mc_wavefunction, sample_trajectories, ComplexWeight, McEstimate, StartDistribution, Trajectory,
    TrajectoryEnsemble,
};
pub use transport::{liouville_step, phase_rotation_step, rotation_multiplier, TransportPropagator};
