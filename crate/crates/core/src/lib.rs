//! Thermodynamics of driven free lattice fermions.
//!
//! This crate simulates spinless tight-binding fermions on finite boxes of
//! ℤᵈ with i.i.d. on-site disorder, prepared in thermal equilibrium and
//! driven by a compactly supported vector potential coupled through Peierls
//! phases. From the driven unitary dynamics it computes
//!
//! - the electromagnetic work of cyclic processes and its passivity
//!   (Kelvin–Planck form of the 2nd law for KMS states),
//! - the quadratic heat-production coefficient per unit volume of the
//!   driven region,
//! - equilibrium current–current time correlations and the positive
//!   spectral measure μ̃ they define,
//! - the AC-conductivity measure dμ(ν) = ν⁻² dμ̃(ν) together with Joule's
//!   law in spectral form, and
//! - ensemble-averaged conductivity histograms with a Drude (Lorentzian)
//!   fit.
//!
//! Units: ħ = 1, lattice spacing = 1, charge = 1, hopping amplitude 1.
//! Fourier transforms are unitary in angular frequency,
//! â(ν) = (2π)^{-1/2} ∫ a(t) e^{-iνt} dt; volume normalization is per bond
//! of the driven region. Every output file states these conventions.

pub mod dynamics;
pub mod experiment;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod measure;
pub mod response;
pub mod state;

pub use lattice::{
    assemble_hamiltonian, build_box, sample_disorder, BoundaryCondition, DisorderField, FieldSpan,
    LatticeBox, OneParticleHamiltonian, VectorPotential, Waveform,
};
pub use state::{fermi_dirac_symbol, kms_residual, KmsParameters, QuasiFreeState};
