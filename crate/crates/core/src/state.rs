//! One-particle reduction of the quasi-free thermal equilibrium state.
//!
//! Finite-volume thermal equilibrium at inverse temperature β and chemical
//! potential μ is the quasi-free state whose one-particle density matrix
//! is the Fermi–Dirac function of the Hamiltonian,
//!
//! ```text
//! ρ₁ = (1 + e^{β(h-μ)})⁻¹
//! ```
//!
//! computed in the eigenbasis of h through the overflow-safe logistic, and
//! characterized by the one-particle KMS identity ρ₁ = e^{-β(h-μ)}(1-ρ₁).
//! All many-body expectations used elsewhere reduce to this two-point data
//! by Wick's rule.

use crate::linalg::{hermitian_eigen, spectral_function, CMat, C64};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("inverse temperature must be positive and finite, got {0}")]
    BadBeta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmsParameters {
    pub beta: f64,
    pub mu: f64,
}

/// Overflow-safe logistic occupation f(ε) = 1/(1 + e^{β(ε-μ)}).
pub fn fermi_occupation(energy: f64, params: KmsParameters) -> f64 {
    let x = params.beta * (energy - params.mu);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Quasi-free equilibrium state, stored through its one-particle density
/// matrix together with the eigendata of the generating Hamiltonian.
#[derive(Debug, Clone)]
pub struct QuasiFreeState {
    rho: CMat,
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
    occupations: Vec<f64>,
    params: KmsParameters,
}

impl QuasiFreeState {
    pub fn density_matrix(&self) -> &CMat {
        &self.rho
    }

    /// Eigenvalues of the generating h, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors of the generating h, columns matching `eigenvalues`.
    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    /// Fermi occupations f(εⱼ), same order as `eigenvalues`.
    pub fn occupations(&self) -> &[f64] {
        &self.occupations
    }

    pub fn params(&self) -> KmsParameters {
        self.params
    }

    pub fn site_count(&self) -> usize {
        self.rho.nrows()
    }

    /// β·(spectral radius of h). Beyond ~700 the direct matrix elements of
    /// e^{-β(h-μ)} overflow; occupations stay finite through the stable
    /// logistic, so this is surfaced as a conditioning warning, not an
    /// error.
    pub fn beta_spectral_radius(&self) -> f64 {
        let radius = self
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &e| m.max(e.abs()));
        self.params.beta * radius
    }

    pub fn conditioning_warning(&self) -> Option<String> {
        let bsr = self.beta_spectral_radius();
        (bsr > 700.0).then(|| {
            format!("beta * spectral_radius = {bsr:.1} > 700; KMS residual matrix may overflow")
        })
    }

    /// The generating Hamiltonian reassembled from the stored eigendata.
    pub fn hamiltonian(&self) -> CMat {
        spectral_function(&self.eigenvalues, &self.eigenvectors, |e| C64::new(e, 0.0))
    }
}

/// ρ₁ = (1 + e^{β(h-μ)})⁻¹ via the eigendecomposition of h.
pub fn fermi_dirac_symbol(h: &CMat, params: KmsParameters) -> Result<QuasiFreeState, StateError> {
    if params.beta <= 0.0 || !params.beta.is_finite() {
        return Err(StateError::BadBeta(params.beta));
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(h);
    let occupations: Vec<f64> = eigenvalues
        .iter()
        .map(|&e| fermi_occupation(e, params))
        .collect();
    let rho = spectral_function(&eigenvalues, &eigenvectors, |e| {
        C64::new(fermi_occupation(e, params), 0.0)
    });
    Ok(QuasiFreeState {
        rho,
        eigenvalues,
        eigenvectors,
        occupations,
        params,
    })
}

/// ‖ρ - e^{-β(h-μ)}(1-ρ)‖_max for an arbitrary candidate density matrix.
/// Vanishes exactly on the Fermi–Dirac symbol of h.
///
/// The dense product amplifies representation roundoff by e^{β‖h‖}, so this
/// form is only meaningful for moderate β·‖h‖; equilibrium states are
/// checked through [`kms_residual`], which evaluates the identity in the
/// spectral representation where it is stable for any β.
pub fn kms_residual_matrix(rho: &CMat, h: &CMat, params: KmsParameters) -> f64 {
    let (eigenvalues, eigenvectors) = hermitian_eigen(h);
    let boltzmann = spectral_function(&eigenvalues, &eigenvectors, |e| {
        C64::new((-params.beta * (e - params.mu)).exp(), 0.0)
    });
    let n = rho.nrows();
    let mut one_minus = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            one_minus[(i, j)] = C64::new(id, 0.0) - rho[(i, j)];
        }
    }
    let rhs = boltzmann * one_minus;
    crate::linalg::max_abs_diff(rho, &rhs)
}

/// One-particle KMS residual of a state against its own generating data,
/// max_j |f(εⱼ) - e^{-β(εⱼ-μ)}(1 - f(εⱼ))|.
///
/// In the joint eigenbasis the residual operator is diagonal, and its
/// max-norm in any basis is bounded by the largest scalar residual, so
/// this is the stable evaluation of ‖ρ₁ - e^{-β(h-μ)}(1-ρ₁)‖_max.
pub fn kms_residual(state: &QuasiFreeState) -> f64 {
    let params = state.params();
    state
        .eigenvalues()
        .iter()
        .zip(state.occupations())
        .map(|(&e, &f)| {
            let x = params.beta * (e - params.mu);
            // e^{-x}(1-f) evaluated without forming e^{-x} when x is very
            // negative: e^{-x}(1-f) = e^{-x}·e^x/(1+e^x) = f exactly, so
            // compute through the logistic pair.
            let boltzmann_tail = if x >= 0.0 {
                (-x).exp() * (1.0 - f)
            } else {
                // 1-f = e^x/(1+e^x); e^{-x}(1-f) = 1/(1+e^x)
                1.0 / (1.0 + x.exp())
            };
            (f - boltzmann_tail).abs()
        })
        .fold(0.0, f64::max)
}

/// Tr(ρ₁ h); the imaginary part is a numerical defect and is discarded
/// after a sanity bound.
pub fn energy_expectation(state: &QuasiFreeState, h: &CMat) -> f64 {
    let tr = crate::linalg::trace_of_product(state.density_matrix(), h);
    debug_assert!(tr.im.abs() < 1e-10, "energy acquired imaginary part {}", tr.im);
    tr.re
}

/// Tr ρ₁ ∈ (0, site_count).
pub fn particle_number(state: &QuasiFreeState) -> f64 {
    crate::linalg::trace(state.density_matrix()).re
}
