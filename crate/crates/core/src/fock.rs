//! Brute-force many-body reference on the full Fock space.
//!
//! For n ≤ 10 sites the 2ⁿ-dimensional Fock space is built explicitly:
//! quadratic observables dΓ(x) = Σ x_{ij} a†ᵢaⱼ as dense matrices with
//! Jordan–Wigner signs, the grand-canonical Gibbs state
//! e^{-β(H-μN)}/Z by exact diagonalization, and Heisenberg-evolved
//! correlation functions. Nothing here touches the quasi-free machinery;
//! this module exists so the Wick-reduced formulas elsewhere can be
//! checked against an independent computation.

use crate::linalg::{exact_unitary, hermitian_eigen, trace_of_product, CMat, C64};
use crate::state::KmsParameters;

const MAX_SITES: usize = 10;

/// Second quantization of a one-particle operator: dΓ(x) = Σ x_{ij} a†ᵢaⱼ
/// on the 2ⁿ-dimensional Fock space. Basis states are occupation
/// bitstrings, bit i = site i; the sign convention is the Jordan–Wigner
/// string (-1)^{Σ_{j<i} n_j}.
pub fn quadratic_observable(x: &CMat) -> CMat {
    let n = x.nrows();
    assert!(n <= MAX_SITES, "Fock space too large for {n} sites");
    let dim = 1usize << n;
    let mut op = CMat::zeros(dim, dim);
    for state in 0..dim {
        for j in 0..n {
            if state & (1 << j) == 0 {
                continue;
            }
            let after_j = state & !(1 << j);
            let sign_j = jw_sign(after_j, j);
            for i in 0..n {
                if after_j & (1 << i) != 0 {
                    continue;
                }
                let target = after_j | (1 << i);
                let sign_i = jw_sign(after_j, i);
                let amp = x[(i, j)] * (sign_i * sign_j) as f64;
                op[(target, state)] += amp;
            }
        }
    }
    op
}

fn jw_sign(state: usize, site: usize) -> i32 {
    let below = state & ((1usize << site) - 1);
    if below.count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// The many-body number operator dΓ(1).
pub fn number_operator(n_sites: usize) -> CMat {
    let dim = 1usize << n_sites;
    let mut op = CMat::zeros(dim, dim);
    for state in 0..dim {
        op[(state, state)] = C64::new(state.count_ones() as f64, 0.0);
    }
    op
}

/// Grand-canonical Gibbs density matrix e^{-β(H-μN)}/Z.
pub fn gibbs_density(h_many_body: &CMat, n_sites: usize, params: KmsParameters) -> CMat {
    let number = number_operator(n_sites);
    let dim = h_many_body.nrows();
    let mut k = CMat::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            k[(i, j)] = h_many_body[(i, j)] - C64::new(params.mu, 0.0) * number[(i, j)];
        }
    }
    let (eigvals, eigvecs) = hermitian_eigen(&k);
    // shift by the ground energy before exponentiating
    let e_min = eigvals.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eigvals
        .iter()
        .map(|&e| (-params.beta * (e - e_min)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    crate::linalg::spectral_function(&eigvals, &eigvecs, |e| {
        C64::new((-params.beta * (e - e_min)).exp() / z, 0.0)
    })
}

/// ⟨J(t)·J⟩ - ⟨J⟩² for J = dΓ(i_one_particle), evolved by H = dΓ(h) in
/// the Heisenberg picture, in the grand-canonical state of (h, β, μ).
pub fn connected_current_correlation(
    h_one_particle: &CMat,
    i_one_particle: &CMat,
    params: KmsParameters,
    t: f64,
) -> C64 {
    let n_sites = h_one_particle.nrows();
    let h_mb = quadratic_observable(h_one_particle);
    let j_mb = quadratic_observable(i_one_particle);
    let rho = gibbs_density(&h_mb, n_sites, params);
    // J conserves particle number, so evolving with H or H-μN is the same
    let u = exact_unitary(&h_mb, t);
    let j_t = u.adjoint() * &j_mb * &u;
    let mean = trace_of_product(&rho, &j_mb);
    let two_time = trace_of_product(&rho, &(&j_t * &j_mb));
    two_time - mean * mean
}

/// One-particle density matrix read off the many-body Gibbs state:
/// entries ⟨a†ⱼ aᵢ⟩.
pub fn one_particle_density(h_one_particle: &CMat, params: KmsParameters) -> CMat {
    let n = h_one_particle.nrows();
    let h_mb = quadratic_observable(h_one_particle);
    let rho = gibbs_density(&h_mb, n, params);
    let mut pdm = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // a†ⱼaᵢ = dΓ(E_ji) with E_ji the matrix unit
            let mut unit = CMat::zeros(n, n);
            unit[(j, i)] = C64::new(1.0, 0.0);
            let op = quadratic_observable(&unit);
            pdm[(i, j)] = trace_of_product(&rho, &op);
        }
    }
    pdm
}
