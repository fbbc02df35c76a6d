//! Unitary propagation under the time-dependent one-particle Hamiltonian.
//!
//! The stepper is the midpoint Cayley (Crank–Nicolson) scheme
//!
//! ```text
//! U ← (1 + i·Δt/2·h(t+Δt/2))⁻¹ (1 - i·Δt/2·h(t+Δt/2)) U,
//! ```
//!
//! the (1,1)-Padé realization of the exponential midpoint rule: unitary in
//! exact arithmetic for Hermitian h, local error O(Δt³), global O(Δt²) —
//! also for a time-independent generator, which keeps the convergence
//! order measurable against the exact spectral exponential. Unitarity is
//! checked at every grid node and a drift beyond 1e-8 aborts the run.
//!
//! Driving enters either through Peierls phases on the field-region bonds
//! ([`PeierlsDriven`]) or as a general Hermitian pulse c(t)·P used by the
//! n-fold-copy passivity probes ([`PulseDriven`]).

use crate::lattice::{DisorderField, LatticeBox, VectorPotential, Waveform};
use crate::linalg::{identity, trace_of_product, unitarity_defect, CMat, C64};
use crate::state::QuasiFreeState;
use faer::linalg::solvers::Solve;
use thiserror::Error;

pub const UNITARITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("process length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("drive strength must be nonnegative, got {0}")]
    NegativeStrength(f64),
    #[error("poly envelope needs smoothness order >= 2, got {0}")]
    BadSmoothness(u32),
    #[error("unitarity drift {defect:.3e} at node {node} (t = {t}) exceeds {UNITARITY_TOLERANCE:.0e}")]
    UnitarityDrift { node: usize, t: f64, defect: f64 },
    #[error("time grid [{grid_start}, {grid_end}] does not cover the process support [{support_start}, {support_end}]")]
    GridDoesNotCoverSupport {
        grid_start: f64,
        grid_end: f64,
        support_start: f64,
        support_end: f64,
    },
}

/// Uniform time grid with `n_steps + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start: f64,
    step: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid from `start` to `end` with step no larger than `max_step`,
    /// landing on `end` exactly.
    pub fn covering(start: f64, end: f64, max_step: f64) -> TimeGrid {
        assert!(end > start, "empty time interval");
        assert!(max_step > 0.0, "step must be positive");
        let n_steps = ((end - start) / max_step).ceil().max(1.0) as usize;
        TimeGrid {
            start,
            step: (end - start) / n_steps as f64,
            n_steps,
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * self.n_steps as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn node(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |k| self.node(k))
    }

    pub fn covers(&self, start: f64, end: f64) -> bool {
        self.start <= start + 1e-12 && self.end() >= end - 1e-12
    }

    /// Halved step on the same interval, for Richardson checks.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid {
            start: self.start,
            step: self.step / 2.0,
            n_steps: self.n_steps * 2,
        }
    }
}

/// Step-size rule Δt = min(0.05/ω, 0.1/‖h‖)/refinement. The refinement
/// factor tightens the work-identity mismatch, which scales as Δt².
pub fn default_step(omega: f64, h_norm_bound: f64, refinement: f64) -> f64 {
    let by_omega = if omega > 0.0 { 0.05 / omega } else { f64::MAX };
    let by_norm = 0.1 / h_norm_bound.max(1e-12);
    by_omega.min(by_norm) / refinement.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveformFamily {
    BumpSin,
    PolySin,
}

/// Compactly supported drive ηa(t) with its Weyl-gauge field E = -∂ₜ(ηa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicProcess {
    pub potential: VectorPotential,
}

impl CyclicProcess {
    pub fn support(&self) -> (f64, f64) {
        self.potential.waveform.support()
    }

    pub fn omega(&self) -> f64 {
        self.potential.waveform.omega()
    }

    pub fn eta(&self) -> f64 {
        self.potential.eta
    }

    pub fn family_id(&self) -> &'static str {
        self.potential.waveform.family_id()
    }

    /// a(t), the strength-1 waveform.
    pub fn amplitude(&self, t: f64) -> f64 {
        self.potential.waveform.amplitude(t)
    }

    /// ∂ₜa(t).
    pub fn amplitude_dot(&self, t: f64) -> f64 {
        self.potential.waveform.amplitude_dot(t)
    }

    /// E(t) = -∂ₜ(η a).
    pub fn electric_field(&self, t: f64) -> f64 {
        self.potential.electric_field(t)
    }
}

/// Builds the bump×sinusoid family: a(t) = envelope(t)·sin(ω(t-s)) with a
/// compactly supported envelope on [s, s+T]. `smoothness` is ignored for
/// the C^∞ bump and is the polynomial order k ≥ 2 for `PolySin`.
pub fn make_cyclic_process(
    family: WaveformFamily,
    start: f64,
    length: f64,
    eta: f64,
    omega: f64,
    smoothness: u32,
) -> Result<CyclicProcess, DynamicsError> {
    if length <= 0.0 || length.is_nan() {
        return Err(DynamicsError::NonPositiveLength(length));
    }
    if eta < 0.0 {
        return Err(DynamicsError::NegativeStrength(eta));
    }
    let waveform = match family {
        WaveformFamily::BumpSin => Waveform::BumpSin {
            start,
            length,
            omega,
        },
        WaveformFamily::PolySin => {
            if smoothness < 2 {
                return Err(DynamicsError::BadSmoothness(smoothness));
            }
            Waveform::PolySin {
                start,
                length,
                omega,
                order: smoothness,
            }
        }
    };
    Ok(CyclicProcess {
        potential: VectorPotential { eta, waveform },
    })
}

/// Time-dependent Hermitian generator h(t) with analytic ∂ₜh.
pub trait DrivenHamiltonian: Sync {
    fn dim(&self) -> usize;

    /// h outside the drive support.
    fn base(&self) -> CMat;

    fn at(&self, t: f64) -> CMat;

    fn time_derivative(&self, t: f64) -> CMat;

    fn support(&self) -> (f64, f64);

    /// Tr(D(t)·∂ₜh(t)) given U(t) and A(t) = U(t)ρ; D = A·U†.
    fn power(&self, t: f64, u: &CMat, u_rho: &CMat) -> f64 {
        let d = u_rho * u.adjoint();
        trace_of_product(&d, &self.time_derivative(t)).re
    }
}

/// Peierls coupling of a cyclic process to the field region of a box.
pub struct PeierlsDriven<'a> {
    box_: &'a LatticeBox,
    process: &'a CyclicProcess,
    base: CMat,
    /// (from, to) site pairs of the driven bonds.
    field_pairs: Vec<(usize, usize)>,
}

impl<'a> PeierlsDriven<'a> {
    pub fn new(
        box_: &'a LatticeBox,
        disorder: &'a DisorderField,
        process: &'a CyclicProcess,
    ) -> Self {
        let base = crate::lattice::hamiltonian_matrix(box_, disorder, 0.0);
        let field_pairs = box_.field_bonds().map(|b| (b.from, b.to)).collect();
        PeierlsDriven {
            box_,
            process,
            base,
            field_pairs,
        }
    }

    pub fn box_ref(&self) -> &LatticeBox {
        self.box_
    }

    pub fn process(&self) -> &CyclicProcess {
        self.process
    }
}

impl DrivenHamiltonian for PeierlsDriven<'_> {
    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn base(&self) -> CMat {
        self.base.clone()
    }

    fn at(&self, t: f64) -> CMat {
        let theta = self.process.potential.phase(t);
        let mut h = self.base.clone();
        let hop = -C64::from_polar(1.0, theta);
        for &(from, to) in &self.field_pairs {
            h[(from, to)] = hop;
            h[(to, from)] = hop.conj();
        }
        h
    }

    fn time_derivative(&self, t: f64) -> CMat {
        // ∂ₜh = θ'(t)·I(θ) with I(θ) = -i e^{iθ} on ordered field bonds
        let theta = self.process.potential.phase(t);
        let theta_dot = self.process.potential.phase_dot(t);
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        let entry = C64::new(0.0, -theta_dot) * C64::from_polar(1.0, theta);
        for &(from, to) in &self.field_pairs {
            m[(from, to)] = entry;
            m[(to, from)] = entry.conj();
        }
        m
    }

    fn support(&self) -> (f64, f64) {
        self.process.support()
    }

    fn power(&self, t: f64, u: &CMat, u_rho: &CMat) -> f64 {
        // Tr(D·∂ₜh) over the driven bonds only: D is Hermitian and ∂ₜh is
        // supported on the field pairs, so the trace collapses to
        // Σ_bonds 2·Re(X_{uv}·D_{vu}) at O(bonds·N) cost.
        let theta = self.process.potential.phase(t);
        let theta_dot = self.process.potential.phase_dot(t);
        if theta_dot == 0.0 {
            return 0.0;
        }
        let x_uv = C64::new(0.0, -theta_dot) * C64::from_polar(1.0, theta);
        let n = self.dim();
        let mut total = 0.0;
        for &(from, to) in &self.field_pairs {
            let mut d_vu = C64::new(0.0, 0.0);
            for c in 0..n {
                d_vu += u_rho[(to, c)] * u[(from, c)].conj();
            }
            total += 2.0 * (x_uv * d_vu).re;
        }
        total
    }
}

/// General Hermitian pulse h(t) = h_base + c(t)·P with a cyclic scalar
/// envelope; the coupling operator P may join direct-sum copies.
pub struct PulseDriven {
    pub base: CMat,
    pub coupling: CMat,
    pub envelope: Waveform,
}

impl DrivenHamiltonian for PulseDriven {
    fn dim(&self) -> usize {
        self.base.nrows()
    }

    fn base(&self) -> CMat {
        self.base.clone()
    }

    fn at(&self, t: f64) -> CMat {
        let c = self.envelope.amplitude(t);
        let n = self.dim();
        let mut h = self.base.clone();
        for j in 0..n {
            for i in 0..n {
                h[(i, j)] += C64::new(c, 0.0) * self.coupling[(i, j)];
            }
        }
        h
    }

    fn time_derivative(&self, t: f64) -> CMat {
        let cdot = self.envelope.amplitude_dot(t);
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] = C64::new(cdot, 0.0) * self.coupling[(i, j)];
            }
        }
        m
    }

    fn support(&self) -> (f64, f64) {
        self.envelope.support()
    }
}

/// Final-time unitary of a propagation together with the worst unitarity
/// defect seen along the way.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub u: CMat,
    pub unitarity_drift: f64,
    pub grid: TimeGrid,
}

/// Advances U (and optionally A = U·ρ) across the grid with midpoint
/// Cayley steps, invoking the observer at every node, node 0 included.
/// The spectator matrix shares each step's LU factorization.
pub fn propagate_with<F>(
    driven: &dyn DrivenHamiltonian,
    grid: &TimeGrid,
    rho: Option<&CMat>,
    mut observe: F,
) -> Result<Propagator, DynamicsError>
where
    F: FnMut(usize, f64, &CMat, Option<&CMat>),
{
    let n = driven.dim();
    let mut u = identity(n);
    let mut u_rho = rho.cloned();
    let mut drift = 0.0f64;

    for node in 0..grid.n_nodes() {
        let t = grid.node(node);
        let defect = unitarity_defect(&u);
        drift = drift.max(defect);
        // written so a NaN defect (poisoned input) also rejects the step
        if defect > UNITARITY_TOLERANCE || defect.is_nan() {
            return Err(DynamicsError::UnitarityDrift { node, t, defect });
        }
        observe(node, t, &u, u_rho.as_ref());
        if node == grid.n_steps() {
            break;
        }

        let h_mid = driven.at(t + 0.5 * grid.step());
        let half = C64::new(0.0, 0.5 * grid.step());
        let mut m_plus = CMat::zeros(n, n);
        let mut m_minus = CMat::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let shift = half * h_mid[(i, j)];
                let id = if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                m_plus[(i, j)] = id + shift;
                m_minus[(i, j)] = id - shift;
            }
        }
        let lu = m_plus.partial_piv_lu();
        u = lu.solve(&(&m_minus * &u));
        if let Some(a) = u_rho.as_mut() {
            *a = lu.solve(&(&m_minus * &*a));
        }
    }

    Ok(Propagator {
        u,
        unitarity_drift: drift,
        grid: *grid,
    })
}

/// U(t_end, t_start) for the driven Hamiltonian on the given grid.
pub fn evolve_propagator(
    driven: &dyn DrivenHamiltonian,
    grid: &TimeGrid,
) -> Result<Propagator, DynamicsError> {
    let (s, e) = driven.support();
    if !grid.covers(s, e) {
        return Err(DynamicsError::GridDoesNotCoverSupport {
            grid_start: grid.start(),
            grid_end: grid.end(),
            support_start: s,
            support_end: e,
        });
    }
    propagate_with(driven, grid, None, |_, _, _, _| {})
}

/// Schrödinger-picture one-particle density matrix D = U ρ₁ U†.
pub fn evolve_density(state: &QuasiFreeState, u: &CMat) -> CMat {
    u * state.density_matrix() * u.adjoint()
}
