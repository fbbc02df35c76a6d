//! Tight-binding boxes, disorder and Peierls-dressed Hamiltonians.
//!
//! A [`LatticeBox`] is a finite piece of ℤᵈ (d ≤ 3): either a cube with
//! 2·Lbox+1 sites per axis ([`build_box`]) or a one-dimensional chain of
//! arbitrary length ([`build_chain`]). A designated *field region* — the
//! set of first-axis bonds whose endpoints both lie in a contiguous
//! coordinate span — carries the vector potential; the drive acts
//! uniformly on exactly those bonds.
//!
//! The one-particle Hamiltonian is the Anderson model with Peierls phases:
//!
//! ```text
//! h(x, y) = -exp(i η a(t))   ordered field bond x → y
//! h(x, y) = -1               any other nearest-neighbor bond
//! h(x, x) = V(x)             V i.i.d. uniform on [-λ, λ]
//! ```
//!
//! Hermiticity is exact by construction, never restored after the fact.
//! Site coordinates are 0-based; sites are indexed row-major with the
//! first coordinate slowest.

use crate::linalg::{CMat, C64};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("dimension {0} unsupported, expected 1, 2 or 3")]
    BadDimension(usize),
    #[error("half-width must be at least 1, got {0}")]
    BadHalfWidth(usize),
    #[error("chain needs at least 2 sites, got {0}")]
    BadChainLength(usize),
    #[error("field span [{lo}, {hi}] selects no bond")]
    EmptyFieldRegion { lo: i64, hi: i64 },
    #[error("disorder amplitude must be nonnegative, got {0}")]
    NegativeAmplitude(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Open,
    Periodic,
}

/// Contiguous interval of first-axis coordinates (0-based, inclusive)
/// whose internal bonds carry the drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSpan {
    Full,
    Range { lo: i64, hi: i64 },
}

/// Ordered nearest-neighbor bond `from → to` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
}

#[derive(Debug, Clone)]
pub struct LatticeBox {
    dimension: usize,
    side: usize,
    boundary: BoundaryCondition,
    bonds: Vec<Bond>,
    /// Indices into `bonds` forming the field region.
    field_bonds: Vec<usize>,
    span: (i64, i64),
}

impl LatticeBox {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    /// Sites per axis.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn field_bond_indices(&self) -> &[usize] {
        &self.field_bonds
    }

    pub fn field_bonds(&self) -> impl Iterator<Item = &Bond> {
        self.field_bonds.iter().map(|&i| &self.bonds[i])
    }

    /// Number of driven bonds; the volume |Λ| used for per-volume
    /// normalization of work and heat.
    pub fn field_bond_count(&self) -> usize {
        self.field_bonds.len()
    }

    pub fn field_span(&self) -> (i64, i64) {
        self.span
    }

    /// Row-major site index of a coordinate tuple, first coordinate slowest.
    pub fn site_index(&self, coords: &[i64]) -> usize {
        let side = self.side as i64;
        let mut idx = 0i64;
        for &c in coords {
            debug_assert!(c >= 0 && c < side);
            idx = idx * side + c;
        }
        idx as usize
    }

    /// Inverse of [`site_index`](Self::site_index).
    pub fn site_coords(&self, index: usize) -> Vec<i64> {
        let side = self.side;
        let mut rem = index;
        let mut coords = vec![0i64; self.dimension];
        for slot in coords.iter_mut().rev() {
            *slot = (rem % side) as i64;
            rem /= side;
        }
        coords
    }
}

/// Cubic box of ℤᵈ with 2·half_width+1 sites per axis.
pub fn build_box(
    dimension: usize,
    half_width: usize,
    boundary: BoundaryCondition,
    span: FieldSpan,
) -> Result<LatticeBox, LatticeError> {
    if dimension == 0 || dimension > 3 {
        return Err(LatticeError::BadDimension(dimension));
    }
    if half_width == 0 {
        return Err(LatticeError::BadHalfWidth(half_width));
    }
    build_sized(dimension, 2 * half_width + 1, boundary, span)
}

/// One-dimensional chain of `n_sites` sites. The acceptance experiments
/// use even lengths (2, 6, 8, 32, 64 sites) not reachable through the
/// odd-sided cube parametrization.
pub fn build_chain(
    n_sites: usize,
    boundary: BoundaryCondition,
    span: FieldSpan,
) -> Result<LatticeBox, LatticeError> {
    if n_sites < 2 {
        return Err(LatticeError::BadChainLength(n_sites));
    }
    build_sized(1, n_sites, boundary, span)
}

fn build_sized(
    dimension: usize,
    side: usize,
    boundary: BoundaryCondition,
    span: FieldSpan,
) -> Result<LatticeBox, LatticeError> {
    let max = side as i64 - 1;
    let (lo, hi) = match span {
        FieldSpan::Full => (0, max),
        FieldSpan::Range { lo, hi } => (lo.max(0), hi.min(max)),
    };

    let mut skeleton = LatticeBox {
        dimension,
        side,
        boundary,
        bonds: Vec::new(),
        field_bonds: Vec::new(),
        span: (lo, hi),
    };

    let sites = skeleton.site_count();
    let mut bonds = Vec::new();
    let mut field_bonds = Vec::new();

    // Walk sites in index order, emit the +e_axis bond from each site.
    for index in 0..sites {
        let coords = skeleton.site_coords(index);
        for axis in 0..dimension {
            let mut neighbor = coords.clone();
            neighbor[axis] += 1;
            let wrapped = neighbor[axis] > max;
            if wrapped {
                match boundary {
                    BoundaryCondition::Open => continue,
                    BoundaryCondition::Periodic => {
                        if side == 2 {
                            // the wrap bond would duplicate the open one
                            continue;
                        }
                        neighbor[axis] -= side as i64;
                    }
                }
            }
            let to = skeleton.site_index(&neighbor);
            let in_span = axis == 0
                && coords[0] >= lo
                && coords[0] <= hi
                && neighbor[0] >= lo
                && neighbor[0] <= hi
                // A periodic wrap bond joins the span ends only when the
                // span covers the whole axis.
                && (!wrapped || (lo == 0 && hi == max));
            if in_span {
                field_bonds.push(bonds.len());
            }
            bonds.push(Bond {
                from: index,
                to,
                axis,
            });
        }
    }

    if field_bonds.is_empty() {
        return Err(LatticeError::EmptyFieldRegion { lo, hi });
    }

    skeleton.bonds = bonds;
    skeleton.field_bonds = field_bonds;
    Ok(skeleton)
}

/// Frozen disorder realization: V(x) i.i.d. uniform on [-λ, λ].
///
/// The generator is ChaCha8 (rand_chacha 0.10) seeded with the given 64-bit
/// seed; each draw maps the top 53 bits of one `u64` output to [0, 1) and
/// then affinely to [-λ, λ]. Identical (seed, box, λ) reproduce the values
/// bit for bit.
#[derive(Debug, Clone)]
pub struct DisorderField {
    values: Vec<f64>,
    amplitude: f64,
    seed: u64,
}

impl DisorderField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

pub fn sample_disorder(
    box_: &LatticeBox,
    amplitude: f64,
    seed: u64,
) -> Result<DisorderField, LatticeError> {
    if amplitude < 0.0 {
        return Err(LatticeError::NegativeAmplitude(amplitude));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..box_.site_count())
        .map(|_| {
            let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            amplitude * (2.0 * unit - 1.0)
        })
        .collect();
    Ok(DisorderField {
        values,
        amplitude,
        seed,
    })
}

/// Smooth compactly supported drive waveforms a(t) on [s, s+T].
///
/// Both families vanish together with their derivative at the support
/// endpoints, so every process they induce is cyclic. `BumpSin` uses the
/// C^∞ bump exp(1 - 1/(1-u²)); `PolySin` uses the C^k envelope (1-u²)^k,
/// k ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    BumpSin { start: f64, length: f64, omega: f64 },
    PolySin { start: f64, length: f64, omega: f64, order: u32 },
}

impl Waveform {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Waveform::BumpSin { start, length, .. } => (start, start + length),
            Waveform::PolySin { start, length, .. } => (start, start + length),
        }
    }

    pub fn omega(&self) -> f64 {
        match *self {
            Waveform::BumpSin { omega, .. } => omega,
            Waveform::PolySin { omega, .. } => omega,
        }
    }

    pub fn family_id(&self) -> &'static str {
        match self {
            Waveform::BumpSin { .. } => "bump_sin",
            Waveform::PolySin { .. } => "poly_sin",
        }
    }

    fn envelope(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        match *self {
            Waveform::BumpSin { .. } => (1.0 - 1.0 / (1.0 - u * u)).exp(),
            Waveform::PolySin { order, .. } => (1.0 - u * u).powi(order as i32),
        }
    }

    fn envelope_du(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - u * u;
        match *self {
            Waveform::BumpSin { .. } => self.envelope(u) * (-2.0 * u / (w * w)),
            Waveform::PolySin { order, .. } => {
                -2.0 * u * (order as f64) * w.powi(order as i32 - 1)
            }
        }
    }

    /// a(t).
    pub fn amplitude(&self, t: f64) -> f64 {
        let (s, e) = self.support();
        if t <= s || t >= e {
            return 0.0;
        }
        let length = e - s;
        let u = 2.0 * (t - s) / length - 1.0;
        self.envelope(u) * (self.omega() * (t - s)).sin()
    }

    /// ∂ₜa(t), analytic.
    pub fn amplitude_dot(&self, t: f64) -> f64 {
        let (s, e) = self.support();
        if t <= s || t >= e {
            return 0.0;
        }
        let length = e - s;
        let u = 2.0 * (t - s) / length - 1.0;
        let phase = self.omega() * (t - s);
        self.envelope_du(u) * (2.0 / length) * phase.sin()
            + self.envelope(u) * self.omega() * phase.cos()
    }
}

/// Drive strength η together with the scalar waveform it multiplies. The
/// potential acts uniformly on every field-region bond and nowhere else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorPotential {
    pub eta: f64,
    pub waveform: Waveform,
}

impl VectorPotential {
    /// Peierls phase θ(t) = η·a(t).
    pub fn phase(&self, t: f64) -> f64 {
        self.eta * self.waveform.amplitude(t)
    }

    /// θ̇(t) = η·∂ₜa(t).
    pub fn phase_dot(&self, t: f64) -> f64 {
        self.eta * self.waveform.amplitude_dot(t)
    }

    /// Electric field in the Weyl gauge, E(t) = -∂ₜ(η a).
    pub fn electric_field(&self, t: f64) -> f64 {
        -self.phase_dot(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub amplitude: f64,
    pub seed: u64,
    pub eta: f64,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct OneParticleHamiltonian {
    pub matrix: CMat,
    pub provenance: Provenance,
}

/// Assembles h(t): hopping -1 everywhere, the field-region bonds dressed
/// with the phase θ(t) = η·a(t), disorder on the diagonal. Conjugate
/// entries are written explicitly, so ‖h - h†‖_max = 0 exactly.
pub fn assemble_hamiltonian(
    box_: &LatticeBox,
    disorder: &DisorderField,
    potential: &VectorPotential,
    t: f64,
) -> OneParticleHamiltonian {
    let theta = potential.phase(t);
    let matrix = hamiltonian_matrix(box_, disorder, theta);
    OneParticleHamiltonian {
        matrix,
        provenance: Provenance {
            amplitude: disorder.amplitude(),
            seed: disorder.seed(),
            eta: potential.eta,
            time: t,
        },
    }
}

/// The matrix of h at a fixed Peierls phase θ on the field region.
pub fn hamiltonian_matrix(box_: &LatticeBox, disorder: &DisorderField, theta: f64) -> CMat {
    let n = box_.site_count();
    let mut h = CMat::zeros(n, n);
    for (i, &v) in disorder.values().iter().enumerate() {
        h[(i, i)] = C64::new(v, 0.0);
    }
    let mut is_field = vec![false; box_.bonds().len()];
    for &fi in box_.field_bond_indices() {
        is_field[fi] = true;
    }
    let dressed = -C64::from_polar(1.0, theta);
    for (bi, bond) in box_.bonds().iter().enumerate() {
        let hop = if is_field[bi] {
            dressed
        } else {
            C64::new(-1.0, 0.0)
        };
        h[(bond.from, bond.to)] += hop;
        h[(bond.to, bond.from)] += hop.conj();
    }
    h
}

/// Spectral-radius bound 2d + λ from Gershgorin, used for step-size and
/// frequency-range defaults.
pub fn spectral_radius_bound(box_: &LatticeBox, disorder: &DisorderField) -> f64 {
    2.0 * box_.dimension() as f64 + disorder.amplitude()
}
