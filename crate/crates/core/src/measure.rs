//! Heat-production and AC-conductivity measures, Joule's law, Drude fits.
//!
//! At finite volume the heat-production measure μ̃ is purely atomic. With
//! eigendata (εⱼ, φⱼ) of h, occupations fⱼ, and the paramagnetic current
//! I on |Λ| driven bonds,
//!
//! ```text
//! μ̃ = Σ_{j≠k} w_{jk} δ(ν - ν_{jk}),    ν_{jk} = ε_k - ε_j,
//! w_{jk} = (π/|Λ|)·(fⱼ - f_k)·ν_{jk}·|⟨φⱼ|I|φ_k⟩|²,
//! ```
//!
//! fixed by requiring Q = ∫dμ̃(ν)|â(ν)|² to reproduce the Duhamel heat
//! coefficient (the second-order expansion of the work quadrature checks
//! this numerically). Monotonicity of the Fermi function makes
//! (fⱼ-f_k)·ν_{jk} ≥ 0, so every weight is nonnegative — the finite-volume
//! face of the Bochner positivity that the second law forces. The
//! AC-conductivity measure is dμ(ν) = ν⁻²dμ̃(ν) away from ν = 0.
//!
//! The independent route to μ̃ transforms time data: the response kernel
//! χ(t) = (2π/|Λ|)·∂ₜIm C(t) derived from sampled current correlations is
//! of positive type, and its windowed Fourier transform, binned, must
//! agree with the binned atoms. Fourier conventions are unitary in
//! angular frequency throughout: â(ν) = (2π)^{-1/2}∫a(t)e^{-iνt}dt, and
//! spectra of sampled kernels are densities against dν,
//! σ(ν) = (2π)^{-1}∫C(t)e^{iνt}dt.

use crate::dynamics::CyclicProcess;
use crate::response::{CorrelationKernel, CurrentObservable};
use crate::state::QuasiFreeState;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("atom weight {weight:.3e} at nu = {nu:.6} below -1e-12")]
    NegativeWeight { nu: f64, weight: f64 },
    #[error("spectral leakage: most negative bin {worst:.3e} under -1e-3 of max bin {max_bin:.3e}")]
    ExcessiveLeakage { worst: f64, max_bin: f64 },
    #[error("kernel samples must live on a symmetric grid (odd count), got {0}")]
    AsymmetricSamples(usize),
    #[error("spectrum is missing frequency {0}")]
    MissingFrequency(f64),
    #[error("field spectrum requested inside the excluded zone |nu| < {eps0}: nu = {nu}")]
    SupportViolation { nu: f64, eps0: f64 },
    #[error("histograms live on different grids")]
    GridMismatch,
    #[error("malformed histogram line {line}: {reason}")]
    MalformedHistogram { line: usize, reason: String },
}

/// Positive atomic measure on the frequency axis.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    /// (ν, weight), sorted by ν, weights ≥ 0.
    atoms: Vec<(f64, f64)>,
    /// Mass routed to the ν ≈ 0 bucket (|ν| below the exclusion radius).
    pub zero_bucket_mass: f64,
    /// Atoms whose tiny negative weight (≥ -1e-12) was clipped to zero.
    pub clipped_atoms: usize,
    /// Suggested histogram bin width; mean level spacing / 4 at build time.
    pub bin_hint: f64,
}

impl SpectralMeasure {
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.atoms.iter().map(|&(nu, _)| nu).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Histogram view on the shared symmetric bin grid.
    pub fn binned(&self, bin_width: f64, nu_max: f64) -> BinnedMeasure {
        let mut hist = BinnedMeasure::zeros(bin_width, nu_max);
        for &(nu, w) in &self.atoms {
            if let Some(idx) = hist.bin_index(nu) {
                hist.masses[idx] += w;
            }
        }
        hist
    }
}

/// dμ(ν) = ν⁻²dμ̃(ν) restricted to |ν| ≥ ε₀.
#[derive(Debug, Clone)]
pub struct ConductivityMeasure {
    atoms: Vec<(f64, f64)>,
    pub eps0: f64,
    /// μ̃ mass at |ν| < ε₀ that was reported, not transformed.
    pub excluded_mass: f64,
}

impl ConductivityMeasure {
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.atoms.iter().map(|&(nu, _)| nu).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn binned(&self, bin_width: f64, nu_max: f64) -> BinnedMeasure {
        let mut hist = BinnedMeasure::zeros(bin_width, nu_max);
        for &(nu, w) in &self.atoms {
            if let Some(idx) = hist.bin_index(nu) {
                hist.masses[idx] += w;
            }
        }
        hist
    }
}

/// Histogram on bins centered at k·Δν, k = -K..K; the exchange format for
/// ensemble averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMeasure {
    pub centers: Vec<f64>,
    pub masses: Vec<f64>,
    /// Standard errors; zero until ensemble-averaged.
    pub stderr: Vec<f64>,
    pub bin_width: f64,
}

impl BinnedMeasure {
    pub fn zeros(bin_width: f64, nu_max: f64) -> BinnedMeasure {
        assert!(bin_width > 0.0);
        let k_max = (nu_max / bin_width).ceil() as i64;
        let centers = (-k_max..=k_max).map(|k| k as f64 * bin_width).collect();
        let n = 2 * k_max as usize + 1;
        BinnedMeasure {
            centers,
            masses: vec![0.0; n],
            stderr: vec![0.0; n],
            bin_width,
        }
    }

    pub fn bin_index(&self, nu: f64) -> Option<usize> {
        let k = (nu / self.bin_width).round() as i64;
        let k_max = (self.centers.len() as i64 - 1) / 2;
        if k.abs() > k_max {
            return None;
        }
        Some((k + k_max) as usize)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Σ_b |m_b - other_b|, the L1 (total-variation) discrepancy.
    pub fn l1_distance(&self, other: &BinnedMeasure) -> Result<f64, MeasureError> {
        if self.centers.len() != other.centers.len()
            || (self.bin_width - other.bin_width).abs() > 1e-12
        {
            return Err(MeasureError::GridMismatch);
        }
        Ok(self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

/// Mean level spacing / 4, the default histogram resolution.
pub fn default_bin_width(eigenvalues: &[f64]) -> f64 {
    let n = eigenvalues.len();
    assert!(n >= 2);
    let span = eigenvalues[n - 1] - eigenvalues[0];
    span / (n - 1) as f64 / 4.0
}

/// Zero-frequency exclusion radius, 1e-3 × spectral radius.
pub fn default_eps0(h_norm: f64) -> f64 {
    1e-3 * h_norm
}

/// μ̃ from eigendata: atoms (ν_{jk}, (π/|Λ|)(fⱼ-f_k)ν_{jk}|Ĩ_{jk}|²) for
/// |ν_{jk}| ≥ ε₀; closer pairs are routed to the ν ≈ 0 bucket. Weights
/// within -1e-12 of zero are clipped and counted; anything more negative
/// is an error.
pub fn spectral_measure_from_diagonalization(
    state: &QuasiFreeState,
    current: &CurrentObservable,
    eps0: f64,
) -> Result<SpectralMeasure, MeasureError> {
    let eigvecs = state.eigenvectors();
    let tilde = eigvecs.adjoint() * &current.paramagnetic * eigvecs;
    let f = state.occupations();
    let e = state.eigenvalues();
    let n = e.len();
    let volume = current.n_field_bonds as f64;

    let mut atoms = Vec::with_capacity(n * (n - 1));
    let mut zero_bucket = 0.0;
    let mut clipped = 0usize;
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let nu = e[k] - e[j];
            let mut w = PI / volume * (f[j] - f[k]) * nu * tilde[(j, k)].norm_sqr();
            if w < 0.0 {
                if w < -1e-12 {
                    return Err(MeasureError::NegativeWeight { nu, weight: w });
                }
                w = 0.0;
                clipped += 1;
            }
            if nu.abs() < eps0 {
                zero_bucket += w;
            } else {
                atoms.push((nu, w));
            }
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SpectralMeasure {
        atoms,
        zero_bucket_mass: zero_bucket,
        clipped_atoms: clipped,
        bin_hint: default_bin_width(e),
    })
}

/// dμ(ν) = ν⁻² dμ̃(ν) on |ν| ≥ ε₀; μ̃ mass closer to zero is reported in
/// `excluded_mass`, never transformed.
pub fn conductivity_from_mu_tilde(mu_tilde: &SpectralMeasure, eps0: f64) -> ConductivityMeasure {
    assert!(eps0 > 0.0, "exclusion radius must be positive");
    let mut atoms = Vec::with_capacity(mu_tilde.atoms.len());
    let mut excluded = mu_tilde.zero_bucket_mass;
    for &(nu, w) in &mu_tilde.atoms {
        if nu.abs() < eps0 {
            excluded += w;
        } else {
            atoms.push((nu, w / (nu * nu)));
        }
    }
    ConductivityMeasure {
        atoms,
        eps0,
        excluded_mass: excluded,
    }
}

/// Taper applied to time samples before the windowed transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
    Blackman,
}

impl Window {
    fn weight(&self, t: f64, t_max: f64) -> f64 {
        let x = PI * t / t_max;
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 0.5 * (1.0 + x.cos()),
            Window::Blackman => 0.42 + 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::Blackman => "blackman",
        }
    }
}

/// Windowed-transform result with its leakage diagnostics.
#[derive(Debug, Clone)]
pub struct BochnerReport {
    pub measure: BinnedMeasure,
    /// Most negative raw bin before clipping; leakage indicator.
    pub max_negative_bin: f64,
    pub clipped_bins: usize,
    pub window: Window,
}

/// Binned Fourier transform of positive-type samples on a symmetric
/// uniform grid: each bin mass is
///
/// ```text
/// M_b = ∫ dt w(t)·C_h(t)·(2π)⁻¹ ∫_bin e^{iνt} dν
/// ```
///
/// with C_h the Hermitian part ½(C(t) + conj C(-t)) and the inner
/// frequency integral in closed form. For C of positive type the bins are
/// nonnegative up to window leakage; a bin below -1e-3 of the maximum is
/// an error, smaller negatives are clipped and counted.
pub fn bochner_measure_from_samples(
    dt: f64,
    values: &[C64],
    window: Window,
    bin_width: f64,
    nu_max: f64,
) -> Result<BochnerReport, MeasureError> {
    if values.len().is_multiple_of(2) || values.len() < 3 {
        return Err(MeasureError::AsymmetricSamples(values.len()));
    }
    let n_half = values.len() / 2;
    let t_max = n_half as f64 * dt;

    // Hermitian (positive-type) part, with the trapezoid end weights and
    // the taper folded in once.
    let weighted: Vec<C64> = (0..values.len())
        .map(|k| {
            let t = (k as f64 - n_half as f64) * dt;
            let herm = 0.5 * (values[k] + values[values.len() - 1 - k].conj());
            let trap = if k == 0 || k == values.len() - 1 {
                0.5
            } else {
                1.0
            };
            herm * window.weight(t, t_max) * trap * dt
        })
        .collect();

    let mut hist = BinnedMeasure::zeros(bin_width, nu_max);
    for (b, &center) in hist.centers.clone().iter().enumerate() {
        let lo = center - 0.5 * bin_width;
        let hi = center + 0.5 * bin_width;
        let mut mass = C64::new(0.0, 0.0);
        for (k, &sample) in weighted.iter().enumerate() {
            let t = (k as f64 - n_half as f64) * dt;
            let kernel = if t.abs() < 1e-300 {
                C64::new((hi - lo) / (2.0 * PI), 0.0)
            } else {
                (C64::new(0.0, hi * t).exp() - C64::new(0.0, lo * t).exp())
                    / C64::new(0.0, t)
                    / (2.0 * PI)
            };
            mass += sample * kernel;
        }
        hist.masses[b] = mass.re;
    }

    let max_bin = hist.masses.iter().cloned().fold(0.0f64, f64::max);
    let worst = hist.masses.iter().cloned().fold(0.0f64, f64::min);
    if worst < -1e-3 * max_bin.max(1e-300) {
        return Err(MeasureError::ExcessiveLeakage {
            worst,
            max_bin,
        });
    }
    let mut clipped = 0usize;
    for m in hist.masses.iter_mut() {
        if *m < 0.0 {
            *m = 0.0;
            clipped += 1;
        }
    }
    Ok(BochnerReport {
        measure: hist,
        max_negative_bin: worst,
        clipped_bins: clipped,
        window,
    })
}

/// Binned μ̃ from sampled current correlations: the windowed transform of
/// the response kernel χ(t) = (2π/|Λ|)·∂ₜIm C(t).
pub fn mu_tilde_binned_from_kernel(
    kernel: &CorrelationKernel,
    window: Window,
    bin_width: f64,
    nu_max: f64,
) -> Result<BochnerReport, MeasureError> {
    let (dt, chi) = kernel.response_samples();
    let complex: Vec<C64> = chi.iter().map(|&x| C64::new(x, 0.0)).collect();
    bochner_measure_from_samples(dt, &complex, window, bin_width, nu_max)
}

/// Sampling plan for a kernel destined for the binned-transform route.
/// The span keeps the window mainlobe far inside one bin — atoms near a
/// bin edge otherwise leak split mass into the neighbor — and the step
/// keeps the finite-difference attenuation of the fastest transition
/// under 0.2%.
pub fn kernel_plan_for_binning(h_norm: f64, bin_width: f64) -> (f64, f64) {
    let t_max = 256.0 * PI / bin_width;
    let nu_fastest = 2.0 * h_norm;
    let dt = (0.11 / nu_fastest).min(t_max / 64.0);
    (t_max, dt)
}

/// Â(ν) and Ê(ν) = iν·Â(ν) of a process's strength-1 waveform, unitary
/// angular-frequency convention.
#[derive(Debug, Clone)]
pub struct FourierSpectrum {
    pub frequencies: Vec<f64>,
    pub a_hat: Vec<C64>,
    pub e_hat: Vec<C64>,
}

/// â(ν) = (2π)^{-1/2} ∫ a(t) e^{-iνt} dt by trapezoid over the support;
/// smooth compactly supported waveforms make this spectrally accurate.
pub fn process_spectrum(process: &CyclicProcess, frequencies: &[f64]) -> FourierSpectrum {
    let (s, e) = process.support();
    let n = 20_000usize;
    let dt = (e - s) / n as f64;
    let samples: Vec<f64> = (0..=n).map(|k| process.amplitude(s + k as f64 * dt)).collect();
    let norm = dt / (2.0 * PI).sqrt();
    let a_hat: Vec<C64> = frequencies
        .iter()
        .map(|&nu| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &a) in samples.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let t = s + k as f64 * dt;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                acc += C64::from_polar(w * a, -nu * t);
            }
            acc * norm
        })
        .collect();
    let e_hat = frequencies
        .iter()
        .zip(&a_hat)
        .map(|(&nu, &a)| C64::new(0.0, nu) * a)
        .collect();
    FourierSpectrum {
        frequencies: frequencies.to_vec(),
        a_hat,
        e_hat,
    }
}

impl FourierSpectrum {
    fn lookup(&self, nu: f64) -> Result<usize, MeasureError> {
        self.frequencies
            .iter()
            .position(|&f| (f - nu).abs() <= 1e-12 * nu.abs().max(1.0))
            .ok_or(MeasureError::MissingFrequency(nu))
    }
}

/// Joule heat in the μ̃ form, Q = Σ w·|Â(ν)|².
pub fn joule_heat_mu_tilde(
    measure: &SpectralMeasure,
    spectrum: &FourierSpectrum,
) -> Result<f64, MeasureError> {
    let mut q = 0.0;
    for &(nu, w) in measure.atoms() {
        let idx = spectrum.lookup(nu)?;
        q += w * spectrum.a_hat[idx].norm_sqr();
    }
    Ok(q)
}

/// Joule heat in the μ form, Q = ∫dμ(ν)|Ê(ν)|² = Σ w_μ·|Ê(ν)|² over the
/// conductivity atoms w_μ = ν⁻²·w_μ̃; identical to the μ̃ form by the
/// convention Ê = iν·Â. The excluded zone must stay empty.
pub fn joule_heat_mu(
    measure: &ConductivityMeasure,
    spectrum: &FourierSpectrum,
) -> Result<f64, MeasureError> {
    for &nu in &spectrum.frequencies {
        if nu.abs() < measure.eps0 {
            return Err(MeasureError::SupportViolation {
                nu,
                eps0: measure.eps0,
            });
        }
    }
    let mut q = 0.0;
    for &(nu, w) in measure.atoms() {
        let idx = spectrum.lookup(nu)?;
        q += w * spectrum.e_hat[idx].norm_sqr();
    }
    Ok(q)
}

/// Lorentzian (Drude) fit of a conductivity histogram.
#[derive(Debug, Clone, Copy)]
pub struct DrudeFit {
    /// Amplitude of D·γ/(γ² + ν²).
    pub weight: f64,
    /// Relaxation rate γ.
    pub rate: f64,
    pub r_squared: f64,
    pub fit_window: (f64, f64),
    pub converged: bool,
}

/// Least-squares fit of the histogram density to D·γ/(γ²+ν²) over
/// `fit_window` on the positive axis; γ by golden-section over a log
/// bracket, D linear in closed form. Non-convergence is reported in the
/// flag, never as an error.
pub fn drude_fit(histogram: &BinnedMeasure, fit_window: (f64, f64)) -> DrudeFit {
    let (lo, hi) = fit_window;
    let pts: Vec<(f64, f64)> = histogram
        .centers
        .iter()
        .zip(&histogram.masses)
        .filter(|(&nu, _)| nu >= lo && nu <= hi)
        .map(|(&nu, &m)| (nu, m / histogram.bin_width))
        .collect();
    if pts.len() < 3 {
        return DrudeFit {
            weight: 0.0,
            rate: 0.0,
            r_squared: 0.0,
            fit_window,
            converged: false,
        };
    }

    let sse = |gamma: f64| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for &(nu, y) in &pts {
            let g = gamma / (gamma * gamma + nu * nu);
            num += y * g;
            den += g * g;
        }
        let d = if den > 0.0 { num / den } else { 0.0 };
        let err: f64 = pts
            .iter()
            .map(|&(nu, y)| {
                let model = d * gamma / (gamma * gamma + nu * nu);
                (y - model) * (y - model)
            })
            .sum();
        (err, d)
    };

    // coarse log sweep, then golden-section refinement
    let mut best = (f64::INFINITY, 0.0f64, 0.0f64);
    for k in 0..200 {
        let gamma = hi * (1e-4f64).powf(1.0 - k as f64 / 199.0);
        let (err, d) = sse(gamma);
        if err < best.0 {
            best = (err, gamma, d);
        }
    }
    let mut a = best.1 / 3.0;
    let mut b = best.1 * 3.0;
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if sse(x1).0 < sse(x2).0 {
            b = x2;
        } else {
            a = x1;
        }
    }
    let gamma = 0.5 * (a + b);
    let (err, d) = sse(gamma);

    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean) * (p.1 - mean)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - err / ss_tot } else { 0.0 };
    DrudeFit {
        weight: d,
        rate: gamma,
        r_squared,
        fit_window,
        converged: gamma.is_finite() && d.is_finite() && gamma > 0.0,
    }
}

/// Binwise mean and standard error across realizations.
pub fn average_histograms(histograms: &[BinnedMeasure]) -> Result<BinnedMeasure, MeasureError> {
    let first = histograms.first().ok_or(MeasureError::GridMismatch)?;
    let n = histograms.len() as f64;
    let mut mean = BinnedMeasure::zeros(
        first.bin_width,
        *first.centers.last().expect("nonempty grid"),
    );
    if mean.centers.len() != first.centers.len() {
        return Err(MeasureError::GridMismatch);
    }
    for h in histograms {
        if h.centers.len() != first.centers.len() {
            return Err(MeasureError::GridMismatch);
        }
        for (acc, &m) in mean.masses.iter_mut().zip(&h.masses) {
            *acc += m;
        }
    }
    for m in mean.masses.iter_mut() {
        *m /= n;
    }
    if histograms.len() > 1 {
        for b in 0..mean.masses.len() {
            let var: f64 = histograms
                .iter()
                .map(|h| (h.masses[b] - mean.masses[b]).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            mean.stderr[b] = (var / n).sqrt();
        }
    }
    Ok(mean)
}

/// Writes the documented histogram exchange format:
/// comment header lines, then `nu_center weight stderr` rows.
pub fn format_histogram(histogram: &BinnedMeasure, header_comments: &[String]) -> String {
    let mut out = String::new();
    for c in header_comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("# nu_center weight stderr\n");
    for ((c, m), s) in histogram
        .centers
        .iter()
        .zip(&histogram.masses)
        .zip(&histogram.stderr)
    {
        out.push_str(&format!("{c} {m} {s}\n"));
    }
    out
}

/// Parses the histogram exchange format back; inverse of
/// [`format_histogram`] up to comment lines.
pub fn parse_histogram(text: &str) -> Result<BinnedMeasure, MeasureError> {
    let mut centers = Vec::new();
    let mut masses = Vec::new();
    let mut stderr = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(MeasureError::MalformedHistogram {
                line: idx + 1,
                reason: format!("expected 3 columns, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64, MeasureError> {
            s.parse().map_err(|_| MeasureError::MalformedHistogram {
                line: idx + 1,
                reason: format!("bad number {s:?}"),
            })
        };
        centers.push(parse(fields[0])?);
        masses.push(parse(fields[1])?);
        stderr.push(parse(fields[2])?);
    }
    if centers.len() < 2 {
        return Err(MeasureError::MalformedHistogram {
            line: 0,
            reason: "fewer than two bins".into(),
        });
    }
    let bin_width = centers[1] - centers[0];
    Ok(BinnedMeasure {
        centers,
        masses,
        stderr,
        bin_width,
    })
}
