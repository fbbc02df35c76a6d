//! Experiment dispatch, disorder-ensemble orchestration and aggregation.

use super::config::{ExperimentConfig, ExperimentKind};
use crate::dynamics::{default_step, make_cyclic_process, TimeGrid};
use crate::lattice::{
    build_box, build_chain, sample_disorder, spectral_radius_bound, FieldSpan,
    LatticeBox,
};
use crate::measure::{
    average_histograms, conductivity_from_mu_tilde, default_eps0, drude_fit, joule_heat_mu,
    joule_heat_mu_tilde, process_spectrum, spectral_measure_from_diagonalization, BinnedMeasure,
    DrudeFit, Window,
};
use crate::response::{
    current_current_correlation, current_observable, heat_production_quadratic, remainder_scaling,
    total_work, ProcessShape, ScalingFit, WorkResult, PASSIVITY_TOLERANCE,
};
use crate::state::{fermi_dirac_symbol, KmsParameters, QuasiFreeState};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration invalid:\n{0}")]
    Config(#[from] super::config::ConfigErrors),
    #[error("realization {index}: {message}")]
    Realization { index: usize, message: String },
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("record contains no results; refusing to write empty files")]
    EmptyRecord,
}

/// One realization of the passivity experiment: the drawn process
/// parameters and the resulting work.
#[derive(Debug, Clone)]
pub struct PassivityDraw {
    pub omega: f64,
    pub eta: f64,
    pub length: f64,
    pub result: WorkResult,
    pub energy_scale: f64,
}

#[derive(Debug, Clone)]
pub struct UniformityProbe {
    pub base_sites: usize,
    pub doubled_sites: usize,
    pub base_work_per_volume: f64,
    pub doubled_work_per_volume: f64,
    /// |doubled/base - 1|.
    pub relative_change: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingOutcome {
    pub fits: Vec<ScalingFit>,
    pub uniformity: UniformityProbe,
}

#[derive(Debug, Clone, Copy)]
pub struct GreenKuboOutcome {
    pub q_time: f64,
    pub q_mu_tilde: f64,
    pub q_mu: f64,
    pub rel_time_vs_measure: f64,
    pub rel_measure_forms: f64,
}

#[derive(Debug, Clone)]
pub struct MeasureOutcome {
    pub mu_tilde_histogram: BinnedMeasure,
    pub mu_histogram: BinnedMeasure,
    pub zero_bucket_mean: f64,
    pub clipped_atoms_total: usize,
}

#[derive(Debug, Clone)]
pub enum KindOutcome {
    Passivity {
        draws: Vec<PassivityDraw>,
        min_work: f64,
        all_passive: bool,
    },
    Scaling(ScalingOutcome),
    GreenKubo {
        per_realization: Vec<GreenKuboOutcome>,
    },
    Measure(MeasureOutcome),
    Drude {
        measure: MeasureOutcome,
        fit: DrudeFit,
    },
}

/// Everything a run produces, ready for export.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_hash: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub outcome: KindOutcome,
    /// (name, mean, standard error) across realizations.
    pub aggregates: Vec<(String, f64, f64)>,
    /// Effective numerical knobs and conventions.
    pub metadata: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

fn build_configured_box(config: &ExperimentConfig) -> Result<LatticeBox, ExperimentError> {
    let span = config
        .box_
        .field_span
        .map_or(FieldSpan::Full, |(lo, hi)| FieldSpan::Range { lo, hi });
    let result = if config.box_.dimension == 1 {
        build_chain(config.box_.sites, config.box_.boundary, span)
    } else {
        build_box(
            config.box_.dimension,
            (config.box_.sites - 1) / 2,
            config.box_.boundary,
            span,
        )
    };
    result.map_err(|e| ExperimentError::Realization {
        index: 0,
        message: e.to_string(),
    })
}

fn equilibrium_for(
    box_: &LatticeBox,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(crate::lattice::DisorderField, QuasiFreeState), String> {
    let disorder = sample_disorder(box_, config.lambda, seed).map_err(|e| e.to_string())?;
    let h = crate::lattice::hamiltonian_matrix(box_, &disorder, 0.0);
    let state = fermi_dirac_symbol(
        &h,
        KmsParameters {
            beta: config.beta,
            mu: config.mu,
        },
    )
    .map_err(|e| e.to_string())?;
    Ok((disorder, state))
}

fn with_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(job),
        None => job(),
    }
}

/// Runs the configured experiment. One disorder realization per worker,
/// seeded `seed_base + index`; aggregation is a deterministic
/// single-threaded pass over the index-ordered results.
pub fn run_experiment(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<RunRecord, ExperimentError> {
    let started = Instant::now();
    let box_ = build_configured_box(config)?;
    let h_norm = 2.0 * config.box_.dimension as f64 + config.lambda;
    let eps0 = config.eps0.unwrap_or_else(|| default_eps0(h_norm));

    let mut metadata: Vec<(String, String)> = vec![
        ("fourier_convention".into(), "unitary angular frequency".into()),
        ("volume_normalization".into(), "per field-region bond".into()),
        ("window".into(), Window::Blackman.id().into()),
        ("eps0".into(), eps0.to_string()),
        ("field_bonds".into(), box_.field_bond_count().to_string()),
    ];
    let mut warnings = Vec::new();
    if config.beta * h_norm > 700.0 {
        warnings.push(format!(
            "beta * spectral_radius_bound = {:.1} > 700; KMS residual matrices may overflow",
            config.beta * h_norm
        ));
    }
    if config.kind == ExperimentKind::Drude && config.n_realizations < 50 {
        warnings.push(format!(
            "drude fit expects an ensemble of at least 50 realizations, got {}",
            config.n_realizations
        ));
    }

    let outcome = match config.kind {
        ExperimentKind::Passivity => {
            run_passivity(config, &box_, h_norm, workers, &mut metadata)?
        }
        ExperimentKind::Scaling => run_scaling(config, &box_, h_norm, workers, &mut metadata)?,
        ExperimentKind::GreenKubo => {
            run_green_kubo(config, &box_, eps0, workers, &mut metadata)?
        }
        ExperimentKind::Measure => {
            KindOutcome::Measure(run_measure(config, &box_, h_norm, eps0, workers, &mut metadata)?)
        }
        ExperimentKind::Drude => {
            let measure = run_measure(config, &box_, h_norm, eps0, workers, &mut metadata)?;
            let nu_max = 2.0 * h_norm;
            let bin = measure.mu_histogram.bin_width;
            let fit = drude_fit(&measure.mu_histogram, (bin, 0.75 * nu_max));
            metadata.push(("drude_fit_window".into(), format!("{bin}:{}", 0.75 * nu_max)));
            KindOutcome::Drude { measure, fit }
        }
    };

    let aggregates = aggregate(&outcome);
    Ok(RunRecord {
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        outcome,
        aggregates,
        metadata,
        warnings,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

fn run_passivity(
    config: &ExperimentConfig,
    box_: &LatticeBox,
    h_norm: f64,
    workers: Option<usize>,
    metadata: &mut Vec<(String, String)>,
) -> Result<KindOutcome, ExperimentError> {
    metadata.push((
        "process_draw".into(),
        "one random cyclic process per realization".into(),
    ));
    let draws: Result<Vec<PassivityDraw>, ExperimentError> = with_pool(workers, || {
        (0..config.n_realizations)
            .into_par_iter()
            .map(|index| {
                let seed = config.seed_base + index as u64;
                let run = || -> Result<PassivityDraw, String> {
                    let (disorder, state) = equilibrium_for(box_, config, seed)?;
                    // processes are drawn from a stream disjoint from the
                    // disorder seeds
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(seed ^ 0x70726f63_65737321);
                    let mut unif =
                        |lo: f64, hi: f64| lo + (hi - lo) * rng_unit(&mut rng);
                    let omega = unif(config.process.omega_range.0, config.process.omega_range.1);
                    let eta = unif(config.process.eta_range.0, config.process.eta_range.1);
                    let length =
                        unif(config.process.length_range.0, config.process.length_range.1);
                    let process = make_cyclic_process(
                        config.process.family,
                        config.process.start,
                        length,
                        eta,
                        omega,
                        config.process.smoothness,
                    )
                    .map_err(|e| e.to_string())?;
                    let step = config
                        .dt
                        .unwrap_or_else(|| default_step(omega, h_norm, config.dt_refinement));
                    let grid = TimeGrid::covering(
                        config.process.start,
                        config.process.start + length,
                        step,
                    );
                    let result = total_work(box_, &disorder, &state, &process, &grid)
                        .map_err(|e| e.to_string())?;
                    Ok(PassivityDraw {
                        omega,
                        eta,
                        length,
                        result,
                        energy_scale: spectral_radius_bound(box_, &disorder),
                    })
                };
                run().map_err(|message| ExperimentError::Realization { index, message })
            })
            .collect()
    });
    let draws = draws?;
    let min_work = draws
        .iter()
        .map(|d| d.result.work)
        .fold(f64::INFINITY, f64::min);
    let all_passive = draws.iter().all(|d| {
        d.result.work >= -PASSIVITY_TOLERANCE * d.result.work.abs().max(d.energy_scale)
    });
    Ok(KindOutcome::Passivity {
        draws,
        min_work,
        all_passive,
    })
}

fn rng_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Scaling runs tighten the step rule: the remainder at the smallest
/// strengths sits orders of magnitude below the work itself.
const SCALING_EXTRA_REFINEMENT: f64 = 16.0;

fn run_scaling(
    config: &ExperimentConfig,
    box_: &LatticeBox,
    h_norm: f64,
    workers: Option<usize>,
    metadata: &mut Vec<(String, String)>,
) -> Result<KindOutcome, ExperimentError> {
    let shape = ProcessShape {
        family: config.process.family,
        start: config.process.start,
        length: config.process.length,
        omega: config.process.omega,
        smoothness: config.process.smoothness,
    };
    let step = config.dt.unwrap_or_else(|| {
        default_step(
            shape.omega,
            h_norm,
            config.dt_refinement * SCALING_EXTRA_REFINEMENT,
        )
    });
    metadata.push(("scaling_dt".into(), step.to_string()));
    let kernel_dt = shape.length / 8000.0;

    let fits: Result<Vec<ScalingFit>, ExperimentError> = with_pool(workers, || {
        (0..config.n_realizations)
            .into_par_iter()
            .map(|index| {
                let seed = config.seed_base + index as u64;
                let run = || -> Result<ScalingFit, String> {
                    let (disorder, state) = equilibrium_for(box_, config, seed)?;
                    let current = current_observable(box_, 0.0);
                    let kernel =
                        current_current_correlation(&state, &current, shape.length, kernel_dt);
                    let probe = shape.at_strength(1.0).map_err(|e| e.to_string())?;
                    let q = heat_production_quadratic(&kernel, &probe, kernel_dt)
                        .map_err(|e| e.to_string())?;
                    remainder_scaling(
                        box_,
                        &disorder,
                        &state,
                        &shape,
                        &config.process.eta_list,
                        q,
                        step,
                    )
                    .map_err(|e| e.to_string())
                };
                run().map_err(|message| ExperimentError::Realization { index, message })
            })
            .collect()
    });
    let fits = fits?;

    // uniformity probe: double the box, compare per-volume work at the
    // largest strength
    let eta_top = config
        .process
        .eta_list
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let doubled_sites = if config.box_.dimension == 1 {
        config.box_.sites * 2
    } else {
        2 * config.box_.sites - 1
    };
    let mut doubled_config = config.clone();
    doubled_config.box_.sites = doubled_sites;
    let doubled_box = build_configured_box(&doubled_config)?;
    let probe = shape.at_strength(eta_top).map_err(|e| ExperimentError::Realization {
        index: 0,
        message: e.to_string(),
    })?;
    let work_pv = |bx: &LatticeBox, cfg: &ExperimentConfig| -> Result<f64, String> {
        let (disorder, state) = equilibrium_for(bx, cfg, cfg.seed_base)?;
        let grid = TimeGrid::covering(shape.start, shape.start + shape.length, step);
        let r = total_work(bx, &disorder, &state, &probe, &grid).map_err(|e| e.to_string())?;
        Ok(r.work / bx.field_bond_count() as f64)
    };
    let base_pv = work_pv(box_, config)
        .map_err(|message| ExperimentError::Realization { index: 0, message })?;
    let doubled_pv = work_pv(&doubled_box, &doubled_config)
        .map_err(|message| ExperimentError::Realization { index: 0, message })?;
    let uniformity = UniformityProbe {
        base_sites: config.box_.sites,
        doubled_sites,
        base_work_per_volume: base_pv,
        doubled_work_per_volume: doubled_pv,
        relative_change: (doubled_pv / base_pv - 1.0).abs(),
    };

    Ok(KindOutcome::Scaling(ScalingOutcome { fits, uniformity }))
}

fn run_green_kubo(
    config: &ExperimentConfig,
    box_: &LatticeBox,
    eps0: f64,
    workers: Option<usize>,
    metadata: &mut Vec<(String, String)>,
) -> Result<KindOutcome, ExperimentError> {
    let kernel_dt = config.process.length / 8000.0;
    metadata.push(("kernel_dt".into(), kernel_dt.to_string()));
    let per: Result<Vec<GreenKuboOutcome>, ExperimentError> = with_pool(workers, || {
        (0..config.n_realizations)
            .into_par_iter()
            .map(|index| {
                let seed = config.seed_base + index as u64;
                let run = || -> Result<GreenKuboOutcome, String> {
                    let (_, state) = equilibrium_for(box_, config, seed)?;
                    let current = current_observable(box_, 0.0);
                    let process = make_cyclic_process(
                        config.process.family,
                        config.process.start,
                        config.process.length,
                        1.0,
                        config.process.omega,
                        config.process.smoothness,
                    )
                    .map_err(|e| e.to_string())?;
                    let kernel = current_current_correlation(
                        &state,
                        &current,
                        config.process.length,
                        kernel_dt,
                    );
                    let q_time = heat_production_quadratic(&kernel, &process, kernel_dt)
                        .map_err(|e| e.to_string())?;
                    // the three-way comparison wants the full measure, so
                    // the exclusion radius shrinks to a token value here;
                    // the configured eps0 governs the measure experiments
                    let tiny = 1e-9 * eps0.max(1e-9);
                    let mu_tilde = spectral_measure_from_diagonalization(&state, &current, tiny)
                        .map_err(|e| e.to_string())?;
                    let spectrum = process_spectrum(&process, &mu_tilde.frequencies());
                    let q_mu_tilde =
                        joule_heat_mu_tilde(&mu_tilde, &spectrum).map_err(|e| e.to_string())?;
                    let cond = conductivity_from_mu_tilde(&mu_tilde, tiny);
                    let freqs = cond.frequencies();
                    let spectrum_mu = process_spectrum(&process, &freqs);
                    let q_mu = joule_heat_mu(&cond, &spectrum_mu).map_err(|e| e.to_string())?;
                    Ok(GreenKuboOutcome {
                        q_time,
                        q_mu_tilde,
                        q_mu,
                        rel_time_vs_measure: (q_time - q_mu_tilde).abs()
                            / q_mu_tilde.abs().max(1e-300),
                        rel_measure_forms: (q_mu_tilde - q_mu).abs() / q_mu_tilde.abs().max(1e-300),
                    })
                };
                run().map_err(|message| ExperimentError::Realization { index, message })
            })
            .collect()
    });
    Ok(KindOutcome::GreenKubo {
        per_realization: per?,
    })
}

fn run_measure(
    config: &ExperimentConfig,
    box_: &LatticeBox,
    h_norm: f64,
    eps0: f64,
    workers: Option<usize>,
    metadata: &mut Vec<(String, String)>,
) -> Result<MeasureOutcome, ExperimentError> {
    // the common histogram grid comes from realization 0 so the whole
    // ensemble shares bins deterministically
    let (_, first_state) = equilibrium_for(box_, config, config.seed_base)
        .map_err(|message| ExperimentError::Realization { index: 0, message })?;
    let dnu = config
        .dnu
        .unwrap_or_else(|| crate::measure::default_bin_width(first_state.eigenvalues()));
    let nu_max = 2.0 * h_norm;
    metadata.push(("dnu".into(), dnu.to_string()));
    metadata.push(("nu_max".into(), nu_max.to_string()));

    type PerReal = (BinnedMeasure, BinnedMeasure, f64, usize);
    let per: Result<Vec<PerReal>, ExperimentError> = with_pool(workers, || {
        (0..config.n_realizations)
            .into_par_iter()
            .map(|index| {
                let seed = config.seed_base + index as u64;
                let run = || -> Result<PerReal, String> {
                    let (_, state) = equilibrium_for(box_, config, seed)?;
                    let current = current_observable(box_, 0.0);
                    let mu_tilde = spectral_measure_from_diagonalization(&state, &current, eps0)
                        .map_err(|e| e.to_string())?;
                    let cond = conductivity_from_mu_tilde(&mu_tilde, eps0);
                    Ok((
                        mu_tilde.binned(dnu, nu_max),
                        cond.binned(dnu, nu_max),
                        mu_tilde.zero_bucket_mass,
                        mu_tilde.clipped_atoms,
                    ))
                };
                run().map_err(|message| ExperimentError::Realization { index, message })
            })
            .collect()
    });
    let per = per?;
    let mu_tilde_histogram =
        average_histograms(&per.iter().map(|p| p.0.clone()).collect::<Vec<_>>())
            .map_err(|e| ExperimentError::Realization {
                index: 0,
                message: e.to_string(),
            })?;
    let mu_histogram = average_histograms(&per.iter().map(|p| p.1.clone()).collect::<Vec<_>>())
        .map_err(|e| ExperimentError::Realization {
            index: 0,
            message: e.to_string(),
        })?;
    Ok(MeasureOutcome {
        mu_tilde_histogram,
        mu_histogram,
        zero_bucket_mean: per.iter().map(|p| p.2).sum::<f64>() / per.len() as f64,
        clipped_atoms_total: per.iter().map(|p| p.3).sum(),
    })
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(outcome: &KindOutcome) -> Vec<(String, f64, f64)> {
    match outcome {
        KindOutcome::Passivity {
            draws,
            min_work,
            all_passive,
        } => {
            let works: Vec<f64> = draws.iter().map(|d| d.result.work).collect();
            let mismatches: Vec<f64> = draws.iter().map(|d| d.result.identity_mismatch).collect();
            let drifts: Vec<f64> = draws.iter().map(|d| d.result.unitarity_drift).collect();
            let (wm, ws) = mean_stderr(&works);
            let mut out = vec![
                ("work_mean".to_string(), wm, ws),
                ("work_min".to_string(), *min_work, 0.0),
                (
                    "all_passive".to_string(),
                    if *all_passive { 1.0 } else { 0.0 },
                    0.0,
                ),
            ];
            let (mm, _) = mean_stderr(&mismatches);
            out.push(("identity_mismatch_mean".into(), mm, 0.0));
            out.push((
                "unitarity_drift_max".into(),
                drifts.iter().cloned().fold(0.0, f64::max),
                0.0,
            ));
            out
        }
        KindOutcome::Scaling(s) => {
            let slopes: Vec<f64> = s.fits.iter().filter_map(|f| f.slope).collect();
            let mut out = Vec::new();
            if !slopes.is_empty() {
                let (m, e) = mean_stderr(&slopes);
                out.push(("slope_mean".into(), m, e));
            }
            out.push((
                "below_noise_floor_count".into(),
                s.fits.iter().filter(|f| f.below_noise_floor).count() as f64,
                0.0,
            ));
            out.push((
                "q_per_volume_mean".into(),
                s.fits.iter().map(|f| f.q_per_volume).sum::<f64>() / s.fits.len() as f64,
                0.0,
            ));
            out.push((
                "uniformity_relative_change".into(),
                s.uniformity.relative_change,
                0.0,
            ));
            out
        }
        KindOutcome::GreenKubo { per_realization } => {
            let field = |f: fn(&GreenKuboOutcome) -> f64| -> Vec<f64> {
                per_realization.iter().map(f).collect()
            };
            let mut out = Vec::new();
            for (name, values) in [
                ("q_time", field(|g| g.q_time)),
                ("q_mu_tilde", field(|g| g.q_mu_tilde)),
                ("q_mu", field(|g| g.q_mu)),
                ("rel_time_vs_measure", field(|g| g.rel_time_vs_measure)),
                ("rel_measure_forms", field(|g| g.rel_measure_forms)),
            ] {
                let (m, e) = mean_stderr(&values);
                out.push((name.to_string(), m, e));
            }
            out
        }
        KindOutcome::Measure(m) => vec![
            (
                "mu_tilde_total_mass".into(),
                m.mu_tilde_histogram.total_mass(),
                0.0,
            ),
            ("mu_total_mass".into(), m.mu_histogram.total_mass(), 0.0),
            ("zero_bucket_mean".into(), m.zero_bucket_mean, 0.0),
            ("clipped_atoms".into(), m.clipped_atoms_total as f64, 0.0),
        ],
        KindOutcome::Drude { measure, fit } => vec![
            ("drude_weight".into(), fit.weight, 0.0),
            ("drude_rate".into(), fit.rate, 0.0),
            ("drude_r_squared".into(), fit.r_squared, 0.0),
            (
                "drude_converged".into(),
                if fit.converged { 1.0 } else { 0.0 },
                0.0,
            ),
            (
                "mu_total_mass".into(),
                measure.mu_histogram.total_mass(),
                0.0,
            ),
        ],
    }
}
