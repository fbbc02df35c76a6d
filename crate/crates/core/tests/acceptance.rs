//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line with the measured numbers (run with `--nocapture` to see
//! them). Tolerances are pinned here, not read from anywhere else.
//!
//! 1. passivity of equilibrium under 100 random cyclic drives
//! 2. complete passivity of two coupled equal-temperature copies
//! 3. cubic decay of the post-quadratic work remainder + size uniformity
//! 4. positivity of the heat-production measure
//! 5. Joule consistency: time-domain heat vs both measure forms
//! 6. Wick reduction vs brute-force Fock-space correlations
//! 7. binned-transform route vs spectral atoms for the measure
//! 8. numerical contracts: unitarity drift, step-halving ratio, KMS residual
//! 9. Drude phenomenology report on a disordered ensemble

use ohmic::dynamics::{
    default_step, evolve_propagator, make_cyclic_process, PeierlsDriven, TimeGrid, WaveformFamily,
};
use ohmic::experiment::{export_results, parse_config, run_experiment, KindOutcome};
use ohmic::fock;
use ohmic::lattice::{
    build_chain, hamiltonian_matrix, sample_disorder, spectral_radius_bound, BoundaryCondition,
    FieldSpan, LatticeBox, Waveform,
};
use ohmic::linalg::{exact_unitary, max_abs_diff, CMat, C64};
use ohmic::measure::{
    conductivity_from_mu_tilde, joule_heat_mu, joule_heat_mu_tilde, kernel_plan_for_binning,
    mu_tilde_binned_from_kernel, process_spectrum, spectral_measure_from_diagonalization, Window,
};
use ohmic::response::{
    complete_passivity_check, current_current_correlation, current_observable,
    heat_production_quadratic, remainder_scaling, total_work, ProcessShape, PASSIVITY_TOLERANCE,
};
use ohmic::state::{fermi_dirac_symbol, kms_residual, KmsParameters};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn chain_equilibrium(
    sites: usize,
    lambda: f64,
    seed: u64,
    beta: f64,
    mu: f64,
) -> (
    LatticeBox,
    ohmic::lattice::DisorderField,
    ohmic::state::QuasiFreeState,
) {
    let b = build_chain(sites, BoundaryCondition::Open, FieldSpan::Full).unwrap();
    let d = sample_disorder(&b, lambda, seed).unwrap();
    let h = hamiltonian_matrix(&b, &d, 0.0);
    let state = fermi_dirac_symbol(&h, KmsParameters { beta, mu }).unwrap();
    (b, d, state)
}

#[test]
fn acceptance_1_passivity_suite() {
    // 32 sites, λ = 1, β = 1, μ = 0; 100 random cyclic processes with
    // ω ∈ [0.1, 3], η ∈ [0.01, 0.2], T ∈ [5, 20]; every L ≥ -1e-9·scale.
    let cfg = parse_config(
        "kind = passivity\n\
         sites = 32\n\
         lambda = 1\n\
         beta = 1\n\
         mu = 0\n\
         n_realizations = 100\n\
         omega_min = 0.1\nomega_max = 3\n\
         eta_min = 0.01\neta_max = 0.2\n\
         length_min = 5\nlength_max = 20\n\
         seed_base = 1\n",
    )
    .unwrap();
    let record = run_experiment(&cfg, None).unwrap();
    let KindOutcome::Passivity { draws, min_work, .. } = &record.outcome else {
        panic!("wrong outcome kind");
    };
    assert_eq!(draws.len(), 100);
    let mut worst_margin = f64::INFINITY;
    for d in draws {
        let slack = PASSIVITY_TOLERANCE * d.result.work.abs().max(d.energy_scale);
        assert!(
            d.result.work >= -slack,
            "L = {:.3e} under -{slack:.1e} at ω={:.2}, η={:.3}, T={:.1}",
            d.result.work,
            d.omega,
            d.eta,
            d.length
        );
        worst_margin = worst_margin.min(d.result.work + slack);
    }
    println!(
        "acceptance 1 [passivity]: PASS — 100/100 cyclic processes, min L = {min_work:.3e}, tolerance 1e-9·scale"
    );
}

#[test]
fn acceptance_2_complete_passivity() {
    // two 2-site copies at equal (β, μ), 50 random Hermitian couplings of
    // the direct sum with random cyclic envelopes; every L ≥ -1e-9.
    let b = build_chain(2, BoundaryCondition::Open, FieldSpan::Full).unwrap();
    let d = sample_disorder(&b, 0.8, 11).unwrap();
    let h = hamiltonian_matrix(&b, &d, 0.0);
    let params = KmsParameters { beta: 1.0, mu: 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(20_2020);
    let mut min_work = f64::INFINITY;
    for trial in 0..50 {
        let mut coupling = CMat::zeros(4, 4);
        for j in 0..4 {
            for i in 0..=j {
                let re = unit(&mut rng) - 0.5;
                let im = if i == j { 0.0 } else { unit(&mut rng) - 0.5 };
                coupling[(i, j)] = C64::new(re, im);
                coupling[(j, i)] = C64::new(re, -im);
            }
        }
        let envelope = Waveform::BumpSin {
            start: 0.0,
            length: 4.0 + 8.0 * unit(&mut rng),
            omega: 0.3 + 2.5 * unit(&mut rng),
        };
        let r = complete_passivity_check(2, &h, params, &coupling, envelope, 1e-3).unwrap();
        assert!(
            r.work >= -1e-9,
            "trial {trial}: coupled-copy work {:.3e} < -1e-9",
            r.work
        );
        min_work = min_work.min(r.work);
    }
    println!(
        "acceptance 2 [complete passivity]: PASS — 50/50 couplings on the 2-fold copy, min L = {min_work:.3e}"
    );
}

#[test]
fn acceptance_3_cubic_remainder_and_uniformity() {
    // fixed shape, 8 log-spaced η in [1e-3, 1e-1]: fitted slope of
    // log|remainder| vs log η ≥ 2.8 (or remainder at the noise floor),
    // and the per-volume work at 64 sites within 20% of 32 sites.
    let shape = ProcessShape {
        family: WaveformFamily::BumpSin,
        start: 0.0,
        length: 10.0,
        omega: 1.1,
        smoothness: 0,
    };
    let etas: Vec<f64> = (0..8).map(|k| 1e-3 * 100f64.powf(k as f64 / 7.0)).collect();
    let (b32, d32, s32) = chain_equilibrium(32, 1.0, 1, 1.0, 0.0);
    let cur = current_observable(&b32, 0.0);
    let kernel = current_current_correlation(&s32, &cur, shape.length, shape.length / 10_000.0);
    let probe = shape.at_strength(1.0).unwrap();
    let q32 = heat_production_quadratic(&kernel, &probe, shape.length / 10_000.0).unwrap();
    let fit = remainder_scaling(&b32, &d32, &s32, &shape, &etas, q32, 2.5e-4).unwrap();
    let slope_report = if fit.below_noise_floor {
        assert!(fit.slope.is_none());
        "remainder below noise floor".to_string()
    } else {
        let slope = fit.slope.unwrap();
        assert!(
            slope >= 2.8,
            "remainder slope {slope:.3} < 2.8 (points: {:?})",
            fit.points
                .iter()
                .map(|p| (p.eta, p.remainder, p.in_fit))
                .collect::<Vec<_>>()
        );
        format!("slope = {slope:.2}")
    };

    // uniformity probe at the largest strength
    let eta_top = 0.1;
    let process = shape.at_strength(eta_top).unwrap();
    let grid = TimeGrid::covering(0.0, shape.length, 2.5e-4);
    let w32 = total_work(&b32, &d32, &s32, &process, &grid).unwrap().work
        / b32.field_bond_count() as f64;
    let (b64, d64, s64) = chain_equilibrium(64, 1.0, 1, 1.0, 0.0);
    let w64 = total_work(&b64, &d64, &s64, &process, &grid).unwrap().work
        / b64.field_bond_count() as f64;
    let change = (w64 / w32 - 1.0).abs();
    assert!(
        change <= 0.2,
        "per-volume work moved {:.1}% when doubling the box",
        100.0 * change
    );
    println!(
        "acceptance 3 [cubic remainder]: PASS — {slope_report}; size change {:.2}% (≤ 20%)",
        100.0 * change
    );
}

#[test]
fn acceptance_4_measure_positivity() {
    // 20 disorder realizations on 8 sites: every μ̃ atom ≥ -1e-12 (the
    // constructor rejects anything lower; clipped counts are reported).
    let mut clipped_total = 0usize;
    let mut atoms_total = 0usize;
    for seed in 0..20u64 {
        let (b, _, state) = chain_equilibrium(8, 1.0, seed, 1.0, 0.0);
        let cur = current_observable(&b, 0.0);
        let m = spectral_measure_from_diagonalization(&state, &cur, 1e-6)
            .expect("an atom weight fell below -1e-12");
        for &(nu, w) in m.atoms() {
            assert!(w >= 0.0, "seed {seed}: weight {w:.2e} at ν = {nu}");
        }
        clipped_total += m.clipped_atoms;
        atoms_total += m.atoms().len();
    }
    println!(
        "acceptance 4 [measure positivity]: PASS — {atoms_total} atoms over 20 realizations, {clipped_total} clipped within -1e-12"
    );
}

#[test]
fn acceptance_5_joule_green_kubo_consistency() {
    // 6- and 8-site systems: Q from the Duhamel quadrature vs
    // Q = ∫dμ̃|Â|² vs the μ-form with |Ê|²: pairwise ≤ 1e-4, measure
    // forms identical to 1e-12.
    let mut worst_time = 0.0f64;
    let mut worst_forms = 0.0f64;
    for (sites, seed, omega) in [(6usize, 3u64, 1.3f64), (8, 5, 0.9)] {
        let (b, _, state) = chain_equilibrium(sites, 1.0, seed, 1.0, 0.0);
        let cur = current_observable(&b, 0.0);
        let length = 8.0;
        let process =
            make_cyclic_process(WaveformFamily::BumpSin, 0.0, length, 1.0, omega, 0).unwrap();
        let kernel = current_current_correlation(&state, &cur, length, length / 8000.0);
        let q_time = heat_production_quadratic(&kernel, &process, length / 8000.0).unwrap();

        let mu_tilde = spectral_measure_from_diagonalization(&state, &cur, 1e-9).unwrap();
        let spectrum = process_spectrum(&process, &mu_tilde.frequencies());
        let q_mu_tilde = joule_heat_mu_tilde(&mu_tilde, &spectrum).unwrap();

        let cond = conductivity_from_mu_tilde(&mu_tilde, 1e-9);
        let freqs = cond.frequencies();
        let q_mu = joule_heat_mu(&cond, &process_spectrum(&process, &freqs)).unwrap();

        let rel_time = (q_time - q_mu_tilde).abs() / q_mu_tilde.abs();
        let rel_forms = (q_mu_tilde - q_mu).abs() / q_mu_tilde.abs();
        assert!(
            rel_time <= 1e-4,
            "{sites} sites: time vs measure {rel_time:.2e}"
        );
        assert!(
            rel_forms <= 1e-12,
            "{sites} sites: measure forms differ {rel_forms:.2e}"
        );
        worst_time = worst_time.max(rel_time);
        worst_forms = worst_forms.max(rel_forms);
    }
    println!(
        "acceptance 5 [Joule consistency]: PASS — worst time-vs-measure {worst_time:.2e} (≤ 1e-4), worst form split {worst_forms:.2e} (≤ 1e-12)"
    );
}

#[test]
fn acceptance_6_wick_reduction_oracle() {
    // 20 random (β, μ, λ, t) tuples on 2- and 3-site systems: the
    // quasi-free C(t) = Tr((1-ρ)I(t)ρI) equals the brute-force Fock-space
    // connected correlation ⟨J(t)J⟩-⟨J⟩² up to complex conjugation
    // (equilibrium stationarity maps t ↦ -t) to 1e-10.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let sites = if case % 2 == 0 { 2 } else { 3 };
        let beta = 0.2 + 4.8 * unit(&mut rng);
        let mu = -1.5 + 3.0 * unit(&mut rng);
        let lambda = 2.0 * unit(&mut rng);
        let magnitude = 0.1 + 3.9 * unit(&mut rng);
        let t = if unit(&mut rng) < 0.5 { -magnitude } else { magnitude };
        let seed = rng.next_u64();
        let (b, d, _) = chain_equilibrium(sites, lambda, seed, beta, mu);
        let h = hamiltonian_matrix(&b, &d, 0.0);
        let state = fermi_dirac_symbol(&h, KmsParameters { beta, mu }).unwrap();
        let cur = current_observable(&b, 0.0);
        // step = |t| puts the probe time exactly on a sample node
        let kernel = current_current_correlation(&state, &cur, magnitude, magnitude);
        let ours = kernel.at(t);
        let brute = fock::connected_current_correlation(&h, &cur.paramagnetic, state.params(), t);
        let err = (ours - brute.conj()).norm();
        assert!(
            err <= 1e-10,
            "case {case} ({sites} sites, β={beta:.2}, μ={mu:.2}, λ={lambda:.2}, t={t:.2}): {err:.2e}"
        );
        worst = worst.max(err);
    }
    println!(
        "acceptance 6 [Wick oracle]: PASS — 20 random tuples on 2- and 3-site systems, worst |Δ| = {worst:.2e} (≤ 1e-10)"
    );
}

#[test]
fn acceptance_7_spectral_vs_binned_transform() {
    // binned atoms vs the windowed transform of the sampled response
    // kernel: L1 discrepancy ≤ 2% of total mass on 6- and 8-site systems.
    let mut worst = 0.0f64;
    for (sites, seed) in [(6usize, 3u64), (8, 7)] {
        let (b, _, state) = chain_equilibrium(sites, 1.0, seed, 1.0, 0.0);
        let cur = current_observable(&b, 0.0);
        let mu = spectral_measure_from_diagonalization(&state, &cur, 1e-6).unwrap();
        let bin_width = mu.bin_hint;
        let h_norm = 3.0;
        let nu_max = 2.0 * h_norm;
        let (t_max, dt) = kernel_plan_for_binning(h_norm, bin_width);
        let kernel = current_current_correlation(&state, &cur, t_max, dt);
        let report =
            mu_tilde_binned_from_kernel(&kernel, Window::Blackman, bin_width, nu_max).unwrap();
        let reference = mu.binned(bin_width, nu_max);
        let l1 = reference.l1_distance(&report.measure).unwrap();
        let frac = l1 / reference.total_mass();
        assert!(
            frac <= 0.02,
            "{sites} sites: L1 discrepancy {:.2}% of mass",
            100.0 * frac
        );
        worst = worst.max(frac);
    }
    println!(
        "acceptance 7 [spectral vs transform]: PASS — worst discrepancy {:.2}% of total mass (≤ 2%)",
        100.0 * worst
    );
}

#[test]
fn acceptance_8_numerical_contracts() {
    // (a) unitarity drift ≤ 1e-8 across a full driven process
    let (b, d, _) = chain_equilibrium(32, 1.0, 9, 1.0, 0.0);
    let process = make_cyclic_process(WaveformFamily::BumpSin, 0.0, 12.0, 0.15, 1.7, 0).unwrap();
    let driven = PeierlsDriven::new(&b, &d, &process);
    let step = default_step(1.7, spectral_radius_bound(&b, &d), 8.0);
    let prop = evolve_propagator(&driven, &TimeGrid::covering(0.0, 12.0, step)).unwrap();
    assert!(
        prop.unitarity_drift <= 1e-8,
        "drift {:.2e}",
        prop.unitarity_drift
    );

    // (b) step-halving (Richardson) ratio in [3.5, 4.5] on an undriven
    // run against the exact spectral exponential
    let (b4, d4, _) = chain_equilibrium(4, 0.8, 3, 1.0, 0.0);
    let idle = make_cyclic_process(WaveformFamily::BumpSin, 0.0, 5.0, 0.0, 1.0, 0).unwrap();
    let undriven = PeierlsDriven::new(&b4, &d4, &idle);
    let exact = exact_unitary(&hamiltonian_matrix(&b4, &d4, 0.0), 5.0);
    let coarse = evolve_propagator(&undriven, &TimeGrid::covering(0.0, 5.0, 0.02)).unwrap();
    let fine = evolve_propagator(&undriven, &TimeGrid::covering(0.0, 5.0, 0.01)).unwrap();
    let ratio = max_abs_diff(&coarse.u, &exact) / max_abs_diff(&fine.u, &exact);
    assert!(
        (3.5..=4.5).contains(&ratio),
        "Richardson ratio {ratio:.3} outside [3.5, 4.5]"
    );

    // (c) KMS residual ≤ 1e-10 across parameters
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst_kms = 0.0f64;
    for _ in 0..50 {
        let beta = 0.1 + 9.9 * unit(&mut rng);
        let mu = -2.0 + 4.0 * unit(&mut rng);
        let seed = rng.next_u64();
        let (_, _, state) = chain_equilibrium(6, 1.5, seed, beta, mu);
        worst_kms = worst_kms.max(kms_residual(&state));
    }
    assert!(worst_kms <= 1e-10, "KMS residual {worst_kms:.2e}");

    println!(
        "acceptance 8 [numerical contracts]: PASS — drift {:.1e} (≤ 1e-8), Richardson ratio {ratio:.2} ∈ [3.5, 4.5], KMS residual {worst_kms:.1e} (≤ 1e-10)",
        prop.unitarity_drift
    );
}

#[test]
fn acceptance_9_drude_phenomenology_report() {
    // 64 sites, λ = 1, 100 realizations: ensemble-averaged conductivity
    // histogram plus the Lorentzian fit, reported without a threshold.
    let cfg = parse_config(
        "kind = drude\n\
         sites = 64\n\
         lambda = 1\n\
         beta = 1\n\
         mu = 0\n\
         n_realizations = 100\n\
         seed_base = 1\n",
    )
    .unwrap();
    let record = run_experiment(&cfg, None).unwrap();
    let KindOutcome::Drude { measure, fit } = &record.outcome else {
        panic!("wrong outcome kind");
    };
    assert!(measure.mu_histogram.total_mass() > 0.0);
    assert!(measure.mu_histogram.stderr.iter().any(|&s| s > 0.0));
    assert!(fit.weight.is_finite() && fit.rate.is_finite() && fit.r_squared.is_finite());

    let dir = std::env::temp_dir().join(format!("ohmic-acceptance-drude-{}", std::process::id()));
    let written = export_results(&record, &dir).unwrap();
    assert!(written.iter().any(|p| p.ends_with("mu_histogram.txt")));
    std::fs::remove_dir_all(&dir).ok();
    println!(
        "acceptance 9 [Drude report]: PASS — ensemble histogram emitted; fit D = {:.4}, γ = {:.4}, R² = {:.3} (reported, not thresholded)",
        fit.weight, fit.rate, fit.r_squared
    );
}
