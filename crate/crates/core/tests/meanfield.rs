use num_complex::Complex64;
use optlat_core::bands::{solve_bands, BlochProblem, ZoneMapping};
use optlat_core::meanfield::*;
use optlat_core::transport::{populated_bands, velocity_moments, weighted_linear_fit};
use optlat_core::units::RecoilUnits;

fn trapped(coupling: f64, trap: f64, depth: f64, length: f64, points: usize) -> GpeConfig {
    let mut cfg = GpeConfig {
        atoms: 1.0e5,
        coupling,
        trap,
        depth,
        grid: Grid::new(length, points).unwrap(),
        dt: 1.0,
    };
    cfg.dt = 0.5 * cfg.max_time_step(0.0);
    cfg
}

fn late_slope(tr: &Trajectory) -> (Vec<f64>, f64) {
    let half = &tr.samples[tr.samples.len() / 2..];
    let t: Vec<f64> = half.iter().map(|s| s.time).collect();
    let y: Vec<f64> = half.iter().map(|s| s.sigma).collect();
    let slope = weighted_linear_fit(&t, &y, &vec![1.0; t.len()]).unwrap().slope;
    (t, slope)
}

#[test]
fn harmonic_ground_state_energy() {
    let trap = 0.2;
    let cfg = trapped(0.0, trap, 0.0, 80.0, 256);
    // start twice too wide so the relaxation has work to do
    let start = Wavefunction::gaussian(cfg.grid, cfg.atoms, 2.0 / trap.sqrt());
    let opts = RelaxOptions { tolerance: 1e-14, ..RelaxOptions::default() };
    let gs = relax(start, &cfg, &opts).unwrap();
    let e = gs.energies.total();
    assert!(((e - 0.5 * trap) / (0.5 * trap)).abs() < 1e-6, "{e}");
    assert!((gs.psi.norm() / cfg.atoms - 1.0).abs() < 1e-14);
    assert!((gs.psi.rms_width() * trap.sqrt() - 1.0).abs() < 1e-3);
}

#[test]
fn relaxation_reports_non_convergence() {
    let cfg = trapped(0.0, 0.2, 0.0, 80.0, 256);
    let start = Wavefunction::gaussian(cfg.grid, cfg.atoms, 8.0);
    let opts = RelaxOptions { max_steps: 100, ..RelaxOptions::default() };
    assert!(matches!(relax(start, &cfg, &opts), Err(GpeError::NoConvergence(..))));
}

#[test]
fn thomas_fermi_bookkeeping() {
    let cfg = trapped(2e-3, 0.01, 0.0, 1024.0, 1024);
    let psi = tf_ground_state(&cfg).unwrap();
    let mu = cfg.tf_chemical_potential();
    let e = energies(&psi, &cfg, Potentials { lattice: false, axial_trap: true, ramp: None }, 0.0).unwrap();
    // quadrature of ½g∫|ψ|⁴ against the 1D closed form 2µ/5
    assert!((e.interaction / (0.4 * mu) - 1.0).abs() < 2e-3, "{}", e.interaction / mu);
    // virial partner: E_pot/N = µ/5
    assert!((e.potential / (0.2 * mu) - 1.0).abs() < 2e-3);
    let bigger = GpeConfig { atoms: 8.0 * cfg.atoms, ..cfg };
    assert!((bigger.tf_chemical_potential() / mu - 4.0).abs() < 1e-12);
}

#[test]
fn imaginary_time_reproduces_thomas_fermi_bulk() {
    let cfg = trapped(2e-3, 0.01, 0.0, 1024.0, 1024);
    let gs = imaginary_time_ground_state(&cfg, &RelaxOptions::default()).unwrap();
    let tf = tf_ground_state(&cfg).unwrap();
    let (r, xi) = (cfg.tf_radius(), cfg.tf_chemical_potential().sqrt().recip());
    let (n, m) = (gs.psi.density(), tf.density());
    let peak = tf.peak_density();
    // deviation in units of the central density outside the edge layer, and
    // locally in the inner half
    let (mut bulk, mut inner): (f64, f64) = (0.0, 0.0);
    for (i, z) in cfg.grid.coordinates().iter().enumerate() {
        if z.abs() <= r - xi {
            bulk = bulk.max((n[i] - m[i]).abs() / peak);
        }
        if z.abs() <= 0.5 * r {
            inner = inner.max(((n[i] - m[i]) / m[i]).abs());
        }
    }
    assert!(bulk < 0.02, "bulk deviation {bulk}");
    assert!(inner < 0.02, "inner deviation {inner}");
    assert!((gs.energies.chemical_potential / cfg.tf_chemical_potential() - 1.0).abs() < 0.02);
}

#[test]
fn free_wavepacket_spreads_analytically() {
    let cfg = GpeConfig { trap: 0.0, ..trapped(0.0, 0.0, 0.0, 400.0, 1024) };
    let sigma0 = 4.0;
    let psi = Wavefunction::gaussian(cfg.grid, cfg.atoms, sigma0);
    let opts = EvolveOptions {
        t_final: 60.0,
        potentials: Potentials { lattice: false, axial_trap: false, ramp: None },
        sample_every: 1000,
        snapshots: vec![60.0],
    };
    let tr = evolve(psi, &cfg, &opts).unwrap();
    for s in &tr.samples {
        let want = sigma0 * (1.0 + (s.time / (sigma0 * sigma0)).powi(2)).sqrt();
        assert!((s.sigma - want).abs() < 1e-8 * want, "t={}", s.time);
    }
    let snap = &tr.snapshots[0];
    let st = sigma0 * (1.0 + (snap.time / (sigma0 * sigma0)).powi(2)).sqrt();
    let peak = cfg.atoms / ((2.0 * std::f64::consts::PI).sqrt() * st);
    for (z, d) in cfg.grid.coordinates().iter().zip(&snap.density) {
        let want = peak * (-z * z / (2.0 * st * st)).exp();
        assert!((d - want).abs() < 1e-6 * peak);
    }
}

#[test]
fn displaced_ground_state_oscillates_rigidly() {
    let trap = 0.1;
    let cfg = trapped(0.0, trap, 0.0, 160.0, 512);
    let shift = 10.0;
    let sigma = trap.sqrt().recip();
    let mut psi = Wavefunction::from_fn(cfg.grid, |z| Complex64::new((-(z - shift).powi(2) / (4.0 * sigma * sigma)).exp(), 0.0));
    psi.normalize_to(cfg.atoms);
    let t = 0.3 * 2.0 * std::f64::consts::PI / trap;
    let opts = EvolveOptions {
        t_final: t,
        potentials: Potentials { lattice: false, axial_trap: true, ramp: None },
        sample_every: 10_000,
        snapshots: vec![t],
    };
    let tr = evolve(psi, &cfg, &opts).unwrap();
    let snap = &tr.snapshots[0];
    let centre = shift * (trap * snap.time).cos();
    let peak = cfg.atoms / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    for (z, d) in cfg.grid.coordinates().iter().zip(&snap.density) {
        let want = peak * (-(z - centre).powi(2) / (2.0 * sigma * sigma)).exp();
        assert!((d - want).abs() < 1e-6 * peak, "z={z}");
    }
}

/// Ground state in trap and lattice, released from the trap at t = 0.
fn release(dt_scale: f64, steps: usize) -> Trajectory {
    let mut cfg = GpeConfig {
        atoms: 1.7e6,
        coupling: budget_coupling(0.0652, 1.7e6, 0.04),
        trap: 0.04,
        depth: 4.9,
        grid: Grid::new(128.0, 512).unwrap(),
        dt: 1.0,
    };
    cfg.dt = 0.9 * cfg.max_time_step(1.0);
    let psi = imaginary_time_ground_state(&cfg, &RelaxOptions::default()).unwrap().psi;
    cfg.dt = dt_scale * cfg.max_time_step(2.0);
    let opts = EvolveOptions {
        t_final: steps as f64 * cfg.dt,
        potentials: Potentials::RELEASE,
        sample_every: steps / 100,
        snapshots: vec![],
    };
    evolve(psi, &cfg, &opts).unwrap()
}

#[test]
fn conservation_and_second_order_convergence() {
    let coarse = release(1.0, 10_000);
    let fine = release(0.5, 20_000);
    assert_eq!(coarse.steps, 10_000);
    assert!(coarse.norm_drift() < 1e-8, "{}", coarse.norm_drift());
    assert!(coarse.energy_drift() < 1e-6, "{}", coarse.energy_drift());
    assert!(fine.norm_drift() < 1e-8);
    let ratio = coarse.energy_drift() / fine.energy_drift();
    assert!((ratio - 4.0).abs() < 0.5, "drift ratio {ratio}");
    assert!(coarse.samples.iter().all(|s| s.energies.is_finite()));
    // the run is not trivially stationary
    let e = &coarse.samples;
    assert!((e[e.len() - 1].energies.kinetic - e[0].energies.kinetic).abs() > 1e-4);
}

#[test]
fn step_bound_and_box_are_enforced() {
    let mut cfg = trapped(0.0, 0.0, 0.0, 100.0, 256);
    let psi = Wavefunction::gaussian(cfg.grid, cfg.atoms, 4.0);
    cfg.dt = 2.0 * cfg.max_time_step(0.0);
    let free = Potentials { lattice: false, axial_trap: false, ramp: None };
    let opts = EvolveOptions { t_final: 1.0, potentials: free, sample_every: 10, snapshots: vec![] };
    assert!(matches!(evolve(psi.clone(), &cfg, &opts), Err(GpeError::StepTooLarge { .. })));
    cfg.dt = 0.5 * cfg.max_time_step(0.0);
    // a packet this narrow spreads to the edges well before t = 400
    let narrow = Wavefunction::gaussian(cfg.grid, cfg.atoms, 1.0);
    let opts = EvolveOptions { t_final: 400.0, ..opts };
    assert!(matches!(evolve(narrow, &cfg, &opts), Err(GpeError::EdgeContamination { .. })));
}

#[test]
fn ramp_reaches_full_depth() {
    let mut cfg = trapped(0.0, 0.1, 3.0, 160.0, 512);
    cfg.dt = 0.5 * cfg.max_time_step(0.0);
    let psi = Wavefunction::gaussian(cfg.grid, cfg.atoms, 0.1f64.sqrt().recip());
    let ramped = Potentials { lattice: true, axial_trap: true, ramp: Some(10.0) };
    let opts = EvolveOptions { t_final: 16.0, potentials: ramped, sample_every: 200, snapshots: vec![] };
    let tr = evolve(psi, &cfg, &opts).unwrap();
    // once the ramp is over the Hamiltonian is static again
    let after: Vec<f64> = tr.samples.iter().filter(|s| s.time > 10.5).map(|s| s.energies.total()).collect();
    let spread = after.iter().fold(0.0f64, |m, e| m.max((e - after[0]).abs()));
    assert!(spread < 1e-6 * after[0].abs());
    assert!(tr.samples[0].energies.potential < after[0]);
}

#[test]
fn cold_noninteracting_packet_matches_band_transport() {
    for &depth in &[1.6, 4.9] {
        let trap = 0.02;
        let mut cfg = trapped(0.0, trap, depth, 512.0, 1024);
        cfg.dt = 0.9 * cfg.max_time_step(0.0);
        let gs = imaginary_time_ground_state(&cfg, &RelaxOptions::default()).unwrap();
        let sigma0 = gs.psi.rms_width();
        let opts = EvolveOptions { t_final: 300.0, potentials: Potentials::RELEASE, sample_every: 10_000, snapshots: vec![] };
        let tr = evolve(gs.psi, &cfg, &opts).unwrap();
        let (times, gpe) = late_slope(&tr);
        // a minimum-uncertainty packet has the quasi-momentum spread of a
        // Maxwell-Boltzmann cloud at T = 1/(4σ₀²)
        let temp = 0.25 / (sigma0 * sigma0);
        let bs = solve_bands(&BlochProblem::uniform(depth, 16, 513).unwrap(), populated_bands(temp)).unwrap();
        let v2 = velocity_moments(&bs, &ZoneMapping::for_bands(&bs), temp).unwrap().mean_square;
        let model: Vec<f64> = times.iter().map(|t| (sigma0 * sigma0 + 4.0 * v2 * t * t).sqrt()).collect();
        let single = weighted_linear_fit(&times, &model, &vec![1.0; times.len()]).unwrap().slope;
        assert!((gpe / single - 1.0).abs() < 0.05, "s={depth}: {gpe} vs {single}");
    }
}

#[test]
fn sound_speed_at_the_quoted_peak_density() {
    let u = RecoilUnits::sodium_532();
    let c = sound_speed_from_peak_density(8e13 * 1e6, 2.75e-9, &u) * 1e3;
    assert!((2.5..=4.0).contains(&c), "{c} mm/s");
    let quarter = sound_speed_from_peak_density(2e13 * 1e6, 2.75e-9, &u) * 1e3;
    assert!((c / quarter - 2.0).abs() < 1e-12);
    assert_eq!(sound_speed_from_peak_density(0.0, 2.75e-9, &u), 0.0);
    // the recoil-unit form agrees with the SI one through n₁D = n₃D π a⊥²
    let omega_perp = 2.0 * std::f64::consts::PI * 317.0;
    let g = radial_coupling(2.75e-9, omega_perp, &u);
    let a_perp2 = optlat_core::units::HBAR / (u.mass * omega_perp);
    let n1d = 8e19 * std::f64::consts::PI * a_perp2 / u.wavenumber;
    let c_recoil = sound_speed(g, n1d) * u.velocity * 1e3;
    assert!((c_recoil - c).abs() < 1e-9 * c);
}

