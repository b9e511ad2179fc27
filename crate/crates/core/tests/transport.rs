use std::f64::consts::PI;

use optlat_core::bands::{solve_bands, BlochProblem, ZoneMapping};
use optlat_core::transport::*;
use optlat_core::units::{RecoilUnits, BOLTZMANN, SODIUM_MASS};

fn units() -> RecoilUnits {
    RecoilUnits::sodium_532()
}

fn cloud(temperature: f64) -> ThermalCloud {
    let u = units();
    ThermalCloud::from_si(temperature, 1e6, 2.0 * PI * 75.0, &u).unwrap()
}

fn ms(x: f64) -> f64 {
    x * 1e-3 / units().time
}

fn times_to(last_ms: f64) -> Vec<f64> {
    (0..=10).map(|i| ms(last_ms * i as f64 / 10.0)).collect()
}

fn model(depth: f64, temperature: f64, t_max: f64) -> TransportModel {
    TransportModel::solve(depth, cloud(temperature), t_max, &TransportOptions::default()).unwrap()
}

#[test]
fn initial_width_of_the_thermal_cloud() {
    let u = units();
    let c = cloud(0.16);
    let sigma_um = initial_width(&c) / u.wavenumber * 1e6;
    // sqrt(k_B T/(m ω²)) evaluated directly in SI
    let t_kelvin = 0.16 * u.temperature;
    let omega = 2.0 * PI * 75.0;
    let direct = (BOLTZMANN * t_kelvin / (SODIUM_MASS * omega * omega)).sqrt() * 1e6;
    assert!((sigma_um - direct).abs() < 1e-9 * direct);
    assert!((sigma_um - 27.6936).abs() < 1e-3, "{sigma_um}");

    let hot = ThermalCloud::new(0.64, 1e6, c.trap_frequency).unwrap();
    let stiff = ThermalCloud::new(0.16, 1e6, 2.0 * c.trap_frequency).unwrap();
    assert!((initial_width(&hot) / initial_width(&c) - 2.0).abs() < 1e-12);
    assert!((initial_width(&stiff) / initial_width(&c) - 0.5).abs() < 1e-12);
}

#[test]
fn free_moments_are_equipartition() {
    for &t in &[0.05, 0.16, 0.3] {
        let bs = solve_bands(&BlochProblem::uniform(0.0, 16, 513).unwrap(), populated_bands(t)).unwrap();
        let m = velocity_moments(&bs, &ZoneMapping::for_bands(&bs), t).unwrap();
        assert!(m.mean.abs() < 1e-14);
        assert!((m.mean_square - t).abs() < 1e-8 * t, "{} vs {t}", m.mean_square);
    }
}

#[test]
fn free_rate_at_thermal_temperature() {
    let u = units();
    let m = model(0.0, 0.16, ms(800.0));
    let series = expansion_series(&m, &times_to(800.0), DEFAULT_Z_POINTS).unwrap();
    let closed = (BOLTZMANN * 0.16 * u.temperature / SODIUM_MASS).sqrt() * 1e3;
    let rate = series.rate * u.velocity * 1e3;
    assert!((closed - 13.0503).abs() < 1e-3);
    assert!((rate - closed).abs() < 0.005 * closed, "{rate}");
    assert!((13.8 - 0.9..=13.8 + 0.9).contains(&rate));
    assert!(!series.asymptote_mismatch);
}

#[test]
fn free_profile_is_gaussian() {
    let m = model(0.0, 0.16, ms(400.0));
    let sigma0 = m.initial_width();
    for &t in &[0.0, ms(10.0), ms(100.0), ms(400.0)] {
        let p = m.profile(t, m.z_grid(t, DEFAULT_Z_POINTS)).unwrap();
        let spread = 2.0 * 0.16f64.sqrt() * t;
        let var = sigma0 * sigma0 + spread * spread;
        let amp = 1e6 / (2.0 * PI * var).sqrt();
        let worst = p
            .z
            .iter()
            .zip(&p.density)
            .map(|(z, f)| (f - amp * (-z * z / (2.0 * var)).exp()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4 * amp, "t={t}: {}", worst / amp);
    }
}

#[test]
fn initial_profile_ignores_the_lattice() {
    let m = model(4.9, 0.16, ms(100.0));
    let sigma0 = m.initial_width();
    let p = m.profile(0.0, m.z_grid(0.0, 2048)).unwrap();
    let amp = 1e6 / ((2.0 * PI).sqrt() * sigma0);
    for (z, f) in p.z.iter().zip(&p.density) {
        assert!((f - amp * (-z * z / (2.0 * sigma0 * sigma0)).exp()).abs() < 1e-4 * amp);
    }
}

#[test]
fn normalisation_and_width_identity() {
    for &s in &[0.0, 1.6, 4.9, 13.4] {
        let m = model(s, 0.16, ms(800.0));
        for t in times_to(800.0) {
            let p = m.profile(t, m.z_grid(t, DEFAULT_Z_POINTS)).unwrap();
            assert!((p.integral() / 1e6 - 1.0).abs() < 1e-3, "s={s} t={t}");
            let w = p.rms_width();
            let a = m.analytic_width(t);
            assert!(((w - a) / a).abs() < 1e-3, "s={s} t={t}: {w} vs {a}");
        }
    }
}

#[test]
fn rate_falls_with_depth() {
    let depths = [0.0, 1.6, 4.9, 9.0, 13.4, 17.9];
    for &temp in &[0.16, 0.06] {
        let rates = rate_vs_depth(&depths, cloud(temp), &times_to(800.0), &TransportOptions::default()).unwrap();
        for w in rates.windows(2) {
            assert!(w[1].rate <= w[0].rate, "T={temp}: {:?}", w);
            assert!(w[1].asymptotic_rate <= w[0].asymptotic_rate);
        }
        // the fit and the asymptote describe the same expansion
        assert!(rates[1..4].iter().all(|r| !r.asymptote_mismatch));
    }
}

#[test]
fn free_rate_scales_as_root_temperature() {
    let temps = [0.04, 0.06, 0.1, 0.16, 0.25];
    let (mut x, mut y) = (vec![], vec![]);
    for &t in &temps {
        let r = rate_at_depth(0.0, cloud(t), &times_to(800.0), &TransportOptions::default()).unwrap();
        x.push(t.ln());
        y.push(r.rate.ln());
    }
    let fit = weighted_linear_fit(&x, &y, &[1.0; 5]).unwrap();
    assert!((fit.slope - 0.5).abs() < 0.01, "exponent {}", fit.slope);
}

#[test]
fn profile_stays_behind_the_fastest_populated_band() {
    for &(s, temp) in &[(1.6, 0.16), (4.9, 0.06), (13.4, 0.16)] {
        let m = model(s, temp, ms(800.0));
        let sigma0 = m.initial_width();
        let v_max = m.quadrature().max_speed();
        for &t in &[ms(100.0), ms(800.0)] {
            let p = m.profile(t, m.z_grid(t, DEFAULT_Z_POINTS)).unwrap();
            let bound = 6.0 * sigma0 + 2.0 * v_max * t;
            let peak = p.peak();
            for (z, f) in p.z.iter().zip(&p.density) {
                if z.abs() > bound {
                    assert!(*f < 1e-6 * peak, "s={s} z={z}");
                }
            }
        }
    }
}

#[test]
fn deep_lattice_freezes_the_cloud() {
    let bs = solve_bands(&BlochProblem::uniform(18.0, 16, 513).unwrap(), 3).unwrap();
    let m = velocity_moments(&bs, &ZoneMapping::for_bands(&bs), 0.16).unwrap();
    assert!(m.mean_square < 0.002 * 0.16);
}

#[test]
fn effective_temperature_round_trip() {
    let u = units();
    let rate = |mm_s: f64| mm_s * 1e-3 / u.velocity;
    let t = effective_temperature(rate(8.1)).unwrap();
    assert!((0.055..=0.070).contains(&t));
    assert!((t - 0.061_638).abs() < 1e-5, "{t}");
    let back = t.sqrt() * u.velocity * 1e3;
    assert!((back - 8.1).abs() < 0.005 * 8.1);
    assert!((effective_temperature(rate(13.05)).unwrap() - 0.16).abs() < 1e-3);
    let kelvin = effective_temperature_si(8.1, &u).unwrap();
    assert!((kelvin / u.temperature - t).abs() < 1e-12);
    assert!(effective_temperature(0.0).is_err());
}

#[test]
fn free_rate_at_effective_temperature() {
    let u = units();
    let r = rate_at_depth(0.0, cloud(0.06), &times_to(800.0), &TransportOptions::default()).unwrap();
    let mm_s = r.rate * u.velocity * 1e3;
    assert!((mm_s - 7.99165).abs() < 0.005 * 7.99165, "{mm_s}");
}

#[test]
fn edges_emerge_only_for_warm_clouds() {
    let depth = 2.25;
    let t = ms(400.0);
    let bs = solve_bands(&BlochProblem::uniform(depth, 32, 513).unwrap(), 3).unwrap();
    let v_max = front_speed(&bs).unwrap();
    for &(temp, expect) in &[(0.18, true), (0.05, false)] {
        let m = model(depth, temp, t);
        let p = m.profile(t, m.z_grid(t, 16384)).unwrap();
        let r = edge_visibility(&p, v_max, t, m.initial_width()).unwrap();
        assert_eq!(r.resolvable, expect, "T={temp}: {r:?}");
        if expect {
            assert!(((r.steepest - r.front) / r.front).abs() < EDGE_POSITION_TOL);
        }
    }
}

#[test]
fn edge_needs_positive_time() {
    let m = model(2.25, 0.18, ms(10.0));
    let p = m.profile(0.0, m.z_grid(0.0, 512)).unwrap();
    assert!(matches!(
        edge_visibility(&p, 0.3, 0.0, m.initial_width()),
        Err(TransportError::EdgeTime)
    ));
}

#[test]
fn series_input_checks() {
    let m = model(0.0, 0.16, ms(10.0));
    assert!(matches!(
        expansion_series(&m, &[0.0, 1.0, 2.0], 256),
        Err(TransportError::Times)
    ));
    // far too short for σ to reach 3σ₀
    let short: Vec<f64> = (0..8).map(|i| ms(0.1 * i as f64)).collect();
    assert!(matches!(
        expansion_series(&m, &short, 256),
        Err(TransportError::FitWindowEmpty)
    ));
}
