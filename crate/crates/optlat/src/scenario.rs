//! Execute a scenario: compute its datasets, write CSV (and optional SVG)
//! files, then the manifest.

use std::path::PathBuf;
use std::time::Instant;

use optlat_core::bands::{solve_bands, BlochProblem};
use optlat_core::crossover::{ballistic_widths, mean_square_velocity};
use optlat_core::meanfield::{classify_regime, sound_speed_from_peak_density};
use optlat_core::transport::{DensityProfile, ThermalCloud, TransportModel};
use optlat_core::units::RecoilUnits;
use rayon::prelude::*;

use crate::config::{Scenario, ScenarioKind};
use crate::dataset::{Cell, Dataset};
use crate::manifest::{sha256_hex, write_atomic, write_manifest, Constants, OutputRecord, RunManifest};
use crate::plot::{emit_plot, PlotStyle};
use crate::runs::{crossover_study, gpe_run, pool, thermal_run, transport_options, GpeRun, GpeSettings, RunError, Si, ThermalRun, Wants};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// 0 lets the pool size itself.
    pub threads: usize,
    pub svg: bool,
    /// Echoed into the manifest.
    pub config_text: String,
}

/// A dataset and the plot style it is drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub data: Dataset,
    pub style: Option<PlotStyle>,
}

/// Datasets that were computed and the errors of the jobs that failed.
#[derive(Debug, Default)]
pub struct Produced {
    pub outputs: Vec<Output>,
    pub errors: Vec<String>,
}

impl Produced {
    fn push(&mut self, data: Dataset, style: Option<PlotStyle>) {
        self.outputs.push(Output { data, style });
    }
}

fn label(x: f64) -> String {
    format!("{x}")
}

/// Run `sc` and write its files; errors end up in the returned manifest.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> RunManifest {
    let start = Instant::now();
    let units = RecoilUnits::new(sc.lattice.wavelength, sc.lattice.mass);
    let mut manifest = RunManifest {
        scenario: sc.name.clone(),
        kind: sc.kind.to_string(),
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: opts.config_text.clone(),
        threads: opts.threads,
        constants: constants(sc, units.as_ref().ok()),
        wall_clock_s: 0.0,
        outputs: Vec::new(),
        warnings: sc.warnings.clone(),
        errors: Vec::new(),
    };
    let produced = match (units, pool(opts.threads)) {
        (Ok(u), Ok(p)) => p.install(|| produce(sc, &Si(u))),
        (Err(e), _) => Produced {
            errors: vec![e.to_string()],
            ..Default::default()
        },
        (_, Err(e)) => Produced {
            errors: vec![e.to_string()],
            ..Default::default()
        },
    };
    manifest.errors = produced.errors;
    if let Err(e) = std::fs::create_dir_all(&opts.out_dir) {
        manifest.errors.push(format!("{}: {e}", opts.out_dir.display()));
        return manifest;
    }
    for out in &produced.outputs {
        match write_output(out, sc, opts) {
            Ok(mut recs) => manifest.outputs.append(&mut recs),
            Err(e) => manifest.errors.push(e),
        }
    }
    manifest.wall_clock_s = start.elapsed().as_secs_f64();
    if let Err(e) = write_manifest(&opts.out_dir, &manifest) {
        manifest.errors.push(format!("manifest: {e}"));
    }
    manifest
}

fn write_output(out: &Output, sc: &Scenario, opts: &RunOptions) -> Result<Vec<OutputRecord>, String> {
    let csv = out.data.to_csv().map_err(|e| e.to_string())?;
    let file = out.data.file_name();
    write_atomic(&opts.out_dir.join(&file), &csv).map_err(|e| format!("{file}: {e}"))?;
    let mut recs = vec![OutputRecord {
        sha256: sha256_hex(&csv),
        bytes: csv.len(),
        rows: Some(out.data.rows.len()),
        file,
    }];
    if let (true, Some(style)) = (opts.svg, out.style) {
        // an empty dataset has no plot; the CSV header alone still stands
        if !out.data.is_empty() {
            let svg = emit_plot(&out.data, &style, &sc.name).map_err(|e| e.to_string())?;
            let file = format!("{}.svg", out.data.name);
            write_atomic(&opts.out_dir.join(&file), svg.as_bytes()).map_err(|e| format!("{file}: {e}"))?;
            recs.push(OutputRecord {
                sha256: sha256_hex(svg.as_bytes()),
                bytes: svg.len(),
                rows: None,
                file,
            });
        }
    }
    Ok(recs)
}

fn constants(sc: &Scenario, u: Option<&RecoilUnits>) -> Constants {
    let nan = f64::NAN;
    Constants {
        wavelength_m: sc.lattice.wavelength,
        mass_kg: sc.lattice.mass,
        recoil_energy_j: u.map_or(nan, |u| u.energy),
        recoil_energy_khz: u.map_or(nan, |u| u.energy_to_khz(1.0)),
        recoil_temperature_k: u.map_or(nan, |u| u.temperature),
        recoil_velocity_m_s: u.map_or(nan, |u| u.velocity),
        time_unit_s: u.map_or(nan, |u| u.time),
        length_unit_m: u.map_or(nan, |u| 1.0 / u.wavenumber),
    }
}

/// Compute every dataset of `sc` in the current pool.
pub fn produce(sc: &Scenario, si: &Si) -> Produced {
    match sc.kind {
        ScenarioKind::Bands => bands(sc),
        ScenarioKind::Expand => thermal(sc, si, Wants { series: true, profiles: !sc.sweep.profile_times_ms.is_empty(), edges: false }),
        ScenarioKind::Fig1 | ScenarioKind::Fig2 => thermal(sc, si, Wants { series: true, ..Default::default() }),
        ScenarioKind::Fig3a => thermal(sc, si, Wants { series: false, profiles: true, edges: true }),
        ScenarioKind::Regimes => regimes(sc, si),
        ScenarioKind::Gpe => gpe(sc, si),
        ScenarioKind::Fig3b => fig3b(sc, si),
    }
}

fn bands(sc: &Scenario) -> Produced {
    let n = &sc.numerics;
    let results: Vec<_> = sc
        .sweep
        .depths
        .par_iter()
        .map(|&s| {
            let prob = BlochProblem::uniform(s, n.band_cutoff, n.band_q_points)?;
            Ok::<_, RunError>((s, solve_bands(&prob, n.band_count)?))
        })
        .collect();
    let mut out = Produced::default();
    let mut d = Dataset::new("bands", &["s", "band", "q", "E_over_ER", "v_over_vR"]);
    for r in results {
        match r {
            Ok((s, bs)) => {
                for (band, q, e, v) in bs.rows() {
                    d.push(vec![s.into(), band.number().into(), q.into(), e.into(), v.into()]);
                }
            }
            Err(e) => out.errors.push(e.to_string()),
        }
    }
    if !sc.sweep.depths.is_empty() {
        out.push(d, Some(PlotStyle::BANDS));
    }
    out
}

fn jobs(sc: &Scenario) -> Vec<(f64, f64)> {
    let temps = sc.temperatures();
    temps
        .iter()
        .flat_map(|&t| sc.sweep.depths.iter().map(move |&s| (t, s)))
        .collect()
}

fn thermal_runs(sc: &Scenario, si: &Si, wants: Wants, out: &mut Produced) -> Vec<ThermalRun> {
    let results: Vec<_> = jobs(sc)
        .par_iter()
        .map(|&(t, s)| thermal_run(sc, t, s, wants, si).map_err(|e| format!("T={t} T_R, s={s}: {e}")))
        .collect();
    results
        .into_iter()
        .filter_map(|r| r.map_err(|e| out.errors.push(e)).ok())
        .collect()
}

fn profile_dataset(name: String, profiles: &[DensityProfile], si: &Si) -> Dataset {
    let mut d = Dataset::new(name, &["t_ms", "z_um", "density_per_um"]);
    for p in profiles {
        let t = si.ms(p.time);
        for (z, f) in p.z.iter().zip(&p.density) {
            d.push(vec![t.into(), si.um(*z).into(), si.per_um(*f).into()]);
        }
    }
    d
}

fn thermal(sc: &Scenario, si: &Si, wants: Wants) -> Produced {
    let mut out = Produced::default();
    let runs = thermal_runs(sc, si, wants, &mut out);
    if sc.sweep.depths.is_empty() {
        return out;
    }
    if wants.series {
        let mut series = Dataset::new("series", &["T_over_TR", "s", "t_ms", "sigma_um", "sigma_analytic_um"]);
        let mut rates = Dataset::new(
            "rates",
            &["T_over_TR", "s", "rate_mm_s", "rate_stderr_mm_s", "asymptotic_rate_mm_s", "asymptote_mismatch", "fit_start_ms", "fit_end_ms"],
        );
        for r in &runs {
            let Some(x) = &r.series else { continue };
            for i in 0..x.times.len() {
                series.push(vec![
                    r.temperature.into(),
                    r.depth.into(),
                    si.ms(x.times[i]).into(),
                    si.um(x.sigma[i]).into(),
                    si.um(x.sigma_analytic[i]).into(),
                ]);
            }
            rates.push(vec![
                r.temperature.into(),
                r.depth.into(),
                si.mm_s(x.rate).into(),
                si.mm_s(x.rate_stderr).into(),
                si.mm_s(x.asymptotic_rate).into(),
                x.asymptote_mismatch.into(),
                si.ms(x.fit_window.0).into(),
                si.ms(x.fit_window.1).into(),
            ]);
        }
        if sc.kind != ScenarioKind::Fig2 {
            out.push(series, Some(PlotStyle::WIDTHS));
        }
        out.push(rates, Some(PlotStyle::RATES));
    }
    if wants.profiles {
        for r in &runs {
            let name = format!("profiles_T{}_s{}", label(r.temperature), label(r.depth));
            out.push(profile_dataset(name, &r.profiles, si), Some(PlotStyle::PROFILES));
        }
    }
    if wants.edges {
        let mut d = Dataset::new(
            "edges",
            &["T_over_TR", "s", "t_ms", "front_um", "steepest_um", "contrast", "prominence", "resolvable"],
        );
        for r in &runs {
            for (t, e) in &r.edges {
                d.push(vec![
                    r.temperature.into(),
                    r.depth.into(),
                    si.ms(*t).into(),
                    si.um(e.front).into(),
                    si.um(e.steepest).into(),
                    e.contrast.into(),
                    e.prominence.into(),
                    e.resolvable.into(),
                ]);
            }
        }
        out.push(d, None);
    }
    out
}

fn regimes(sc: &Scenario, si: &Si) -> Produced {
    let mut out = Produced::default();
    let runs = thermal_runs(sc, si, Wants { series: true, ..Default::default() }, &mut out);
    if sc.sweep.depths.is_empty() {
        return out;
    }
    let c = sound_speed_from_peak_density(sc.sound.peak_density_cm3 * 1e6, sc.sound.scattering_length, &si.0) * 1e3;
    let mut d = Dataset::new("regimes", &["T_over_TR", "s", "rate_mm_s", "sound_mm_s", "regime"]);
    for r in &runs {
        let Some(x) = &r.series else { continue };
        let rate = si.mm_s(x.rate);
        d.push(vec![
            r.temperature.into(),
            r.depth.into(),
            rate.into(),
            c.into(),
            classify_regime(rate, c).to_string().into(),
        ]);
    }
    out.push(d, Some(PlotStyle::REGIMES));
    out
}

fn trajectory_rows(d: &mut Dataset, run: &GpeRun, si: &Si) {
    for s in &run.trajectory.samples {
        d.push(vec![
            run.depth.into(),
            si.ms(s.time).into(),
            si.um(s.sigma).into(),
            si.khz(s.energies.kinetic).into(),
            si.khz(s.energies.interaction).into(),
            si.khz(s.energies.potential).into(),
            s.norm.into(),
        ]);
    }
}

fn trajectory_dataset() -> Dataset {
    Dataset::new(
        "gpe_trajectory",
        &["s", "t_ms", "sigma_um", "E_kin_kHz", "E_int_kHz", "E_pot_kHz", "norm"],
    )
}

fn snapshot_dataset(name: &str, run: &GpeRun, si: &Si) -> Dataset {
    let z = run.config.grid.coordinates();
    let mut d = Dataset::new(name, &["t_ms", "z_um", "density_per_um"]);
    for snap in &run.trajectory.snapshots {
        let t = si.ms(snap.time);
        for (z, n) in z.iter().zip(&snap.density) {
            d.push(vec![t.into(), si.um(*z).into(), si.per_um(*n).into()]);
        }
    }
    d
}

fn gpe(sc: &Scenario, si: &Si) -> Produced {
    let mut out = Produced::default();
    let Some(block) = sc.gpe() else {
        out.errors.push(RunError::MissingPhysics("gpe").to_string());
        return out;
    };
    let snaps: Vec<f64> = sc.sweep.profile_times_ms.iter().map(|&t| si.from_ms(t)).collect();
    match gpe_run(block, block.depth, &GpeSettings::main(block, si), &snaps, si) {
        Ok(run) => {
            let mut d = trajectory_dataset();
            trajectory_rows(&mut d, &run, si);
            out.push(d, Some(PlotStyle::WIDTHS_GPE));
            if !snaps.is_empty() {
                out.push(snapshot_dataset("gpe_profiles", &run, si), Some(PlotStyle::PROFILES));
            }
        }
        Err(e) => out.errors.push(format!("s={}: {e}", block.depth)),
    }
    out
}

fn fig3b(sc: &Scenario, si: &Si) -> Produced {
    let mut out = Produced::default();
    let Some(block) = sc.gpe() else {
        out.errors.push(RunError::MissingPhysics("gpe").to_string());
        return out;
    };
    let snaps: Vec<f64> = sc.sweep.profile_times_ms.iter().map(|&t| si.from_ms(t)).collect();
    let study = match crossover_study(block, &[block.depth], &sc.sweep.depths, &snaps, &sc.numerics, si) {
        Ok(s) => s,
        Err(e) => {
            out.errors.push(e.to_string());
            return out;
        }
    };
    let mut traj = trajectory_dataset();
    trajectory_rows(&mut traj, &study.calibration, si);
    let mut cmp = Dataset::new(
        "comparison",
        &["s", "sigma0_um", "T_eff_over_TR", "gpe_rate_mm_s", "single_particle_rate_mm_s", "ratio"],
    );
    for (run, c) in &study.runs {
        trajectory_rows(&mut traj, run, si);
        cmp.push(vec![
            c.depth.into(),
            si.um(c.sigma0).into(),
            study.temperature.into(),
            si.mm_s(c.interacting).into(),
            si.mm_s(c.single_particle).into(),
            c.ratio().into(),
        ]);
    }
    out.push(traj, Some(PlotStyle::WIDTHS_GPE));
    out.push(cmp, None);

    // the deep run is last; its snapshots sit beside the single-particle
    // profiles at the same times, width and effective temperature
    if let Some((deep, c)) = study.runs.last() {
        if !snaps.is_empty() {
            out.push(snapshot_dataset("gpe_profiles", deep, si), Some(PlotStyle::PROFILES));
            let single = ThermalCloud::new(study.temperature, block.atoms, 2.0 * study.temperature.sqrt() / c.sigma0)
                .map_err(RunError::from)
                .and_then(|cloud| {
                    let t_max = snaps.iter().copied().fold(0.0, f64::max).max(1.0);
                    let opts = transport_options(&sc.numerics);
                    let m = TransportModel::solve(deep.depth, cloud, t_max, &opts)?;
                    snaps
                        .iter()
                        .map(|&t| Ok(m.profile(t, m.z_grid(t, opts.z_points))?))
                        .collect::<Result<Vec<_>, RunError>>()
                });
            match single {
                Ok(p) => out.push(profile_dataset("single_particle_profiles".into(), &p, si), Some(PlotStyle::PROFILES)),
                Err(e) => out.errors.push(format!("single-particle profiles: {e}")),
            }
        }
    }

    // the experimental cloud under band theory alone
    let r = &sc.reference;
    if !sc.sweep.times_ms.is_empty() {
        match mean_square_velocity(block.depth, r.temperature, sc.numerics.transport_cutoff) {
            Ok(v2) => {
                let times: Vec<f64> = sc.sweep.times_ms.iter().map(|&t| si.from_ms(t)).collect();
                let widths = ballistic_widths(v2, si.from_um(r.waist_um), &times);
                let mut d = Dataset::new("reference_widths", &["s", "T_over_TR", "t_ms", "sigma_um"]);
                for (t, w) in sc.sweep.times_ms.iter().zip(&widths) {
                    d.push(vec![block.depth.into(), r.temperature.into(), Cell::Num(*t), si.um(*w).into()]);
                }
                out.push(d, None);
            }
            Err(e) => out.errors.push(format!("reference widths: {e}")),
        }
    }
    out
}
