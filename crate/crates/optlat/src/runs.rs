//! Physics drivers behind the scenarios: SI in, recoil units inside.

use std::f64::consts::PI;

use optlat_core::bands::{solve_bands, BandError, BlochProblem};
use optlat_core::crossover::{self, Comparison, CrossoverError};
use optlat_core::meanfield::{
    imaginary_time_ground_state, evolve, Closure, EvolveOptions, GpeConfig, GpeError, Grid,
    Potentials, RelaxOptions, Trajectory, TrapParams,
};
use optlat_core::transport::{
    edge_visibility, expansion_series, front_speed, DensityProfile, EdgeReport, ExpansionSeries,
    ThermalCloud, TransportError, TransportModel, TransportOptions,
};
use optlat_core::units::{RecoilUnits, UnitsError};
use rayon::prelude::*;

use crate::config::{ClosureChoice, GpeBlock, Numerics, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Units(#[from] UnitsError),
    #[error(transparent)]
    Bands(#[from] BandError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Gpe(#[from] GpeError),
    #[error(transparent)]
    Crossover(#[from] CrossoverError),
    #[error("profile time {0} ms is past the end of the run")]
    ProfileTime(f64),
    #[error("scenario has no {0} block")]
    MissingPhysics(&'static str),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// SI ↔ recoil conversions at the output boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Si(pub RecoilUnits);

impl Si {
    pub fn from_ms(&self, ms: f64) -> f64 {
        ms * 1e-3 / self.0.time
    }

    pub fn ms(&self, t: f64) -> f64 {
        t * self.0.time * 1e3
    }

    pub fn from_um(&self, um: f64) -> f64 {
        um * 1e-6 * self.0.wavenumber
    }

    pub fn um(&self, z: f64) -> f64 {
        z / self.0.wavenumber * 1e6
    }

    pub fn mm_s(&self, v: f64) -> f64 {
        v * self.0.velocity * 1e3
    }

    /// Linear density per `1/k_L` → per µm.
    pub fn per_um(&self, n: f64) -> f64 {
        n * self.0.wavenumber * 1e-6
    }

    pub fn khz(&self, e: f64) -> f64 {
        self.0.energy_to_khz(e)
    }

    pub fn trap(&self, hz: f64) -> f64 {
        self.0.frequency_to_recoil(2.0 * PI * hz)
    }
}

pub fn transport_options(n: &Numerics) -> TransportOptions {
    TransportOptions {
        cutoff: n.transport_cutoff,
        q_points: n.q_points,
        z_points: n.z_points,
    }
}

/// What a thermal job should compute besides the model itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Wants {
    pub series: bool,
    pub profiles: bool,
    pub edges: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalRun {
    pub temperature: f64,
    pub depth: f64,
    pub sigma0: f64,
    pub series: Option<ExpansionSeries>,
    pub profiles: Vec<DensityProfile>,
    /// Front analysis for each profile with `t > 0`.
    pub edges: Vec<(f64, EdgeReport)>,
}

/// Band-theory expansion of a thermal cloud at one depth.
pub fn thermal_run(sc: &Scenario, temperature: f64, depth: f64, wants: Wants, si: &Si) -> Result<ThermalRun, RunError> {
    let cloud = sc.thermal().ok_or(RunError::MissingPhysics("thermal"))?;
    let numerics = &sc.numerics;
    let times: Vec<f64> = sc.sweep.times_ms.iter().map(|&t| si.from_ms(t)).collect();
    let profile_times: Vec<f64> = sc.sweep.profile_times_ms.iter().map(|&t| si.from_ms(t)).collect();
    let opts = transport_options(numerics);
    let c = ThermalCloud::new(temperature, cloud.atoms, si.trap(cloud.trap_hz))?;
    let mut t_max = 0.0_f64;
    if wants.series {
        t_max = times.iter().copied().fold(t_max, f64::max);
    }
    if wants.profiles {
        t_max = profile_times.iter().copied().fold(t_max, f64::max);
    }
    let model = TransportModel::solve(depth, c, t_max.max(si.from_ms(1.0)), &opts)?;
    let series = wants
        .series
        .then(|| expansion_series(&model, &times, opts.z_points))
        .transpose()?;
    let mut profiles = Vec::new();
    let mut edges = Vec::new();
    if wants.profiles {
        let v_max = if wants.edges {
            let bs = solve_bands(&BlochProblem::uniform(depth, numerics.band_cutoff, 513)?, 1)?;
            front_speed(&bs)?
        } else {
            0.0
        };
        for &t in &profile_times {
            let p = model.profile(t, model.z_grid(t, opts.z_points))?;
            if wants.edges && t > 0.0 {
                edges.push((t, edge_visibility(&p, v_max, t, model.initial_width())?));
            }
            profiles.push(p);
        }
    }
    Ok(ThermalRun {
        temperature,
        depth,
        sigma0: model.initial_width(),
        series,
        profiles,
        edges,
    })
}

/// Box, time span and sampling of one mean-field run, in recoil units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpeSettings {
    pub box_length: f64,
    pub points: usize,
    pub duration: f64,
    pub samples: usize,
    pub dt: Option<f64>,
    pub ramp: Option<f64>,
}

impl GpeSettings {
    /// Settings of the `gpe.depth` run.
    pub fn main(block: &GpeBlock, si: &Si) -> Self {
        Self {
            box_length: si.from_um(block.box_um),
            points: block.points,
            duration: si.from_ms(block.duration_ms),
            samples: block.samples,
            dt: block.dt_us.map(|us| si.from_ms(1e-3 * us)),
            ramp: block.ramp_ms.map(|ms| si.from_ms(ms)),
        }
    }

    /// Settings of the free calibration run and of shallow comparison depths.
    pub fn shallow(block: &GpeBlock, si: &Si) -> Self {
        Self {
            box_length: si.from_um(block.calibration_box_um),
            duration: si.from_ms(block.calibration_duration_ms),
            ..Self::main(block, si)
        }
    }
}

pub fn gpe_config(block: &GpeBlock, depth: f64, settings: &GpeSettings, si: &Si) -> Result<GpeConfig, RunError> {
    let trap = TrapParams {
        atoms: block.atoms,
        scattering_length: block.scattering_length,
        radial_frequency: 2.0 * PI * block.radial_hz,
        axial_frequency: 2.0 * PI * block.axial_hz,
    };
    let closure = match block.closure {
        ClosureChoice::Radial => Closure::Radial,
        ClosureChoice::EnergyBudget(khz) => Closure::EnergyBudget(si.0.khz_to_energy(khz)),
    };
    let grid = Grid::new(settings.box_length, settings.points)?;
    let mut cfg = trap.config(closure, depth, grid, 1.0, &si.0)?;
    // the relaxed state's µ lies well below 4µ_TF + s
    cfg.dt = settings
        .dt
        .unwrap_or_else(|| 0.9 * cfg.max_time_step(4.0 * cfg.tf_chemical_potential() + depth));
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpeRun {
    pub depth: f64,
    pub config: GpeConfig,
    pub trajectory: Trajectory,
}

impl GpeRun {
    pub fn times(&self) -> Vec<f64> {
        self.trajectory.samples.iter().map(|s| s.time).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.trajectory.samples.iter().map(|s| s.sigma).collect()
    }
}

/// Ground state in trap and lattice, then release from the trap with the
/// lattice kept on. With a ramp the ground state is taken without the
/// lattice, which then rises during the release.
pub fn gpe_run(block: &GpeBlock, depth: f64, settings: &GpeSettings, snapshots: &[f64], si: &Si) -> Result<GpeRun, RunError> {
    let cfg = gpe_config(block, depth, settings, si)?;
    let potentials = match settings.ramp {
        Some(r) if r > 0.0 => Potentials {
            lattice: true,
            axial_trap: false,
            ramp: Some(r),
        },
        _ => Potentials::RELEASE,
    };
    let relax_cfg = GpeConfig {
        depth: if potentials.ramp.is_some() { 0.0 } else { depth },
        ..cfg
    };
    let ground = imaginary_time_ground_state(&relax_cfg, &RelaxOptions::default())?;
    if let Some(&late) = snapshots.iter().find(|&&t| t > settings.duration * (1.0 + 1e-9)) {
        return Err(RunError::ProfileTime(si.ms(late)));
    }
    let steps = (settings.duration / cfg.dt).round().max(1.0);
    let opts = EvolveOptions {
        t_final: settings.duration,
        potentials,
        sample_every: ((steps / settings.samples as f64) as usize).max(1),
        snapshots: snapshots.to_vec(),
    };
    let trajectory = evolve(ground.psi, &cfg, &opts)?;
    Ok(GpeRun {
        depth,
        config: cfg,
        trajectory,
    })
}

/// Mean-field runs set against the single-particle model at the effective
/// temperature of the free (s = 0) run.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverStudy {
    /// `T/T_R` reproducing the free run's late-window rate.
    pub temperature: f64,
    pub calibration: GpeRun,
    pub runs: Vec<(GpeRun, Comparison)>,
}

/// `deep` depths use the main settings, `shallow` ones the calibration
/// settings. All runs go through the current rayon pool.
pub fn crossover_study(
    block: &GpeBlock,
    deep: &[f64],
    shallow: &[f64],
    snapshots: &[f64],
    numerics: &Numerics,
    si: &Si,
) -> Result<CrossoverStudy, RunError> {
    let main = GpeSettings::main(block, si);
    let cal = GpeSettings::shallow(block, si);
    let mut jobs: Vec<(f64, GpeSettings, &[f64])> = vec![(0.0, cal, &[])];
    jobs.extend(shallow.iter().map(|&s| (s, cal, &[] as &[f64])));
    jobs.extend(deep.iter().map(|&s| (s, main, snapshots)));
    let mut runs = jobs
        .par_iter()
        .map(|(s, set, snaps)| gpe_run(block, *s, set, snaps, si))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter();
    let calibration = runs.next().expect("calibration job");
    let (t0, w0) = (calibration.times(), calibration.widths());
    let target = crossover::late_rate(&t0, &w0)?;
    let temperature = crossover::calibrate_temperature(w0[0], &t0, target)?;
    let runs = runs
        .map(|run| {
            let c = crossover::compare(run.depth, temperature, &run.times(), &run.widths(), numerics.transport_cutoff)?;
            Ok((run, c))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(CrossoverStudy {
        temperature,
        calibration,
        runs,
    })
}

/// Pool with `threads` workers (0 lets rayon pick).
pub fn pool(threads: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))
}
