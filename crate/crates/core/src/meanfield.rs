//! Quasi-1D Gross–Pitaevskii dynamics in recoil units.
//!
//! ```text
//! i ∂ψ/∂t = [-∂² + s(t) sin² z + (ω²/4) z² + g |ψ|²] ψ
//! ```
//!
//! with `z` in `1/k_L`, `t` in `ħ/E_R`, `ω = ħω_z/E_R`, `∫|ψ|² dz = N` and the
//! 1D coupling `g = g₁D k_L / E_R`. The box is periodic and sampled on a
//! power-of-two grid; time stepping is Strang splitting with an exact
//! spectral kinetic step.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use crate::fft::{Fft, FftError};
use crate::units::{RecoilUnits, HBAR};

/// Largest time step as a fraction of the inverse fastest energy scale.
pub const STEP_SAFETY: f64 = 0.1;
/// Density at the box edge, relative to the peak, that aborts a run.
pub const EDGE_DENSITY_LIMIT: f64 = 1e-6;
/// Fraction of the box at each end that must stay empty.
const EDGE_FRACTION: f64 = 1.0 / 32.0;
/// The box must reach at least this many Thomas–Fermi radii from the centre.
pub const MIN_BOX_RADII: f64 = 1.5;
pub const DEFAULT_RELAX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GpeError {
    #[error(transparent)]
    Fft(#[from] FftError),
    #[error("box length must be positive, got {0}")]
    Length(f64),
    #[error("atom number must be positive, got {0}")]
    Atoms(f64),
    #[error("coupling must be non-negative, got {0}")]
    Coupling(f64),
    #[error("trap frequency must be non-negative, got {0}")]
    Trap(f64),
    #[error("lattice depth must be non-negative, got {0}")]
    Depth(f64),
    #[error("time step must be positive, got {0}")]
    Step(f64),
    #[error("half box {half} shorter than {MIN_BOX_RADII} Thomas-Fermi radii ({radius})")]
    BoxTooSmall { half: f64, radius: f64 },
    #[error("Thomas-Fermi state needs g > 0 and a trap")]
    NoThomasFermi,
    #[error("time step {dt} above the bound {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("density at the box edge reached {ratio:e} of the peak at t = {time}")]
    EdgeContamination { time: f64, ratio: f64 },
    #[error("imaginary-time relaxation did not converge in {0} steps (last change {1:e})")]
    NoConvergence(usize, f64),
    #[error("wavefunction grid does not match the configuration")]
    GridMismatch,
}

/// Periodic box `[-L/2, L/2)` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    length: f64,
    points: usize,
}

impl Grid {
    pub fn new(length: f64, points: usize) -> Result<Self, GpeError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(GpeError::Length(length));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(FftError::Length(points).into());
        }
        Ok(Self { length, points })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dz(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn z(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dz()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.z(i)).collect()
    }

    /// Largest resolved wavenumber `π/dz` [k_L].
    pub fn max_wavenumber(&self) -> f64 {
        PI / self.dz()
    }
}

/// Parameters of one mean-field run, in recoil units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpeConfig {
    pub atoms: f64,
    /// `g₁D k_L / E_R`.
    pub coupling: f64,
    /// Axial trap `ħω_z/E_R`.
    pub trap: f64,
    /// Lattice depth `s`.
    pub depth: f64,
    pub grid: Grid,
    /// [ħ/E_R]
    pub dt: f64,
}

impl GpeConfig {
    pub fn validate(&self) -> Result<(), GpeError> {
        if !(self.atoms > 0.0) {
            return Err(GpeError::Atoms(self.atoms));
        }
        if !(self.coupling >= 0.0) {
            return Err(GpeError::Coupling(self.coupling));
        }
        if !(self.trap >= 0.0) {
            return Err(GpeError::Trap(self.trap));
        }
        if !(self.depth >= 0.0) {
            return Err(GpeError::Depth(self.depth));
        }
        if !(self.dt > 0.0) {
            return Err(GpeError::Step(self.dt));
        }
        Ok(())
    }

    /// 1D Thomas–Fermi chemical potential `(3 N g ω / 8)^{2/3}` [E_R].
    pub fn tf_chemical_potential(&self) -> f64 {
        (3.0 * self.atoms * self.coupling * self.trap / 8.0).powf(2.0 / 3.0)
    }

    /// Thomas–Fermi half-length `2 √µ / ω` [1/k_L].
    pub fn tf_radius(&self) -> f64 {
        2.0 * self.tf_chemical_potential().sqrt() / self.trap
    }

    /// `STEP_SAFETY / max(s/2 + k_max², µ)` for a state of chemical potential `mu`.
    pub fn max_time_step(&self, mu: f64) -> f64 {
        let k = self.grid.max_wavenumber();
        STEP_SAFETY / (0.5 * self.depth + k * k).max(mu)
    }
}

/// `g = 2 ħω⊥ a_s` expressed as `g k_L / E_R`.
pub fn radial_coupling(scattering_length: f64, radial_frequency: f64, units: &RecoilUnits) -> f64 {
    2.0 * units.frequency_to_recoil(radial_frequency) * scattering_length * units.wavenumber
}

/// Coupling whose 1D Thomas–Fermi state has chemical potential `mu`.
pub fn coupling_for_chemical_potential(mu: f64, atoms: f64, trap: f64) -> f64 {
    8.0 * mu.powf(1.5) / (3.0 * atoms * trap)
}

/// Coupling whose 1D Thomas–Fermi state carries `energy` of interaction
/// energy per atom (`E_int/N = 2µ/5` in 1D).
pub fn budget_coupling(energy: f64, atoms: f64, trap: f64) -> f64 {
    coupling_for_chemical_potential(2.5 * energy, atoms, trap)
}

/// Quasi-1D coupling closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Closure {
    /// `g₁D = 2ħω⊥a_s`.
    Radial,
    /// Coupling chosen so the Thomas–Fermi interaction energy per atom is
    /// this value [E_R]; stands in for the energy released by the radial
    /// degrees of freedom of a 3D cloud.
    EnergyBudget(f64),
}

/// Physical trap and atom parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapParams {
    pub atoms: f64,
    /// [m]
    pub scattering_length: f64,
    /// [rad/s]
    pub radial_frequency: f64,
    /// [rad/s]
    pub axial_frequency: f64,
}

impl TrapParams {
    /// Recoil-unit configuration for a run at lattice depth `depth`.
    pub fn config(&self, closure: Closure, depth: f64, grid: Grid, dt: f64, units: &RecoilUnits) -> Result<GpeConfig, GpeError> {
        let trap = units.frequency_to_recoil(self.axial_frequency);
        let coupling = match closure {
            Closure::Radial => radial_coupling(self.scattering_length, self.radial_frequency, units),
            Closure::EnergyBudget(e) => budget_coupling(e, self.atoms, trap),
        };
        let cfg = GpeConfig {
            atoms: self.atoms,
            coupling,
            trap,
            depth,
            grid,
            dt,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Complex amplitudes on a grid, normalised to the atom number.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: Grid,
    psi: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: Grid, psi: Vec<Complex64>) -> Result<Self, GpeError> {
        if psi.len() != grid.points {
            return Err(GpeError::GridMismatch);
        }
        Ok(Self { grid, psi })
    }

    /// `f(z)` sampled on the grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let psi = (0..grid.points).map(|i| f(grid.z(i))).collect();
        Self { grid, psi }
    }

    /// Normalised Gaussian with density rms width `sigma`, centred at 0.
    pub fn gaussian(grid: Grid, atoms: f64, sigma: f64) -> Self {
        let mut w = Self::from_fn(grid, |z| Complex64::new((-z * z / (4.0 * sigma * sigma)).exp(), 0.0));
        w.normalize_to(atoms);
        w
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `∫|ψ|² dz`.
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dz()
    }

    pub fn normalize_to(&mut self, atoms: f64) {
        let n = self.norm();
        if n > 0.0 {
            let scale = (atoms / n).sqrt();
            self.psi.iter_mut().for_each(|c| *c *= scale);
        }
    }

    pub fn peak_density(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max)
    }

    /// rms width of the density about its mean [1/k_L].
    pub fn rms_width(&self) -> f64 {
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (i, c) in self.psi.iter().enumerate() {
            let z = self.grid.z(i);
            let n = c.norm_sqr();
            m0 += n;
            m1 += n * z;
            m2 += n * z * z;
        }
        let mean = m1 / m0;
        (m2 / m0 - mean * mean).max(0.0).sqrt()
    }

    /// Largest density in the outer [`EDGE_FRACTION`] of the box at either end,
    /// relative to the peak.
    pub fn edge_ratio(&self) -> f64 {
        let n = self.psi.len();
        let band = ((n as f64 * EDGE_FRACTION) as usize).max(1);
        let edge = self.psi[..band]
            .iter()
            .chain(&self.psi[n - band..])
            .map(|c| c.norm_sqr())
            .fold(0.0, f64::max);
        edge / self.peak_density().max(f64::MIN_POSITIVE)
    }
}

/// Energies per atom [E_R].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
    pub chemical_potential: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.interaction
    }

    pub fn is_finite(&self) -> bool {
        self.kinetic.is_finite()
            && self.potential.is_finite()
            && self.interaction.is_finite()
            && self.chemical_potential.is_finite()
    }
}

/// Which external potentials act during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potentials {
    pub lattice: bool,
    pub axial_trap: bool,
    /// Linear lattice ramp from zero over this duration [ħ/E_R]; `None` is
    /// an instantaneous switch at `t = 0`.
    pub ramp: Option<f64>,
}

impl Potentials {
    /// Trap off at `t = 0`, lattice on.
    pub const RELEASE: Potentials = Potentials {
        lattice: true,
        axial_trap: false,
        ramp: None,
    };
    pub const TRAPPED: Potentials = Potentials {
        lattice: true,
        axial_trap: true,
        ramp: None,
    };

    fn depth_at(&self, depth: f64, t: f64) -> f64 {
        if !self.lattice {
            return 0.0;
        }
        match self.ramp {
            Some(d) if d > 0.0 && t < d => depth * t / d,
            _ => depth,
        }
    }

    fn time_dependent(&self) -> bool {
        self.lattice && self.ramp.is_some_and(|d| d > 0.0)
    }
}

/// FFT plan, static potential pieces and scratch space for one grid.
struct Stepper {
    fft: Fft,
    k2: Vec<f64>,
    lattice: Vec<f64>,
    trap: Vec<f64>,
    potential: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl Stepper {
    fn new(cfg: &GpeConfig, trap_on: bool) -> Result<Self, GpeError> {
        let g = cfg.grid;
        let fft = Fft::new(g.points)?;
        let k2 = fft.wavenumbers(g.dz()).into_iter().map(|k| k * k).collect();
        let z = g.coordinates();
        let lattice = z.iter().map(|z| z.sin().powi(2)).collect();
        let w = if trap_on { cfg.trap } else { 0.0 };
        let trap = z.iter().map(|z| 0.25 * w * w * z * z).collect();
        Ok(Self {
            fft,
            k2,
            lattice,
            trap,
            potential: vec![0.0; g.points],
            scratch: vec![Complex64::new(0.0, 0.0); g.points],
        })
    }

    fn set_depth(&mut self, depth: f64) {
        for ((v, l), t) in self.potential.iter_mut().zip(&self.lattice).zip(&self.trap) {
            *v = depth * l + t;
        }
    }

    fn energies(&mut self, psi: &[Complex64], coupling: f64, dz: f64) -> EnergyLedger {
        let n = psi.len();
        let atoms = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dz;
        self.scratch.copy_from_slice(psi);
        self.fft.forward(&mut self.scratch);
        let kinetic = self
            .scratch
            .iter()
            .zip(&self.k2)
            .map(|(c, k2)| c.norm_sqr() * k2)
            .sum::<f64>()
            * dz
            / n as f64;
        let (mut pot, mut int) = (0.0, 0.0);
        for (c, v) in psi.iter().zip(&self.potential) {
            let d = c.norm_sqr();
            pot += v * d;
            int += d * d;
        }
        let (kinetic, potential, interaction) = (
            kinetic / atoms,
            pot * dz / atoms,
            0.5 * coupling * int * dz / atoms,
        );
        EnergyLedger {
            kinetic,
            potential,
            interaction,
            chemical_potential: kinetic + potential + 2.0 * interaction,
        }
    }

    fn kinetic(&mut self, psi: &mut [Complex64], kin: &[Complex64]) {
        self.fft.forward(psi);
        psi.iter_mut().zip(kin).for_each(|(c, k)| *c *= k);
        self.fft.inverse(psi);
    }

    fn potential_phase(&self, psi: &mut [Complex64], coupling: f64, tau: f64) {
        for (c, v) in psi.iter_mut().zip(&self.potential) {
            let phase = -(v + coupling * c.norm_sqr()) * tau;
            *c *= Complex64::new(phase.cos(), phase.sin());
        }
    }

    /// One imaginary-time Strang step, followed by renormalisation.
    fn imaginary_step(&mut self, psi: &mut [Complex64], coupling: f64, dt: f64, kin: &[f64], atoms: f64, dz: f64) {
        self.potential_decay(psi, coupling, 0.5 * dt);
        self.fft.forward(psi);
        psi.iter_mut().zip(kin).for_each(|(c, k)| *c *= *k);
        self.fft.inverse(psi);
        self.potential_decay(psi, coupling, 0.5 * dt);
        let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * dz;
        let scale = (atoms / norm).sqrt();
        psi.iter_mut().for_each(|c| *c *= scale);
    }

    fn potential_decay(&self, psi: &mut [Complex64], coupling: f64, tau: f64) {
        for (c, v) in psi.iter_mut().zip(&self.potential) {
            *c *= (-(v + coupling * c.norm_sqr()) * tau).exp();
        }
    }
}

/// Energies per atom of `psi` under `cfg` with the given potentials at `t`.
pub fn energies(psi: &Wavefunction, cfg: &GpeConfig, pots: Potentials, t: f64) -> Result<EnergyLedger, GpeError> {
    if psi.grid != cfg.grid {
        return Err(GpeError::GridMismatch);
    }
    let mut st = Stepper::new(cfg, pots.axial_trap)?;
    st.set_depth(pots.depth_at(cfg.depth, t));
    Ok(st.energies(&psi.psi, cfg.coupling, cfg.grid.dz()))
}

/// `ψ = sqrt(max(0, µ - ω²z²/4) / g)`, the trapped state without the lattice.
pub fn tf_ground_state(cfg: &GpeConfig) -> Result<Wavefunction, GpeError> {
    cfg.validate()?;
    if !(cfg.coupling > 0.0 && cfg.trap > 0.0) {
        return Err(GpeError::NoThomasFermi);
    }
    let radius = cfg.tf_radius();
    let half = 0.5 * cfg.grid.length;
    if half < MIN_BOX_RADII * radius {
        return Err(GpeError::BoxTooSmall { half, radius });
    }
    let mu = cfg.tf_chemical_potential();
    let (g, w) = (cfg.coupling, cfg.trap);
    Ok(Wavefunction::from_fn(cfg.grid, |z| {
        Complex64::new(((mu - 0.25 * w * w * z * z).max(0.0) / g).sqrt(), 0.0)
    }))
}

/// Stopping rule and step budget for imaginary-time relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    /// Converged once the energy per atom changes by less than this per step [E_R].
    pub tolerance: f64,
    pub max_steps: usize,
    /// Energies are compared every this many steps.
    pub check_every: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_RELAX_TOL,
            max_steps: 2_000_000,
            check_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub psi: Wavefunction,
    pub energies: EnergyLedger,
    pub steps: usize,
}

/// Ground state in the trap and lattice of `cfg`, relaxed from the
/// Thomas–Fermi profile (or from the harmonic-oscillator Gaussian when there
/// is no interaction).
pub fn imaginary_time_ground_state(cfg: &GpeConfig, opts: &RelaxOptions) -> Result<Relaxed, GpeError> {
    cfg.validate()?;
    let start = if cfg.coupling > 0.0 && cfg.trap > 0.0 {
        tf_ground_state(cfg)?
    } else if cfg.trap > 0.0 {
        Wavefunction::gaussian(cfg.grid, cfg.atoms, cfg.trap.sqrt().recip())
    } else {
        Wavefunction::gaussian(cfg.grid, cfg.atoms, 0.1 * cfg.grid.length)
    };
    relax(start, cfg, opts)
}

/// Imaginary-time evolution of `psi` with the trap and lattice on.
pub fn relax(mut psi: Wavefunction, cfg: &GpeConfig, opts: &RelaxOptions) -> Result<Relaxed, GpeError> {
    cfg.validate()?;
    if psi.grid != cfg.grid {
        return Err(GpeError::GridMismatch);
    }
    let dz = cfg.grid.dz();
    let mut st = Stepper::new(cfg, true)?;
    st.set_depth(cfg.depth);
    psi.normalize_to(cfg.atoms);
    let start = st.energies(&psi.psi, cfg.coupling, dz);
    let limit = cfg.max_time_step(start.chemical_potential.max(0.0));
    if cfg.dt > limit {
        return Err(GpeError::StepTooLarge { dt: cfg.dt, limit });
    }
    let kin: Vec<f64> = st.k2.iter().map(|k2| (-k2 * cfg.dt).exp()).collect();
    let every = opts.check_every.max(1);
    let mut last = start.total();
    let mut change = f64::INFINITY;
    let mut steps = 0;
    while steps < opts.max_steps {
        for _ in 0..every {
            st.imaginary_step(&mut psi.psi, cfg.coupling, cfg.dt, &kin, cfg.atoms, dz);
        }
        steps += every;
        let e = st.energies(&psi.psi, cfg.coupling, dz);
        change = (e.total() - last).abs() / every as f64;
        last = e.total();
        if change < opts.tolerance {
            psi.normalize_to(cfg.atoms);
            return Ok(Relaxed {
                psi,
                energies: e,
                steps,
            });
        }
    }
    Err(GpeError::NoConvergence(steps, change))
}

/// What to record during a real-time run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// [ħ/E_R]
    pub t_final: f64,
    pub potentials: Potentials,
    /// Record a [`Sample`] (and check the box edges) every this many steps.
    pub sample_every: usize,
    /// Times at which to keep a copy of the density [ħ/E_R]; each is taken
    /// at the first step on or after it.
    pub snapshots: Vec<f64>,
}

/// One point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// rms width [1/k_L].
    pub sigma: f64,
    pub norm: f64,
    pub energies: EnergyLedger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
    pub last: Wavefunction,
    pub steps: usize,
}

impl Trajectory {
    /// Largest `|E(t) - E(0)| / |E(0)|` over the samples.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energies.total();
        self.samples
            .iter()
            .map(|s| ((s.energies.total() - e0) / e0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative change of the norm over the samples.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.samples[0].norm;
        self.samples
            .iter()
            .map(|s| ((s.norm - n0) / n0).abs())
            .fold(0.0, f64::max)
    }
}

/// Real-time split-step evolution of `psi` to `opts.t_final`.
pub fn evolve(mut psi: Wavefunction, cfg: &GpeConfig, opts: &EvolveOptions) -> Result<Trajectory, GpeError> {
    cfg.validate()?;
    if psi.grid != cfg.grid {
        return Err(GpeError::GridMismatch);
    }
    let dz = cfg.grid.dz();
    let pots = opts.potentials;
    let mut st = Stepper::new(cfg, pots.axial_trap)?;
    st.set_depth(pots.depth_at(cfg.depth, 0.0));
    let first = st.energies(&psi.psi, cfg.coupling, dz);
    let limit = cfg.max_time_step(first.chemical_potential.max(0.0));
    if cfg.dt > limit {
        return Err(GpeError::StepTooLarge { dt: cfg.dt, limit });
    }
    let kin: Vec<Complex64> = st
        .k2
        .iter()
        .map(|k2| Complex64::new((k2 * cfg.dt).cos(), -(k2 * cfg.dt).sin()))
        .collect();
    let total_steps = (opts.t_final / cfg.dt).round() as usize;
    let every = opts.sample_every.max(1);
    let mut samples = vec![Sample {
        time: 0.0,
        sigma: psi.rms_width(),
        norm: psi.norm(),
        energies: first,
    }];
    let mut wanted: Vec<f64> = opts.snapshots.clone();
    wanted.sort_by(f64::total_cmp);
    let mut next = 0;
    let mut snapshots = Vec::new();
    let due = |next: usize, t: f64| next < wanted.len() && wanted[next] <= t + 0.5 * cfg.dt;
    while due(next, 0.0) {
        next += 1;
        snapshots.push(Snapshot {
            time: 0.0,
            density: psi.density(),
        });
    }
    // The closing half potential step and the next opening half are both
    // phases that leave |ψ|² alone, so between records they fuse into one.
    let mut pending_half = true;
    for step in 1..=total_steps {
        let t = step as f64 * cfg.dt;
        let sample = step % every == 0 || step == total_steps;
        let record = sample || due(next, t);
        if pots.time_dependent() {
            // both halves at the midpoint depth
            st.set_depth(pots.depth_at(cfg.depth, t - 0.5 * cfg.dt));
        }
        if pending_half {
            st.potential_phase(&mut psi.psi, cfg.coupling, 0.5 * cfg.dt);
        }
        st.kinetic(&mut psi.psi, &kin);
        pending_half = record || pots.time_dependent();
        let tau = if pending_half { 0.5 } else { 1.0 } * cfg.dt;
        st.potential_phase(&mut psi.psi, cfg.coupling, tau);
        if sample {
            let ratio = psi.edge_ratio();
            if ratio > EDGE_DENSITY_LIMIT {
                return Err(GpeError::EdgeContamination { time: t, ratio });
            }
            if pots.time_dependent() {
                st.set_depth(pots.depth_at(cfg.depth, t));
            }
            samples.push(Sample {
                time: t,
                sigma: psi.rms_width(),
                norm: psi.norm(),
                energies: st.energies(&psi.psi, cfg.coupling, dz),
            });
        }
        while due(next, t) {
            next += 1;
            snapshots.push(Snapshot {
                time: t,
                density: psi.density(),
            });
        }
    }
    Ok(Trajectory {
        samples,
        snapshots,
        last: psi,
        steps: total_steps,
    })
}

/// Bogoliubov sound speed `sqrt(g n / m)` in `v_R` for a 1D density `n`
/// [atoms per 1/k_L]: `c = sqrt(g n / 2)`.
pub fn sound_speed(coupling: f64, density: f64) -> f64 {
    (0.5 * coupling * density.max(0.0)).sqrt()
}

/// Sound speed [m/s] at the centre of a radially Gaussian cloud of peak 3D
/// density `peak` [m⁻³]: `n₁D = n₃D π a⊥²`, `g₁D = 2ħω⊥a_s`, so `g₁D n₁D =
/// 2πħ² a_s n₃D / m` and the radial frequency drops out.
pub fn sound_speed_from_peak_density(peak: f64, scattering_length: f64, units: &RecoilUnits) -> f64 {
    let m = units.mass;
    (2.0 * PI * HBAR * HBAR * scattering_length * peak.max(0.0) / (m * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    SingleParticleLike,
    InteractionDominated,
}

impl core::fmt::Display for Regime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Regime::SingleParticleLike => "single-particle-like",
            Regime::InteractionDominated => "interaction-dominated",
        })
    }
}

/// Single-particle-like iff the expansion outruns sound; a tie counts as
/// interaction-dominated.
pub fn classify_regime(rate: f64, sound: f64) -> Regime {
    if rate > sound {
        Regime::SingleParticleLike
    } else {
        Regime::InteractionDominated
    }
}
