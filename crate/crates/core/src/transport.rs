//! Semiclassical expansion of a thermal cloud through the lattice.
//!
//! Quasi-momentum is conserved and each atom moves with the group velocity
//! of the Bloch state its free momentum `κ` was loaded into. A cloud that
//! starts as a Maxwell–Boltzmann distribution in a harmonic trap of
//! frequency `ω_z` evolves as
//!
//! ```text
//! f(z, t) = N ∫ dκ  P(κ) G(z - 2 v(κ) t; σ₀)
//! ```
//!
//! with `P(κ) ∝ exp(-κ²/2T)` (`T` in `T_R`, `κ` in `k_L`) and `G` a
//! normalised Gaussian of the initial width `σ₀ = 2 √T / ω` (in `1/k_L`,
//! `ω = ħω_z/E_R`). Velocity moments use a composite Simpson rule whose
//! panels sit on the quasi-momentum grid of the band table, so every node
//! reads an exact tabulated velocity. Profiles use the same nodes but let the
//! displaced centre vary linearly between them (see [`ProfileEvaluator`]).

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::bands::{Band, BandError, BandStructure, BlochProblem, ZoneMapping};
use crate::units::{displacement, RecoilUnits, BOLTZMANN};

/// Relative Maxwell–Boltzmann weight below which free momenta are dropped.
pub const WEIGHT_CUTOFF: f64 = 1e-8;
pub const MIN_POPULATED_BANDS: usize = 3;
/// Fine-vs-coarse tolerance on `⟨v²⟩`.
pub const MOMENT_TOL: f64 = 1e-6;
/// Fine-vs-coarse tolerance on profile values, relative to the peak.
pub const PROFILE_TOL: f64 = 1e-3;
/// Allowed mismatch between profile and analytic widths.
pub const WIDTH_TOL: f64 = 1e-3;
pub const DEFAULT_Z_POINTS: usize = 4096;
/// Bands 1–3 are converged to 1e-10 at this basis size for s ≤ 18.
pub const TRANSPORT_CUTOFF: usize = 16;
/// The rate fit only uses samples with `σ ≥ FIT_THRESHOLD · σ₀`.
pub const FIT_THRESHOLD: f64 = 3.0;
/// Relative gap between fitted and asymptotic rates that gets flagged.
pub const ASYMPTOTE_FLAG: f64 = 0.01;
/// Gaussians are summed out to this many initial widths.
const GAUSS_REACH: f64 = 10.0;
/// Band-table resolution limits, in Simpson panels per zone.
const MIN_PANELS: usize = 256;
const MAX_PANELS: usize = 1 << 15;
const PROBE_POINTS: usize = 257;
const PANEL_SPREAD: f64 = 2.0;
/// Momenta lighter than this barely shape the profile and do not set the grid.
const SLOPE_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("atom number must be positive, got {0}")]
    Atoms(f64),
    #[error("trap frequency must be positive, got {0}")]
    TrapFrequency(f64),
    #[error("Maxwell-Boltzmann weight needs {needed} bands, only {have} tabulated")]
    InsufficientBands { needed: usize, have: usize },
    #[error("band table grid must be uniform on [-1, 1] with 8m+1 points, got {0} points")]
    GridAlignment(usize),
    #[error("momentum quadrature not converged under grid doubling (relative change {change:e})")]
    NotConverged { change: f64 },
    #[error("density profile not converged under grid doubling (change {change:e} of the peak)")]
    ProfileNotConverged { change: f64 },
    #[error("profile z grid must be uniform with at least two points")]
    ZGrid,
    #[error("profile width {profile} and analytic width {analytic} disagree at t = {time}")]
    MomentMismatch {
        time: f64,
        profile: f64,
        analytic: f64,
    },
    #[error("expansion needs at least 6 sorted, non-negative times")]
    Times,
    #[error("no samples with sigma >= {FIT_THRESHOLD} sigma0; extend the time range")]
    FitWindowEmpty,
    #[error("expansion rate must be positive, got {0}")]
    Rate(f64),
    #[error("expansion time must be positive for edge detection")]
    EdgeTime,
    #[error("z grid too coarse to resolve the edge window")]
    EdgeGrid,
    #[error(transparent)]
    Band(#[from] BandError),
}

/// Initial thermal cloud, in recoil units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCloud {
    /// `T/T_R`.
    pub temperature: f64,
    pub atoms: f64,
    /// Axial trap frequency as `ħω_z/E_R`.
    pub trap_frequency: f64,
}

impl ThermalCloud {
    pub fn new(temperature: f64, atoms: f64, trap_frequency: f64) -> Result<Self, TransportError> {
        if !(temperature > 0.0) {
            return Err(TransportError::Temperature(temperature));
        }
        if !(atoms > 0.0) {
            return Err(TransportError::Atoms(atoms));
        }
        if !(trap_frequency > 0.0) {
            return Err(TransportError::TrapFrequency(trap_frequency));
        }
        Ok(Self {
            temperature,
            atoms,
            trap_frequency,
        })
    }

    /// `temperature` in units of `T_R`, `omega_z` in rad/s.
    pub fn from_si(
        temperature: f64,
        atoms: f64,
        omega_z: f64,
        units: &RecoilUnits,
    ) -> Result<Self, TransportError> {
        Self::new(temperature, atoms, units.frequency_to_recoil(omega_z))
    }
}

/// `σ₀ = sqrt(k_B T/(m ω_z²))`, in `1/k_L`.
pub fn initial_width(cloud: &ThermalCloud) -> f64 {
    2.0 * cloud.temperature.sqrt() / cloud.trap_frequency
}

/// Largest `|κ|` whose Boltzmann weight is at least [`WEIGHT_CUTOFF`].
pub fn momentum_cutoff(temperature: f64) -> f64 {
    (-2.0 * temperature * WEIGHT_CUTOFF.ln()).sqrt()
}

/// Number of bands the loaded cloud populates above the weight cutoff.
pub fn populated_bands(temperature: f64) -> usize {
    (momentum_cutoff(temperature).ceil() as usize).max(MIN_POPULATED_BANDS)
}

/// `T_eff = m v²/k_B`: the temperature whose free expansion rate is `rate`.
/// Both in recoil units (`v_R`, `T_R`), where the relation is `T = v²`.
pub fn effective_temperature(rate: f64) -> Result<f64, TransportError> {
    if !(rate > 0.0) {
        return Err(TransportError::Rate(rate));
    }
    Ok(rate * rate)
}

/// [`effective_temperature`] for a rate in mm/s, returning kelvin.
pub fn effective_temperature_si(rate_mm_s: f64, units: &RecoilUnits) -> Result<f64, TransportError> {
    if !(rate_mm_s > 0.0) {
        return Err(TransportError::Rate(rate_mm_s));
    }
    let v = rate_mm_s * 1e-3;
    Ok(units.mass * v * v / BOLTZMANN)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityMoments {
    /// `⟨v⟩` [v_R].
    pub mean: f64,
    /// `⟨v²⟩` [v_R²].
    pub mean_square: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    kappa: f64,
    velocity: f64,
    weight: f64,
    coarse: f64,
}

/// Maxwell–Boltzmann weighted Simpson rule over free momentum, with the
/// half-resolution rule carried alongside for convergence checks.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumQuadrature {
    nodes: Vec<Node>,
    panels_per_zone: usize,
    zones: usize,
    max_speed: f64,
}

impl MomentumQuadrature {
    pub fn new(
        bs: &BandStructure,
        zm: &ZoneMapping,
        temperature: f64,
    ) -> Result<Self, TransportError> {
        if !(temperature > 0.0) {
            return Err(TransportError::Temperature(temperature));
        }
        let zones = populated_bands(temperature);
        let have = bs.n_bands().min(zm.n_bands());
        if have < zones {
            return Err(TransportError::InsufficientBands {
                needed: zones,
                have,
            });
        }
        let grid = bs.q_grid();
        let nq = grid.len();
        if nq < 9 || !(nq - 1).is_multiple_of(8) {
            return Err(TransportError::GridAlignment(nq));
        }
        let h = 2.0 / (nq - 1) as f64;
        let uniform = grid
            .iter()
            .enumerate()
            .all(|(i, q)| (q - (-1.0 + i as f64 * h)).abs() <= 1e-12);
        if !uniform {
            return Err(TransportError::GridAlignment(nq));
        }
        let panels = (nq - 1) / 2;
        let free = bs.depth() == 0.0;

        let total = zones * panels;
        let mut nodes = Vec::with_capacity(2 * total + 1);
        for j in -(total as isize)..=(total as isize) {
            let kappa = j as f64 * h;
            let velocity = if free {
                // at s = 0 the zone-edge table entries hold the degenerate
                // mean; the one-sided limits are the plane-wave velocity
                kappa
            } else {
                let (band, q) = zm.map(kappa)?;
                let idx = ((q + 1.0) / h).round() as usize;
                bs.velocities(band)?[idx]
            };
            let local = j.unsigned_abs() % panels;
            let edge = local == 0;
            let fine = if edge {
                // shared end point of two zones, or the outer end
                if j.unsigned_abs() == total { 1.0 } else { 2.0 }
            } else if local % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let coarse = if local % 2 == 1 {
                0.0
            } else if edge {
                fine
            } else if (local / 2) % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let w = (-kappa * kappa / (2.0 * temperature)).exp();
            nodes.push(Node {
                kappa,
                velocity,
                weight: fine * w,
                coarse: coarse * w,
            });
        }
        let norm_f: f64 = nodes.iter().map(|n| n.weight).sum();
        let norm_c: f64 = nodes.iter().map(|n| n.coarse).sum();
        for n in &mut nodes {
            n.weight /= norm_f;
            n.coarse /= norm_c;
        }
        // the band count has a floor, so the outer zones may be empty
        let max_speed = nodes
            .iter()
            .filter(|n| (-n.kappa * n.kappa / (2.0 * temperature)).exp() >= WEIGHT_CUTOFF)
            .map(|n| n.velocity.abs())
            .fold(0.0, f64::max);
        Ok(Self {
            nodes,
            panels_per_zone: panels,
            zones,
            max_speed,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn zones(&self) -> usize {
        self.zones
    }

    pub fn panels_per_zone(&self) -> usize {
        self.panels_per_zone
    }

    /// Largest `|v|` over nodes with relative weight ≥ [`WEIGHT_CUTOFF`] [v_R].
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// `(κ, v, weight)` per node; weights sum to one.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.nodes.iter().map(|n| (n.kappa, n.velocity, n.weight))
    }

    fn moments_with(&self, coarse: bool) -> VelocityMoments {
        let (mut m1, mut m2) = (0.0, 0.0);
        for n in &self.nodes {
            let w = if coarse { n.coarse } else { n.weight };
            m1 += w * n.velocity;
            m2 += w * n.velocity * n.velocity;
        }
        VelocityMoments {
            mean: m1,
            mean_square: m2,
        }
    }

    /// Velocity moments, checked against the half-resolution rule.
    pub fn moments(&self) -> Result<VelocityMoments, TransportError> {
        let fine = self.moments_with(false);
        let coarse = self.moments_with(true);
        let scale = fine.mean_square.max(f64::MIN_POSITIVE);
        let change = (fine.mean_square - coarse.mean_square).abs() / scale;
        if change > MOMENT_TOL {
            return Err(TransportError::NotConverged { change });
        }
        Ok(fine)
    }
}

/// `⟨v⟩` and `⟨v²⟩` of the loaded Maxwell–Boltzmann distribution.
pub fn velocity_moments(
    bs: &BandStructure,
    zm: &ZoneMapping,
    temperature: f64,
) -> Result<VelocityMoments, TransportError> {
    MomentumQuadrature::new(bs, zm, temperature)?.moments()
}

/// Axial density `f(z, t)` sampled on a grid, in recoil units.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    /// Expansion time [ħ/E_R].
    pub time: f64,
    /// Positions [1/k_L].
    pub z: Vec<f64>,
    /// Linear density [atoms per 1/k_L].
    pub density: Vec<f64>,
    pub atoms: f64,
}

impl DensityProfile {
    /// Trapezoid integral of the density.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.z, |i| self.density[i])
    }

    pub fn rms_width(&self) -> f64 {
        let norm = self.integral();
        let mean = trapezoid(&self.z, |i| self.z[i] * self.density[i]) / norm;
        let m2 = trapezoid(&self.z, |i| {
            let d = self.z[i] - mean;
            d * d * self.density[i]
        }) / norm;
        m2.sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.density.iter().cloned().fold(0.0, f64::max)
    }

    /// Density at `z` by linear interpolation; zero outside the grid.
    pub fn at(&self, z: f64) -> f64 {
        let n = self.z.len();
        if n == 0 || z < self.z[0] || z > self.z[n - 1] {
            return 0.0;
        }
        let i = self.z.partition_point(|&x| x <= z).clamp(1, n - 1);
        let (z0, z1) = (self.z[i - 1], self.z[i]);
        let a = (z - z0) / (z1 - z0);
        self.density[i - 1] * (1.0 - a) + self.density[i] * a
    }
}

fn trapezoid(z: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..z.len() {
        acc += 0.5 * (z[i] - z[i - 1]) * (f(i) + f(i - 1));
    }
    acc
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + i as f64 * step).collect()
}

/// Numerical resolution of a transport calculation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub cutoff: usize,
    /// Quasi-momentum samples; `None` picks a resolution fit for `t_max`.
    pub q_points: Option<usize>,
    pub z_points: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            cutoff: TRANSPORT_CUTOFF,
            q_points: None,
            z_points: DEFAULT_Z_POINTS,
        }
    }
}

impl TransportOptions {
    /// Band-table size whose κ spacing keeps neighbouring node centres
    /// within about `σ₀` of each other at `t_max`: `h ≤ σ₀ / (2 S t_max)`, where `S`
    /// is the steepest `|dv/dκ|` among well-populated momenta, read off a
    /// coarse probe table.
    pub fn q_points_for(&self, depth: f64, cloud: &ThermalCloud, t_max: f64) -> Result<usize, TransportError> {
        if let Some(n) = self.q_points {
            return Ok(n);
        }
        let slope = if depth == 0.0 {
            1.0
        } else {
            let probe = BlochProblem::uniform(depth, self.cutoff, PROBE_POINTS)?;
            let bs = crate::bands::solve_bands(&probe, self.n_bands(cloud))?;
            steepest_populated_slope(&bs, cloud.temperature)?.max(1.0)
        };
        let sigma0 = initial_width(cloud);
        let need = (PANEL_SPREAD * slope * t_max / sigma0).ceil().max(1.0) as usize;
        let panels = need.next_power_of_two().clamp(MIN_PANELS, MAX_PANELS);
        Ok(2 * panels + 1)
    }

    pub fn problem(&self, depth: f64, cloud: &ThermalCloud, t_max: f64) -> Result<BlochProblem, TransportError> {
        Ok(BlochProblem::uniform(
            depth,
            self.cutoff,
            self.q_points_for(depth, cloud, t_max)?,
        )?)
    }

    pub fn n_bands(&self, cloud: &ThermalCloud) -> usize {
        populated_bands(cloud.temperature)
    }
}

/// Largest `|Δv/Δq|` between neighbouring table entries over all momenta
/// whose Maxwell–Boltzmann weight is at least [`SLOPE_WEIGHT`].
fn steepest_populated_slope(bs: &BandStructure, temperature: f64) -> Result<f64, TransportError> {
    let grid = bs.q_grid();
    let mut steepest: f64 = 0.0;
    for b in 1..=bs.n_bands() {
        let band = Band::new(b).unwrap();
        let v = bs.velocities(band)?;
        for i in 1..grid.len() {
            // fold back to the free momentum nearest the zone centre of band b
            let q = 0.5 * (grid[i] + grid[i - 1]);
            let kappa = extended_momentum(b, q);
            if (-kappa * kappa / (2.0 * temperature)).exp() < SLOPE_WEIGHT {
                continue;
            }
            steepest = steepest.max(((v[i] - v[i - 1]) / (grid[i] - grid[i - 1])).abs());
        }
    }
    Ok(steepest)
}

/// Smallest `|κ|` that band `b` at quasi-momentum `q` is loaded from.
fn extended_momentum(band: usize, q: f64) -> f64 {
    let shift = 2.0 * (band / 2) as f64;
    if band % 2 == 1 {
        q.abs() + shift
    } else {
        shift - q.abs()
    }
}

/// A thermal cloud loaded into a solved band structure.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportModel {
    cloud: ThermalCloud,
    depth: f64,
    quad: MomentumQuadrature,
    moments: VelocityMoments,
    sigma0: f64,
}

impl TransportModel {
    pub fn new(
        bs: &BandStructure,
        zm: &ZoneMapping,
        cloud: ThermalCloud,
    ) -> Result<Self, TransportError> {
        let quad = MomentumQuadrature::new(bs, zm, cloud.temperature)?;
        let moments = quad.moments()?;
        Ok(Self {
            cloud,
            depth: bs.depth(),
            quad,
            moments,
            sigma0: initial_width(&cloud),
        })
    }

    /// Serial convenience: solve bands at the resolution `opts` asks for.
    pub fn solve(
        depth: f64,
        cloud: ThermalCloud,
        t_max: f64,
        opts: &TransportOptions,
    ) -> Result<Self, TransportError> {
        let prob = opts.problem(depth, &cloud, t_max)?;
        let bs = crate::bands::solve_bands(&prob, opts.n_bands(&cloud))?;
        Self::new(&bs, &ZoneMapping::for_bands(&bs), cloud)
    }

    pub fn cloud(&self) -> &ThermalCloud {
        &self.cloud
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn quadrature(&self) -> &MomentumQuadrature {
        &self.quad
    }

    pub fn moments(&self) -> VelocityMoments {
        self.moments
    }

    pub fn initial_width(&self) -> f64 {
        self.sigma0
    }

    /// `sqrt(⟨v²⟩)` [v_R], the long-time slope of σ(t).
    pub fn asymptotic_rate(&self) -> f64 {
        self.moments.mean_square.sqrt()
    }

    /// `σ(t) = sqrt(σ₀² + ⟨v²⟩ t²)` in `1/k_L`, `t` in `ħ/E_R`.
    pub fn analytic_width(&self, t: f64) -> f64 {
        let spread = displacement(self.asymptotic_rate(), t);
        (self.sigma0 * self.sigma0 + spread * spread).sqrt()
    }

    /// Half-width of the default z grid at time `t`.
    pub fn z_extent(&self, t: f64) -> f64 {
        6.0 * self.sigma0 + 1.2 * displacement(self.quad.max_speed, t)
    }

    pub fn z_grid(&self, t: f64, points: usize) -> Vec<f64> {
        let half = self.z_extent(t);
        linspace(-half, half, points)
    }

    /// Evaluator for time `t` on the uniform grid `z`.
    pub fn evaluator(&self, t: f64, z: Vec<f64>) -> Result<ProfileEvaluator, TransportError> {
        ProfileEvaluator::new(self, t, z)
    }

    /// Serial profile on `z`, checked under κ-grid doubling.
    pub fn profile(&self, t: f64, z: Vec<f64>) -> Result<DensityProfile, TransportError> {
        let ev = self.evaluator(t, z)?;
        let n = ev.z().len();
        let mut fine = vec![0.0; n];
        let mut coarse = vec![0.0; n];
        ev.evaluate(0, &mut fine, &mut coarse);
        ev.finish(fine, &coarse)
    }
}

/// The density of all momentum nodes at one expansion time, on a uniform
/// z grid.
///
/// Between neighbouring momentum nodes the displaced centre `2 v t` is taken
/// as linear in κ, so each κ interval spreads its (trapezoid) weight
/// uniformly over the stretch of z its centre sweeps. Steep band velocities
/// that throw neighbouring nodes far apart then still give a smooth profile.
/// The swept weight is gathered on an auxiliary grid that refines the output
/// grid and is then smoothed with the initial Gaussian. Work is split by
/// output index only, so any partition of the grid gives the same numbers.
#[derive(Debug, Clone)]
pub struct ProfileEvaluator {
    time: f64,
    atoms: f64,
    z: Vec<f64>,
    sub: usize,
    pad: usize,
    // Gaussian at aux offsets 0..=pad, normalisation included
    kernel: Vec<f64>,
    fine: Vec<f64>,
    coarse: Vec<f64>,
}

/// Auxiliary grid spacing is at most `σ₀ / AUX_PER_SIGMA`.
const AUX_PER_SIGMA: f64 = 64.0;

impl ProfileEvaluator {
    fn new(model: &TransportModel, t: f64, z: Vec<f64>) -> Result<Self, TransportError> {
        let n = z.len();
        if n < 2 {
            return Err(TransportError::ZGrid);
        }
        let dz = (z[n - 1] - z[0]) / (n - 1) as f64;
        let uniform = dz > 0.0
            && z.iter()
                .enumerate()
                .all(|(i, x)| (x - (z[0] + i as f64 * dz)).abs() <= 1e-9 * dz * n as f64);
        if !uniform {
            return Err(TransportError::ZGrid);
        }
        let sigma0 = model.sigma0;
        let sub = ((dz * AUX_PER_SIGMA / sigma0).ceil() as usize).max(1);
        let step = dz / sub as f64;
        let pad = (GAUSS_REACH * sigma0 / step).ceil() as usize;
        let len = (n - 1) * sub + 1 + 2 * pad;
        let origin = z[0] - pad as f64 * step;

        let temperature = model.cloud.temperature;
        let nodes = &model.quad.nodes;
        let mut fine = vec![0.0; len];
        let mut coarse = vec![0.0; len];
        for (stride, hist) in [(1, &mut fine), (2, &mut coarse)] {
            let mut total = 0.0;
            let mut i = 0;
            while i + stride < nodes.len() {
                let (a, b) = (&nodes[i], &nodes[i + stride]);
                let wa = (-a.kappa * a.kappa / (2.0 * temperature)).exp();
                let wb = (-b.kappa * b.kappa / (2.0 * temperature)).exp();
                let mass = 0.5 * (wa + wb) * (b.kappa - a.kappa);
                let ca = (displacement(a.velocity, t) - origin) / step;
                let cb = (displacement(b.velocity, t) - origin) / step;
                deposit(hist, ca.min(cb), ca.max(cb), mass);
                total += mass;
                i += stride;
            }
            hist.iter_mut().for_each(|m| *m /= total);
        }

        let norm = model.cloud.atoms / ((2.0 * core::f64::consts::PI).sqrt() * sigma0);
        let inv = step * step / (2.0 * sigma0 * sigma0);
        let kernel = (0..=pad)
            .map(|j| norm * (-((j * j) as f64) * inv).exp())
            .collect();
        Ok(Self {
            time: t,
            atoms: model.cloud.atoms,
            z,
            sub,
            pad,
            kernel,
            fine,
            coarse,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// `(fine, coarse)` density at output index `i`.
    pub fn density_at(&self, i: usize) -> (f64, f64) {
        let c = self.pad + i * self.sub;
        let (mut f, mut g) = (
            self.fine[c] * self.kernel[0],
            self.coarse[c] * self.kernel[0],
        );
        for j in 1..=self.pad {
            let k = self.kernel[j];
            f += (self.fine[c - j] + self.fine[c + j]) * k;
            g += (self.coarse[c - j] + self.coarse[c + j]) * k;
        }
        (f, g)
    }

    /// Fill `fine` and `coarse` for output indices `first..first + fine.len()`.
    pub fn evaluate(&self, first: usize, fine: &mut [f64], coarse: &mut [f64]) {
        for (k, (f, c)) in fine.iter_mut().zip(coarse.iter_mut()).enumerate() {
            (*f, *c) = self.density_at(first + k);
        }
    }

    /// Assemble the profile once every output index has been evaluated.
    pub fn finish(&self, fine: Vec<f64>, coarse: &[f64]) -> Result<DensityProfile, TransportError> {
        let peak = fine.iter().cloned().fold(0.0, f64::max);
        let change = fine
            .iter()
            .zip(coarse)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / peak.max(f64::MIN_POSITIVE);
        if change > PROFILE_TOL {
            return Err(TransportError::ProfileNotConverged { change });
        }
        Ok(DensityProfile {
            time: self.time,
            z: self.z.clone(),
            density: fine,
            atoms: self.atoms,
        })
    }
}

/// `∫_{-∞}^{u}` of the unit hat function `max(0, 1 - |x|)`.
fn hat_integral(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u <= 0.0 {
        0.5 * (u + 1.0) * (u + 1.0)
    } else if u <= 1.0 {
        1.0 - 0.5 * (1.0 - u) * (1.0 - u)
    } else {
        1.0
    }
}

/// Spread `mass` uniformly over `[a, b]` (aux-grid index units) onto the
/// grid with linear hat shape functions. Mass beyond the grid is dropped.
fn deposit(hist: &mut [f64], a: f64, b: f64, mass: f64) {
    let last = hist.len() as isize - 1;
    let width = b - a;
    if width < 1e-6 {
        let m = 0.5 * (a + b);
        let k = m.floor() as isize;
        let f = m - k as f64;
        for (k, share) in [(k, 1.0 - f), (k + 1, f)] {
            if (0..=last).contains(&k) {
                hist[k as usize] += mass * share;
            }
        }
        return;
    }
    let lo = (a.floor() as isize - 1).max(0);
    let hi = (b.ceil() as isize + 1).min(last);
    let density = mass / width;
    for k in lo..=hi {
        let x = k as f64;
        hist[k as usize] += density * (hat_integral(b - x) - hat_integral(a - x));
    }
}

/// Straight-line fit `y ≈ slope·x + intercept` with weights `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - xm;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - ym);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let slope_stderr = if n > 2 {
        let rss: f64 = (0..n)
            .map(|i| {
                let r = y[i] - slope * x[i] - intercept;
                w[i] * r * r
            })
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// σ(t) samples and the fitted expansion rate, in recoil units.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionSeries {
    /// [ħ/E_R]
    pub times: Vec<f64>,
    /// rms width from the quadrature profile [1/k_L].
    pub sigma: Vec<f64>,
    /// `sqrt(σ₀² + ⟨v²⟩t²)` [1/k_L].
    pub sigma_analytic: Vec<f64>,
    pub sigma0: f64,
    /// Fitted dσ/dt [v_R].
    pub rate: f64,
    pub rate_stderr: f64,
    pub fit_window: (f64, f64),
    /// `sqrt(⟨v²⟩)` [v_R].
    pub asymptotic_rate: f64,
    /// Fitted and asymptotic rates differ by more than [`ASYMPTOTE_FLAG`].
    pub asymptote_mismatch: bool,
}

impl ExpansionSeries {
    /// Check the two width routes against each other and fit the rate.
    ///
    /// The fit weighs all samples equally, i.e. a constant absolute
    /// uncertainty on σ, as set by a fixed imaging resolution.
    pub fn from_widths(
        times: Vec<f64>,
        sigma: Vec<f64>,
        sigma_analytic: Vec<f64>,
        sigma0: f64,
        asymptotic_rate: f64,
    ) -> Result<Self, TransportError> {
        for ((t, s), a) in times.iter().zip(&sigma).zip(&sigma_analytic) {
            if ((s - a) / a).abs() > WIDTH_TOL {
                return Err(TransportError::MomentMismatch {
                    time: *t,
                    profile: *s,
                    analytic: *a,
                });
            }
        }
        let (x, y): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&sigma)
            .filter(|(_, s)| **s >= FIT_THRESHOLD * sigma0)
            .map(|(t, s)| (*t, *s))
            .unzip();
        if x.len() < 2 {
            return Err(TransportError::FitWindowEmpty);
        }
        let w = vec![1.0; x.len()];
        let fit = weighted_linear_fit(&x, &y, &w).ok_or(TransportError::FitWindowEmpty)?;
        // σ in 1/k_L against t in ħ/E_R has slope 2 v / v_R
        let rate = 0.5 * fit.slope;
        let mismatch = ((rate - asymptotic_rate) / asymptotic_rate).abs() > ASYMPTOTE_FLAG;
        Ok(Self {
            fit_window: (x[0], x[x.len() - 1]),
            times,
            sigma,
            sigma_analytic,
            sigma0,
            rate,
            rate_stderr: 0.5 * fit.slope_stderr,
            asymptotic_rate,
            asymptote_mismatch: mismatch,
        })
    }
}

pub fn check_times(times: &[f64]) -> Result<(), TransportError> {
    let sorted = times.windows(2).all(|w| w[0] < w[1]);
    if times.len() < 6 || !sorted || !(times[0] >= 0.0) {
        return Err(TransportError::Times);
    }
    Ok(())
}

/// σ(t) from quadrature profiles (each on its own default grid) and from
/// the closed form, plus the fitted rate.
pub fn expansion_series(
    model: &TransportModel,
    times: &[f64],
    z_points: usize,
) -> Result<ExpansionSeries, TransportError> {
    check_times(times)?;
    let mut sigma = Vec::with_capacity(times.len());
    for &t in times {
        let p = model.profile(t, model.z_grid(t, z_points))?;
        sigma.push(p.rms_width());
    }
    let analytic = times.iter().map(|&t| model.analytic_width(t)).collect();
    ExpansionSeries::from_widths(
        times.to_vec(),
        sigma,
        analytic,
        model.initial_width(),
        model.asymptotic_rate(),
    )
}

/// One row of a rate-versus-depth table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub depth: f64,
    /// Fitted dσ/dt [v_R].
    pub rate: f64,
    pub rate_stderr: f64,
    pub asymptotic_rate: f64,
    pub asymptote_mismatch: bool,
}

impl RatePoint {
    pub fn from_series(depth: f64, s: &ExpansionSeries) -> Self {
        Self {
            depth,
            rate: s.rate,
            rate_stderr: s.rate_stderr,
            asymptotic_rate: s.asymptotic_rate,
            asymptote_mismatch: s.asymptote_mismatch,
        }
    }
}

/// Expansion rate of `cloud` at one depth, solving everything serially.
pub fn rate_at_depth(
    depth: f64,
    cloud: ThermalCloud,
    times: &[f64],
    opts: &TransportOptions,
) -> Result<RatePoint, TransportError> {
    check_times(times)?;
    let model = TransportModel::solve(depth, cloud, times[times.len() - 1], opts)?;
    let series = expansion_series(&model, times, opts.z_points)?;
    Ok(RatePoint::from_series(depth, &series))
}

pub fn rate_vs_depth(
    depths: &[f64],
    cloud: ThermalCloud,
    times: &[f64],
    opts: &TransportOptions,
) -> Result<Vec<RatePoint>, TransportError> {
    depths
        .iter()
        .map(|&s| rate_at_depth(s, cloud, times, opts))
        .collect()
}

/// Steepness of the density drop around the ballistic front `z = v_max t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeReport {
    /// `[f(z_in) - f(z_out)] / f(z_in)` across the window.
    pub contrast: f64,
    /// `[f(z_in) - f(z_out)] / max f`, the drop measured against the peak.
    pub prominence: f64,
    /// Expected front position `2 v_max t` [1/k_L].
    pub front: f64,
    /// Position of steepest descent on the outer flank [1/k_L].
    pub steepest: f64,
    pub window: f64,
    pub resolvable: bool,
}

/// Contrast threshold for a resolvable front.
pub const EDGE_CONTRAST: f64 = 0.5;
/// The drop at the front must be at least this fraction of the peak density.
pub const EDGE_PROMINENCE: f64 = 0.5;
/// The steepest descent must lie within this fraction of the front position.
pub const EDGE_POSITION_TOL: f64 = 0.05;

/// Look for a sharp front at `z = v_max t` (`v_max` in `v_R`, `t` in `ħ/E_R`).
///
/// The contrast is taken across a window of width `0.1·v_max·t`, capped at
/// `4σ₀`, centred on the front. Any populated velocity maximum leaves a
/// caustic at the front, however faint, so the contrast alone is close to
/// one at every temperature once the front has cleared the initial cloud.
/// A front therefore counts as resolvable only when
///
/// * the contrast reaches [`EDGE_CONTRAST`],
/// * the drop is at least [`EDGE_PROMINENCE`] of the peak density, and
/// * the steepest descent of the outer flank sits at the front, within
///   [`EDGE_POSITION_TOL`].
pub fn edge_visibility(
    profile: &DensityProfile,
    v_max: f64,
    t: f64,
    sigma0: f64,
) -> Result<EdgeReport, TransportError> {
    if !(t > 0.0) {
        return Err(TransportError::EdgeTime);
    }
    let front = displacement(v_max, t);
    let window = (0.1 * front).min(4.0 * sigma0);
    let dz = profile.z.get(1).zip(profile.z.first()).map(|(a, b)| a - b);
    match dz {
        Some(dz) if dz > 0.0 && dz <= 0.25 * window => {}
        _ => return Err(TransportError::EdgeGrid),
    }
    let f_in = profile.at(front - 0.5 * window);
    let f_out = profile.at(front + 0.5 * window);
    let peak = profile.peak();
    let (contrast, prominence) = if f_in > 0.0 {
        let drop = f_in - f_out;
        ((drop / f_in).clamp(0.0, 1.0), (drop / peak).clamp(0.0, 1.0))
    } else {
        (0.0, 0.0)
    };
    let mut steepest = 0.0;
    let mut slope = 0.0;
    for i in 1..profile.z.len() {
        let zm = 0.5 * (profile.z[i] + profile.z[i - 1]);
        if zm <= 0.0 {
            continue;
        }
        let s = (profile.density[i] - profile.density[i - 1]) / (profile.z[i] - profile.z[i - 1]);
        if s < slope {
            slope = s;
            steepest = zm;
        }
    }
    let located = ((steepest - front) / front).abs() <= EDGE_POSITION_TOL;
    Ok(EdgeReport {
        contrast,
        prominence,
        front,
        steepest,
        window,
        resolvable: contrast >= EDGE_CONTRAST && prominence >= EDGE_PROMINENCE && located,
    })
}

/// `v_max` of the lowest band, the usual front speed.
pub fn front_speed(bs: &BandStructure) -> Result<f64, TransportError> {
    Ok(crate::bands::max_band_velocity(bs, Band::LOWEST)?.1)
}
