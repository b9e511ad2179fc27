//! Bloch bands of `V(z) = s E_R sin²(k_L z)` in a plane-wave basis.
//!
//! With `sin²(x) = (1 - cos 2x)/2` the potential only couples plane waves
//! `e^{i(q+2n)k_L z}` with `n ± 1`, so at each quasi-momentum `q` (units of
//! `k_L`) the Hamiltonian in `E_R` is the symmetric tridiagonal matrix
//!
//! ```text
//! H[n][n]   = (q + 2n)² + s/2
//! H[n][n±1] = -s/4
//! ```
//!
//! for `n = -cutoff..=cutoff`. Group velocities (units of `v_R`) come from the
//! Hellmann–Feynman form `v = ½ dE/dq = Σ_n c_n² (q + 2n)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;

use crate::tridiag::{SymTridiagonal, TridiagError};

pub const MIN_CUTOFF: usize = 8;
pub const DEFAULT_CUTOFF: usize = 32;
pub const DEFAULT_Q_POINTS: usize = 513;

/// Relative gap below which two eigenvalues are treated as one degenerate level.
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum BandError {
    #[error("quasi-momentum {0} outside the first zone [-1, 1]")]
    QuasiMomentum(f64),
    #[error("lattice depth must be non-negative, got {0}")]
    Depth(f64),
    #[error("plane-wave cutoff {got} below the minimum {min}")]
    Cutoff { got: usize, min: usize },
    #[error("quasi-momentum grid must be strictly increasing within [-1, 1]")]
    Grid,
    #[error("requested {requested} bands, but cutoff {cutoff} supports at most {cutoff}")]
    TooManyBands { requested: usize, cutoff: usize },
    #[error("band {band} is not tabulated (have {n_bands})")]
    BandIndex { band: usize, n_bands: usize },
    #[error("free momentum {kappa} lies beyond the {n_bands} tabulated bands")]
    BeyondBands { kappa: f64, n_bands: usize },
    #[error("table has {got} points, expected {expected}")]
    TableShape { got: usize, expected: usize },
    #[error(transparent)]
    Eigen(#[from] TridiagError),
}

/// A band index, counted from 1 (the lowest band).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Band(usize);

impl Band {
    pub const LOWEST: Band = Band(1);

    pub fn new(number: usize) -> Option<Self> {
        (number >= 1).then_some(Self(number))
    }

    /// 1-based band number.
    pub fn number(self) -> usize {
        self.0
    }

    /// 0-based table index.
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn check_depth(depth: f64) -> Result<(), BandError> {
    if depth >= 0.0 && depth.is_finite() {
        Ok(())
    } else {
        Err(BandError::Depth(depth))
    }
}

/// Plane-wave Hamiltonian at quasi-momentum `q`, dimension `2 cutoff + 1`.
///
/// Any `cutoff ≥ 1` is accepted here; converged band tables need
/// [`MIN_CUTOFF`] or more, which [`BlochProblem`] enforces.
pub fn build_hamiltonian(depth: f64, q: f64, cutoff: usize) -> Result<SymTridiagonal, BandError> {
    check_depth(depth)?;
    if !(q.abs() <= 1.0) {
        return Err(BandError::QuasiMomentum(q));
    }
    if cutoff < 1 {
        return Err(BandError::Cutoff { got: cutoff, min: 1 });
    }
    Ok(hamiltonian_unchecked(depth, q, cutoff))
}

fn hamiltonian_unchecked(depth: f64, q: f64, cutoff: usize) -> SymTridiagonal {
    let dim = 2 * cutoff + 1;
    let diag = (0..dim)
        .map(|i| {
            let k = q + 2.0 * (i as f64 - cutoff as f64);
            k * k + 0.5 * depth
        })
        .collect();
    let off = vec![-0.25 * depth; dim - 1];
    // lengths agree by construction
    SymTridiagonal::new(diag, off).unwrap()
}

/// `Σ_n c_n² (q + 2n)` for a real unit eigenvector over `n = -cutoff..=cutoff`.
pub fn hellmann_feynman(vector: &[f64], q: f64, cutoff: usize) -> f64 {
    vector
        .iter()
        .enumerate()
        .map(|(i, c)| c * c * (q + 2.0 * (i as f64 - cutoff as f64)))
        .sum()
}

/// Flip `v` so that its largest-magnitude entry (first one on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, c) in v.iter().enumerate() {
        if c.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|c| *c < 0.0) {
        v.iter_mut().for_each(|c| *c = -*c);
    }
}

/// Bands at a single quasi-momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPoint {
    pub q: f64,
    pub energies: Vec<f64>,
    pub velocities: Vec<f64>,
    /// Band-major eigenvectors, `2 cutoff + 1` coefficients each.
    pub vectors: Vec<f64>,
}

/// Lowest `n_bands` bands at `q`.
///
/// Within an exactly degenerate level (only reachable at `s = 0`, at `q = 0`
/// or `q = ±1`) the Hellmann–Feynman velocity is not unique; each member
/// gets the level's mean velocity, the `s → 0⁺` limit.
pub fn solve_point(depth: f64, q: f64, cutoff: usize, n_bands: usize) -> Result<BandPoint, BandError> {
    let h = build_hamiltonian(depth, q, cutoff)?;
    let dim = h.dim();
    if n_bands > dim {
        return Err(BandError::TooManyBands {
            requested: n_bands,
            cutoff,
        });
    }
    let values = h.eigenvalues()?;
    // one extra level so clusters straddling the last band are seen whole
    let take = (n_bands + 1).min(dim);
    let degenerate = values[..take].windows(2).any(|w| {
        (w[1] - w[0]).abs() <= DEGENERACY_TOL * w[0].abs().max(1.0)
    });
    if degenerate {
        return solve_point_dense_vectors(&h, q, cutoff, n_bands);
    }
    let mut vectors = Vec::with_capacity(n_bands * dim);
    let mut velocities = Vec::with_capacity(n_bands);
    for &lambda in &values[..n_bands] {
        let mut v = h.eigenvector_for(lambda);
        fix_sign(&mut v);
        velocities.push(hellmann_feynman(&v, q, cutoff));
        vectors.extend_from_slice(&v);
    }
    Ok(BandPoint {
        q,
        energies: values[..n_bands].to_vec(),
        velocities,
        vectors,
    })
}

/// Full QL with accumulated rotations, used when levels are degenerate and
/// inverse iteration has no unique vector to converge to.
fn solve_point_dense_vectors(
    h: &SymTridiagonal,
    q: f64,
    cutoff: usize,
    n_bands: usize,
) -> Result<BandPoint, BandError> {
    let dim = h.dim();
    let eig = h.eigh()?;
    let take = (n_bands + 1).min(dim);
    let mut vel: Vec<f64> = (0..take)
        .map(|j| hellmann_feynman(eig.vector(j), q, cutoff))
        .collect();
    let mut start = 0;
    while start < take {
        let mut end = start + 1;
        while end < take
            && (eig.values[end] - eig.values[start]).abs()
                <= DEGENERACY_TOL * eig.values[start].abs().max(1.0)
        {
            end += 1;
        }
        if end - start > 1 {
            let mean = vel[start..end].iter().sum::<f64>() / (end - start) as f64;
            vel[start..end].iter_mut().for_each(|v| *v = mean);
        }
        start = end;
    }
    let mut vectors = Vec::with_capacity(n_bands * dim);
    for j in 0..n_bands {
        let at = vectors.len();
        vectors.extend_from_slice(eig.vector(j));
        fix_sign(&mut vectors[at..]);
    }
    vel.truncate(n_bands);
    Ok(BandPoint {
        q,
        energies: eig.values[..n_bands].to_vec(),
        velocities: vel,
        vectors,
    })
}

/// Depth, basis size and quasi-momentum samples of a band calculation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochProblem {
    depth: f64,
    cutoff: usize,
    q_grid: Vec<f64>,
}

impl BlochProblem {
    pub fn new(depth: f64, cutoff: usize, q_grid: Vec<f64>) -> Result<Self, BandError> {
        check_depth(depth)?;
        if cutoff < MIN_CUTOFF {
            return Err(BandError::Cutoff {
                got: cutoff,
                min: MIN_CUTOFF,
            });
        }
        let in_zone = q_grid.iter().all(|q| q.abs() <= 1.0);
        let increasing = q_grid.windows(2).all(|w| w[0] < w[1]);
        if q_grid.is_empty() || !in_zone || !increasing {
            return Err(BandError::Grid);
        }
        Ok(Self {
            depth,
            cutoff,
            q_grid,
        })
    }

    /// `points` evenly spaced samples of `[-1, 1]`, endpoints included.
    pub fn uniform(depth: f64, cutoff: usize, points: usize) -> Result<Self, BandError> {
        if points < 2 {
            return Err(BandError::Grid);
        }
        let step = 2.0 / (points - 1) as f64;
        let mut grid: Vec<f64> = (0..points).map(|i| -1.0 + i as f64 * step).collect();
        // exact mirror symmetry, so `solve_bands` can reuse q ≥ 0
        for i in 0..points / 2 {
            grid[points - 1 - i] = -grid[i];
        }
        if points % 2 == 1 {
            grid[points / 2] = 0.0;
        }
        Self::new(depth, cutoff, grid)
    }

    pub fn with_defaults(depth: f64) -> Result<Self, BandError> {
        Self::uniform(depth, DEFAULT_CUTOFF, DEFAULT_Q_POINTS)
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn q_grid(&self) -> &[f64] {
        &self.q_grid
    }

    pub fn solve_at(&self, index: usize, n_bands: usize) -> Result<BandPoint, BandError> {
        solve_point(self.depth, self.q_grid[index], self.cutoff, n_bands)
    }
}

/// Tabulated bands `1..=n_bands` on a quasi-momentum grid. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    depth: f64,
    cutoff: usize,
    n_bands: usize,
    q: Vec<f64>,
    // band-major: [band][q]
    energies: Vec<f64>,
    velocities: Vec<f64>,
    // [band][q][coefficient]
    vectors: Vec<f64>,
}

/// Solve every grid point serially.
///
/// `H(-q)` is `H(q)` with the basis reversed, so a point whose mirror image
/// was already solved is filled from it: energies equal, coefficients
/// reversed, velocities negated.
pub fn solve_bands(prob: &BlochProblem, n_bands: usize) -> Result<BandStructure, BandError> {
    check_band_count(prob, n_bands)?;
    let grid = &prob.q_grid;
    let n = grid.len();
    let mut points: Vec<Option<BandPoint>> = (0..n).map(|_| None).collect();
    for i in (0..n).rev() {
        if grid[i] < 0.0 {
            break;
        }
        points[i] = Some(prob.solve_at(i, n_bands)?);
    }
    for i in 0..n {
        if points[i].is_some() {
            continue;
        }
        let mirror = n - 1 - i;
        points[i] = Some(match &points[mirror] {
            Some(p) if grid[mirror] == -grid[i] => mirror_point(p, prob.cutoff),
            _ => prob.solve_at(i, n_bands)?,
        });
    }
    BandStructure::from_points(prob, n_bands, points.into_iter().flatten().collect())
}

fn mirror_point(p: &BandPoint, cutoff: usize) -> BandPoint {
    let dim = 2 * cutoff + 1;
    let mut vectors = p.vectors.clone();
    for v in vectors.chunks_mut(dim) {
        v.reverse();
        fix_sign(v);
    }
    BandPoint {
        q: -p.q,
        energies: p.energies.clone(),
        velocities: p.velocities.iter().map(|v| -v).collect(),
        vectors,
    }
}

fn check_band_count(prob: &BlochProblem, n_bands: usize) -> Result<(), BandError> {
    if n_bands == 0 || n_bands > prob.cutoff {
        return Err(BandError::TooManyBands {
            requested: n_bands,
            cutoff: prob.cutoff,
        });
    }
    Ok(())
}

impl BandStructure {
    /// Assemble a table from points solved in grid order (e.g. in parallel).
    pub fn from_points(
        prob: &BlochProblem,
        n_bands: usize,
        points: Vec<BandPoint>,
    ) -> Result<Self, BandError> {
        check_band_count(prob, n_bands)?;
        let nq = prob.q_grid.len();
        if points.len() != nq {
            return Err(BandError::TableShape {
                got: points.len(),
                expected: nq,
            });
        }
        let dim = 2 * prob.cutoff + 1;
        let mut energies = vec![0.0; n_bands * nq];
        let mut velocities = vec![0.0; n_bands * nq];
        let mut vectors = vec![0.0; n_bands * nq * dim];
        for (i, p) in points.iter().enumerate() {
            if p.energies.len() != n_bands || p.vectors.len() != n_bands * dim {
                return Err(BandError::TableShape {
                    got: p.energies.len(),
                    expected: n_bands,
                });
            }
            for b in 0..n_bands {
                energies[b * nq + i] = p.energies[b];
                velocities[b * nq + i] = p.velocities[b];
                let at = (b * nq + i) * dim;
                vectors[at..at + dim].copy_from_slice(&p.vectors[b * dim..(b + 1) * dim]);
            }
        }
        Ok(Self {
            depth: prob.depth,
            cutoff: prob.cutoff,
            n_bands,
            q: prob.q_grid.clone(),
            energies,
            velocities,
            vectors,
        })
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn q_grid(&self) -> &[f64] {
        &self.q
    }

    fn row(&self, band: Band) -> Result<usize, BandError> {
        if band.number() > self.n_bands {
            return Err(BandError::BandIndex {
                band: band.number(),
                n_bands: self.n_bands,
            });
        }
        Ok(band.index() * self.q.len())
    }

    /// Energies of `band` over the grid [E_R].
    pub fn energies(&self, band: Band) -> Result<&[f64], BandError> {
        let r = self.row(band)?;
        Ok(&self.energies[r..r + self.q.len()])
    }

    /// Group velocities of `band` over the grid [v_R].
    pub fn velocities(&self, band: Band) -> Result<&[f64], BandError> {
        let r = self.row(band)?;
        Ok(&self.velocities[r..r + self.q.len()])
    }

    pub fn eigenvector(&self, band: Band, index: usize) -> Result<&[f64], BandError> {
        let dim = 2 * self.cutoff + 1;
        let at = (self.row(band)? + index) * dim;
        Ok(&self.vectors[at..at + dim])
    }

    fn grid_index(&self, q: f64) -> Option<usize> {
        let i = self.q.partition_point(|&x| x < q);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .find(|&j| j < self.q.len() && (self.q[j] - q).abs() <= 1e-13)
    }

    /// `(band, q, E, v)` for every tabulated entry, band-major.
    pub fn rows(&self) -> impl Iterator<Item = (Band, f64, f64, f64)> + '_ {
        let nq = self.q.len();
        (0..self.n_bands * nq).map(move |k| {
            (
                Band(k / nq + 1),
                self.q[k % nq],
                self.energies[k],
                self.velocities[k],
            )
        })
    }
}

/// Group velocity [v_R] of `band` at `q`.
///
/// Grid points are read from the table; other `q` within the tabulated
/// range are solved directly with the table's depth and cutoff.
pub fn group_velocity(bs: &BandStructure, band: Band, q: f64) -> Result<f64, BandError> {
    let row = bs.velocities(band)?;
    let (lo, hi) = (bs.q[0], bs.q[bs.q.len() - 1]);
    if !(q >= lo && q <= hi) {
        return Err(BandError::QuasiMomentum(q));
    }
    if let Some(i) = bs.grid_index(q) {
        return Ok(row[i]);
    }
    let p = solve_point(bs.depth, q, bs.cutoff, band.number())?;
    Ok(p.velocities[band.index()])
}

/// Location and value of the largest group velocity in `band`.
///
/// The grid maximum is refined by a golden-section search over the two
/// neighbouring intervals, evaluating exact Hellmann–Feynman velocities.
pub fn max_band_velocity(bs: &BandStructure, band: Band) -> Result<(f64, f64), BandError> {
    let row = bs.velocities(band)?;
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    let (mut q_best, mut v_best) = (bs.q[best], row[best]);
    if bs.q.len() < 3 {
        return Ok((q_best, v_best));
    }
    let mut a = bs.q[best.saturating_sub(1)];
    let mut b = bs.q[(best + 1).min(bs.q.len() - 1)];
    let eval = |q: f64| -> Result<f64, BandError> {
        let p = solve_point(bs.depth, q, bs.cutoff, band.number())?;
        Ok(p.velocities[band.index()])
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..60 {
        if b - a < 1e-12 {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = eval(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = eval(x1)?;
        }
    }
    for (q, v) in [(x1, f1), (x2, f2)] {
        if v > v_best {
            q_best = q;
            v_best = v;
        }
    }
    Ok((q_best, v_best))
}

/// Extended-zone bookkeeping for adiabatic loading: free momentum `κ`
/// (units of `k_L`) lands in band `ceil(|κ|)` at a folded quasi-momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoneMapping {
    n_bands: usize,
}

impl ZoneMapping {
    pub fn new(n_bands: usize) -> Self {
        Self { n_bands }
    }

    pub fn for_bands(bs: &BandStructure) -> Self {
        Self::new(bs.n_bands())
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    /// See [`map_free_momentum`].
    pub fn map(&self, kappa: f64) -> Result<(Band, f64), BandError> {
        map_free_momentum(kappa, self.n_bands)
    }
}

/// `κ → (band, q)` with `q = κ - 2n`, `n = ±⌊band/2⌋` taking the sign of `κ`.
///
/// Zone `b` is `b - 1 < |κ| ≤ b`, so integer `|κ|` belongs to the lower band.
/// On a free particle the folded state is the plane wave `κ` itself, which
/// keeps the velocity sign of `κ` as `s → 0`.
pub fn map_free_momentum(kappa: f64, n_bands: usize) -> Result<(Band, f64), BandError> {
    let mag = kappa.abs();
    if !(mag <= n_bands as f64) {
        return Err(BandError::BeyondBands { kappa, n_bands });
    }
    let number = (mag.ceil() as usize).max(1);
    let shift = 2.0 * (number / 2) as f64;
    let q = if kappa >= 0.0 {
        kappa - shift
    } else {
        kappa + shift
    };
    Ok((Band(number), q))
}
