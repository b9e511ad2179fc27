//! Symmetric tridiagonal eigensolver (implicit-shift QL).

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

/// Iteration budget per eigenvalue; QL with Wilkinson-type shifts converges
/// cubically and almost never needs more than a handful.
pub const MAX_ITERATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TridiagError {
    #[error("QL iteration did not converge for eigenvalue {index} within {MAX_ITERATIONS} sweeps")]
    NoConvergence { index: usize },
    #[error("off-diagonal length {off} does not match dimension {dim}")]
    Shape { dim: usize, off: usize },
}

/// Real symmetric tridiagonal matrix stored by its diagonal and the
/// `dim - 1` entries of the first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

/// Eigen-decomposition with eigenvalues in ascending order.
///
/// `vectors` is column-major: eigenvector `j` occupies
/// `vectors[j * dim..(j + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl Eigen {
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self, TridiagError> {
        if diag.len() != off.len() + 1 && !(diag.is_empty() && off.is_empty()) {
            return Err(TridiagError::Shape {
                dim: diag.len(),
                off: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diag(&self) -> &[f64] {
        &self.off
    }

    /// `y = T x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Eigenvalues only, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, TridiagError> {
        let (mut d, _) = self.ql(false)?;
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Full eigen-decomposition, ascending eigenvalues, orthonormal vectors.
    pub fn eigh(&self) -> Result<Eigen, TridiagError> {
        let n = self.dim();
        let (d, z) = self.ql(true)?;
        let mut order: Vec<usize> = (0..n).collect();
        // stable sort keeps the basis order for exactly degenerate values
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let mut values = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * n);
        for &j in &order {
            values.push(d[j]);
            vectors.extend_from_slice(&z[j * n..(j + 1) * n]);
        }
        Ok(Eigen {
            values,
            vectors,
            dim: n,
        })
    }

    /// Unit eigenvector for an (accurately known) eigenvalue by inverse
    /// iteration on `T - λI`, factored once with partial pivoting.
    ///
    /// Only meaningful for a simple eigenvalue; the returned vector is
    /// normalised but its sign is arbitrary.
    pub fn eigenvector_for(&self, lambda: f64) -> Vec<f64> {
        let n = self.dim();
        if n == 1 {
            return vec![1.0];
        }
        let scale = self
            .diag
            .iter()
            .map(|d| d.abs())
            .chain(self.off.iter().map(|e| e.abs()))
            .fold(f64::MIN_POSITIVE, f64::max);
        let tiny = f64::EPSILON * scale;
        let lu = PivotedLu::factor(self, lambda, tiny);
        // deterministic start without the n ↔ -n symmetry of the basis
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
        for _ in 0..4 {
            lu.solve(&mut x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        x
    }

    fn ql(&self, want_vectors: bool) -> Result<(Vec<f64>, Vec<f64>), TridiagError> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = vec![0.0; n];
        e[..n.saturating_sub(1)].copy_from_slice(&self.off);
        let mut z = Vec::new();
        if want_vectors {
            z = vec![0.0; n * n];
            for i in 0..n {
                z[i * n + i] = 1.0;
            }
        }

        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                if iter > MAX_ITERATIONS {
                    return Err(TridiagError::NoConvergence { index: l });
                }

                // shift from the leading 2x2 block
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = pythag(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = pythag(f, g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if want_vectors {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let f = *b;
                            *b = s * *a + c * f;
                            *a = c * *a - s * f;
                        }
                    }
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        Ok((d, z))
    }
}

/// LU factors of `T - λI` with row interchanges (LAPACK `gttrf` layout).
struct PivotedLu {
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    dl: Vec<f64>,
    swapped: Vec<bool>,
}

impl PivotedLu {
    fn factor(t: &SymTridiagonal, lambda: f64, tiny: f64) -> Self {
        let n = t.dim();
        let mut d: Vec<f64> = t.diag.iter().map(|v| v - lambda).collect();
        let mut du = t.off.clone();
        let mut dl = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        Self {
            d,
            du,
            du2,
            dl,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// `sqrt(a² + b²)`, falling back to the scaled form only when the plain one
/// over- or underflows (libm `hypot` dominates the QL sweep otherwise).
#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    let r = (a * a + b * b).sqrt();
    if r.is_finite() && r > 1e-150 {
        r
    } else {
        a.hypot(b)
    }
}
