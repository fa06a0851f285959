//! Free-space Poisson solves `−Δφ = f` on a finite box.
//!
//! The interior equation is the 7-point stencil. Dirichlet data on the
//! faces come from the multipole expansion of `f` about the box centre up
//! to degree 4, so the map `f ↦ φ` is linear.
//!
//! The energy functional needs a self-adjoint Newtonian operator. The
//! Dirichlet solve `K` is not exactly self-adjoint because its boundary
//! data are only approximate, so [`PoissonSolver::solve_symmetric`] returns
//! `½(K + Kᵀ)f`; both agree to the accuracy of the boundary expansion.

use rayon::prelude::*;

use super::harmonics::{degree, mono, real_harmonics, solid_harmonics, COUNT, LMAX, MONO};
use super::multigrid::{Multigrid, SolveStats};
use super::{Grid3D, ScalarField};
use crate::{Error, Result};

/// Relative size of the source on the faces above which it is rejected.
const CONTAMINATION: f64 = 1e-8;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone)]
pub struct PoissonSolver {
    grid: Grid3D,
    mg: Multigrid,
    tol: f64,
}

/// Dirichlet solve with multipole boundary data at tolerance 1e-8.
pub fn poisson_free_space(source: &ScalarField) -> Result<ScalarField> {
    PoissonSolver::new(*source.grid(), 1e-8).solve(source)
}

impl PoissonSolver {
    pub fn new(grid: Grid3D, tol: f64) -> Self {
        Self {
            mg: Multigrid::new(grid.n, grid.h, 0.0),
            grid,
            tol,
        }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    fn check(&self, source: &ScalarField) -> Result<()> {
        if *source.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let max = source.max_abs();
        if max == 0.0 {
            return Ok(());
        }
        let ratio = source.boundary_max_abs() / max;
        if ratio > CONTAMINATION {
            return Err(Error::BoundaryContamination { ratio });
        }
        Ok(())
    }

    /// Moments `h³ Σ f(y) |y|^l Y_lm(ŷ)` about the box centre.
    fn moments(&self, f: &[f64]) -> [f64; COUNT] {
        let g = self.grid;
        let n = g.n;
        let offset = |i: usize| g.h * i as f64 - g.half_width;
        let powers = |t: f64| {
            let mut p = [1.0; LMAX + 1];
            for e in 1..=LMAX {
                p[e] = p[e - 1] * t;
            }
            p
        };
        let zp: Vec<[f64; LMAX + 1]> = (0..n).map(|k| powers(offset(k))).collect();
        let raw = f
            .par_chunks(n * n)
            .enumerate()
            .fold(
                || [0.0; MONO],
                |mut acc, (i, plane)| {
                    let xp = powers(offset(i));
                    for (j, row) in plane.chunks(n).enumerate() {
                        let mut zs = [0.0; LMAX + 1];
                        for (v, z) in row.iter().zip(&zp) {
                            if *v != 0.0 {
                                for c in 0..=LMAX {
                                    zs[c] += v * z[c];
                                }
                            }
                        }
                        let yp = powers(offset(j));
                        for a in 0..=LMAX {
                            for b in 0..=LMAX - a {
                                for c in 0..=LMAX - a - b {
                                    acc[mono(a, b, c)] += xp[a] * yp[b] * zs[c];
                                }
                            }
                        }
                    }
                    acc
                },
            )
            .reduce(
                || [0.0; MONO],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
                    a
                },
            );
        let vol = g.volume();
        let mut q = [0.0; COUNT];
        for (qi, poly) in q.iter_mut().zip(solid_harmonics()) {
            *qi = vol * poly.iter().zip(&raw).map(|(c, m)| c * m).sum::<f64>();
        }
        q
    }

    /// Exterior expansion `Σ q_lm Y_lm(x̂) / ((2l+1)|x|^{l+1})` at `x`.
    fn exterior(&self, q: &[f64; COUNT], x: [f64; 3]) -> f64 {
        let (r, y) = real_harmonics(rel(&self.grid, x));
        let mut s = 0.0;
        let mut inv = 1.0 / r;
        let mut l = 0;
        for (i, yi) in y.iter().enumerate() {
            let d = degree(i);
            if d != l {
                inv /= r;
                l = d;
            }
            s += q[i] * yi * inv / (2 * d + 1) as f64;
        }
        s
    }

    /// Boundary data `M f` placed on the faces, zero inside.
    fn boundary_data(&self, f: &[f64]) -> Vec<f64> {
        let q = self.moments(f);
        let g = self.grid;
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = g.coords(idx);
                if g.is_boundary(i, j, k) {
                    self.exterior(&q, g.position(idx))
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `A⁻¹` on interior values with homogeneous Dirichlet data.
    fn solve_interior(&self, b: Vec<f64>) -> Result<(Vec<f64>, SolveStats)> {
        self.mg.solve(&b, None, self.tol, MAX_ITER)
    }

    /// The Dirichlet solution `K f`.
    pub fn solve(&self, source: &ScalarField) -> Result<ScalarField> {
        self.solve_with_stats(source).map(|(f, _)| f)
    }

    pub fn solve_with_stats(&self, source: &ScalarField) -> Result<(ScalarField, SolveStats)> {
        self.check(source)?;
        let g = self.grid;
        let f = source.values();
        let bd = self.boundary_data(f);
        let rhs = self.interior_rhs(f, &bd);
        let (mut y, stats) = self.solve_interior(rhs)?;
        y.par_iter_mut().zip(&bd).for_each(|(y, b)| *y += b);
        Ok((ScalarField::from_values(g, y)?, stats))
    }

    /// `f` on interior nodes plus the boundary coupling `B g`.
    fn interior_rhs(&self, f: &[f64], bd: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.n;
        let inv = 1.0 / (g.h * g.h);
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = g.coords(idx);
                if g.is_boundary(i, j, k) {
                    return 0.0;
                }
                let mut s = f[idx];
                let m = n - 1;
                if i == 1 {
                    s += inv * bd[idx - n * n];
                }
                if i == m - 1 {
                    s += inv * bd[idx + n * n];
                }
                if j == 1 {
                    s += inv * bd[idx - n];
                }
                if j == m - 1 {
                    s += inv * bd[idx + n];
                }
                if k == 1 {
                    s += inv * bd[idx - 1];
                }
                if k == m - 1 {
                    s += inv * bd[idx + 1];
                }
                s
            })
            .collect()
    }

    /// `½(K + Kᵀ) f`, the self-adjoint Newtonian operator used by the
    /// energy. Costs two interior solves.
    pub fn solve_symmetric(&self, source: &ScalarField) -> Result<ScalarField> {
        self.check(source)?;
        let g = self.grid;
        let n = g.n;
        let f = source.values();
        // K f
        let bd = self.boundary_data(f);
        let rhs = self.interior_rhs(f, &bd);
        let (mut kf, _) = self.solve_interior(rhs)?;
        kf.par_iter_mut().zip(&bd).for_each(|(y, b)| *y += b);
        // Kᵀ f = A⁻¹f_I + Mᵀ(Bᵀ A⁻¹ f_I + f_B)
        let interior: Vec<f64> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = g.coords(idx);
                if g.is_boundary(i, j, k) {
                    0.0
                } else {
                    f[idx]
                }
            })
            .collect();
        let (y1, _) = self.solve_interior(interior)?;
        let inv = 1.0 / (g.h * g.h);
        let m = n - 1;
        let beta: Vec<f64> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = g.coords(idx);
                if !g.is_boundary(i, j, k) {
                    return 0.0;
                }
                let mut s = f[idx];
                // the single interior neighbour of a face node
                let inner = |a: usize| (1..m).contains(&a);
                if inner(j) && inner(k) {
                    if i == 0 {
                        s += inv * y1[idx + n * n];
                    } else if i == m {
                        s += inv * y1[idx - n * n];
                    }
                }
                if inner(i) && inner(k) {
                    if j == 0 {
                        s += inv * y1[idx + n];
                    } else if j == m {
                        s += inv * y1[idx - n];
                    }
                }
                if inner(i) && inner(j) {
                    if k == 0 {
                        s += inv * y1[idx + 1];
                    } else if k == m {
                        s += inv * y1[idx - 1];
                    }
                }
                s
            })
            .collect();
        let mt = self.adjoint_multipole(&beta);
        let values = (0..g.len())
            .into_par_iter()
            .map(|idx| 0.5 * (kf[idx] + y1[idx] + mt[idx]))
            .collect();
        ScalarField::from_values(g, values)
    }

    /// `Mᵀβ`: charges `β` on the faces seen through the same truncated
    /// kernel, `h³ Σ_k β_k Σ_lm |y|^l Y_lm(ŷ) Y_lm(x̂_k) / ((2l+1)|x_k|^{l+1})`.
    fn adjoint_multipole(&self, beta: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let vol = g.volume();
        let s = beta
            .par_iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .fold(
                || [0.0; COUNT],
                |mut acc, (idx, b)| {
                    let (r, y) = real_harmonics(rel(&g, g.position(idx)));
                    let mut inv = 1.0 / r;
                    let mut l = 0;
                    for (i, yi) in y.iter().enumerate() {
                        let d = degree(i);
                        if d != l {
                            inv /= r;
                            l = d;
                        }
                        acc[i] += b * yi * inv / (2 * d + 1) as f64;
                    }
                    acc
                },
            )
            .reduce(
                || [0.0; COUNT],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
                    a
                },
            );
        let mut poly = [0.0; MONO];
        for (si, sh) in s.iter().zip(solid_harmonics()) {
            for (p, c) in poly.iter_mut().zip(sh) {
                *p += vol * si * c;
            }
        }
        let n = g.n;
        let offset = |i: usize| g.h * i as f64 - g.half_width;
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(n * n).enumerate().for_each(|(i, plane)| {
            let x = offset(i);
            for (j, row) in plane.chunks_mut(n).enumerate() {
                let y = offset(j);
                // coefficients of the restriction to this row, as a polynomial in z
                let mut e = [0.0; LMAX + 1];
                let mut xa = 1.0;
                for a in 0..=LMAX {
                    let mut yb = 1.0;
                    for b in 0..=LMAX - a {
                        for c in 0..=LMAX - a - b {
                            e[c] += poly[mono(a, b, c)] * xa * yb;
                        }
                        yb *= y;
                    }
                    xa *= x;
                }
                for (k, v) in row.iter_mut().enumerate() {
                    let z = offset(k);
                    *v = e.iter().rev().fold(0.0, |acc, c| acc * z + c);
                }
            }
        });
        out
    }
}

#[inline]
fn rel(g: &Grid3D, x: [f64; 3]) -> [f64; 3] {
    [x[0] - g.center[0], x[1] - g.center[1], x[2] - g.center[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: Grid3D, c: [f64; 3], w: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x| {
            let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
            (-r2 / (w * w)).exp()
        })
    }

    /// Newtonian potential of `e^{-r²/w²}`: `π^{3/2} w³ erf(r/w) / (4π r)`.
    fn gaussian_potential(r: f64, w: f64) -> f64 {
        let pi = std::f64::consts::PI;
        if r < 1e-9 {
            return w * w / 2.0;
        }
        pi.powf(1.5) * w.powi(3) * erf(r / w) / (4.0 * pi * r)
    }

    fn erf(x: f64) -> f64 {
        // Maclaurin series; erfc(4) is below 2e-8
        if x > 4.0 {
            return 1.0;
        }
        let mut sum = 0.0;
        let mut term = x;
        let mut k = 0.0;
        while term.abs() > 1e-17 || k < 5.0 {
            sum += term / (2.0 * k + 1.0);
            k += 1.0;
            term *= -x * x / k;
            if k > 200.0 {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn off_centre_gaussian_matches_closed_form() {
        let grid = Grid3D::new([0.0; 3], 8.0, 65).unwrap();
        let c = [1.5, -1.0, 0.5];
        let src = gaussian(grid, c, 1.0);
        let phi = poisson_free_space(&src).unwrap();
        let mut worst: f64 = 0.0;
        for idx in (0..grid.len()).step_by(37) {
            let x = grid.position(idx);
            if x.iter().any(|v| v.abs() > 4.0) {
                continue;
            }
            let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
            let e = gaussian_potential(r, 1.0);
            worst = worst.max((phi.values()[idx] - e).abs() / e);
        }
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn zero_source_gives_zero() {
        let grid = Grid3D::new([0.0; 3], 4.0, 17).unwrap();
        let phi = poisson_free_space(&ScalarField::zeros(grid)).unwrap();
        assert_eq!(phi.max_abs(), 0.0);
    }

    #[test]
    fn contaminated_source_is_rejected() {
        let grid = Grid3D::new([0.0; 3], 4.0, 17).unwrap();
        let src = gaussian(grid, [0.0; 3], 3.0);
        assert!(matches!(
            poisson_free_space(&src),
            Err(Error::BoundaryContamination { .. })
        ));
    }

    #[test]
    fn solves_are_linear_and_symmetric_version_is_self_adjoint() {
        let grid = Grid3D::new([0.0; 3], 8.0, 33).unwrap();
        let solver = PoissonSolver::new(grid, 1e-11);
        let f = gaussian(grid, [2.0, 0.0, 0.0], 1.0);
        let g = gaussian(grid, [-1.0, 1.5, -2.0], 1.2);
        let lin = f.lin_comb(2.0, &g, -0.5);
        let a = solver.solve(&lin).unwrap();
        let b = solver
            .solve(&f)
            .unwrap()
            .lin_comb(2.0, &solver.solve(&g).unwrap(), -0.5);
        let diff = a.lin_comb(1.0, &b, -1.0).max_abs();
        assert!(diff < 1e-9 * a.max_abs());

        let mask = gaussian(grid, [0.0; 3], 1.5);
        let u = mask.zip_map(&ScalarField::random_interior(grid, 9), |m, r| m * (r + 0.5));
        let v = mask.zip_map(&ScalarField::random_interior(grid, 10), |m, r| m * r);
        let su = solver.solve_symmetric(&u).unwrap();
        let sv = solver.solve_symmetric(&v).unwrap();
        let (x, y) = (su.dot(&v), sv.dot(&u));
        assert!((x - y).abs() < 1e-9 * x.abs(), "{x} {y}");
        // and close to the plain Dirichlet solve where the source lives
        let ku = solver.solve(&u).unwrap();
        let mut rel: f64 = 0.0;
        for idx in 0..grid.len() {
            if grid.position(idx).iter().all(|c| c.abs() <= 4.0) {
                let (a, b) = (su.values()[idx], ku.values()[idx]);
                rel = rel.max((a - b).abs() / b.abs());
            }
        }
        assert!(rel < 1e-2, "{rel}");
    }
}
