//! Multigrid-preconditioned conjugate gradients for `(−Δ_h + c)x = b` on
//! the interior of a cubic grid with homogeneous Dirichlet data.
//!
//! Vectors hold every node of the lattice; boundary entries are kept at
//! zero. The V-cycle uses one red-black Gauss–Seidel sweep before and the
//! reversed sweep after the coarse correction, full-weighting restriction
//! and trilinear prolongation, so it is a symmetric positive definite
//! preconditioner.

use rayon::prelude::*;

use super::{axpy, dot};
use crate::{Error, Result};

const COARSE_TOL: f64 = 1e-13;
const MAX_COARSE_ITER: usize = 2000;

#[derive(Debug, Clone, Copy)]
struct Level {
    n: usize,
    h: f64,
}

/// Hierarchy for one grid size and shift.
#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<Level>,
    shift: f64,
}

#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// `out = (−Δ_h + c)x` at interior nodes, zero on the boundary.
pub(crate) fn apply_operator(n: usize, h: f64, c: f64, x: &[f64], out: &mut [f64]) {
    let inv = 1.0 / (h * h);
    let diag = 6.0 * inv + c;
    let nn = n * n;
    out.par_chunks_mut(nn).enumerate().for_each(|(i, plane)| {
        if i == 0 || i == n - 1 {
            plane.fill(0.0);
            return;
        }
        for j in 0..n {
            let row = &mut plane[j * n..(j + 1) * n];
            if j == 0 || j == n - 1 {
                row.fill(0.0);
                continue;
            }
            let base = i * nn + j * n;
            row[0] = 0.0;
            row[n - 1] = 0.0;
            for k in 1..n - 1 {
                let id = base + k;
                let s = x[id - nn] + x[id + nn] + x[id - n] + x[id + n] + x[id - 1] + x[id + 1];
                row[k] = diag * x[id] - inv * s;
            }
        }
    });
}

impl Multigrid {
    pub fn new(n: usize, h: f64, shift: f64) -> Self {
        let mut levels = vec![Level { n, h }];
        let mut cur = Level { n, h };
        while (cur.n - 1) % 2 == 0 && (cur.n - 1) / 2 >= 4 {
            cur = Level {
                n: (cur.n - 1) / 2 + 1,
                h: 2.0 * cur.h,
            };
            levels.push(cur);
        }
        Self { levels, shift }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let l = self.levels[0];
        apply_operator(l.n, l.h, self.shift, x, out);
    }

    /// One symmetric V-cycle from a zero initial guess: an approximation
    /// of `A⁻¹b`.
    pub fn vcycle(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        let mut scratch = self.scratch();
        self.cycle(0, &mut x, b, &mut scratch);
        x
    }

    /// Per-level buffers `(residual, coarse rhs, coarse correction)`.
    fn scratch(&self) -> Vec<[Vec<f64>; 3]> {
        self.levels
            .windows(2)
            .map(|w| {
                let (nf, nc) = (w[0].n, w[1].n);
                [
                    vec![0.0; nf * nf * nf],
                    vec![0.0; nc * nc * nc],
                    vec![0.0; nc * nc * nc],
                ]
            })
            .collect()
    }

    fn cycle(&self, lvl: usize, x: &mut [f64], b: &[f64], scratch: &mut [[Vec<f64>; 3]]) {
        let Level { n, h } = self.levels[lvl];
        if lvl + 1 == self.levels.len() {
            coarse_solve(n, h, self.shift, x, b);
            return;
        }
        gauss_seidel(n, h, self.shift, x, b, [0, 1]);
        let (head, rest) = scratch
            .split_first_mut()
            .expect("scratch has one entry per level");
        let [r, bc, xc] = head;
        residual(n, h, self.shift, x, b, r);
        let nc = self.levels[lvl + 1].n;
        restrict(n, r, nc, bc);
        xc.fill(0.0);
        self.cycle(lvl + 1, xc, bc, rest);
        prolong_add(nc, xc, n, x);
        gauss_seidel(n, h, self.shift, x, b, [1, 0]);
    }

    /// Preconditioned CG from `x0` (or zero) to relative residual `tol`.
    pub fn solve(
        &self,
        b: &[f64],
        x0: Option<Vec<f64>>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, SolveStats)> {
        let bnorm = dot(b, b).sqrt();
        let mut x = x0.unwrap_or_else(|| vec![0.0; b.len()]);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok((x, SolveStats::default()));
        }
        let mut r = vec![0.0; b.len()];
        self.apply(&x, &mut r);
        r.par_iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
        let mut scratch = self.scratch();
        let mut z = vec![0.0; b.len()];
        self.cycle(0, &mut z, &r, &mut scratch);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; b.len()];
        let mut rel = dot(&r, &r).sqrt() / bnorm;
        let mut it = 0;
        while rel > tol {
            if it >= max_iter || !rel.is_finite() {
                return Err(Error::SolverDivergence(format!(
                    "MG-CG reached relative residual {rel:e} after {it} iterations"
                )));
            }
            it += 1;
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::SolverDivergence(format!(
                    "non-positive curvature {pap:e}"
                )));
            }
            let alpha = rz / pap;
            axpy(&mut x, alpha, &p);
            axpy(&mut r, -alpha, &ap);
            rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= tol {
                break;
            }
            z.fill(0.0);
            self.cycle(0, &mut z, &r, &mut scratch);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut()
                .zip(&z)
                .for_each(|(p, z)| *p = z + beta * *p);
        }
        Ok((
            x,
            SolveStats {
                iterations: it,
                relative_residual: rel,
            },
        ))
    }
}

/// One red-black sweep, colours in the given order. The second colour
/// trails the first by one plane, which gives the same result as two
/// separate half sweeps with a single pass over memory.
fn gauss_seidel(n: usize, h: f64, c: f64, x: &mut [f64], b: &[f64], order: [usize; 2]) {
    let inv = 1.0 / (h * h);
    let inv_diag = 1.0 / (6.0 * inv + c);
    let nn = n * n;
    let plane = |x: &mut [f64], i: usize, color: usize| {
        for j in 1..n - 1 {
            let base = i * nn + j * n;
            let mut id = base + 1 + (i + j + 1 + color) % 2;
            let end = base + n - 1;
            while id < end {
                // SAFETY: 1 <= i, j, k <= n-2, so every neighbour index is
                // inside the n³ lattice
                unsafe {
                    let s = x.get_unchecked(id - nn)
                        + x.get_unchecked(id + nn)
                        + x.get_unchecked(id - n)
                        + x.get_unchecked(id + n)
                        + x.get_unchecked(id - 1)
                        + x.get_unchecked(id + 1);
                    *x.get_unchecked_mut(id) = (b.get_unchecked(id) + inv * s) * inv_diag;
                }
                id += 2;
            }
        }
    };
    for i in 1..n - 1 {
        plane(x, i, order[0]);
        if i >= 2 {
            plane(x, i - 1, order[1]);
        }
    }
    plane(x, n - 2, order[1]);
}

/// Unpreconditioned CG on the coarsest level.
fn coarse_solve(n: usize, h: f64, c: f64, x: &mut [f64], b: &[f64]) {
    let len = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v = 0.0);
    if bnorm == 0.0 {
        return;
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..MAX_COARSE_ITER {
        apply_operator(n, h, c, &p, &mut ap);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if rr_new.sqrt() <= COARSE_TOL * bnorm {
            break;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..len {
            p[i] = r[i] + beta * p[i];
        }
    }
}

/// `r = b − (−Δ_h + c)x` at interior nodes, zero on the boundary.
fn residual(n: usize, h: f64, c: f64, x: &[f64], b: &[f64], r: &mut [f64]) {
    let inv = 1.0 / (h * h);
    let diag = 6.0 * inv + c;
    let nn = n * n;
    r.par_chunks_mut(nn).enumerate().for_each(|(i, plane)| {
        plane.fill(0.0);
        if i == 0 || i == n - 1 {
            return;
        }
        for j in 1..n - 1 {
            let base = i * nn + j * n;
            let (up, down) = (&x[base - nn..base - nn + n], &x[base + nn..base + nn + n]);
            let (north, south) = (&x[base - n..base], &x[base + n..base + 2 * n]);
            let mid = &x[base..base + n];
            let rhs = &b[base..base + n];
            let row = &mut plane[j * n..(j + 1) * n];
            for k in 1..n - 1 {
                let s = up[k] + down[k] + north[k] + south[k] + mid[k - 1] + mid[k + 1];
                row[k] = rhs[k] - diag * mid[k] + inv * s;
            }
        }
    });
}

/// Full weighting: `(1/8)·Pᵀ` for the trilinear prolongation `P`.
fn restrict(nf: usize, r: &[f64], nc: usize, out: &mut [f64]) {
    let w = [0.5, 1.0, 0.5];
    let nn = nf * nf;
    out.par_chunks_mut(nc * nc)
        .enumerate()
        .for_each(|(ic, plane)| {
            plane.fill(0.0);
            if ic == 0 || ic == nc - 1 {
                return;
            }
            for jc in 1..nc - 1 {
                let row = &mut plane[jc * nc..(jc + 1) * nc];
                for (a, wa) in w.iter().enumerate() {
                    for (bb, wb) in w.iter().enumerate() {
                        let base = (2 * ic + a - 1) * nn + (2 * jc + bb - 1) * nf;
                        let fine = &r[base..base + nf];
                        let wab = 0.125 * wa * wb;
                        for kc in 1..nc - 1 {
                            let k = 2 * kc;
                            row[kc] += wab * (0.5 * fine[k - 1] + fine[k] + 0.5 * fine[k + 1]);
                        }
                    }
                }
            }
        });
}

/// `x += P·xc` with trilinear interpolation.
fn prolong_add(nc: usize, xc: &[f64], nf: usize, x: &mut [f64]) {
    x.par_chunks_mut(nf * nf)
        .enumerate()
        .for_each(|(i, plane)| {
            if i == 0 || i == nf - 1 {
                return;
            }
            let (i0, i1) = (i / 2, i.div_ceil(2));
            let mut sum = vec![0.0; nc];
            for j in 1..nf - 1 {
                let (j0, j1) = (j / 2, j.div_ceil(2));
                // duplicated indices encode the 1 and 1/2 weights
                let rows = [(i0, j0), (i0, j1), (i1, j0), (i1, j1)]
                    .map(|(a, b)| &xc[(a * nc + b) * nc..(a * nc + b + 1) * nc]);
                sum.fill(0.0);
                for row in rows {
                    for (s, v) in sum.iter_mut().zip(row) {
                        *s += v;
                    }
                }
                let out = &mut plane[j * nf..(j + 1) * nf];
                for k in 1..nf - 1 {
                    out[k] += (sum[k / 2] + sum[k.div_ceil(2)]) * 0.125;
                }
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interior(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = vec![0.0; n * n * n];
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                for k in 1..n - 1 {
                    v[(i * n + j) * n + k] = rng.gen::<f64>() - 0.5;
                }
            }
        }
        v
    }

    #[test]
    fn restriction_is_scaled_transpose_of_prolongation() {
        let (nf, nc) = (17, 9);
        let xf = random_interior(nf, 1);
        let xc = random_interior(nc, 2);
        let mut pxc = vec![0.0; nf * nf * nf];
        prolong_add(nc, &xc, nf, &mut pxc);
        let mut rxf = vec![0.0; nc * nc * nc];
        restrict(nf, &xf, nc, &mut rxf);
        let lhs = dot(&pxc, &xf);
        let rhs = 8.0 * dot(&xc, &rxf);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn vcycle_is_symmetric() {
        let n = 33;
        let mg = Multigrid::new(n, 0.1, 1.0);
        let a = random_interior(n, 3);
        let b = random_interior(n, 4);
        let (ma, mb) = (mg.vcycle(&a), mg.vcycle(&b));
        let (x, y) = (dot(&ma, &b), dot(&a, &mb));
        assert!((x - y).abs() < 1e-10 * x.abs(), "{x} {y}");
    }

    #[test]
    fn solve_converges_quickly() {
        for shift in [0.0, 1.0] {
            let n = 65;
            let mg = Multigrid::new(n, 0.2, shift);
            assert_eq!(mg.depth(), 5);
            let b = random_interior(n, 5);
            let (x, stats) = mg.solve(&b, None, 1e-10, 100).unwrap();
            assert!(stats.iterations < 25, "{stats:?}");
            let mut ax = vec![0.0; b.len()];
            mg.apply(&x, &mut ax);
            let res: f64 = ax
                .iter()
                .zip(&b)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-10 * dot(&b, &b).sqrt() * 1.0001);
        }
    }
}
