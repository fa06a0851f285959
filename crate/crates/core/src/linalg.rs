//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection, with
//! eigenvectors by inverse iteration.

use crate::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let denom = if q.abs() < 1e-300 {
                1e-300_f64.copysign(q)
            } else {
                q
            };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based).
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(Error::SpectralSolverFailure(format!(
                "eigenvalue index {k} out of range {}",
                self.len()
            )));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * scale {
                return Ok(0.5 * (lo + hi));
            }
        }
        Err(Error::SpectralSolverFailure(
            "Sturm bisection did not converge".into(),
        ))
    }

    pub fn lowest_eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        (0..count.min(self.len()))
            .map(|k| self.eigenvalue(k))
            .collect()
    }

    /// Eigenvector for a (converged) eigenvalue by inverse iteration,
    /// normalised to unit Euclidean length.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let scale = self.gershgorin().1.abs().max(1.0);
        let shift = lambda + 1e-10 * scale;
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64)
            .collect();
        normalize(&mut v);
        for _ in 0..8 {
            let mut next = self.solve_shifted(shift, &v)?;
            normalize(&mut next);
            let overlap: f64 = next.iter().zip(&v).map(|(a, b)| a * b).sum();
            v = next;
            if (overlap.abs() - 1.0).abs() < 1e-14 {
                break;
            }
        }
        Ok(v)
    }

    /// Solve `(T - shift) x = rhs` with partial pivoting (Thomas algorithm
    /// with row interchanges).
    fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        // banded LU with one extra super-diagonal for pivoting
        let mut a = vec![0.0; n]; // sub
        let mut b: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut c = vec![0.0; n]; // super
        let mut d = vec![0.0; n]; // second super
        for i in 0..n - 1 {
            a[i + 1] = self.off[i];
            c[i] = self.off[i];
        }
        let mut x = rhs.to_vec();
        for i in 0..n - 1 {
            if a[i + 1].abs() > b[i].abs() {
                // swap rows i and i+1
                std::mem::swap(&mut b[i], &mut a[i + 1]);
                let (ci, bi1) = (c[i], b[i + 1]);
                c[i] = bi1;
                b[i + 1] = ci;
                let (di, ci1) = (d[i], c[i + 1]);
                d[i] = ci1;
                c[i + 1] = di;
                x.swap(i, i + 1);
            }
            let piv = if b[i].abs() < 1e-300 { 1e-300 } else { b[i] };
            let m = a[i + 1] / piv;
            b[i + 1] -= m * c[i];
            if i + 1 < n {
                c[i + 1] -= m * d[i];
            }
            x[i + 1] -= m * x[i];
        }
        let mut out = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= c[i] * out[i + 1];
            }
            if i + 2 < n {
                s -= d[i] * out[i + 2];
            }
            let piv = if b[i].abs() < 1e-300 { 1e-300 } else { b[i] };
            out[i] = s / piv;
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::SpectralSolverFailure(
                "inverse iteration produced non-finite values".into(),
            ));
        }
        Ok(out)
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_laplacian_spectrum_is_exact() {
        let n = 50;
        let t = SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]);
        for k in 0..5 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k).unwrap() - exact).abs() < 1e-12);
        }
        let lambda = t.eigenvalue(0).unwrap();
        let v = t.eigenvector(lambda).unwrap();
        // compare against sin profile
        let s: Vec<f64> = (0..n)
            .map(|i| (std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin())
            .collect();
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let overlap: f64 = v.iter().zip(&s).map(|(a, b)| a * b / norm).sum();
        assert!((overlap.abs() - 1.0).abs() < 1e-10);
    }
}
