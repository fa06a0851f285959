//! MINRES for operators that are self-adjoint in a given inner product.

use nalgebra::DMatrix;

use crate::field3d::ScalarField;
use crate::Result;

#[derive(Debug, Clone)]
pub struct MinresOutcome {
    pub x: ScalarField,
    pub iterations: usize,
    /// Estimated `‖b − A x‖ / ‖b‖` in the solver's inner product.
    pub relative_residual: f64,
    pub converged: bool,
    /// Eigenvalues of the Lanczos tridiagonal matrix, ascending.
    pub ritz_values: Vec<f64>,
}

impl MinresOutcome {
    /// `1 / min |θ|` over the Ritz values, an estimate of `‖A⁻¹‖`.
    pub fn inverse_norm_estimate(&self) -> f64 {
        let m = self.ritz_values.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min);
        1.0 / m
    }
}

/// Solves `A x = b` from `x = 0` until the residual estimate falls below
/// `rtol·‖b‖`. `A` must be self-adjoint with respect to `inner`.
pub fn minres<A, I>(mut apply: A, inner: I, b: &ScalarField, rtol: f64, max_iter: usize) -> Result<MinresOutcome>
where
    A: FnMut(&ScalarField) -> Result<ScalarField>,
    I: Fn(&ScalarField, &ScalarField) -> f64,
{
    let grid = *b.grid();
    let mut x = ScalarField::zeros(grid);
    let beta1 = inner(b, b).max(0.0).sqrt();
    if beta1 == 0.0 {
        return Ok(MinresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            ritz_values: Vec::new(),
        });
    }
    let mut r1 = b.clone();
    let mut r2 = b.clone();
    let mut w = ScalarField::zeros(grid);
    let mut w2 = ScalarField::zeros(grid);
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut it = 0;
    let mut rel = 1.0;
    while it < max_iter {
        it += 1;
        let v = r2.scaled(1.0 / beta);
        let mut y = apply(&v)?;
        if it >= 2 {
            y.axpy(-beta / oldb, &r1);
        }
        let alfa = inner(&v, &y);
        y.axpy(-alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, y);
        oldb = beta;
        beta = inner(&r2, &r2).max(0.0).sqrt();
        alphas.push(alfa);
        betas.push(beta);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // w ← (v − oldeps·w₁ − delta·w₂)/gamma with w₁, w₂ the previous two
        let w1 = std::mem::replace(&mut w2, w);
        let mut wn = v;
        wn.axpy(-oldeps, &w1);
        wn.axpy(-delta, &w2);
        wn.scale(1.0 / gamma);
        x.axpy(phi, &wn);
        w = wn;

        rel = phibar / beta1;
        if rel <= rtol || beta == 0.0 {
            break;
        }
    }
    Ok(MinresOutcome {
        x,
        iterations: it,
        relative_residual: rel,
        converged: rel <= rtol,
        ritz_values: ritz(&alphas, &betas),
    })
}

fn ritz(alphas: &[f64], betas: &[f64]) -> Vec<f64> {
    let m = alphas.len();
    if m == 0 {
        return Vec::new();
    }
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let mut ev: Vec<f64> = t.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}
