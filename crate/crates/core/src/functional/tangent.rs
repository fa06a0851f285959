//! The tangent space `T = span{ż_{i,j}}` and the H¹-orthogonal projection
//! onto its complement `W`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::field3d::ScalarField;
use crate::{Error, Result};

/// Gram matrices with a larger eigenvalue ratio are treated as singular.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct TangentSpace {
    basis: Vec<ScalarField>,
    /// `(−Δ_h + 1)ż` for each basis vector
    riesz: Vec<ScalarField>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    condition: f64,
}

impl TangentSpace {
    /// `basis` must vanish on the boundary.
    pub fn new(mut basis: Vec<ScalarField>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidParameter("empty tangent basis".into()));
        }
        let grid = *basis[0].grid();
        if basis.iter().any(|b| *b.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        basis.iter_mut().for_each(|b| b.zero_boundary());
        let riesz: Vec<ScalarField> = basis.iter().map(|b| b.neg_laplacian(1.0)).collect();
        let m = basis.len();
        let gram = DMatrix::from_fn(m, m, |a, b| basis[a].dot(&riesz[b]));
        let gram = 0.5 * (&gram + gram.transpose());
        let eig = gram.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition < MAX_CONDITION) {
            return Err(Error::GramSingular { condition });
        }
        let chol = gram.cholesky().ok_or(Error::GramSingular { condition })?;
        Ok(Self {
            basis,
            riesz,
            chol,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ScalarField] {
        &self.basis
    }

    /// Eigenvalue ratio of the H¹ Gram matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `⟨ż_a, v⟩_{H¹}` for every basis vector.
    pub fn pairings(&self, v: &ScalarField) -> DVector<f64> {
        DVector::from_vec(self.riesz.iter().map(|r| r.dot(v)).collect())
    }

    /// Coefficients of the H¹-orthogonal projection of `v` onto `T`.
    pub fn coefficients(&self, v: &ScalarField) -> DVector<f64> {
        self.chol.solve(&self.pairings(v))
    }

    /// `Σ c_a ż_a`, the component of `v` in `T`.
    pub fn component(&self, v: &ScalarField) -> ScalarField {
        let c = self.coefficients(v);
        let mut out = ScalarField::zeros(*v.grid());
        for (ca, b) in c.iter().zip(&self.basis) {
            out.axpy(*ca, b);
        }
        out
    }

    /// `P v = v − Σ c_a ż_a`
    pub fn project(&self, v: &ScalarField) -> ScalarField {
        let c = self.coefficients(v);
        let mut out = v.clone();
        out.zero_boundary();
        let vals = out.values_mut();
        for (ca, b) in c.iter().zip(&self.basis) {
            vals.par_iter_mut()
                .zip(b.values())
                .for_each(|(o, b)| *o -= ca * b);
        }
        out
    }

    /// Largest `|⟨ż_a, v⟩_{H¹}| / (‖ż_a‖ ‖v‖)` over the basis.
    pub fn max_cosine(&self, v: &ScalarField) -> f64 {
        let vv = v.dot(&v.neg_laplacian(1.0)).max(0.0).sqrt();
        if vv == 0.0 {
            return 0.0;
        }
        self.basis
            .iter()
            .zip(&self.riesz)
            .map(|(b, r)| (r.dot(v) / (b.dot(r).sqrt() * vv)).abs())
            .fold(0.0, f64::max)
    }
}

/// `P v` for the H¹-orthogonal complement of `span(basis)`.
pub fn project_w(v: &ScalarField, basis: &[ScalarField]) -> Result<ScalarField> {
    Ok(TangentSpace::new(basis.to_vec())?.project(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field3d::{tangent_basis, BumpConfiguration, Grid3D};
    use crate::radial::solve_ground_state;

    fn space(d: f64) -> Result<TangentSpace> {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let config = BumpConfiguration::new(0.01, vec![[-d / 2.0, 0.0, 0.0], [d / 2.0, 0.0, 0.0]], 0.05)?;
        let grid = Grid3D::for_centers(&config.centers, 0.5, 8.0, 256)?;
        TangentSpace::new(tangent_basis(&profile, &config, grid)?)
    }

    #[test]
    fn projection_is_idempotent_and_annihilates_tangents() {
        let ts = space(6.0).unwrap();
        let grid = *ts.basis()[0].grid();
        let v = ScalarField::random_interior(grid, 5);
        let pv = ts.project(&v);
        let ppv = ts.project(&pv);
        let diff = ppv.lin_comb(1.0, &pv, -1.0).norm_l2();
        assert!(diff < 1e-12 * pv.norm_l2(), "{diff}");
        assert!(ts.max_cosine(&pv) < 1e-10, "{}", ts.max_cosine(&pv));
        let t = ts.project(&ts.basis()[0]);
        assert!(t.norm_l2() < 1e-10 * ts.basis()[0].norm_l2());
    }

    #[test]
    fn projection_is_self_adjoint_in_h1() {
        let ts = space(6.0).unwrap();
        let grid = *ts.basis()[0].grid();
        let a = ScalarField::random_interior(grid, 1);
        let b = ScalarField::random_interior(grid, 2);
        let lhs = ts.project(&a).dot(&b.neg_laplacian(1.0));
        let rhs = a.dot(&ts.project(&b).neg_laplacian(1.0));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn coincident_bumps_give_singular_gram() {
        assert!(matches!(space(0.0), Err(Error::GramSingular { .. })));
    }
}
