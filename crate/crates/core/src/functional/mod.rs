//! The energy
//!
//! ```text
//!   I_ε(u) = ½∫|∇u|² + ½∫V(εx)u² + ε²/4 ∫φ_u u² − 1/(p+1) ∫|u|^{p+1}
//! ```
//!
//! on a grid, its first and second derivatives, the projection onto the
//! H¹-orthogonal complement `W` of the tangent space, and the solver for the
//! auxiliary equation.
//!
//! Fields are written `u = z + w` with an optional analytic base `z` whose
//! Laplacian is known exactly (the multi-bump ansatz) and a grid correction
//! `w` that vanishes on the boundary. The kinetic energy is
//! `½⟨z, −Δz⟩ + ⟨w, −Δz⟩ + ½⟨w, −Δ_h w⟩`, so every derivative below is the
//! exact derivative of the discrete energy with respect to `w`.

mod auxiliary;
mod minres;
mod tangent;

pub use auxiliary::{
    hessian_signature_check, solve_auxiliary, solve_auxiliary_with, solve_with_fallback,
    AuxiliaryOptions, AuxiliaryReport, AuxiliarySolution, FallbackOutcome, SignatureOptions,
    SignatureReport,
};
pub use minres::{minres, MinresOutcome};
pub use tangent::{project_w, TangentSpace};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field3d::{Ansatz, Grid3D, ModelPotential, Multigrid, PoissonSolver, ScalarField};
use crate::radial::signed_pow;
use crate::{Error, Result};

/// Relative tolerance of the nested Poisson solves.
pub const POISSON_TOL: f64 = 1e-8;
/// Relative tolerance of the Riesz map solves.
pub const RIESZ_TOL: f64 = 1e-10;
const MAX_MG_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½∫|∇u|²`
    pub kinetic: f64,
    /// `½∫V(εx)u²`
    pub potential: f64,
    /// `ε²/4 ∫φ_u u²`
    pub poisson: f64,
    /// `1/(p+1) ∫|u|^{p+1}`
    pub power: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(kinetic: f64, potential: f64, poisson: f64, power: f64) -> Self {
        Self {
            kinetic,
            potential,
            poisson,
            power,
            total: kinetic + potential + poisson - power,
        }
    }
}

/// The discrete `(−Δ_h + 1)⁻¹` and the H¹ pairing `⟨a, (−Δ_h + 1)b⟩`.
#[derive(Debug, Clone)]
pub struct RieszMap {
    mg: Multigrid,
    grid: Grid3D,
    tol: f64,
}

impl RieszMap {
    pub fn new(grid: Grid3D) -> Self {
        Self {
            mg: Multigrid::new(grid.n, grid.h, 1.0),
            grid,
            tol: RIESZ_TOL,
        }
    }

    /// `G r`, the H¹ representative of the functional `v ↦ ⟨r, v⟩`.
    pub fn apply(&self, r: &ScalarField) -> Result<ScalarField> {
        if *r.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut b = r.clone();
        b.zero_boundary();
        let (x, _) = self.mg.solve(b.values(), None, self.tol, MAX_MG_ITER)?;
        ScalarField::from_values(self.grid, x)
    }

    /// `√⟨r, G r⟩`, the H⁻¹ norm of the functional represented by `r`.
    pub fn dual_norm(&self, r: &ScalarField) -> Result<f64> {
        let g = self.apply(r)?;
        Ok(r.dot(&g).max(0.0).sqrt())
    }

    /// `⟨a, b⟩_{H¹}` for fields that vanish on the boundary.
    pub fn inner(&self, a: &ScalarField, b: &ScalarField) -> f64 {
        a.dot(&b.neg_laplacian(1.0))
    }
}

/// `I_ε` on a fixed grid, optionally around an analytic base field.
#[derive(Debug, Clone)]
pub struct Functional {
    grid: Grid3D,
    eps: f64,
    p: f64,
    /// `V(εx)` at the nodes
    vext: ScalarField,
    poisson: PoissonSolver,
    /// `(z, −Δz)`
    base: Option<(ScalarField, ScalarField)>,
}

impl Functional {
    pub fn new(grid: Grid3D, potential: &ModelPotential, eps: f64, p: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be >= 0")));
        }
        if !(p > 1.0 && p < 5.0) {
            return Err(Error::InvalidParameter(format!("p = {p} must lie in (1, 5)")));
        }
        let vext = ScalarField::from_fn(grid, |x| potential.value([eps * x[0], eps * x[1], eps * x[2]]));
        Ok(Self {
            grid,
            eps,
            p,
            vext,
            poisson: PoissonSolver::new(grid, POISSON_TOL),
            base: None,
        })
    }

    /// `I_ε(z + w)` with `z` the ansatz and its exact Laplacian.
    pub fn with_ansatz(ansatz: &Ansatz, potential: &ModelPotential, eps: f64, p: f64) -> Result<Self> {
        let mut f = Self::new(*ansatz.grid(), potential, eps, p)?;
        f.base = Some((ansatz.field().clone(), ansatz.neg_laplacian().clone()));
        Ok(f)
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn poisson_solver(&self) -> &PoissonSolver {
        &self.poisson
    }

    fn check(&self, w: &ScalarField) -> Result<()> {
        if *w.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `u = z + w`
    pub fn state(&self, w: &ScalarField) -> ScalarField {
        match &self.base {
            Some((z, _)) => z.lin_comb(1.0, w, 1.0),
            None => w.clone(),
        }
    }

    /// `φ_u`, or zero when `ε = 0`.
    fn newtonian(&self, u: &ScalarField) -> Result<ScalarField> {
        if self.eps == 0.0 {
            return Ok(ScalarField::zeros(self.grid));
        }
        self.poisson.solve_symmetric(&u.map(|v| v * v))
    }

    pub fn energy(&self, w: &ScalarField) -> Result<EnergyBreakdown> {
        self.check(w)?;
        let u = self.state(w);
        let kinetic = match &self.base {
            Some((z, lz)) => 0.5 * z.dot(lz) + w.dot(lz) + 0.5 * w.dot(&w.neg_laplacian(0.0)),
            None => 0.5 * w.dot(&w.neg_laplacian(0.0)),
        };
        let vol = self.grid.volume();
        let p = self.p;
        let (potential, power) = u
            .values()
            .par_iter()
            .zip(self.vext.values())
            .map(|(u, v)| (0.5 * v * u * u, u.abs().powf(p + 1.0) / (p + 1.0)))
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let phi = self.newtonian(&u)?;
        let poisson = 0.25 * self.eps * self.eps * phi.zip_map(&u, |f, u| f * u * u).integral();
        Ok(EnergyBreakdown::new(kinetic, vol * potential, poisson, vol * power))
    }

    /// The residual `−Δu + V(εx)u + ε²φ_u u − |u|^{p−1}u` at interior nodes,
    /// zero on the boundary. Its L² pairing with `v` is `I'_ε(u)[v]`.
    pub fn gradient(&self, w: &ScalarField) -> Result<ScalarField> {
        self.check(w)?;
        let u = self.state(w);
        let phi = self.newtonian(&u)?;
        let mut r = w.neg_laplacian(0.0);
        if let Some((_, lz)) = &self.base {
            r.axpy(1.0, lz);
        }
        let e2 = self.eps * self.eps;
        let p = self.p;
        r.values_mut()
            .par_iter_mut()
            .zip(u.values())
            .zip(self.vext.values())
            .zip(phi.values())
            .for_each(|(((r, u), v), f)| *r += v * u + e2 * f * u - signed_pow(*u, p));
        r.zero_boundary();
        Ok(r)
    }

    /// `I''_ε(z + w)` with the Newtonian potential of `u²` cached.
    pub fn hessian(&self, w: &ScalarField) -> Result<Hessian<'_>> {
        self.check(w)?;
        let u = self.state(w);
        let phi = self.newtonian(&u)?;
        let e2 = self.eps * self.eps;
        let p = self.p;
        let local = ScalarField::from_values(
            self.grid,
            u.values()
                .par_iter()
                .zip(self.vext.values())
                .zip(phi.values())
                .map(|((u, v), f)| v + e2 * f - p * u.abs().powf(p - 1.0))
                .collect(),
        )?;
        Ok(Hessian { f: self, u, local })
    }
}

/// The second derivative at a fixed state.
#[derive(Debug, Clone)]
pub struct Hessian<'a> {
    f: &'a Functional,
    u: ScalarField,
    /// `V(εx) + ε²φ_u − p|u|^{p−1}`
    local: ScalarField,
}

impl Hessian<'_> {
    pub fn state(&self) -> &ScalarField {
        &self.u
    }

    /// `−Δ_h v + (V + ε²φ_u − p|u|^{p−1})v + 2ε²φ̂ u` with `−Δφ̂ = u v`,
    /// zero on the boundary. `v` must vanish on the boundary.
    pub fn apply(&self, v: &ScalarField) -> Result<ScalarField> {
        self.f.check(v)?;
        let mut out = v.neg_laplacian(0.0);
        out.values_mut()
            .par_iter_mut()
            .zip(self.local.values())
            .zip(v.values())
            .for_each(|((o, l), v)| *o += l * v);
        if self.f.eps > 0.0 {
            let phat = self.f.poisson.solve_symmetric(&self.u.zip_map(v, |u, v| u * v))?;
            let c = 2.0 * self.f.eps * self.f.eps;
            out.values_mut()
                .par_iter_mut()
                .zip(phat.values())
                .zip(self.u.values())
                .for_each(|((o, f), u)| *o += c * f * u);
        }
        out.zero_boundary();
        Ok(out)
    }
}

/// `I_ε(u)` with the stencil Laplacian throughout.
pub fn energy(u: &ScalarField, potential: &ModelPotential, eps: f64, p: f64) -> Result<EnergyBreakdown> {
    Functional::new(*u.grid(), potential, eps, p)?.energy(u)
}

/// The residual field of `u` and its dual norm `√⟨r, (−Δ_h + 1)⁻¹r⟩`.
pub fn gradient(u: &ScalarField, potential: &ModelPotential, eps: f64, p: f64) -> Result<(ScalarField, f64)> {
    let r = Functional::new(*u.grid(), potential, eps, p)?.gradient(u)?;
    let norm = RieszMap::new(*u.grid()).dual_norm(&r)?;
    Ok((r, norm))
}

/// `I''_ε(u)v`
pub fn hessian_apply(
    u: &ScalarField,
    v: &ScalarField,
    potential: &ModelPotential,
    eps: f64,
    p: f64,
) -> Result<ScalarField> {
    let f = Functional::new(*u.grid(), potential, eps, p)?;
    f.hessian(u)?.apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field3d::{assemble_ansatz, BumpConfiguration};
    use crate::radial::{quadratic_form_q, solve_ground_state, RadialMode};

    fn setup(h: f64, margin: f64, centers: Vec<[f64; 3]>, eps: f64) -> (Functional, Grid3D) {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let config = BumpConfiguration::new(eps, centers, 0.05).unwrap();
        let grid = Grid3D::for_centers(&config.centers, h, margin, 256).unwrap();
        let ansatz = Ansatz::new(&profile, &config, grid).unwrap();
        let pot = ModelPotential::power(6.0).unwrap();
        (Functional::with_ansatz(&ansatz, &pot, eps, 3.0).unwrap(), grid)
    }

    fn smooth_direction(grid: Grid3D, seed: u64) -> ScalarField {
        // a random field smoothed by one Riesz solve, so stencil terms stay O(1)
        let r = ScalarField::random_interior(grid, seed);
        RieszMap::new(grid).apply(&r).unwrap().scaled(10.0)
    }

    #[test]
    fn zero_field_has_zero_energy_and_scaling_is_homogeneous() {
        let grid = Grid3D::new([0.0; 3], 8.0, 33).unwrap();
        let pot = ModelPotential::power(6.0).unwrap();
        let e = energy(&ScalarField::zeros(grid), &pot, 0.3, 3.0).unwrap();
        assert_eq!(e.total, 0.0);
        let u = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        let e1 = energy(&u, &pot, 0.3, 3.0).unwrap();
        let e2 = energy(&u.scaled(2.0), &pot, 0.3, 3.0).unwrap();
        assert!((e2.kinetic - 4.0 * e1.kinetic).abs() < 1e-12 * e1.kinetic);
        assert!((e2.potential - 4.0 * e1.potential).abs() < 1e-12 * e1.potential);
        assert!((e2.poisson - 16.0 * e1.poisson).abs() < 1e-9 * e1.poisson);
        assert!(e1.poisson > 0.0);
        let sum = e1.kinetic + e1.potential + e1.poisson - e1.power;
        assert_eq!(sum, e1.total);
    }

    #[test]
    fn gradient_matches_energy_differences() {
        let (f, grid) = setup(0.5, 7.0, vec![[-3.0, 0.0, 0.0], [3.0, 0.5, 0.0]], 0.3);
        let w0 = smooth_direction(grid, 7).scaled(0.05);
        let r = f.gradient(&w0).unwrap();
        for seed in 0..3 {
            let v = smooth_direction(grid, 100 + seed);
            let exact = r.dot(&v);
            let fd = |t: f64| {
                let ep = f.energy(&w0.lin_comb(1.0, &v, t)).unwrap().total;
                let em = f.energy(&w0.lin_comb(1.0, &v, -t)).unwrap().total;
                (ep - em) / (2.0 * t)
            };
            let (e1, e2) = ((fd(1e-2) - exact).abs(), (fd(5e-3) - exact).abs());
            assert!(e1 < 1e-4 * exact.abs().max(1.0), "{} vs {exact}", fd(1e-2));
            // second order: halving t divides the error by about four
            assert!(e2 < 0.35 * e1 || e2 < 1e-8 * exact.abs().max(1.0), "{e1} {e2}");
        }
    }

    #[test]
    fn hessian_is_symmetric_and_matches_gradient_differences() {
        let (f, grid) = setup(0.5, 7.0, vec![[-3.0, 0.0, 0.0], [3.0, 0.5, 0.0]], 0.3);
        let w0 = smooth_direction(grid, 3).scaled(0.05);
        let hess = f.hessian(&w0).unwrap();
        let v = smooth_direction(grid, 11);
        let x = smooth_direction(grid, 12);
        let hv = hess.apply(&v).unwrap();
        let hx = hess.apply(&x).unwrap();
        let (a, b) = (hv.dot(&x), hx.dot(&v));
        assert!((a - b).abs() < 1e-7 * a.abs().max(1.0), "{a} vs {b}");
        let fd = |t: f64| {
            let gp = f.gradient(&w0.lin_comb(1.0, &v, t)).unwrap();
            let gm = f.gradient(&w0.lin_comb(1.0, &v, -t)).unwrap();
            gp.lin_comb(0.5 / t, &gm, -0.5 / t)
        };
        let err = |t: f64| fd(t).lin_comb(1.0, &hv, -1.0).norm_l2() / hv.norm_l2();
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 < 1e-3, "{e1}");
        assert!(e2 < 0.35 * e1 || e2 < 1e-8, "{e1} {e2}");
    }

    #[test]
    fn hessian_at_zero_eps_reproduces_radial_quadratic_form() {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let config = BumpConfiguration::new(0.01, vec![[0.0; 3]], 0.05).unwrap();
        let grid = Grid3D::for_centers(&config.centers, 0.25, 10.0, 256).unwrap();
        let pot = ModelPotential::power(6.0).unwrap();
        let mut z = assemble_ansatz(&profile, &config, grid).unwrap();
        z.zero_boundary();
        let hz = hessian_apply(&z, &z, &pot, 0.0, 3.0).unwrap();
        let q_grid = hz.dot(&z);
        let q = quadratic_form_q(&profile, &RadialMode::ground_state(&profile)).unwrap();
        // the stencil Laplacian carries an O(h²) error of about 1% here
        assert!((q_grid - q).abs() < 2e-2 * q.abs(), "{q_grid} vs {q}");
        // the stencil H¹ norm carries its own O(h²) error, so divide by the exact one
        let ratio = q_grid / profile.h1_norm_sq();
        assert!((ratio + 2.0).abs() < 2.0 * 2e-2, "{ratio}");
    }

    #[test]
    fn exact_bump_residual_shrinks_with_h_squared() {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let config = BumpConfiguration::new(0.01, vec![[0.0; 3]], 0.05).unwrap();
        let pot = ModelPotential::power(6.0).unwrap();
        let mut norms = Vec::new();
        for h in [0.25, 0.125] {
            let grid = Grid3D::for_centers(&config.centers, h, 10.0, 256).unwrap();
            let u = assemble_ansatz(&profile, &config, grid).unwrap();
            let (_, dual) = gradient(&u, &pot, 0.0, 3.0).unwrap();
            norms.push(dual);
        }
        let ratio = norms[0] / norms[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{norms:?}");
        // the analytic Laplacian removes the stencil error altogether
        let grid = Grid3D::for_centers(&config.centers, 0.125, 10.0, 256).unwrap();
        let ansatz = Ansatz::new(&profile, &config, grid).unwrap();
        let f = Functional::with_ansatz(&ansatz, &pot, 0.0, 3.0).unwrap();
        let r = f.gradient(&ScalarField::zeros(grid)).unwrap();
        let exact = RieszMap::new(grid).dual_norm(&r).unwrap();
        assert!(exact < 1e-3 * norms[1], "{exact} vs {}", norms[1]);
    }

    #[test]
    fn single_bump_energy_matches_radial_constants() {
        use crate::integrals::compute_constants;
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let consts = compute_constants(&profile, 1).unwrap();
        let eps = 0.1;
        let (f, grid) = setup(0.25, 10.0, vec![[0.0; 3]], eps);
        let e = f.energy(&ScalarField::zeros(grid)).unwrap();
        // grid quadrature of the bump converges exponentially in 1/h and is
        // near 1e-4 relative at h = 0.25
        let local = e.kinetic - e.power;
        assert!((local - consts.c0_single).abs() < 1e-3 * consts.c0_single.abs(), "{local}");
        // V(εx) − 1 = |εx|⁶ adds a small positive amount
        assert!(e.potential >= consts.c2 && e.potential < consts.c2 * 1.01, "{}", e.potential);
        // the 7-point stencil leaves an O(h²) error in the Poisson term
        let poisson = e.poisson / (eps * eps);
        assert!((poisson - consts.c1_single).abs() < 0.03 * consts.c1_single, "{poisson}");
    }
}
