//! The auxiliary equation `P I'_ε(z_P + w) = 0` for `w ∈ W`, solved by
//! the chord iteration `w ← w − [P I''_ε(z_P)]⁻¹ P I'_ε(z_P + w)`, and the
//! signature of `I''_ε(z_P)` on the splitting `W = A ⊕ B`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::minres::minres;
use super::tangent::TangentSpace;
use super::{EnergyBreakdown, Functional, RieszMap};
use crate::field3d::{assemble_ansatz, tangent_basis, Ansatz, BumpConfiguration, Grid3D, ModelPotential, ScalarField};
use crate::radial::RadialProfile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct AuxiliaryOptions {
    /// Stop once `‖P I'_ε(z + w)‖ ≤ tol`.
    pub tol: f64,
    /// Also stop once the residual has dropped by this factor (0 disables).
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of each inner MINRES solve.
    pub linear_tol: f64,
    pub max_linear_iter: usize,
}

impl Default for AuxiliaryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            rel_tol: 0.0,
            max_iter: 20,
            linear_tol: 1e-6,
            max_linear_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuxiliarySolution {
    pub w: ScalarField,
    /// `‖w‖_{H¹}`
    pub norm_h1: f64,
    pub iterations: usize,
    /// `‖P I'_ε(z + w)‖` before each iteration and after the last.
    pub residual_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    /// `‖I'_ε(z)‖` in the dual norm.
    pub dual_norm_z: f64,
    /// `‖I'_ε(z + w)‖`, the part left to the bifurcation equation.
    pub bifurcation_mismatch: f64,
    /// Largest H¹ cosine between `w` and a tangent vector.
    pub orthogonality: f64,
    /// Largest `1/|θ|` over the Ritz values of the projected Hessian.
    pub inverse_norm_estimate: f64,
    pub energy_z: EnergyBreakdown,
    pub energy_zw: EnergyBreakdown,
}

/// Key-value record of one auxiliary solve.
#[derive(Debug, Clone, Serialize)]
pub struct AuxiliaryReport {
    pub eps: f64,
    pub centers: Vec<[f64; 3]>,
    pub grid: Grid3D,
    pub dual_norm_z: f64,
    pub w_norm: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub inverse_norm_estimate: f64,
    pub bifurcation_mismatch: f64,
    pub orthogonality: f64,
    pub energy_before: EnergyBreakdown,
    pub energy_after: EnergyBreakdown,
}

impl AuxiliarySolution {
    pub fn report(&self, config: &BumpConfiguration) -> AuxiliaryReport {
        AuxiliaryReport {
            eps: config.eps,
            centers: config.centers.clone(),
            grid: *self.w.grid(),
            dual_norm_z: self.dual_norm_z,
            w_norm: self.norm_h1,
            iterations: self.iterations,
            residual_history: self.residual_history.clone(),
            linear_iterations: self.linear_iterations.clone(),
            inverse_norm_estimate: self.inverse_norm_estimate,
            bifurcation_mismatch: self.bifurcation_mismatch,
            orthogonality: self.orthogonality,
            energy_before: self.energy_z,
            energy_after: self.energy_zw,
        }
    }
}

pub fn solve_auxiliary(
    config: &BumpConfiguration,
    potential: &ModelPotential,
    profile: &RadialProfile,
    grid: Grid3D,
    tol: f64,
    max_iter: usize,
) -> Result<AuxiliarySolution> {
    let opts = AuxiliaryOptions {
        tol,
        max_iter,
        ..AuxiliaryOptions::default()
    };
    solve_auxiliary_with(config, potential, profile, grid, &opts)
}

/// `(P G r, ‖P G r‖_{H¹}, ‖G r‖_{H¹})` for the residual field `r`.
fn projected(riesz: &RieszMap, ts: &TangentSpace, r: &ScalarField) -> Result<(ScalarField, f64, f64)> {
    let g = riesz.apply(r)?;
    let dual = r.dot(&g).max(0.0).sqrt();
    let pg = ts.project(&g);
    let norm = riesz.inner(&pg, &pg).max(0.0).sqrt();
    Ok((pg, norm, dual))
}

pub fn solve_auxiliary_with(
    config: &BumpConfiguration,
    potential: &ModelPotential,
    profile: &RadialProfile,
    grid: Grid3D,
    opts: &AuxiliaryOptions,
) -> Result<AuxiliarySolution> {
    if !(opts.tol >= 0.0) || !(opts.rel_tol >= 0.0) || !(opts.linear_tol > 0.0) {
        return Err(Error::InvalidParameter("auxiliary tolerances must be non-negative".into()));
    }
    let ansatz = Ansatz::new(profile, config, grid)?;
    let f = Functional::with_ansatz(&ansatz, potential, config.eps, profile.p())?;
    drop(ansatz);
    let riesz = RieszMap::new(grid);
    let ts = TangentSpace::new(tangent_basis(profile, config, grid)?)?;

    let mut w = ScalarField::zeros(grid);
    let energy_z = f.energy(&w)?;
    let r = f.gradient(&w)?;
    let (mut pg, mut res, dual_norm_z) = projected(&riesz, &ts, &r)?;
    let mut mismatch = dual_norm_z;
    let mut history = vec![res];
    let mut linear_iterations = Vec::new();
    let mut inverse_norm: f64 = 0.0;
    let stop = opts.tol.max(opts.rel_tol * res);
    let mut increases = 0;
    if res > stop {
        let hess = f.hessian(&w)?;
        let op = |x: &ScalarField| -> Result<ScalarField> {
            let hx = hess.apply(&ts.project(x))?;
            Ok(ts.project(&riesz.apply(&hx)?))
        };
        let inner = |a: &ScalarField, b: &ScalarField| riesz.inner(a, b);
        while res > stop {
            if linear_iterations.len() >= opts.max_iter {
                return Err(Error::ContractionFailure { eps: config.eps });
            }
            let out = minres(op, inner, &pg, opts.linear_tol, opts.max_linear_iter)?;
            if !out.converged {
                return Err(Error::LinearSolverStagnation {
                    relative_residual: out.relative_residual,
                });
            }
            linear_iterations.push(out.iterations);
            inverse_norm = inverse_norm.max(out.inverse_norm_estimate());
            w.axpy(-1.0, &ts.project(&out.x));
            let r = f.gradient(&w)?;
            let (pg_new, res_new, dual) = projected(&riesz, &ts, &r)?;
            history.push(res_new);
            mismatch = dual;
            increases = if res_new >= res { increases + 1 } else { 0 };
            if increases >= 2 || !res_new.is_finite() {
                return Err(Error::ContractionFailure { eps: config.eps });
            }
            pg = pg_new;
            res = res_new;
        }
    }
    let energy_zw = f.energy(&w)?;
    Ok(AuxiliarySolution {
        norm_h1: riesz.inner(&w, &w).max(0.0).sqrt(),
        orthogonality: ts.max_cosine(&w),
        iterations: linear_iterations.len(),
        residual_history: history,
        linear_iterations,
        dual_norm_z,
        bifurcation_mismatch: mismatch,
        inverse_norm_estimate: inverse_norm,
        energy_z,
        energy_zw,
        w,
    })
}

#[derive(Debug, Clone)]
pub struct FallbackOutcome {
    /// `ε` at which the iteration finally contracted.
    pub eps: f64,
    /// Every `ε` that failed to contract, largest first.
    pub failed: Vec<f64>,
    pub solution: AuxiliarySolution,
}

/// [`solve_auxiliary_with`], halving `ε` at fixed centres whenever the
/// iteration fails to contract. The returned `ε` is the empirical
/// threshold below which the contraction holds.
pub fn solve_with_fallback(
    config: &BumpConfiguration,
    potential: &ModelPotential,
    profile: &RadialProfile,
    grid: Grid3D,
    opts: &AuxiliaryOptions,
    max_halvings: usize,
) -> Result<FallbackOutcome> {
    let mut cfg = config.clone();
    let mut failed = Vec::new();
    loop {
        match solve_auxiliary_with(&cfg, potential, profile, grid, opts) {
            Ok(solution) => {
                return Ok(FallbackOutcome {
                    eps: cfg.eps,
                    failed,
                    solution,
                })
            }
            Err(Error::ContractionFailure { eps }) if failed.len() < max_halvings => {
                failed.push(eps);
                cfg.eps *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SignatureOptions {
    /// Lanczos steps spent probing `B`.
    pub probe_steps: usize,
    pub seed: u64,
}

impl Default for SignatureOptions {
    fn default() -> Self {
        Self {
            probe_steps: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SignatureReport {
    /// Eigenvalues of `I''_ε(z)` on an H¹-orthonormal basis of
    /// `A = span{P z_i}`, ascending.
    pub a_quotients: Vec<f64>,
    /// Smallest Ritz value of `I''_ε(z)` on `B = W ⊖ A`.
    pub b_min_quotient: f64,
    /// `⟨ż, I''_ε(z)ż⟩ / ‖ż‖²` for each tangent vector.
    pub tangent_quotients: Vec<f64>,
    /// The single-bump value `1 − p`.
    pub expected_a: f64,
}

impl SignatureReport {
    pub fn a_max(&self) -> f64 {
        self.a_quotients.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn hessian_signature_check(
    config: &BumpConfiguration,
    potential: &ModelPotential,
    profile: &RadialProfile,
    grid: Grid3D,
    opts: &SignatureOptions,
) -> Result<SignatureReport> {
    let ansatz = Ansatz::new(profile, config, grid)?;
    let f = Functional::with_ansatz(&ansatz, potential, config.eps, profile.p())?;
    drop(ansatz);
    let riesz = RieszMap::new(grid);
    let ts = TangentSpace::new(tangent_basis(profile, config, grid)?)?;
    let hess = f.hessian(&ScalarField::zeros(grid))?;

    let tangent_quotients = ts
        .basis()
        .iter()
        .map(|t| Ok(hess.apply(t)?.dot(t) / riesz.inner(t, t)))
        .collect::<Result<Vec<f64>>>()?;

    // A: H¹-orthonormalised projections of the single bumps
    let mut a: Vec<ScalarField> = Vec::new();
    for c in &config.centers {
        let single = BumpConfiguration::new(config.eps, vec![*c], config.delta)?;
        let mut zi = assemble_ansatz(profile, &single, grid)?;
        zi.zero_boundary();
        let mut v = ts.project(&zi);
        for q in &a {
            let c = riesz.inner(q, &v);
            v.axpy(-c, q);
        }
        let norm = riesz.inner(&v, &v).sqrt();
        if !(norm > 1e-8) {
            return Err(Error::GramSingular { condition: f64::INFINITY });
        }
        a.push(v.scaled(1.0 / norm));
    }
    let ha = a.iter().map(|q| hess.apply(q)).collect::<Result<Vec<_>>>()?;
    let m = a.len();
    let ra = DMatrix::from_fn(m, m, |i, j| 0.5 * (a[i].dot(&ha[j]) + a[j].dot(&ha[i])));
    let mut a_quotients: Vec<f64> = ra.symmetric_eigen().eigenvalues.iter().copied().collect();
    a_quotients.sort_by(f64::total_cmp);

    // B: Lanczos with full reorthogonalisation in the H¹ inner product
    let to_b = |x: &ScalarField| {
        let mut v = ts.project(x);
        for q in &a {
            let c = riesz.inner(q, &v);
            v.axpy(-c, q);
        }
        v
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = riesz.apply(&ScalarField::random_interior(grid, rand::Rng::gen(&mut rng)))?;
    let mut v = to_b(&start);
    v.scale(1.0 / riesz.inner(&v, &v).sqrt());
    let mut basis: Vec<ScalarField> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for _ in 0..opts.probe_steps.max(1) {
        let hv = hess.apply(&v)?;
        let alpha = hv.dot(&v);
        let mut next = to_b(&riesz.apply(&hv)?);
        basis.push(v);
        for q in &basis {
            let c = riesz.inner(q, &next);
            next.axpy(-c, q);
        }
        alphas.push(alpha);
        let beta = riesz.inner(&next, &next).max(0.0).sqrt();
        if beta < 1e-10 {
            break;
        }
        betas.push(beta);
        v = next.scaled(1.0 / beta);
    }
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
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
    let b_min_quotient = t.symmetric_eigen().eigenvalues.min();
    Ok(SignatureReport {
        a_quotients,
        b_min_quotient,
        tangent_quotients,
        expected_a: 1.0 - profile.p(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{check_nondegeneracy, solve_ground_state};

    fn two_bumps(eps: f64, d: f64) -> (BumpConfiguration, Grid3D) {
        let config = BumpConfiguration::new(eps, vec![[-d / 2.0, 0.0, 0.0], [d / 2.0, 0.0, 0.0]], 0.05).unwrap();
        let grid = Grid3D::for_centers(&config.centers, 0.5, 9.0, 256).unwrap();
        (config, grid)
    }

    #[test]
    fn auxiliary_iteration_converges_and_stays_in_w() {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let pot = ModelPotential::power(6.0).unwrap();
        let (config, grid) = two_bumps(0.1, 8.0);
        let sol = solve_auxiliary(&config, &pot, &profile, grid, 1e-9, 10).unwrap();
        let h = &sol.residual_history;
        assert!(*h.last().unwrap() <= 1e-9, "{h:?}");
        assert!(h.windows(2).skip(1).all(|p| p[1] < p[0]), "{h:?}");
        assert!(sol.orthogonality < 1e-8, "{}", sol.orthogonality);
        assert!(sol.bifurcation_mismatch <= sol.dual_norm_z);
        assert!(sol.norm_h1 > 0.0 && sol.norm_h1 < 10.0 * sol.dual_norm_z);
        let json = serde_json::to_string(&sol.report(&config)).unwrap();
        assert!(json.contains("residual_history"));
    }

    #[test]
    fn tiny_residual_returns_zero_correction() {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let pot = ModelPotential::power(6.0).unwrap();
        let (config, grid) = two_bumps(0.1, 8.0);
        let sol = solve_auxiliary(&config, &pot, &profile, grid, 1.0, 10).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.norm_h1, 0.0);
    }

    #[test]
    fn signature_has_one_negative_direction_per_bump() {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let pot = ModelPotential::power(6.0).unwrap();
        let config = BumpConfiguration::new(0.02, vec![[0.0; 3]], 0.05).unwrap();
        let grid = Grid3D::for_centers(&config.centers, 0.25, 10.0, 256).unwrap();
        let rep = hessian_signature_check(&config, &pot, &profile, grid, &SignatureOptions::default()).unwrap();
        assert!((rep.a_max() - rep.expected_a).abs() < 0.1 * rep.expected_a.abs(), "{rep:?}");
        let coercivity = check_nondegeneracy(&profile).unwrap().coercivity;
        assert!(rep.b_min_quotient >= 0.1 * coercivity, "{rep:?}");
        // the stencil leaves an O(h²) floor near 0.06 at h = 0.25
        assert!(rep.tangent_quotients.iter().all(|q| q.abs() < 0.1), "{rep:?}");
    }
}
