//! The ansatz `z_P = Σ_i U(x − P_i)` and its tangent vectors on a grid.
//!
//! The ansatz is known analytically, so its Laplacian is taken from the
//! ground-state equation, `−Δz_i = z_i^p − z_i`, instead of the stencil.

use rayon::prelude::*;

use super::{BumpConfiguration, Grid3D, ScalarField};
use crate::radial::{signed_pow, RadialProfile};
use crate::{Error, Result};

/// `z_P` together with its exact Laplacian.
#[derive(Debug, Clone)]
pub struct Ansatz {
    centers: Vec<[f64; 3]>,
    z: ScalarField,
    /// `−Δz_P = Σ_i (z_i^p − z_i)`
    neg_laplacian: ScalarField,
}

fn check_clearance(config: &BumpConfiguration, grid: &Grid3D) -> Result<()> {
    for c in &config.centers {
        let cl = grid.clearance(*c);
        if cl < grid.margin - 1e-9 {
            return Err(Error::GridTooSmall(format!(
                "centre {c:?} is {cl:.3} from the boundary, margin {}",
                grid.margin
            )));
        }
    }
    Ok(())
}

#[inline]
fn offset(x: [f64; 3], c: [f64; 3]) -> ([f64; 3], f64) {
    let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
    (d, (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
}

impl Ansatz {
    pub fn new(profile: &RadialProfile, config: &BumpConfiguration, grid: Grid3D) -> Result<Self> {
        check_clearance(config, &grid)?;
        let p = profile.p();
        let centers = config.centers.clone();
        let pairs: Vec<(f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let x = grid.position(idx);
                let mut z = 0.0;
                let mut lap = 0.0;
                for c in &centers {
                    let (_, r) = offset(x, *c);
                    let u = profile.u_at(r);
                    z += u;
                    lap += signed_pow(u, p) - u;
                }
                (z, lap)
            })
            .collect();
        let (z, lap): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Ok(Self {
            centers,
            z: ScalarField::from_values(grid, z)?,
            neg_laplacian: ScalarField::from_values(grid, lap)?,
        })
    }

    pub fn field(&self) -> &ScalarField {
        &self.z
    }

    pub fn neg_laplacian(&self) -> &ScalarField {
        &self.neg_laplacian
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn grid(&self) -> &Grid3D {
        self.z.grid()
    }
}

/// `z_P` sampled at the nodes.
pub fn assemble_ansatz(
    profile: &RadialProfile,
    config: &BumpConfiguration,
    grid: Grid3D,
) -> Result<ScalarField> {
    check_clearance(config, &grid)?;
    let centers = &config.centers;
    Ok(ScalarField::from_fn(grid, |x| {
        centers.iter().map(|c| profile.u_at(offset(x, *c).1)).sum()
    }))
}

/// `ż_{i,j}(x) = ∂_j U(x − P_i)` for `i < K`, `j < 3`, ordered `3i + j`,
/// set to zero on the boundary nodes.
pub fn tangent_basis(
    profile: &RadialProfile,
    config: &BumpConfiguration,
    grid: Grid3D,
) -> Result<Vec<ScalarField>> {
    check_clearance(config, &grid)?;
    let mut out = Vec::with_capacity(3 * config.k());
    for c in &config.centers {
        let mut fields = [
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
            ScalarField::zeros(grid),
        ];
        let vals: Vec<[f64; 3]> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = grid.coords(idx);
                if grid.is_boundary(i, j, k) {
                    return [0.0; 3];
                }
                let (d, r) = offset(grid.position(idx), *c);
                if r == 0.0 {
                    return [0.0; 3];
                }
                let du = profile.eval(r).1 / r;
                [du * d[0], du * d[1], du * d[2]]
            })
            .collect();
        for (a, f) in fields.iter_mut().enumerate() {
            f.values_mut()
                .par_iter_mut()
                .zip(&vals)
                .for_each(|(v, t)| *v = t[a]);
        }
        out.extend(fields);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::solve_ground_state;
    use std::sync::OnceLock;

    fn cubic() -> &'static RadialProfile {
        static P: OnceLock<RadialProfile> = OnceLock::new();
        P.get_or_init(|| solve_ground_state(3.0, 25.0, 1e-10).unwrap())
    }

    fn config(centers: Vec<[f64; 3]>) -> BumpConfiguration {
        BumpConfiguration::new(0.01, centers, 0.05).unwrap()
    }

    #[test]
    fn single_bump_is_radially_symmetric() {
        let grid = Grid3D::new([0.0; 3], 8.0, 33).unwrap().with_margin(8.0);
        let z = assemble_ansatz(cubic(), &config(vec![[0.0; 3]]), grid).unwrap();
        let v = z.values();
        let (a, b, c) = (
            grid.index(20, 16, 16),
            grid.index(16, 20, 16),
            grid.index(16, 16, 12),
        );
        assert!((v[a] - v[b]).abs() < 1e-14 && (v[a] - v[c]).abs() < 1e-14);
        assert!((v[grid.index(16, 16, 16)] - cubic().u0()).abs() < 1e-12);
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let grid = Grid3D::new([0.0; 3], 8.0, 33).unwrap();
        let e = assemble_ansatz(cubic(), &config(vec![[0.0; 3]]), grid);
        assert!(matches!(e, Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn equilateral_triple_is_invariant_under_rotation() {
        // a rotation by 120° about z maps the lattice onto itself only
        // approximately, so compare the ansatz function at rotated nodes
        let r = 6.0;
        let centers: Vec<[f64; 3]> = (0..3)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                [r * t.cos(), r * t.sin(), 0.0]
            })
            .collect();
        let cfg = config(centers);
        let grid = Grid3D::for_centers(&cfg.centers, 0.5, 6.0, 256).unwrap();
        let z = assemble_ansatz(cubic(), &cfg, grid).unwrap();
        let eval = |x: [f64; 3]| -> f64 {
            cfg.centers
                .iter()
                .map(|c| cubic().u_at(offset(x, *c).1))
                .sum()
        };
        let (c, s) = (
            (2.0 * std::f64::consts::PI / 3.0).cos(),
            (2.0 * std::f64::consts::PI / 3.0).sin(),
        );
        for idx in (0..grid.len()).step_by(101) {
            let x = grid.position(idx);
            let xr = [c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]];
            assert!((z.values()[idx] - eval(xr)).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_vectors_match_translation_differences() {
        let cfg = config(vec![[0.3, -0.2, 0.1]]);
        let grid = Grid3D::new([0.0; 3], 8.0, 33).unwrap().with_margin(7.0);
        let basis = tangent_basis(cubic(), &cfg, grid).unwrap();
        let dir = [0.6, -0.8, 0.0];
        let combo = basis[0].lin_comb(dir[0], &basis[1], dir[1]);
        let mut errs = Vec::new();
        for t in [0.02, 0.01] {
            let shift = |s: f64| {
                let c = cfg.centers[0];
                config(vec![[c[0] - s * dir[0], c[1] - s * dir[1], c[2]]])
            };
            // z(x + t e) is the ansatz with centre P − t e
            let zp = assemble_ansatz(cubic(), &shift(t), grid).unwrap();
            let zm = assemble_ansatz(cubic(), &shift(-t), grid).unwrap();
            let mut fd = zp.lin_comb(0.5 / t, &zm, -0.5 / t);
            fd.zero_boundary();
            errs.push(fd.lin_comb(1.0, &combo, -1.0).norm_l2());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.5..4.5).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn exact_laplacian_matches_stencil_to_second_order() {
        let cfg = config(vec![[0.0; 3]]);
        let err = |n: usize| {
            let grid = Grid3D::new([0.0; 3], 8.0, n).unwrap().with_margin(8.0);
            let a = Ansatz::new(cubic(), &cfg, grid).unwrap();
            let mut d = a
                .field()
                .neg_laplacian(0.0)
                .lin_comb(1.0, a.neg_laplacian(), -1.0);
            d.zero_boundary();
            d.norm_l2()
        };
        let ratio = err(65) / err(129);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }
}
