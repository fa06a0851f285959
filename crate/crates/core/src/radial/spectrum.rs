//! The quadratic form `Q[ν] = ∫ |∇ν|² + ν² − pU^{p−1}ν²` and the spectrum
//! of the linearised operator `−Δ + 1 − pU^{p−1}` split into angular
//! momentum sectors.
//!
//! In sector `ℓ` the substitution `ν = r⁻¹ g(r) Y_ℓ` turns the operator into
//! `−g'' + ℓ(ℓ+1)g/r² + (1 − pU^{p−1})g` with `g(0) = g(R) = 0`. It is
//! discretised by second-order differences, and the eigenvalues are
//! extrapolated from steps `h` and `h/2`.

use serde::Serialize;

use super::RadialProfile;
use crate::linalg::SymTridiagonal;
use crate::{Error, Result};

/// A separable function `f(r)·Y(x/r)` sampled on the nodes of a profile.
#[derive(Debug, Clone)]
pub struct RadialMode {
    pub l: usize,
    /// `∫_{S²} Y² dΩ`
    pub angular_norm: f64,
    pub f: Vec<f64>,
    pub df: Vec<f64>,
}

impl RadialMode {
    /// `ν = U`
    pub fn ground_state(profile: &RadialProfile) -> Self {
        Self {
            l: 0,
            angular_norm: 4.0 * std::f64::consts::PI,
            f: profile.u_values().to_vec(),
            df: profile.du_values().to_vec(),
        }
    }

    /// `ν = ∂U/∂x_j = U'(r) x_j/r`
    pub fn translation(profile: &RadialProfile) -> Self {
        Self {
            l: 1,
            angular_norm: 4.0 * std::f64::consts::PI / 3.0,
            f: profile.du_values().to_vec(),
            df: profile.d2u_values().to_vec(),
        }
    }

    pub fn zero(profile: &RadialProfile, l: usize) -> Self {
        let n = profile.r_grid().len();
        Self {
            l,
            angular_norm: 4.0 * std::f64::consts::PI / (2 * l + 1) as f64,
            f: vec![0.0; n],
            df: vec![0.0; n],
        }
    }

    fn check(&self, profile: &RadialProfile) -> Result<()> {
        let n = profile.r_grid().len();
        if self.f.len() != n || self.df.len() != n {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn integrate<F: Fn(f64, f64, f64, f64) -> f64>(&self, profile: &RadialProfile, g: F) -> f64 {
        let r = profile.r_grid();
        let u = profile.u_values();
        let w = profile.quadrature_weights();
        let ll = (self.l * (self.l + 1)) as f64;
        let mut s = 0.0;
        for i in 0..r.len() {
            let (f, df) = (self.f[i], self.df[i]);
            // r² · ℓ(ℓ+1) f²/r² simplifies to ℓ(ℓ+1) f², finite at the origin
            s += w[i] * (r[i] * r[i] * g(f, df, u[i], r[i]) + ll * f * f);
        }
        self.angular_norm * s
    }

    /// `‖ν‖²_{H¹}`
    pub fn h1_norm_sq(&self, profile: &RadialProfile) -> Result<f64> {
        self.check(profile)?;
        Ok(self.integrate(profile, |f, df, _, _| df * df + f * f))
    }
}

/// `Q[ν]` for a separable test function.
pub fn quadratic_form_q(profile: &RadialProfile, nu: &RadialMode) -> Result<f64> {
    nu.check(profile)?;
    let p = profile.p();
    Ok(nu.integrate(profile, |f, df, u, _| {
        df * df + f * f - p * u.abs().powf(p - 1.0) * f * f
    }))
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub step: f64,
    pub radius: f64,
    /// Eigenvalues below `-negative_threshold` count as negative.
    pub negative_threshold: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            step: 4e-3,
            radius: 20.0,
            negative_threshold: 1e-3,
        }
    }
}

/// The finite-difference matrix of sector `ℓ` in the variable `g = r f`.
pub fn sector_matrix(profile: &RadialProfile, l: usize, step: f64, radius: f64) -> SymTridiagonal {
    let n = (radius / step).round() as usize;
    let h = radius / n as f64;
    let p = profile.p();
    let ll = (l * (l + 1)) as f64;
    let inv_h2 = 1.0 / (h * h);
    let diag = (1..n)
        .map(|i| {
            let r = i as f64 * h;
            2.0 * inv_h2 + ll / (r * r) + 1.0 - p * profile.u_at(r).powf(p - 1.0)
        })
        .collect();
    SymTridiagonal::new(diag, vec![-inv_h2; n - 2])
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorSpectrum {
    pub l: usize,
    /// Lowest eigenvalues in increasing order.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub sectors: Vec<SectorSpectrum>,
    /// Number of negative eigenvalues counted with angular multiplicity.
    pub negative_count: usize,
    /// Lowest eigenvalue in the ℓ=1 sector.
    pub kernel_eigenvalue: f64,
    /// Relative L² distance between the ℓ=1 ground eigenfunction and `U'`.
    pub kernel_profile_error: f64,
    /// Smallest eigenvalue once the negative direction and the
    /// translations are removed.
    pub coercivity: f64,
}

pub fn check_nondegeneracy(profile: &RadialProfile) -> Result<SpectralReport> {
    check_nondegeneracy_with(profile, SpectrumOptions::default())
}

pub fn check_nondegeneracy_with(
    profile: &RadialProfile,
    opts: SpectrumOptions,
) -> Result<SpectralReport> {
    if !(opts.step > 0.0 && opts.radius > 10.0 && opts.radius <= profile.r_max() + 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "spectral grid step {} radius {} incompatible with profile",
            opts.step, opts.radius
        )));
    }
    let count = 3;
    let mut sectors = Vec::new();
    for l in 0..=2 {
        let coarse = sector_matrix(profile, l, opts.step, opts.radius).lowest_eigenvalues(count)?;
        let fine =
            sector_matrix(profile, l, 0.5 * opts.step, opts.radius).lowest_eigenvalues(count)?;
        let eigenvalues = coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| (4.0 * f - c) / 3.0)
            .collect();
        sectors.push(SectorSpectrum { l, eigenvalues });
    }
    let negative_count = sectors
        .iter()
        .map(|s| {
            (2 * s.l + 1)
                * s.eigenvalues
                    .iter()
                    .filter(|e| **e < -opts.negative_threshold)
                    .count()
        })
        .sum();

    let kernel_eigenvalue = sectors[1].eigenvalues[0];
    let kernel_profile_error = kernel_mismatch(profile, opts)?;
    let coercivity = sectors[0].eigenvalues[1]
        .min(sectors[1].eigenvalues[1])
        .min(sectors[2].eigenvalues[0]);
    if !coercivity.is_finite() {
        return Err(Error::SpectralSolverFailure("non-finite eigenvalue".into()));
    }
    Ok(SpectralReport {
        sectors,
        negative_count,
        kernel_eigenvalue,
        kernel_profile_error,
        coercivity,
    })
}

/// Compare the lowest ℓ=1 eigenvector `g` with `r U'(r)` after optimal
/// scaling.
fn kernel_mismatch(profile: &RadialProfile, opts: SpectrumOptions) -> Result<f64> {
    let m = sector_matrix(profile, 1, opts.step, opts.radius);
    let lambda = m.eigenvalue(0)?;
    let g = m.eigenvector(lambda)?;
    let h = opts.radius / (m.len() + 1) as f64;
    let target: Vec<f64> = (1..=m.len())
        .map(|i| {
            let r = i as f64 * h;
            r * profile.eval(r).1
        })
        .collect();
    let gt: f64 = g.iter().zip(&target).map(|(a, b)| a * b).sum();
    let tt: f64 = target.iter().map(|b| b * b).sum();
    let c = gt / tt;
    let err: f64 = g
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - c * b).powi(2))
        .sum();
    let err = (err / (c * c * tt)).sqrt();
    if !err.is_finite() {
        return Err(Error::SpectralSolverFailure(
            "degenerate ℓ=1 eigenvector".into(),
        ));
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::solve_ground_state;
    use nalgebra::DMatrix;

    fn profile(p: f64) -> RadialProfile {
        solve_ground_state(p, 25.0, 1e-10).unwrap()
    }

    #[test]
    fn q_on_ground_state_and_translation() {
        let prof = profile(3.0);
        let u = RadialMode::ground_state(&prof);
        let q = quadratic_form_q(&prof, &u).unwrap();
        let n = u.h1_norm_sq(&prof).unwrap();
        assert!((q / n + 2.0).abs() < 1e-4, "Q[U]/|U|² = {}", q / n);
        let t = RadialMode::translation(&prof);
        let qt = quadratic_form_q(&prof, &t).unwrap();
        assert!(qt.abs() <= 1e-3 * t.h1_norm_sq(&prof).unwrap());
        assert_eq!(
            quadratic_form_q(&prof, &RadialMode::zero(&prof, 2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn mismatched_mode_is_rejected() {
        let prof = profile(3.0);
        let mut m = RadialMode::ground_state(&prof);
        m.f.pop();
        assert!(matches!(
            quadratic_form_q(&prof, &m),
            Err(Error::GridMismatch)
        ));
    }

    /// Dense symmetric eigensolve of the same discretisation on coarse
    /// grids, extrapolated from steps 0.1 and 0.05.
    fn dense_spectrum(prof: &RadialProfile, l: usize) -> Vec<f64> {
        let solve = |step: f64| {
            let m = sector_matrix(prof, l, step, 15.0);
            let n = m.len();
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                a[(i, i)] = m.diag[i];
                if i + 1 < n {
                    a[(i, i + 1)] = m.off[i];
                    a[(i + 1, i)] = m.off[i];
                }
            }
            let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        };
        let (c, f) = (solve(0.1), solve(0.05));
        c.iter().zip(&f).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
    }

    #[test]
    fn signature_matches_dense_oracle() {
        for p in [2.0, 3.0] {
            let prof = profile(p);
            let rep = check_nondegeneracy(&prof).unwrap();
            assert_eq!(rep.negative_count, 1, "p={p}: {rep:?}");
            assert!(rep.kernel_eigenvalue.abs() < 1e-3, "p={p}: {rep:?}");
            assert!(rep.kernel_profile_error < 0.01, "p={p}: {rep:?}");
            assert!(rep.coercivity > 0.0);

            let dense: Vec<Vec<f64>> = (0..=2).map(|l| dense_spectrum(&prof, l)).collect();
            let dense_negative: usize = dense
                .iter()
                .enumerate()
                .map(|(l, ev)| (2 * l + 1) * ev.iter().filter(|e| **e < -1e-3).count())
                .sum();
            assert_eq!(dense_negative, rep.negative_count);
            assert!(
                dense[1][0].abs() < 1e-2,
                "p={p}: dense ℓ=1 {:?}",
                &dense[1][..2]
            );
            assert!((dense[0][0] - rep.sectors[0].eigenvalues[0]).abs() < 1e-2 * dense[0][0].abs());
            assert!(dense[2][0] > 0.0);
        }
    }
}
