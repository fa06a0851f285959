//! `Φ_ε(P) = I_ε(z_P + w(P))` evaluated on a grid.
//!
//! On a grid of spacing `h` the energy of a single bump differs from its
//! continuum value by a quadrature and stencil error that is much larger
//! than the configuration-dependent part of `Φ_ε`. That defect is measured
//! for each bump alone, at its own centre on the same grid, and subtracted.

use rayon::prelude::*;

use super::{phi_expansion, ReducedEnergyReport};
use crate::field3d::{Ansatz, BumpConfiguration, Grid3D, ModelPotential, PoissonSolver};
use crate::functional::{solve_auxiliary_with, AuxiliaryOptions, AuxiliarySolution, POISSON_TOL};
use crate::integrals::ConstantsTable;
use crate::radial::RadialProfile;
use crate::Result;

#[derive(Debug, Clone)]
pub struct DirectEvaluation {
    pub auxiliary: AuxiliarySolution,
    /// Summed single-bump grid defect that was subtracted.
    pub defect: f64,
    pub report: ReducedEnergyReport,
}

/// `Σ_i [I_h(U(· − P_i)) − (C̃₀ + C₂ + ε²C̃₁)]`, where `I_h` is the grid
/// energy with `V ≡ 1`.
pub fn bump_defect(
    config: &BumpConfiguration,
    profile: &RadialProfile,
    constants: &ConstantsTable,
    grid: Grid3D,
) -> Result<f64> {
    let eps = config.eps;
    let p = profile.p();
    let vol = grid.volume();
    let poisson = PoissonSolver::new(grid, POISSON_TOL);
    let continuum = constants.c0_single + constants.c2 + eps * eps * constants.c1_single;
    let mut total = 0.0;
    for c in &config.centers {
        let single = BumpConfiguration::new(eps, vec![*c], config.delta)?;
        let ansatz = Ansatz::new(profile, &single, grid)?;
        let z = ansatz.field();
        let kinetic = 0.5 * z.dot(ansatz.neg_laplacian());
        let (mass, power) = z
            .values()
            .par_iter()
            .map(|u| (0.5 * u * u, u.abs().powf(p + 1.0) / (p + 1.0)))
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let rho = z.map(|v| v * v);
        let phi = poisson.solve_symmetric(&rho)?;
        let self_energy = 0.25 * eps * eps * phi.dot(&rho);
        total += kinetic + vol * (mass - power) + self_energy - continuum;
    }
    Ok(total)
}

/// Solves the auxiliary equation at `config` and returns the corrected
/// grid energies next to the expansion.
pub fn phi_direct(
    config: &BumpConfiguration,
    potential: &ModelPotential,
    profile: &RadialProfile,
    constants: &ConstantsTable,
    grid: Grid3D,
    opts: &AuxiliaryOptions,
) -> Result<DirectEvaluation> {
    let auxiliary = solve_auxiliary_with(config, potential, profile, grid, opts)?;
    let defect = bump_defect(config, profile, constants, grid)?;
    let mut report = phi_expansion(config, constants, potential);
    let value = auxiliary.energy_zw.total - defect;
    report.direct_value = Some(value);
    report.direct_z = Some(auxiliary.energy_z.total - defect);
    report.remainder = Some(value - report.expansion_value);
    Ok(DirectEvaluation {
        auxiliary,
        defect,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field3d::DEFAULT_MARGIN;
    use crate::functional::Functional;
    use crate::integrals::compute_constants;
    use crate::radial::solve_ground_state;

    #[test]
    fn defect_vanishes_with_refinement_and_corrects_single_bump() {
        let profile = solve_ground_state(3.0, 40.0, 1e-10).unwrap();
        let constants = compute_constants(&profile, 1).unwrap();
        let cfg = BumpConfiguration::new(0.01, vec![[0.1, -0.2, 0.05]], 0.05).unwrap();
        let coarse = Grid3D::for_centers(&cfg.centers, 0.5, DEFAULT_MARGIN, 257).unwrap();
        let fine = Grid3D::for_centers(&cfg.centers, 0.25, DEFAULT_MARGIN, 257).unwrap();
        let dc = bump_defect(&cfg, &profile, &constants, coarse).unwrap();
        let df = bump_defect(&cfg, &profile, &constants, fine).unwrap();
        assert!(df.abs() < dc.abs(), "{dc} {df}");

        // with V ≡ 1 the corrected grid energy of one bump is the continuum value
        let flat = ModelPotential::power(6.0).unwrap();
        let ansatz = Ansatz::new(&profile, &cfg, fine).unwrap();
        let f = Functional::with_ansatz(&ansatz, &flat, 0.0, 3.0).unwrap();
        let e = f.energy(&crate::field3d::ScalarField::zeros(fine)).unwrap();
        let cfg0 = BumpConfiguration::new(1e-300, cfg.centers.clone(), 0.05).unwrap();
        let d0 = bump_defect(&cfg0, &profile, &constants, fine).unwrap();
        let corrected = e.total - d0;
        assert!((corrected - constants.c0_single - constants.c2).abs() < 1e-9, "{corrected}");

        // the Poisson part of the defect is the grid error of ε²C̃₁ only
        let eps = 0.2;
        let cfg2 = BumpConfiguration::new(eps, cfg.centers.clone(), 0.05).unwrap();
        let d2 = bump_defect(&cfg2, &profile, &constants, fine).unwrap();
        let rel = (d2 - d0) / (eps * eps * constants.c1_single);
        assert!(rel.abs() < 0.05, "{rel}");
    }
}
