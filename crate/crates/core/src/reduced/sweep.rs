//! Scaling laws of the minimisers along an `ε` sweep.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{minimize_phi, DirectSettings, MinimizeOptions, Minimizer, PhiMode};
use crate::field3d::ModelPotential;
use crate::integrals::ConstantsTable;
use crate::quadrature::{loglog_fit, LinearFit};
use crate::{Error, Result};

/// Fits with a smaller coefficient of determination are rejected.
pub const MIN_R_SQUARED: f64 = 0.99;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub k: usize,
    pub alpha: f64,
    pub min_dist: f64,
    /// `max_i |εP*_i|`
    pub physical_radius: f64,
    pub phi_expansion: f64,
    pub phi_direct: Option<f64>,
    pub remainder: Option<f64>,
    pub distance_slack: Option<f64>,
    pub potential_slack: f64,
    pub domain_slack: f64,
    pub gradient_norm: f64,
    #[serde(skip)]
    pub minimizer: Minimizer,
}

impl SweepRow {
    fn new(m: Minimizer, alpha: f64) -> Self {
        let physical_radius = m
            .config
            .physical_centers()
            .iter()
            .map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
            .fold(0.0, f64::max);
        Self {
            eps: m.config.eps,
            k: m.config.k(),
            alpha,
            min_dist: m.config.min_distance(),
            physical_radius,
            phi_expansion: m.report.expansion_value,
            phi_direct: m.report.direct_value,
            remainder: m.report.remainder,
            distance_slack: m.distance_slack,
            potential_slack: m.potential_slack,
            domain_slack: m.domain_slack,
            gradient_norm: m.gradient_norm,
            minimizer: m,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub k: usize,
    pub alpha: f64,
    pub mode: PhiMode,
    pub rows: Vec<SweepRow>,
    /// `log min_dist` against `log ε`; absent for a single bump.
    pub separation: Option<LinearFit>,
    /// `log max_i |εP*_i|` against `log ε`; absent when the minimiser sits at 0.
    pub physical: Option<LinearFit>,
    /// `(2 − α)/(α + 1)`
    pub expected_separation: f64,
    /// `3/(α + 1)`
    pub expected_physical: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

impl ScalingReport {
    pub const CSV_HEADER: &'static str = "eps,K,alpha,min_dist,physical_radius,phi_expansion,phi_direct,remainder,distance_slack,potential_slack,domain_slack,gradient_norm";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.6e},{},{},{:.12e},{:.12e},{:.12e},{},{},{},{:.6e},{:.6e},{:.6e}",
                r.eps,
                r.k,
                r.alpha,
                r.min_dist,
                r.physical_radius,
                r.phi_expansion,
                fmt_opt(r.phi_direct),
                fmt_opt(r.remainder),
                fmt_opt(r.distance_slack),
                r.potential_slack,
                r.domain_slack,
                r.gradient_norm,
            );
        }
        out
    }
}

fn checked_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let fit = loglog_fit(x, y);
    if !(fit.r_squared >= MIN_R_SQUARED) {
        return Err(Error::FitUnstable {
            r_squared: fit.r_squared,
        });
    }
    Ok(fit)
}

/// Minimises `Φ_ε` at every `ε` and fits the separation and physical-radius
/// exponents. Needs at least five values spanning a decade.
#[allow(clippy::too_many_arguments)]
pub fn scaling_sweep(
    eps_list: &[f64],
    k: usize,
    constants: &ConstantsTable,
    potential: &ModelPotential,
    mode: PhiMode,
    direct: Option<&DirectSettings<'_>>,
    opts: &MinimizeOptions,
) -> Result<ScalingReport> {
    if eps_list.len() < 5 {
        return Err(Error::InvalidParameter(format!("need at least 5 eps values, got {}", eps_list.len())));
    }
    let lo = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps_list.iter().copied().fold(0.0, f64::max);
    if !(hi / lo >= 10.0 * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter(format!("eps values must span a decade, got [{lo}, {hi}]")));
    }
    let alpha = potential.alpha();
    let rows: Vec<SweepRow> = eps_list
        .par_iter()
        .map(|&eps| minimize_phi(eps, k, constants, potential, mode, direct, opts).map(|m| SweepRow::new(m, alpha)))
        .collect::<Result<_>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let separation = if k >= 2 {
        Some(checked_fit(&eps, &rows.iter().map(|r| r.min_dist).collect::<Vec<_>>())?)
    } else {
        None
    };
    let physical = if rows.iter().all(|r| r.physical_radius > 0.0) {
        Some(checked_fit(&eps, &rows.iter().map(|r| r.physical_radius).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok(ScalingReport {
        k,
        alpha,
        mode,
        rows,
        separation,
        physical,
        expected_separation: (2.0 - alpha) / (alpha + 1.0),
        expected_physical: 3.0 / (alpha + 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constants() -> ConstantsTable {
        ConstantsTable {
            c0_single: 9.4486,
            c1_single: 7.7187,
            c0: 9.4486,
            c1: 7.7187,
            c2: 9.4486,
            c3: 7.1044,
            eta: 34.09,
            k: 1,
            p: 3.0,
        }
    }

    #[test]
    fn sweep_rejects_short_or_narrow_lists() {
        let pot = ModelPotential::power(6.0).unwrap();
        let opts = MinimizeOptions::default();
        let short = scaling_sweep(&[1e-2, 5e-3], 2, &constants(), &pot, PhiMode::Expansion, None, &opts);
        assert!(matches!(short, Err(Error::InvalidParameter(_))));
        let narrow = scaling_sweep(&[1e-2, 9e-3, 8e-3, 7e-3, 6e-3], 2, &constants(), &pot, PhiMode::Expansion, None, &opts);
        assert!(matches!(narrow, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn pair_sweep_has_one_csv_row_per_eps() {
        let pot = ModelPotential::power(6.0).unwrap();
        let eps = [3e-2, 1e-2, 5e-3, 2e-3, 1e-3];
        let r = scaling_sweep(&eps, 2, &constants(), &pot, PhiMode::Expansion, None, &MinimizeOptions::default()).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + eps.len());
        assert!(csv.starts_with("eps,K,alpha,min_dist"));
        let fit = r.separation.unwrap();
        assert!((fit.slope - r.expected_separation).abs() < 0.03, "{fit:?}");
    }
}
