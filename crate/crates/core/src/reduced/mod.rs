//! The reduced energy
//!
//! ```text
//!   Φ_ε(P) = C₀ + ε²C₁ + C₂ Σ V(εP_i) + C₃ε² Σ_{i≠j} 1/|P_i − P_j|
//! ```
//!
//! its direct evaluation on a grid, constrained minimisation over the
//! admissible set and the fitted scaling laws of the minimisers.
//!
//! With `s = ε^{(2−α)/(α+1)}` and `E = ε^{3α/(α+1)}` the substitution
//! `P = sX` gives `Φ_ε(P) = C₀ + ε²C₁ + KC₂ + E·F(X)` where
//! `F(X) = C₂ Σ (V(εsX_i) − 1)/E + C₃ Σ_{i≠j} 1/|X_i − X_j|`. For
//! `V = 1 + |x|^α` the scaled energy `F` does not depend on `ε`, and all
//! minimisation happens in these coordinates.

mod direct;
mod minimize;
mod sweep;

pub use direct::{bump_defect, phi_direct, DirectEvaluation};
pub use minimize::{minimize_phi, DirectSettings, MinimizeOptions, Minimizer, PhiMode};
pub use sweep::{scaling_sweep, ScalingReport, SweepRow};

use serde::{Deserialize, Serialize};

use crate::field3d::{BumpConfiguration, ModelPotential};
use crate::integrals::ConstantsTable;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedEnergyReport {
    pub expansion_value: f64,
    /// `C₀ = K C̃₀`
    pub term_c0: f64,
    /// `ε²C₁ = ε² K C̃₁`
    pub term_c1: f64,
    /// `C₂ Σ V(εP_i)`
    pub term_potential: f64,
    /// `C₃ε² Σ_{i≠j} 1/|P_i − P_j|` over ordered pairs
    pub term_coulomb: f64,
    /// `I_ε(z_P + w)` on the grid, corrected for the single-bump
    /// discretisation defect.
    pub direct_value: Option<f64>,
    /// `I_ε(z_P)` with the same correction.
    pub direct_z: Option<f64>,
    /// `direct_value − expansion_value`
    pub remainder: Option<f64>,
}

/// `ε^{(2−α)/(α+1)}`, the separation scale.
pub fn separation_scale(eps: f64, alpha: f64) -> f64 {
    eps.powf((2.0 - alpha) / (alpha + 1.0))
}

/// `ε^{3α/(α+1)}`, the size of the configuration-dependent part of `Φ_ε`.
pub fn energy_scale(eps: f64, alpha: f64) -> f64 {
    eps.powf(3.0 * alpha / (alpha + 1.0))
}

/// `C₀ + ε²C₁ + K C₂`, the value of `Φ_ε` without configuration terms.
pub fn phi_base(eps: f64, constants: &ConstantsTable, k: usize) -> f64 {
    let c = constants.with_bumps(k);
    c.c0 + eps * eps * c.c1 + k as f64 * c.c2
}

pub fn phi_expansion(
    config: &BumpConfiguration,
    constants: &ConstantsTable,
    potential: &ModelPotential,
) -> ReducedEnergyReport {
    let k = config.k();
    let c = constants.with_bumps(k);
    let eps = config.eps;
    let term_potential = c.c2 * config.physical_centers().iter().map(|x| potential.value(*x)).sum::<f64>();
    let mut inv = 0.0;
    for (i, a) in config.centers.iter().enumerate() {
        for (j, b) in config.centers.iter().enumerate() {
            if i != j {
                inv += 1.0 / crate::field3d::distance(*a, *b);
            }
        }
    }
    let term_c0 = c.c0;
    let term_c1 = eps * eps * c.c1;
    let term_coulomb = c.c3 * eps * eps * inv;
    ReducedEnergyReport {
        expansion_value: term_c0 + term_c1 + term_potential + term_coulomb,
        term_c0,
        term_c1,
        term_potential,
        term_coulomb,
        direct_value: None,
        direct_z: None,
        remainder: None,
    }
}

/// Vertices of a regular planar `K`-gon with side 1 centred at the origin
/// (a unit segment for `K = 2`, the origin for `K = 1`).
pub fn unit_polygon(k: usize) -> Vec<[f64; 3]> {
    match k {
        0 => Vec::new(),
        1 => vec![[0.0; 3]],
        _ => {
            let radius = 0.5 / (std::f64::consts::PI / k as f64).sin();
            (0..k)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                    [radius * t.cos(), radius * t.sin(), 0.0]
                })
                .collect()
        }
    }
}

/// `P⁰_j = ε^{(2−α)/(α+1)} X_j` for the side-1 polygon `X`.
pub fn polygon_initializer(k: usize, eps: f64, alpha: f64, delta: f64) -> Result<BumpConfiguration> {
    let s = separation_scale(eps, alpha);
    let centers = unit_polygon(k).into_iter().map(|x| x.map(|v| s * v)).collect();
    BumpConfiguration::new(eps, centers, delta)
}

/// Largest `ε < 1` below which the polygon initializer lies in `Λ_ε`,
/// or `None` if it never does.
pub fn polygon_threshold(k: usize, potential: &ModelPotential, delta: f64) -> Option<f64> {
    let member = |log_eps: f64| {
        polygon_initializer(k, log_eps.exp(), potential.alpha(), delta)
            .map(|c| crate::field3d::lambda_eps_check(&c, potential).member)
            .unwrap_or(false)
    };
    let (mut lo, mut hi) = (-200.0_f64, -1e-12_f64);
    if !member(lo) {
        return None;
    }
    if member(hi) {
        return Some(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if member(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo.exp())
}

/// The three comparisons that keep the minimiser off the boundary of
/// `Λ_ε`, each against the expansion at the polygon `P⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComparison {
    pub eps: f64,
    /// `Φ_ε(P⁰)`
    pub phi_polygon: f64,
    /// `Φ_ε(P⁰) − (C₀ + ε²C₁ + KC₂)` divided by `ε^{3α/(α+1)}`.
    pub polygon_constant: f64,
    /// Lower bound of `Φ_ε` on configurations with a pair at distance
    /// `ε^{(2−α)/(α+1)+δ}`; `None` for a single bump.
    pub distance_bound: Option<f64>,
    /// Lower bound of `Φ_ε` on configurations with `V(εP_i) − 1 = ε^{3α/(α+1)−δ}`.
    pub potential_bound: f64,
    pub distance_margin: Option<f64>,
    pub potential_margin: f64,
    /// `ε` below which the distance margin is positive.
    pub distance_crossover: Option<f64>,
    /// `ε` below which the potential margin is positive.
    pub potential_crossover: f64,
    /// `Φ_ε(P*) ≤ Φ_ε(P⁰)`
    pub minimizer_below_polygon: bool,
}

pub fn boundary_comparison(
    minimizer: &BumpConfiguration,
    potential: &ModelPotential,
    constants: &ConstantsTable,
) -> Result<BoundaryComparison> {
    let eps = minimizer.eps;
    let alpha = potential.alpha();
    let k = minimizer.k();
    let c = constants.with_bumps(k);
    let p0 = polygon_initializer(k, eps, alpha, minimizer.delta)?;
    let phi_polygon = phi_expansion(&p0, constants, potential).expansion_value;
    let phi_star = phi_expansion(minimizer, constants, potential).expansion_value;
    let base = phi_base(eps, constants, k);
    let weak = eps.powf(3.0 * alpha / (alpha + 1.0) - minimizer.delta);
    // one pair at the threshold distance contributes two ordered terms
    let distance_bound = (k >= 2).then(|| base + 2.0 * c.c3 * weak);
    let potential_bound = base + c.c2 * weak;
    // margin/E = c·ε^{−δ} − F(X⁰) changes sign at ε = (c/F(X⁰))^{1/δ}
    let polygon_constant = (phi_polygon - base) / energy_scale(eps, alpha);
    let crossover = |coef: f64| (coef / polygon_constant).powf(1.0 / minimizer.delta);
    Ok(BoundaryComparison {
        eps,
        phi_polygon,
        polygon_constant,
        distance_crossover: (k >= 2).then(|| crossover(2.0 * c.c3)),
        potential_crossover: crossover(c.c2),
        distance_bound,
        potential_bound,
        distance_margin: distance_bound.map(|b| b - phi_polygon),
        potential_margin: potential_bound - phi_polygon,
        minimizer_below_polygon: phi_star <= phi_polygon,
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
    fn single_bump_has_no_coulomb_term() {
        let pot = ModelPotential::power(6.0).unwrap();
        let c = constants();
        let cfg = BumpConfiguration::new(0.1, vec![[1.0, 0.0, 0.0]], 0.05).unwrap();
        let r = phi_expansion(&cfg, &c, &pot);
        assert_eq!(r.term_coulomb, 0.0);
        let expected = c.c0_single + 0.01 * c.c1_single + c.c2 * (1.0 + 0.1_f64.powi(6));
        assert!((r.expansion_value - expected).abs() < 1e-12);
        let sum = r.term_c0 + r.term_c1 + r.term_potential + r.term_coulomb;
        assert_eq!(sum, r.expansion_value);
    }

    #[test]
    fn pair_coulomb_counts_ordered_pairs_and_halves_when_doubled() {
        let pot = ModelPotential::power(6.0).unwrap();
        let c = constants();
        let eps = 1e-3;
        let pair = |d: f64| BumpConfiguration::new(eps, vec![[-d / 2.0, 0.0, 0.0], [d / 2.0, 0.0, 0.0]], 0.05).unwrap();
        let r = phi_expansion(&pair(10.0), &c, &pot);
        assert!((r.term_coulomb - 2.0 * c.c3 * eps * eps / 10.0).abs() < 1e-18);
        let r2 = phi_expansion(&pair(20.0), &c, &pot);
        assert!((r2.term_coulomb - 0.5 * r.term_coulomb).abs() < 1e-18);
    }

    #[test]
    fn expansion_is_rotation_and_permutation_invariant() {
        let pot = ModelPotential::power(6.0).unwrap();
        let c = constants();
        let pts = vec![[3.0, 1.0, -2.0], [-4.0, 0.5, 1.0], [0.0, -3.0, 2.5]];
        let cfg = BumpConfiguration::new(0.02, pts.clone(), 0.05).unwrap();
        let (ct, st) = (0.3_f64.cos(), 0.3_f64.sin());
        let rot: Vec<[f64; 3]> = pts.iter().rev().map(|p| [ct * p[0] - st * p[1], st * p[0] + ct * p[1], p[2]]).collect();
        let cfg2 = BumpConfiguration::new(0.02, rot, 0.05).unwrap();
        let (a, b) = (phi_expansion(&cfg, &c, &pot), phi_expansion(&cfg2, &c, &pot));
        assert!((a.expansion_value - b.expansion_value).abs() < 1e-12 * a.expansion_value);
    }

    #[test]
    fn polygon_initializer_distances() {
        let p = polygon_initializer(2, 1e-2, 6.0, 0.05).unwrap();
        let d = crate::field3d::distance(p.centers[0], p.centers[1]);
        assert!((d - 1e-2_f64.powf(-4.0 / 7.0)).abs() < 1e-12 * d);
        assert!((d - 13.89).abs() < 0.01, "{d}");
        let p1 = polygon_initializer(1, 1e-2, 6.0, 0.05).unwrap();
        assert_eq!(p1.centers, vec![[0.0; 3]]);
        let p3 = polygon_initializer(3, 1e-2, 6.0, 0.05).unwrap();
        let ds = [(0, 1), (1, 2), (0, 2)].map(|(i, j)| crate::field3d::distance(p3.centers[i], p3.centers[j]));
        for d in ds {
            assert!((d - ds[0]).abs() < 1e-12 * ds[0]);
        }
        for k in 4..8 {
            let x = unit_polygon(k);
            let m = BumpConfiguration::new(0.1, x, 0.05).unwrap().min_distance();
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_threshold_matches_radius_condition() {
        let pot = ModelPotential::power(6.0).unwrap();
        // side-1 heptagon has circumradius R > 1, feasible iff R^α ≤ ε^{−δ}
        let r = 0.5 / (std::f64::consts::PI / 7.0).sin();
        let t = polygon_threshold(7, &pot, 0.05).unwrap();
        let expected = r.powf(-6.0 / 0.05);
        assert!((t / expected - 1.0).abs() < 1e-6, "{t} vs {expected}");
        assert_eq!(polygon_threshold(2, &pot, 0.05), Some(1.0));
    }

    #[test]
    fn boundary_margins_grow_and_change_sign_at_crossover() {
        let pot = ModelPotential::power(6.0).unwrap();
        let c = constants();
        let mut prev = f64::NEG_INFINITY;
        for eps in [3e-2, 1e-2, 3e-3, 1e-4] {
            let p0 = polygon_initializer(2, eps, 6.0, 0.05).unwrap();
            let b = boundary_comparison(&p0, &pot, &c).unwrap();
            assert!(b.distance_margin.unwrap() > 0.0, "{b:?}");
            let m = b.potential_margin / energy_scale(eps, 6.0);
            assert!(m > prev, "{b:?}");
            assert_eq!(b.potential_margin > 0.0, eps < b.potential_crossover);
            prev = m;
        }
        let b = boundary_comparison(&polygon_initializer(2, 1e-2, 6.0, 0.05).unwrap(), &pot, &c).unwrap();
        let at = polygon_initializer(2, b.potential_crossover, 6.0, 0.05).unwrap();
        let m = boundary_comparison(&at, &pot, &c).unwrap().potential_margin;
        assert!(m.abs() < 1e-9 * energy_scale(b.potential_crossover, 6.0).max(1e-300) + 1e-12, "{m}");
        let single = polygon_initializer(1, 1e-2, 6.0, 0.05).unwrap();
        assert!(boundary_comparison(&single, &pot, &c).unwrap().distance_bound.is_none());
    }
}
