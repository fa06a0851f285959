//! Bump configurations and membership in the admissible set `Λ_ε`.

use serde::Serialize;

use super::ModelPotential;
use crate::{Error, Result};

/// Slack below which a constraint is reported as active.
const ACTIVE: f64 = 1e-12;

/// Centres `P₁ … P_K` in the rescaled frame, where the potential is
/// evaluated at `εP_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpConfiguration {
    pub eps: f64,
    pub centers: Vec<[f64; 3]>,
    pub delta: f64,
}

impl BumpConfiguration {
    pub fn new(eps: f64, centers: Vec<[f64; 3]>, delta: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps = {eps} must be positive"
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} must be positive"
            )));
        }
        if centers.is_empty() || centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "need at least one finite centre".into(),
            ));
        }
        Ok(Self {
            eps,
            centers,
            delta,
        })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// `ρ_ε = ε^{(2−α)/(α+1)+δ}`, the minimal admissible separation.
    pub fn separation_threshold(&self, alpha: f64) -> f64 {
        self.eps.powf((2.0 - alpha) / (alpha + 1.0) + self.delta)
    }

    /// `ε^{3α/(α+1)−δ}`, the admissible excess of the potential.
    pub fn potential_threshold(&self, alpha: f64) -> f64 {
        self.eps.powf(3.0 * alpha / (alpha + 1.0) - self.delta)
    }

    pub fn min_distance(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                m = m.min(distance(self.centers[i], self.centers[j]));
            }
        }
        m
    }

    pub fn physical_centers(&self) -> Vec<[f64; 3]> {
        self.centers
            .iter()
            .map(|c| [self.eps * c[0], self.eps * c[1], self.eps * c[2]])
            .collect()
    }
}

pub(crate) fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSlack {
    pub i: usize,
    pub j: usize,
    /// `|P_i − P_j| − ρ_ε`
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaReport {
    pub separation_threshold: f64,
    pub potential_threshold: f64,
    pub distance: Vec<PairSlack>,
    /// `ε^{3α/(α+1)−δ} − |g(εP_i)|^α` per bump.
    pub potential: Vec<f64>,
    /// `R − |εP_i|` per bump.
    pub domain: Vec<f64>,
    /// Whether `3α/(α+1) − δ > 2`.
    pub delta_admissible: bool,
    pub member: bool,
    /// Some constraint holds with (numerically) zero slack.
    pub on_boundary: bool,
}

impl LambdaReport {
    pub fn min_slack(&self) -> f64 {
        self.distance
            .iter()
            .map(|s| s.slack)
            .chain(self.potential.iter().copied())
            .chain(self.domain.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn lambda_eps_check(config: &BumpConfiguration, potential: &ModelPotential) -> LambdaReport {
    let alpha = potential.alpha();
    let rho = config.separation_threshold(alpha);
    let pot = config.potential_threshold(alpha);
    let mut distance_slacks = Vec::new();
    for i in 0..config.k() {
        for j in i + 1..config.k() {
            distance_slacks.push(PairSlack {
                i,
                j,
                slack: distance(config.centers[i], config.centers[j]) - rho,
            });
        }
    }
    let phys = config.physical_centers();
    let potential_slacks: Vec<f64> = phys
        .iter()
        .map(|x| pot - potential.g_abs(*x).powf(alpha))
        .collect();
    let domain: Vec<f64> = phys
        .iter()
        .map(|x| potential.domain_radius() - distance(*x, [0.0; 3]))
        .collect();
    let scaled = |s: f64, scale: f64| s / scale.max(f64::MIN_POSITIVE);
    let member = distance_slacks.iter().all(|s| s.slack >= 0.0)
        && potential_slacks.iter().all(|s| *s >= 0.0)
        && domain.iter().all(|s| *s >= 0.0);
    let on_boundary = distance_slacks
        .iter()
        .any(|s| scaled(s.slack, rho).abs() <= ACTIVE)
        || potential_slacks
            .iter()
            .any(|s| scaled(*s, pot).abs() <= ACTIVE)
        || domain
            .iter()
            .any(|s| scaled(*s, potential.domain_radius()).abs() <= ACTIVE);
    LambdaReport {
        separation_threshold: rho,
        potential_threshold: pot,
        distance: distance_slacks,
        potential: potential_slacks,
        domain,
        delta_admissible: 3.0 * alpha / (alpha + 1.0) - config.delta > 2.0,
        member,
        on_boundary,
    }
}
