//! Run configuration read from a TOML file and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sps_core::field3d::{ModelPotential, PotentialForm, DEFAULT_MARGIN};
use sps_core::functional::AuxiliaryOptions;
use sps_core::reduced::{MinimizeOptions, PhiMode};
use sps_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Node spacing.
    pub h: f64,
    /// Clearance between every bump centre and the box faces.
    pub margin: f64,
    /// Largest admissible number of nodes per axis.
    pub n_cap: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h: 0.25,
            margin: DEFAULT_MARGIN,
            n_cap: 257,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Bisection tolerance on `U(0)`.
    pub shooting: f64,
    /// Outer radius of the radial grid.
    pub r_max: f64,
    /// Absolute stopping tolerance of the auxiliary iteration.
    pub auxiliary: f64,
    pub auxiliary_max_iter: usize,
    /// Relative tolerance of each inner linear solve.
    pub linear: f64,
    /// Stationarity tolerance of the minimiser in scaled coordinates.
    pub minimize: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let aux = AuxiliaryOptions::default();
        Self {
            shooting: 1e-10,
            r_max: 40.0,
            auxiliary: aux.tol,
            auxiliary_max_iter: aux.max_iter,
            linear: aux.linear_tol,
            minimize: MinimizeOptions::default().tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub form: PotentialForm,
    /// Radius `R` of the domain constraint `|εP_i| < R`.
    pub domain_radius: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            form: PotentialForm::Power,
            domain_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectConfig {
    /// Simplex iterations in direct mode.
    pub max_iter: u64,
    /// Finite-difference step in scaled coordinates.
    pub fd_step: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            fd_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Nonlinearity exponent, `1 < p < 5`.
    pub p: f64,
    /// Degree of the potential, `α > 2`.
    pub alpha: f64,
    /// Slack of the admissible set, `0 < δ < 3α/(α+1) − 2`.
    pub delta: f64,
    /// Number of bumps.
    pub k: usize,
    /// Values of `ε` for the residual, auxiliary and minimisation runs,
    /// strictly decreasing.
    pub eps_list: Vec<f64>,
    /// Values of `ε` for the scaling sweep, strictly decreasing and
    /// spanning at least a decade.
    pub scaling_eps_list: Vec<f64>,
    pub mode: PhiMode,
    pub restarts: usize,
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    pub workers: usize,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub potential: PotentialConfig,
    pub direct: DirectConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 3.0,
            alpha: 6.0,
            delta: 0.05,
            k: 2,
            eps_list: vec![3e-2, 2e-2, 1.4e-2, 1e-2, 7e-3],
            scaling_eps_list: vec![1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4],
            mode: PhiMode::Expansion,
            restarts: MinimizeOptions::default().restarts,
            seed: 0,
            workers: 1,
            output_dir: PathBuf::from("sps-out"),
            grid: GridConfig::default(),
            tolerances: Tolerances::default(),
            potential: PotentialConfig::default(),
            direct: DirectConfig::default(),
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

fn check_eps_list(name: &str, list: &[f64]) -> Result<()> {
    if list.is_empty() {
        return Err(invalid(format!("{name} is empty")));
    }
    if list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(invalid(format!("{name} entries must lie in (0, 1)")));
    }
    if list.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid(format!("{name} must be sorted in strictly decreasing order")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p < 5.0) {
            return Err(invalid(format!("p = {} must lie in (1, 5)", self.p)));
        }
        if !(self.alpha > 2.0) || !self.alpha.is_finite() {
            return Err(invalid(format!("alpha = {} must exceed 2", self.alpha)));
        }
        let delta_max = 3.0 * self.alpha / (self.alpha + 1.0) - 2.0;
        if !(self.delta > 0.0 && self.delta < delta_max) {
            return Err(invalid(format!("delta = {} must lie in (0, {delta_max})", self.delta)));
        }
        if self.k == 0 {
            return Err(invalid("k must be at least 1".into()));
        }
        check_eps_list("eps_list", &self.eps_list)?;
        check_eps_list("scaling_eps_list", &self.scaling_eps_list)?;
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1".into()));
        }
        let g = &self.grid;
        if !(g.h > 0.0 && g.margin > 0.0) || g.n_cap < 17 {
            return Err(invalid("grid needs h > 0, margin > 0 and n_cap >= 17".into()));
        }
        let t = &self.tolerances;
        if !(t.shooting > 0.0 && t.auxiliary >= 0.0 && t.linear > 0.0 && t.minimize > 0.0) {
            return Err(invalid("tolerances must be positive".into()));
        }
        if !(t.r_max >= 20.0) {
            return Err(invalid(format!("r_max = {} must be at least 20", t.r_max)));
        }
        if !(self.direct.fd_step > 0.0) {
            return Err(invalid("direct.fd_step must be positive".into()));
        }
        self.model_potential().map(|_| ())
    }

    pub fn model_potential(&self) -> Result<ModelPotential> {
        ModelPotential::new(self.alpha, self.potential.form, self.potential.domain_radius)
    }

    pub fn auxiliary_options(&self) -> AuxiliaryOptions {
        AuxiliaryOptions {
            tol: self.tolerances.auxiliary,
            max_iter: self.tolerances.auxiliary_max_iter,
            linear_tol: self.tolerances.linear,
            ..AuxiliaryOptions::default()
        }
    }

    pub fn minimize_options(&self) -> MinimizeOptions {
        MinimizeOptions {
            delta: self.delta,
            restarts: self.restarts,
            tol: self.tolerances.minimize,
            seed: self.seed,
        }
    }
}
