//! The subcommands. Each writes its per-point files, a CSV where a sweep
//! is involved, and a `<command>.json` summary into the output directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sps_core::field3d::{lambda_eps_check, Ansatz, BumpConfiguration, Grid3D, LambdaReport, ScalarField};
use sps_core::functional::{AuxiliaryReport, Functional, RieszMap};
use sps_core::integrals::{compute_constants, coulomb_pair, eta_monte_carlo, ConstantsTable};
use sps_core::quadrature::{loglog_fit, LinearFit};
use sps_core::radial::{check_nondegeneracy, fit_decay, solve_ground_state, IdentityReport, RadialProfile, SpectralReport};
use sps_core::reduced::{
    boundary_comparison, minimize_phi, phi_direct, polygon_initializer, scaling_sweep, BoundaryComparison, DirectSettings,
    Minimizer, ReducedEnergyReport, ScalingReport,
};
use sps_core::{Error, Result};

use crate::config::RunConfig;
use crate::output::{eps_tag, write_atomic, write_csv, write_json};

fn out(config: &RunConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn profile(config: &RunConfig) -> Result<RadialProfile> {
    solve_ground_state(config.p, config.tolerances.r_max, config.tolerances.shooting)
}

fn constants(config: &RunConfig, profile: &RadialProfile) -> Result<ConstantsTable> {
    compute_constants(profile, config.k)
}

/// Log-log fit when at least two positive points are available.
fn fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    (x.len() >= 2 && y.iter().all(|v| *v > 0.0)).then(|| loglog_fit(x, y))
}

/// The polygon initializer at `eps`, required to be admissible.
fn admissible_polygon(config: &RunConfig, eps: f64) -> Result<(BumpConfiguration, LambdaReport)> {
    let potential = config.model_potential()?;
    let cfg = polygon_initializer(config.k, eps, config.alpha, config.delta)?;
    let lambda = lambda_eps_check(&cfg, &potential);
    if !lambda.member {
        return Err(Error::InvalidParameter(format!(
            "the {}-bump polygon is not admissible at eps = {eps}",
            config.k
        )));
    }
    Ok((cfg, lambda))
}

fn grid_for(config: &RunConfig, cfg: &BumpConfiguration) -> Result<Grid3D> {
    Grid3D::for_centers(&cfg.centers, config.grid.h, config.grid.margin, config.grid.n_cap)
}

#[derive(Debug, Serialize)]
struct GroundStateResult {
    p: f64,
    u0: f64,
    decay_constant: f64,
    r_match: f64,
    h1_norm: f64,
    identities: IdentityReport,
    spectrum: Option<SpectralReport>,
    profile_file: PathBuf,
}

pub fn ground_state(config: &RunConfig, spectrum: bool) -> Result<()> {
    let prof = profile(config)?;
    let decay = fit_decay(&prof)?;
    let identities = prof.identities();
    let profile_file = out(config, "profile.txt");
    write_atomic(&profile_file, &crate::output::with_config_header(config, &prof.to_text()))?;
    let result = GroundStateResult {
        p: prof.p(),
        u0: prof.u0(),
        decay_constant: decay.decay_constant,
        r_match: prof.r_match(),
        h1_norm: prof.h1_norm_sq().sqrt(),
        identities,
        spectrum: if spectrum { Some(check_nondegeneracy(&prof)?) } else { None },
        profile_file,
    };
    write_json(&out(config, "ground-state.json"), "ground-state", config, &result)?;
    println!("U(0) = {:.10}", result.u0);
    println!("decay constant = {:.10}", result.decay_constant);
    println!("multiplication identity residual = {:.3e}", identities.multiplication_residual);
    println!("Pohozaev identity residual = {:.3e}", identities.pohozaev_residual);
    if let Some(s) = &result.spectrum {
        println!("negative eigenvalues = {}, coercivity = {:.6}", s.negative_count, s.coercivity);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ConstantsResult {
    constants: ConstantsTable,
    eta_monte_carlo: Option<(f64, f64)>,
    /// `(d, d·coulomb_pair(d), relative deviation from C₃)`
    far_field: Option<(f64, f64, f64)>,
}

pub fn constants_cmd(config: &RunConfig, mc_samples: Option<usize>, far_field: Option<f64>) -> Result<()> {
    let prof = profile(config)?;
    let table = constants(config, &prof)?;
    write_atomic(&out(config, "constants.txt"), &crate::output::with_config_header(config, &table.to_text()))?;
    let eta_mc = mc_samples.map(|n| eta_monte_carlo(&prof, n, config.seed));
    let far = match far_field {
        Some(d) => {
            let v = d * coulomb_pair(&prof, d)?;
            Some((d, v, (v - table.c3).abs() / table.c3))
        }
        None => None,
    };
    print!("{}", table.to_text());
    if let Some((m, se)) = eta_mc {
        println!("eta (Monte Carlo) = {m:.6} +- {se:.6}");
    }
    if let Some((d, v, rel)) = far {
        println!("d * coulomb_pair({d}) = {v:.8} (relative deviation from c3 {rel:.3e})");
    }
    let result = ConstantsResult {
        constants: table,
        eta_monte_carlo: eta_mc,
        far_field: far,
    };
    write_json(&out(config, "constants.json"), "constants", config, &result)
}

#[derive(Debug, Clone, Serialize)]
struct ResidualRow {
    eps: f64,
    k: usize,
    h: f64,
    n: usize,
    min_dist: f64,
    dual_norm: f64,
    lambda: LambdaReport,
}

#[derive(Debug, Serialize)]
struct SweepSummary<R> {
    rows: Vec<R>,
    fits: Vec<(&'static str, Option<LinearFit>)>,
}

fn residual_point(config: &RunConfig, prof: &RadialProfile, eps: f64) -> Result<ResidualRow> {
    let potential = config.model_potential()?;
    let (cfg, lambda) = admissible_polygon(config, eps)?;
    let grid = grid_for(config, &cfg)?;
    let ansatz = Ansatz::new(prof, &cfg, grid)?;
    let f = Functional::with_ansatz(&ansatz, &potential, eps, prof.p())?;
    let r = f.gradient(&ScalarField::zeros(grid))?;
    let dual_norm = RieszMap::new(grid).dual_norm(&r)?;
    let row = ResidualRow {
        eps,
        k: cfg.k(),
        h: grid.h,
        n: grid.n,
        min_dist: if cfg.k() > 1 { cfg.min_distance() } else { 0.0 },
        dual_norm,
        lambda,
    };
    write_json(&out(config, &format!("residual_{}.json", eps_tag(eps))), "residual-sweep", config, &row)?;
    Ok(row)
}

pub fn residual_sweep(config: &RunConfig) -> Result<()> {
    for eps in &config.eps_list {
        admissible_polygon(config, *eps)?;
    }
    let prof = profile(config)?;
    let rows: Vec<ResidualRow> = config
        .eps_list
        .par_iter()
        .map(|eps| residual_point(config, &prof, *eps))
        .collect::<Result<_>>()?;
    let mut csv = String::from("eps,K,h,n,min_dist,dual_norm\n");
    for r in &rows {
        csv += &format!("{:e},{},{},{},{:.12e},{:.12e}\n", r.eps, r.k, r.h, r.n, r.min_dist, r.dual_norm);
    }
    write_csv(&out(config, "residual_sweep.csv"), config, &csv)?;
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let slope = fit(&eps, &rows.iter().map(|r| r.dual_norm).collect::<Vec<_>>());
    print!("{csv}");
    if let Some(f) = &slope {
        println!("dual-norm slope = {:.4} +- {:.4} (R^2 = {:.5})", f.slope, f.slope_stderr, f.r_squared);
    }
    let summary = SweepSummary {
        rows,
        fits: vec![("dual_norm", slope)],
    };
    write_json(&out(config, "residual-sweep.json"), "residual-sweep", config, &summary)
}

#[derive(Debug, Clone, Serialize)]
struct AuxiliaryRow {
    auxiliary: AuxiliaryReport,
    reduced: ReducedEnergyReport,
    defect: f64,
    /// Whether every step of the residual history decreased.
    monotone: bool,
}

fn auxiliary_point(config: &RunConfig, prof: &RadialProfile, table: &ConstantsTable, eps: f64) -> Result<AuxiliaryRow> {
    let potential = config.model_potential()?;
    let (cfg, _) = admissible_polygon(config, eps)?;
    let grid = grid_for(config, &cfg)?;
    let eval = phi_direct(&cfg, &potential, prof, table, grid, &config.auxiliary_options())?;
    let history = &eval.auxiliary.residual_history;
    let row = AuxiliaryRow {
        auxiliary: eval.auxiliary.report(&cfg),
        reduced: eval.report,
        defect: eval.defect,
        monotone: history.windows(2).all(|w| w[1] < w[0]),
    };
    write_json(&out(config, &format!("auxiliary_{}.json", eps_tag(eps))), "auxiliary", config, &row)?;
    Ok(row)
}

pub fn auxiliary(config: &RunConfig) -> Result<()> {
    for eps in &config.eps_list {
        admissible_polygon(config, *eps)?;
    }
    let prof = profile(config)?;
    let table = constants(config, &prof)?;
    let rows: Vec<AuxiliaryRow> = config
        .eps_list
        .par_iter()
        .map(|eps| auxiliary_point(config, &prof, &table, *eps))
        .collect::<Result<_>>()?;
    let mut csv = String::from(
        "eps,dual_norm_z,w_norm,ratio,iterations,monotone,orthogonality,inverse_norm_estimate,bifurcation_mismatch,phi_expansion,energy_z,energy_zw,defect\n",
    );
    for r in &rows {
        let a = &r.auxiliary;
        csv += &format!(
            "{:e},{:.12e},{:.12e},{:.6e},{},{},{:.3e},{:.6e},{:.6e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            a.eps,
            a.dual_norm_z,
            a.w_norm,
            a.w_norm / a.dual_norm_z,
            a.iterations,
            r.monotone,
            a.orthogonality,
            a.inverse_norm_estimate,
            a.bifurcation_mismatch,
            r.reduced.expansion_value,
            r.reduced.direct_z.unwrap_or(f64::NAN),
            r.reduced.direct_value.unwrap_or(f64::NAN),
            r.defect,
        );
    }
    write_csv(&out(config, "auxiliary.csv"), config, &csv)?;
    print!("{csv}");
    let eps: Vec<f64> = rows.iter().map(|r| r.auxiliary.eps).collect();
    let col = |f: &dyn Fn(&AuxiliaryRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let fits = vec![
        ("dual_norm_z", fit(&eps, &col(&|r| r.auxiliary.dual_norm_z))),
        ("w_norm", fit(&eps, &col(&|r| r.auxiliary.w_norm))),
        (
            "energy_change",
            fit(&eps, &col(&|r| (r.reduced.direct_value.unwrap_or(0.0) - r.reduced.direct_z.unwrap_or(0.0)).abs())),
        ),
    ];
    for (name, f) in &fits {
        if let Some(f) = f {
            println!("{name} slope = {:.4} +- {:.4}", f.slope, f.slope_stderr);
        }
    }
    write_json(&out(config, "auxiliary.json"), "auxiliary", config, &SweepSummary { rows, fits })
}

#[derive(Debug, Clone, Serialize)]
struct MinimizeRow {
    minimizer: Minimizer,
    boundary: BoundaryComparison,
    /// `(max − min)/min` over all pairwise distances.
    distance_spread: f64,
}

fn distance_spread(cfg: &BumpConfiguration) -> f64 {
    let mut d = Vec::new();
    for i in 0..cfg.k() {
        for j in i + 1..cfg.k() {
            let (a, b) = (cfg.centers[i], cfg.centers[j]);
            d.push(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt());
        }
    }
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(0.0, f64::max);
    if d.is_empty() {
        0.0
    } else {
        (hi - lo) / lo
    }
}

fn direct_settings<'a>(config: &RunConfig, prof: &'a RadialProfile) -> DirectSettings<'a> {
    DirectSettings {
        profile: prof,
        h: config.grid.h,
        margin: config.grid.margin,
        n_cap: config.grid.n_cap,
        aux: config.auxiliary_options(),
        max_iter: config.direct.max_iter,
        fd_step: config.direct.fd_step,
    }
}

pub fn minimize(config: &RunConfig) -> Result<()> {
    let prof = profile(config)?;
    let table = constants(config, &prof)?;
    let potential = config.model_potential()?;
    let settings = direct_settings(config, &prof);
    let opts = config.minimize_options();
    let rows: Vec<MinimizeRow> = config
        .eps_list
        .par_iter()
        .map(|&eps| -> Result<MinimizeRow> {
            let m = minimize_phi(eps, config.k, &table, &potential, config.mode, Some(&settings), &opts)?;
            let boundary = boundary_comparison(&m.config, &potential, &table)?;
            let row = MinimizeRow {
                distance_spread: distance_spread(&m.config),
                minimizer: m,
                boundary,
            };
            write_json(&out(config, &format!("minimize_{}.json", eps_tag(eps))), "minimize", config, &row)?;
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from(
        "eps,K,min_dist,distance_spread,phi_expansion,phi_direct,phi_polygon,gradient_norm,stationary,distance_slack,potential_slack,domain_slack,distance_margin,potential_margin\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
    for r in &rows {
        let m = &r.minimizer;
        csv += &format!(
            "{:e},{},{:.12e},{:.3e},{:.12e},{},{:.12e},{:.3e},{},{},{:.6e},{:.6e},{},{:.6e}\n",
            m.config.eps,
            m.config.k(),
            if m.config.k() > 1 { m.config.min_distance() } else { 0.0 },
            r.distance_spread,
            m.report.expansion_value,
            opt(m.report.direct_value),
            m.polygon_value,
            m.gradient_norm,
            m.stationary,
            opt(m.distance_slack),
            m.potential_slack,
            m.domain_slack,
            opt(r.boundary.distance_margin),
            r.boundary.potential_margin,
        );
    }
    write_csv(&out(config, "minimize.csv"), config, &csv)?;
    print!("{csv}");
    write_json(&out(config, "minimize.json"), "minimize", config, &rows)
}

pub fn scaling(config: &RunConfig) -> Result<()> {
    let prof = profile(config)?;
    let table = constants(config, &prof)?;
    let potential = config.model_potential()?;
    let settings = direct_settings(config, &prof);
    let report: ScalingReport = scaling_sweep(
        &config.scaling_eps_list,
        config.k,
        &table,
        &potential,
        config.mode,
        Some(&settings),
        &config.minimize_options(),
    )?;
    write_csv(&out(config, "scaling_sweep.csv"), config, &report.to_csv())?;
    print!("{}", report.to_csv());
    if let Some(f) = &report.separation {
        println!(
            "separation exponent = {:.4} +- {:.4} (expected {:.4})",
            f.slope, f.slope_stderr, report.expected_separation
        );
    }
    if let Some(f) = &report.physical {
        println!(
            "physical exponent = {:.4} +- {:.4} (expected {:.4})",
            f.slope, f.slope_stderr, report.expected_physical
        );
    }
    write_json(&out(config, "scaling-sweep.json"), "scaling-sweep", config, &report)
}

const SUMMARIES: [&str; 6] = ["ground-state", "constants", "residual-sweep", "auxiliary", "minimize", "scaling-sweep"];

/// Scalar leaves of `value` as `path = value` lines, arrays of rows skipped.
fn flatten(prefix: &str, value: &serde_json::Value, lines: &mut Vec<String>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, lines);
            }
        }
        serde_json::Value::Array(items) if items.iter().all(|v| !v.is_object() && !v.is_array()) => {
            lines.push(format!("{prefix} = {value}"));
        }
        serde_json::Value::Array(_) | serde_json::Value::Null => {}
        v => lines.push(format!("{prefix} = {v}")),
    }
}

fn report_section(path: &Path, name: &str) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut lines = Vec::new();
    flatten("", &value["result"], &mut lines);
    if let Some(fits) = value["result"]["fits"].as_array() {
        for f in fits {
            if let (Some(n), Some(s)) = (f[0].as_str(), f[1]["slope"].as_f64()) {
                lines.push(format!("fit.{n}.slope = {s}"));
            }
        }
    }
    let mut s = format!("[{name}]\n");
    for l in lines {
        s += &l;
        s.push('\n');
    }
    Ok(Some(s))
}

pub fn report(config: &RunConfig) -> Result<()> {
    let mut body = String::new();
    for name in SUMMARIES {
        if let Some(section) = report_section(&out(config, &format!("{name}.json")), name)? {
            body += &section;
            body.push('\n');
        }
    }
    if body.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no command summaries found in {}",
            config.output_dir.display()
        )));
    }
    write_atomic(&out(config, "report.txt"), &crate::output::with_config_header(config, &body))?;
    print!("{body}");
    Ok(())
}
