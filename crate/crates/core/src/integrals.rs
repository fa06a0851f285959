//! The Newtonian potential of `U²` and the constants of the reduced energy.
//!
//! Every kernel is `1/(4π|x|)`, so `φ_U` solves `−Δφ_U = U²` and the
//! Poisson energy of a single bump is `C̃₁ = ¼∫φ_U U²`.
//!
//! Two-centre integrals are reduced to the half-plane `(z, s)` of
//! cylindrical coordinates around the axis through both centres and
//! integrated with tensor Gauss–Legendre panels. Each one is evaluated at
//! two rule orders and rejected if they disagree.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quadrature::{exp_integral_e1, GaussLegendre};
use crate::radial::RadialProfile;
use crate::{Error, Result};

/// Panel width of the cylindrical rules.
const PANEL: f64 = 0.5;
const ORDERS: (usize, usize) = (12, 20);
const AGREEMENT: f64 = 1e-8;

/// `φ_U(r) = (1/r)∫₀^r s²U² ds + ∫_r^∞ sU² ds` on the profile nodes.
#[derive(Debug, Clone)]
pub struct NewtonianPotential {
    r: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    /// `∫₀^∞ s²U² ds`, i.e. `∫U² dx / (4π)`.
    charge: f64,
    /// `c_U` of the profile, for the far field.
    c: f64,
}

impl NewtonianPotential {
    pub fn new(profile: &RadialProfile) -> Self {
        let r = profile.r_grid();
        let u = profile.u_values();
        let du = profile.du_values();
        let n = r.len();
        // inner[i] = ∫₀^{r_i} s²U², outer[i] = ∫_{r_i}^{R} sU², by the
        // trapezoid rule with derivative end corrections
        let g1 = |i: usize| r[i] * r[i] * u[i] * u[i];
        let dg1 = |i: usize| 2.0 * r[i] * u[i] * u[i] + 2.0 * r[i] * r[i] * u[i] * du[i];
        let g2 = |i: usize| r[i] * u[i] * u[i];
        let dg2 = |i: usize| u[i] * u[i] + 2.0 * r[i] * u[i] * du[i];
        let cell = |g: &dyn Fn(usize) -> f64, dg: &dyn Fn(usize) -> f64, i: usize| {
            let h = r[i + 1] - r[i];
            0.5 * h * (g(i) + g(i + 1)) - h * h / 12.0 * (dg(i + 1) - dg(i))
        };
        let mut inner = vec![0.0; n];
        for i in 0..n - 1 {
            inner[i + 1] = inner[i] + cell(&g1, &dg1, i);
        }
        let mut outer = vec![0.0; n];
        for i in (0..n - 1).rev() {
            outer[i] = outer[i + 1] + cell(&g2, &dg2, i);
        }
        let c = profile.decay_constant();
        let r_max = r[n - 1];
        // analytic tail c²e^{-2s}/s² beyond the grid
        let tail_inner = c * c * (-2.0 * r_max).exp() / 2.0;
        let tail_outer = c * c * exp_integral_e1(2.0 * r_max);
        let charge = inner[n - 1] + tail_inner;
        let mut phi = vec![0.0; n];
        let mut dphi = vec![0.0; n];
        for i in 0..n {
            let o = outer[i] + tail_outer;
            if i == 0 {
                phi[0] = o;
            } else {
                phi[i] = inner[i] / r[i] + o;
                dphi[i] = -inner[i] / (r[i] * r[i]);
            }
        }
        Self {
            r: r.to_vec(),
            phi,
            dphi,
            charge,
            c,
        }
    }

    /// `∫U² dx`
    pub fn total_charge(&self) -> f64 {
        4.0 * PI * self.charge
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    /// `φ_U(r)` and `φ_U'(r)` at any radius.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let n = self.r.len();
        let r_max = self.r[n - 1];
        if r >= r_max {
            let c2 = self.c * self.c;
            let e = (-2.0 * r).exp();
            let m = self.charge - c2 * e / 2.0;
            return (m / r + c2 * exp_integral_e1(2.0 * r), -m / (r * r));
        }
        let i = match self.r.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.phi[i]
            + (t3 - 2.0 * t2 + t) * h * self.dphi[i]
            + (-2.0 * t3 + 3.0 * t2) * self.phi[i + 1]
            + (t3 - t2) * h * self.dphi[i + 1];
        let dv = ((6.0 * t2 - 6.0 * t) * (self.phi[i] - self.phi[i + 1])) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.dphi[i]
            + (3.0 * t2 - 2.0 * t) * self.dphi[i + 1];
        (v, dv)
    }

    #[inline]
    pub fn at(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// `∫|∇φ_U|² dx`, with the Coulomb tail `4π Q²/R` beyond the grid.
    pub fn gradient_energy(&self, profile: &RadialProfile) -> f64 {
        let w = profile.quadrature_weights();
        let r_max = self.r[self.r.len() - 1];
        4.0 * PI * self.charge * self.charge / r_max
            + 4.0
                * PI
                * self
                    .r
                    .iter()
                    .zip(&self.dphi)
                    .zip(w)
                    .map(|((r, d), w)| w * r * r * d * d)
                    .sum::<f64>()
    }

    /// `∫φ_U U² dx` over the profile grid.
    pub fn poisson_energy(&self, profile: &RadialProfile) -> f64 {
        profile.integrate_nodes(|r, u, _| self.at(r) * u * u)
    }
}

/// `∫_{z0}^{z1} ∫_0^{s1} f(z, s) 2πs ds dz` on panels of width ≈ [`PANEL`]
/// at two Gauss–Legendre orders.
fn cylinder<F>(f: F, z0: f64, z1: f64, s1: f64, what: &str) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let nz = ((z1 - z0) / PANEL).ceil().max(1.0) as usize;
    let ns = (s1 / PANEL).ceil().max(1.0) as usize;
    let eval = |order: usize| {
        let gl = GaussLegendre::new(order);
        let zs = gl.panel_points(z0, z1, nz);
        let ss = gl.panel_points(0.0, s1, ns);
        zs.par_chunks(order)
            .map(|chunk| {
                let mut acc = 0.0;
                for &(z, wz) in chunk {
                    let mut row = 0.0;
                    for &(s, ws) in &ss {
                        row += ws * s * f(z, s);
                    }
                    acc += wz * row;
                }
                acc
            })
            .sum::<f64>()
            * 2.0
            * PI
    };
    let a = eval(ORDERS.0);
    let b = eval(ORDERS.1);
    if !b.is_finite() || (a - b).abs() > AGREEMENT * b.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::QuadratureNonconvergent(format!(
            "{what}: orders {} and {} give {a:e} and {b:e}",
            ORDERS.0, ORDERS.1
        )));
    }
    Ok(b)
}

/// Radius beyond which `U^p(r) e^r` is negligible.
fn eta_cutoff(p: f64) -> f64 {
    (36.0 / (p - 1.0)).clamp(20.0, 400.0)
}

/// `η = ∫ U^p(x) e^{−x₁} dx`
pub fn eta(profile: &RadialProfile) -> Result<f64> {
    let p = profile.p();
    let r = eta_cutoff(p);
    cylinder(
        |z, s| profile.u_at((z * z + s * s).sqrt()).powf(p) * (-z).exp(),
        -r,
        r,
        r,
        "eta",
    )
}

/// Monte-Carlo estimate of `η` from `samples` points, with its standard
/// error. Radii are drawn from a Gamma(3) law and directions uniformly.
pub fn eta_monte_carlo(profile: &RadialProfile, samples: usize, seed: u64) -> (f64, f64) {
    let p = profile.p();
    let rate = 0.5 * (p - 1.0) + 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let prod: f64 = (0..3).map(|_| 1.0 - rng.gen::<f64>()).product();
        let r = -prod.ln() / rate;
        let cos_t: f64 = 2.0 * rng.gen::<f64>() - 1.0;
        // density of the sample point in ℝ³
        let radial_density = rate.powi(3) * r * r * (-rate * r).exp() / 2.0;
        let density = radial_density / (4.0 * PI * r * r);
        let v = profile.u_at(r).powf(p) * (-r * cos_t).exp() / density;
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

/// `∫ U^p(x) U(x − d e₁) dx`
pub fn pair_interaction(profile: &RadialProfile, d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "separation {d} must be nonnegative"
        )));
    }
    let p = profile.p();
    let r = eta_cutoff(p).min(profile.r_max());
    cylinder(
        |z, s| {
            let a = profile.u_at((z * z + s * s).sqrt()).powf(p);
            let b = profile.u_at(((z - d) * (z - d) + s * s).sqrt());
            a * b
        },
        -r,
        r,
        r,
        "pair interaction",
    )
}

/// `¼∫ φ_U(|x|) U²(x − d e₁) dx`, the Coulomb coefficient of one ordered
/// pair of bumps.
pub fn coulomb_pair(profile: &RadialProfile, d: f64) -> Result<f64> {
    coulomb_pair_with(profile, &NewtonianPotential::new(profile), d)
}

pub fn coulomb_pair_with(profile: &RadialProfile, phi: &NewtonianPotential, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "separation {d} must be positive"
        )));
    }
    let r = 20.0_f64.min(profile.r_max());
    // centred on the U² factor
    let v = cylinder(
        |z, s| {
            let u = profile.u_at((z * z + s * s).sqrt());
            u * u * phi.at(((z + d) * (z + d) + s * s).sqrt())
        },
        -r,
        r,
        r,
        "coulomb pair",
    )?;
    Ok(0.25 * v)
}

/// Radial function samples on `0 = r_0 < r_1 < …`.
#[derive(Debug, Clone, Copy)]
pub struct RadialSamples<'a> {
    pub r: &'a [f64],
    pub f: &'a [f64],
}

/// `Ψ_β[F](x) = ∫ F(|y|) / |x − y|^β dy` for `β ∈ {1, 2}`.
pub fn psi_beta(samples: RadialSamples<'_>, beta: u32, x: [f64; 3]) -> Result<f64> {
    let RadialSamples { r, f } = samples;
    if r.len() != f.len() || r.len() < 3 || r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "samples need a strictly increasing grid starting at 0".into(),
        ));
    }
    if beta != 1 && beta != 2 {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} must be 1 or 2"
        )));
    }
    let n = r.len();
    let r_last = r[n - 1];
    let total_abs: f64 = trapezoid(r, |i| f[i].abs() * r[i] * r[i]);
    let edge = f[n - 1].abs() * r_last.powi(beta as i32 + 2);
    if total_abs == 0.0 {
        return Ok(0.0);
    }
    if edge > 1e-8 * total_abs {
        return Err(Error::IntegrabilityViolation(format!(
            "F·r^{} = {edge:e} at the last node r = {r_last}",
            beta + 2
        )));
    }
    let rx = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    match beta {
        1 => {
            // Newton: 4π[(1/|x|)∫_0^{|x|} s²F + ∫_{|x|}^∞ sF]
            let mut s = 0.0;
            for i in 0..n - 1 {
                let (a, b) = (r[i], r[i + 1]);
                let (fa, fb) = (f[i], f[i + 1]);
                let lin = |t: f64| fa + (fb - fa) * (t - a) / (b - a);
                let piece = |lo: f64, hi: f64, inner: bool| {
                    let g = |t: f64| {
                        if inner {
                            t * t * lin(t) / rx
                        } else {
                            t * lin(t)
                        }
                    };
                    // Simpson is exact for the cubic integrand on a cell
                    (hi - lo) / 6.0 * (g(lo) + 4.0 * g(0.5 * (lo + hi)) + g(hi))
                };
                if b <= rx {
                    s += piece(a, b, true);
                } else if a >= rx {
                    s += piece(a, b, false);
                } else {
                    s += piece(a, rx, true) + piece(rx, b, false);
                }
            }
            Ok(4.0 * PI * s)
        }
        _ => {
            if rx == 0.0 {
                return Ok(4.0 * PI * trapezoid(r, |i| f[i]));
            }
            // 2π∫F(s)(s/r)ln((r+s)/|r−s|) ds, integrated cell by cell with
            // Gauss–Legendre nodes that avoid s = r
            let gl = GaussLegendre::new(16);
            let mut s = 0.0;
            for i in 0..n - 1 {
                let (a, b) = (r[i], r[i + 1]);
                let (fa, fb) = (f[i], f[i + 1]);
                let cells: Vec<(f64, f64)> = if a < rx && rx < b {
                    vec![(a, rx), (rx, b)]
                } else {
                    vec![(a, b)]
                };
                for (lo, hi) in cells {
                    s += gl.integrate(lo, hi, 1, |t| {
                        let ft = fa + (fb - fa) * (t - a) / (b - a);
                        ft * t / rx * ((rx + t) / (rx - t).abs()).ln()
                    });
                }
            }
            Ok(2.0 * PI * s)
        }
    }
}

fn trapezoid<G: Fn(usize) -> f64>(r: &[f64], g: G) -> f64 {
    (0..r.len() - 1)
        .map(|i| 0.5 * (r[i + 1] - r[i]) * (g(i) + g(i + 1)))
        .sum()
}

/// Constants of the reduced energy of `K` bumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsTable {
    /// `C̃₀ = ½∫|∇U|² − ∫U^{p+1}/(p+1)`
    pub c0_single: f64,
    /// `C̃₁ = ¼∫φ_U U²`
    pub c1_single: f64,
    pub c0: f64,
    pub c1: f64,
    /// `C₂ = ½∫U²`
    pub c2: f64,
    /// `C₃ = ¼(∫U²)²/(4π)`
    pub c3: f64,
    pub eta: f64,
    pub k: usize,
    pub p: f64,
}

pub fn compute_constants(profile: &RadialProfile, k: usize) -> Result<ConstantsTable> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "bump count must be at least 1".into(),
        ));
    }
    let p = profile.p();
    let phi = NewtonianPotential::new(profile);
    let mass = profile.mass();
    let c0_single = 0.5 * profile.gradient_sq() - profile.power_integral(p + 1.0) / (p + 1.0);
    let c1_single = 0.25 * phi.poisson_energy(profile);
    let table = ConstantsTable {
        c0_single,
        c1_single,
        c0: k as f64 * c0_single,
        c1: k as f64 * c1_single,
        c2: 0.5 * mass,
        c3: 0.25 * mass * mass / (4.0 * PI),
        eta: eta(profile)?,
        k,
        p,
    };
    let all = [
        table.c0_single,
        table.c1_single,
        table.c2,
        table.c3,
        table.eta,
    ];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::QuadratureNonconvergent("non-finite constant".into()));
    }
    Ok(table)
}

impl ConstantsTable {
    /// Same constants for another bump count.
    pub fn with_bumps(&self, k: usize) -> Self {
        Self {
            c0: k as f64 * self.c0_single,
            c1: k as f64 * self.c1_single,
            k,
            ..*self
        }
    }

    /// One `key = value` line per entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v:.17e}");
        }
        let _ = writeln!(s, "K = {}", self.k);
        s
    }

    fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("p", self.p),
            ("c0_single", self.c0_single),
            ("c1_single", self.c1_single),
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("eta", self.eta),
        ]
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected 'key = value', got '{line}'")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |k: &str| -> Result<f64> {
            map.get(k)
                .ok_or_else(|| Error::Parse(format!("missing key {k}")))?
                .parse()
                .map_err(|_| Error::Parse(format!("bad value for {k}")))
        };
        let k: usize = map
            .get("K")
            .ok_or_else(|| Error::Parse("missing key K".into()))?
            .parse()
            .map_err(|_| Error::Parse("bad value for K".into()))?;
        Ok(Self {
            c0_single: num("c0_single")?,
            c1_single: num("c1_single")?,
            c0: num("c0")?,
            c1: num("c1")?,
            c2: num("c2")?,
            c3: num("c3")?,
            eta: num("eta")?,
            k,
            p: num("p")?,
        })
    }
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

    #[test]
    fn potential_at_origin_and_far_field() {
        let prof = cubic();
        let phi = NewtonianPotential::new(prof);
        // oracle: Simpson sum of s U² on the profile grid
        let direct =
            prof.integrate_nodes(|r, u, _| if r > 0.0 { u * u / r } else { 0.0 }) / (4.0 * PI);
        assert!((phi.at(0.0) - direct).abs() < 1e-8 * direct);
        let mass = prof.mass();
        assert!((4.0 * PI * 30.0 * phi.at(30.0) - mass).abs() / mass < 1e-3);
        let v = phi.values();
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn potential_solves_radial_poisson_equation() {
        let prof = cubic();
        let phi = NewtonianPotential::new(prof);
        for r in [0.5, 1.3, 4.0, 9.0] {
            let h = 1e-3;
            let lap = (phi.at(r + h) - 2.0 * phi.at(r) + phi.at(r - h)) / (h * h)
                + 2.0 / r * phi.eval(r).1;
            let u = prof.u_at(r);
            assert!(
                (lap + u * u).abs() < 1e-4 * (1.0 + u * u),
                "r={r}: {lap} vs {}",
                -u * u
            );
        }
    }

    #[test]
    fn gradient_energy_equals_poisson_energy() {
        let prof = cubic();
        let phi = NewtonianPotential::new(prof);
        let a = phi.gradient_energy(prof);
        let b = phi.poisson_energy(prof);
        assert!((a - b).abs() / b < 1e-4);
    }

    #[test]
    fn constants_for_one_bump() {
        let c = compute_constants(cubic(), 1).unwrap();
        assert_eq!(c.c0, c.c0_single);
        assert_eq!(c.c1, c.c1_single);
        assert!(c.c1_single > 0.0 && c.c2 > 0.0 && c.c3 > 0.0 && c.eta > 0.0);
        let c3 = c.with_bumps(3);
        assert_eq!(c3.c0, 3.0 * c.c0_single);
        let back = ConstantsTable::parse(&c3.to_text()).unwrap();
        assert_eq!(back, c3);
    }

    #[test]
    fn eta_against_spherical_reduction() {
        // the angular integral of e^{-r cos θ} is 4π sinh(r)/r
        let prof = cubic();
        let oracle = prof.integrate_nodes(|r, u, _| {
            if r == 0.0 {
                u.powi(3)
            } else {
                u.powi(3) * r.sinh() / r
            }
        });
        let e = eta(prof).unwrap();
        assert!((e - oracle).abs() / oracle < 1e-6, "{e} vs {oracle}");
    }

    #[test]
    fn pair_interaction_at_zero_separation() {
        let prof = cubic();
        let v = pair_interaction(prof, 0.0).unwrap();
        let h1 = prof.h1_norm_sq();
        assert!((v - h1).abs() / h1 < 1e-7);
    }

    #[test]
    fn coulomb_pair_approaches_monopole() {
        let prof = cubic();
        let c3 = compute_constants(prof, 2).unwrap().c3;
        let phi = NewtonianPotential::new(prof);
        // brute force oracle: Newton's theorem on spheres around the U²
        // centre, ∫U²(s) s² ds · 4π · (1/(2sd))∫_{|d-s|}^{d+s} φ(t) t dt
        let d = 20.0;
        let gl = GaussLegendre::new(20);
        let oracle = 0.25
            * 4.0
            * PI
            * gl.integrate(0.0, 20.0, 80, |s| {
                let u = prof.u_at(s);
                let avg = if s == 0.0 {
                    phi.at(d)
                } else {
                    gl.integrate((d - s).abs(), d + s, 8, |t| phi.at(t) * t) / (2.0 * s * d)
                };
                u * u * s * s * avg
            });
        let v = coulomb_pair_with(prof, &phi, d).unwrap();
        assert!((v - oracle).abs() / oracle < 1e-7, "{v} vs {oracle}");
        assert!((d * v - c3).abs() / c3 < 0.02);
        let v40 = coulomb_pair_with(prof, &phi, 40.0).unwrap();
        assert!((40.0 * v40 - c3).abs() / c3 < 0.005);
        assert!((v40 / v - 0.5).abs() < 0.01);
    }

    #[test]
    fn psi_one_matches_newton_and_far_field() {
        let prof = cubic();
        let r = prof.r_grid();
        let f: Vec<f64> = prof.u_values().iter().map(|u| u * u).collect();
        let s = RadialSamples { r, f: &f };
        let at0 = psi_beta(s, 1, [0.0; 3]).unwrap();
        let oracle = prof.integrate_nodes(|r, u, _| if r > 0.0 { u * u / r } else { 0.0 });
        assert!((at0 - oracle).abs() / oracle < 1e-6, "{at0} vs {oracle}");
        let total = prof.mass();
        for rx in [10.0, 15.0, 20.0] {
            let v = psi_beta(s, 1, [0.0, rx, 0.0]).unwrap();
            assert!((v - total / rx).abs() <= 1e-3 * total / (rx * rx));
        }
        let zero = vec![0.0; r.len()];
        let z = RadialSamples { r, f: &zero };
        assert_eq!(psi_beta(z, 1, [1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(psi_beta(z, 2, [1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn psi_two_against_direct_angular_quadrature() {
        let prof = cubic();
        let r = prof.r_grid();
        let f: Vec<f64> = prof.u_values().iter().map(|u| u * u).collect();
        let v = psi_beta(RadialSamples { r, f: &f }, 2, [0.0, 0.0, 15.0]).unwrap();
        // away from the support |x − y|⁻² is smooth: integrate it in
        // cylindrical coordinates directly
        let oracle = cylinder(
            |z, s| {
                let u = prof.u_at((z * z + s * s).sqrt());
                u * u / ((z - 15.0) * (z - 15.0) + s * s)
            },
            -12.0,
            12.0,
            12.0,
            "oracle",
        )
        .unwrap();
        assert!((v - oracle).abs() / oracle < 1e-5, "{v} vs {oracle}");
        let total = prof.mass();
        assert!((v - total / 225.0).abs() <= 10.0 * total / 15f64.powi(3));
    }

    #[test]
    fn slowly_decaying_samples_are_rejected() {
        let r: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let f: Vec<f64> = r.iter().map(|x| 1.0 / (1.0 + x * x)).collect();
        let e = psi_beta(RadialSamples { r: &r, f: &f }, 1, [1.0, 0.0, 0.0]);
        assert!(matches!(e, Err(Error::IntegrabilityViolation(_))));
    }

    #[test]
    fn monte_carlo_eta_agrees() {
        let prof = cubic();
        let (mc, se) = eta_monte_carlo(prof, 200_000, 7);
        let e = eta(prof).unwrap();
        assert!((mc - e).abs() < 5.0 * se, "{mc} ± {se} vs {e}");
    }
}
