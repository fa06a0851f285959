//! Cubic grids, scalar fields on them, the free-space Poisson solver, the
//! multi-bump ansatz and the admissible-configuration check.

mod ansatz;
mod config;
mod harmonics;
mod multigrid;
mod poisson;
mod potential;

pub use ansatz::{assemble_ansatz, tangent_basis, Ansatz};
pub(crate) use config::distance;
pub use config::{lambda_eps_check, BumpConfiguration, LambdaReport, PairSlack};
pub use multigrid::{Multigrid, SolveStats};
pub use poisson::{poisson_free_space, PoissonSolver};
pub use potential::{ModelPotential, PotentialForm};

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::{Error, Result};

/// Default clearance between a bump centre and the box faces.
pub const DEFAULT_MARGIN: f64 = 12.0;
/// `n − 1` is rounded up to a multiple of this so that the multigrid
/// hierarchy has at least four levels.
const COARSENING: usize = 16;

/// An `n × n × n` node lattice on the cube `center ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Grid3D {
    pub center: [f64; 3],
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
    /// Required clearance of bump centres from the faces.
    pub margin: f64,
}

impl Grid3D {
    pub fn new(center: [f64; 3], half_width: f64, n: usize) -> Result<Self> {
        if n < 16 {
            return Err(Error::InvalidParameter(format!(
                "grid needs n >= 16, got {n}"
            )));
        }
        if !(half_width > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid half width must be positive".into(),
            ));
        }
        Ok(Self {
            center,
            half_width,
            n,
            h: 2.0 * half_width / (n - 1) as f64,
            margin: DEFAULT_MARGIN,
        })
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    /// Smallest admissible grid of spacing `h` that keeps every centre at
    /// least `margin` from the faces.
    pub fn for_centers(centers: &[[f64; 3]], h: f64, margin: f64, n_cap: usize) -> Result<Self> {
        if centers.is_empty() || !(h > 0.0) || !(margin >= 0.0) {
            return Err(Error::InvalidParameter(
                "need centres, h > 0 and margin >= 0".into(),
            ));
        }
        let mut center = [0.0; 3];
        let mut half = 0.0_f64;
        for d in 0..3 {
            let lo = centers.iter().map(|c| c[d]).fold(f64::INFINITY, f64::min);
            let hi = centers
                .iter()
                .map(|c| c[d])
                .fold(f64::NEG_INFINITY, f64::max);
            center[d] = 0.5 * (lo + hi);
            half = half.max(0.5 * (hi - lo));
        }
        let needed = ((2.0 * (half + margin) / h) - 1e-9).ceil() as usize;
        let intervals = needed.div_ceil(COARSENING).max(1) * COARSENING;
        let n = intervals + 1;
        if n > n_cap {
            return Err(Error::GridTooLarge {
                needed: n,
                cap: n_cap,
            });
        }
        Ok(Self::new(center, 0.5 * h * intervals as f64, n)?.with_margin(margin))
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Cell volume `h³`.
    pub fn volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    #[inline]
    pub fn axis(&self, d: usize, i: usize) -> f64 {
        self.center[d] - self.half_width + self.h * i as f64
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        [self.axis(0, i), self.axis(1, j), self.axis(2, k)]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        let m = self.n - 1;
        i == 0 || j == 0 || k == 0 || i == m || j == m || k == m
    }

    /// Distance from `x` to the nearest face.
    pub fn clearance(&self, x: [f64; 3]) -> f64 {
        (0..3)
            .map(|d| self.half_width - (x[d] - self.center[d]).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Node values of a function on a [`Grid3D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid3D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid3D) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_values(grid: Grid3D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    /// Sample `f` at every node.
    pub fn from_fn<F: Fn([f64; 3]) -> f64 + Sync>(grid: Grid3D, f: F) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.position(idx)))
            .collect();
        Self { grid, values }
    }

    /// Independent uniform values in `[−½, ½]` at interior nodes, zero on
    /// the boundary. Deterministic in `seed`.
    pub fn random_interior(grid: Grid3D, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; grid.len()];
        for (idx, v) in values.iter_mut().enumerate() {
            let (i, j, k) = grid.coords(idx);
            let x: f64 = rng.gen();
            if !grid.is_boundary(i, j, k) {
                *v = x - 0.5;
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `h³ Σ a·b`
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.volume() * dot(&self.values, &other.values)
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `h³ Σ f`
    pub fn integral(&self) -> f64 {
        self.grid.volume() * self.values.par_iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .par_iter()
            .map(|v| v.abs())
            .reduce(|| 0.0, f64::max)
    }

    pub fn boundary_max_abs(&self) -> f64 {
        let g = self.grid;
        self.values
            .par_iter()
            .enumerate()
            .filter(|(idx, _)| {
                let (i, j, k) = g.coords(*idx);
                g.is_boundary(i, j, k)
            })
            .map(|(_, v)| v.abs())
            .reduce(|| 0.0, f64::max)
    }

    pub fn zero_boundary(&mut self) {
        let g = self.grid;
        self.values.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let (i, j, k) = g.coords(idx);
            if g.is_boundary(i, j, k) {
                *v = 0.0;
            }
        });
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        axpy(&mut self.values, a, &x.values);
    }

    pub fn scale(&mut self, a: f64) {
        self.values.par_iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        let mut s = self.clone();
        s.scale(a);
        s
    }

    /// `a·self + b·other`
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .par_iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.par_iter().map(|v| f(*v)).collect(),
        }
    }

    /// Pointwise `f(self, other)`.
    pub fn zip_map<F: Fn(f64, f64) -> f64 + Sync>(&self, other: &ScalarField, f: F) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .par_iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    /// `−Δ_h v + shift·v` at interior nodes by the 7-point stencil, using
    /// the stored boundary values; zero on the boundary.
    pub fn neg_laplacian(&self, shift: f64) -> ScalarField {
        let mut out = vec![0.0; self.values.len()];
        multigrid::apply_operator(self.grid.n, self.grid.h, shift, &self.values, &mut out);
        ScalarField {
            grid: self.grid,
            values: out,
        }
    }

    /// `√(h³ Σ |∇_h v|² + v²)` with forward differences, the discrete
    /// H¹ norm of a field that vanishes on the boundary.
    pub fn h1_norm_sq(&self) -> f64 {
        self.dot(&self.neg_laplacian(1.0))
    }

    /// Binary layout: `n` (u64), half width, centre (3 × f64), then the
    /// values in row-major `(x, y, z)` order, all little endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&self.grid.half_width.to_le_bytes())?;
        for c in self.grid.center {
            w.write_all(&c.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b8)?;
            Ok(b8)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let half = f64::from_le_bytes(next(&mut r)?);
        let mut center = [0.0; 3];
        for c in &mut center {
            *c = f64::from_le_bytes(next(&mut r)?);
        }
        if n < 16 || n > 4096 {
            return Err(Error::Parse(format!("implausible grid size {n}")));
        }
        let grid = Grid3D::new(center, half, n)?;
        let mut raw = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { grid, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(f))
    }

    /// The plane `z = axis(2, k)` as `x,y,value` rows.
    pub fn csv_slice(&self, k: usize) -> Result<String> {
        let g = self.grid;
        if k >= g.n {
            return Err(Error::InvalidParameter(format!("slice {k} outside grid")));
        }
        let mut s = String::from("x,y,value\n");
        for i in 0..g.n {
            for j in 0..g.n {
                let _ = writeln!(
                    s,
                    "{:.6},{:.6},{:.10e}",
                    g.axis(0, i),
                    g.axis(1, j),
                    self.values[g.index(i, j, k)]
                );
            }
        }
        Ok(s)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.par_iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}
