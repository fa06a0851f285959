//! Dormand–Prince shooting for `U'' + (2/r)U' - U + U^p = 0`, `U'(0) = 0`.

use super::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Outcome {
    /// `U` crossed zero at this radius: initial value too large.
    Overshoot(f64),
    /// `U'` turned positive at this radius: initial value too small.
    Undershoot(f64),
    /// Reached the end of the grid without an event.
    Survived,
}

pub(crate) struct Trajectory {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub outcome: Outcome,
}

#[inline]
pub(crate) fn signed_pow(u: f64, p: f64) -> f64 {
    u.abs().powf(p).copysign(u)
}

#[inline]
fn rhs(r: f64, y: [f64; 2], p: f64) -> [f64; 2] {
    [y[1], -2.0 * y[1] / r + y[0] - signed_pow(y[0], p)]
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dp_step(r: f64, y: [f64; 2], h: f64, p: f64) -> ([f64; 2], [f64; 2]) {
    let mut k = [[0.0; 2]; 7];
    k[0] = rhs(r, y, p);
    for s in 1..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = rhs(r + C[s] * h, ys, p);
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        y5[0] += h * B5[s] * k[s][0];
        y5[1] += h * B5[s] * k[s][1];
        err[0] += h * (B5[s] - B4[s]) * k[s][0];
        err[1] += h * (B5[s] - B4[s]) * k[s][1];
    }
    (y5, err)
}

/// Integrate from the origin with `U(0) = a` across the grid nodes,
/// stopping at the first event.
pub(crate) fn shoot(grid: &RadialGrid, p: f64, a: f64, rtol: f64) -> Trajectory {
    let n = grid.r.len();
    let mut u = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    u.push(a);
    du.push(0.0);

    // series start at the first node
    let f = a - signed_pow(a, p);
    let fp = 1.0 - p * a.abs().powf(p - 1.0);
    let b = f / 6.0;
    let c = fp * b / 20.0;
    let r1 = grid.r[1];
    let mut y = [
        a + b * r1 * r1 + c * r1.powi(4),
        2.0 * b * r1 + 4.0 * c * r1.powi(3),
    ];
    u.push(y[0]);
    du.push(y[1]);
    if let Some(o) = classify(r1, y) {
        return Trajectory { u, du, outcome: o };
    }

    let atol = rtol * 1e-8;
    let mut h_try = grid.r[2] - grid.r[1];
    for i in 1..n - 1 {
        let (r_start, r_end) = (grid.r[i], grid.r[i + 1]);
        let mut r = r_start;
        while r < r_end {
            let h = h_try.min(r_end - r);
            let (y_new, err) = dp_step(r, y, h, p);
            let sc0 = atol + rtol * y[0].abs().max(y_new[0].abs());
            let sc1 = atol + rtol * y[1].abs().max(y_new[1].abs());
            let e = ((err[0] / sc0).powi(2) + (err[1] / sc1).powi(2)).sqrt() / 2f64.sqrt();
            if e <= 1.0 || h < 1e-12 {
                r += h;
                y = y_new;
                let fac = if e == 0.0 {
                    5.0
                } else {
                    (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
                };
                if h == h_try || fac < 1.0 {
                    h_try = h * fac;
                }
            } else {
                h_try = h * (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
            }
            if !y[0].is_finite() {
                break;
            }
        }
        u.push(y[0]);
        du.push(y[1]);
        if let Some(o) = classify(r_end, y) {
            return Trajectory { u, du, outcome: o };
        }
    }
    Trajectory {
        u,
        du,
        outcome: Outcome::Survived,
    }
}

fn classify(r: f64, y: [f64; 2]) -> Option<Outcome> {
    if !(y[0] > 0.0) {
        Some(Outcome::Overshoot(r))
    } else if y[1] > 0.0 {
        Some(Outcome::Undershoot(r))
    } else {
        None
    }
}
