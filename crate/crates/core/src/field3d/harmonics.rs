//! Real orthonormal spherical harmonics up to degree [`LMAX`].

use std::f64::consts::PI;
use std::sync::OnceLock;

pub(crate) const LMAX: usize = 4;
pub(crate) const COUNT: usize = (LMAX + 1) * (LMAX + 1);

/// `|x|` and `Y_lm(x/|x|)` at index `l² + l + m`.
pub(crate) fn real_harmonics(x: [f64; 3]) -> (f64, [f64; COUNT]) {
    let mut y = [0.0; COUNT];
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == 0.0 {
        y[0] = 0.5 / PI.sqrt();
        return (0.0, y);
    }
    let ct = x[2] / r;
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let st = rho / r;
    let (c1, s1) = if rho > 0.0 {
        (x[0] / rho, x[1] / rho)
    } else {
        (1.0, 0.0)
    };
    // cos(mφ), sin(mφ)
    let mut cm = [1.0; LMAX + 1];
    let mut sm = [0.0; LMAX + 1];
    for m in 1..=LMAX {
        cm[m] = cm[m - 1] * c1 - sm[m - 1] * s1;
        sm[m] = sm[m - 1] * c1 + cm[m - 1] * s1;
    }
    // associated Legendre functions without the Condon–Shortley phase
    let mut p = [[0.0; LMAX + 1]; LMAX + 1];
    let mut pmm = 1.0;
    for m in 0..=LMAX {
        if m > 0 {
            pmm *= (2 * m - 1) as f64 * st;
        }
        p[m][m] = pmm;
        if m < LMAX {
            p[m + 1][m] = ct * (2 * m + 1) as f64 * pmm;
        }
        for l in m + 2..=LMAX {
            p[l][m] = ((2 * l - 1) as f64 * ct * p[l - 1][m] - (l + m - 1) as f64 * p[l - 2][m])
                / (l - m) as f64;
        }
    }
    let norms = norms();
    for l in 0..=LMAX {
        let base = l * l + l;
        for m in 0..=l {
            let norm = norms[l][m];
            if m == 0 {
                y[base] = norm * p[l][0];
            } else {
                let v = std::f64::consts::SQRT_2 * norm * p[l][m];
                y[base + m] = v * cm[m];
                y[base - m] = v * sm[m];
            }
        }
    }
    (r, y)
}

fn norms() -> &'static [[f64; LMAX + 1]; LMAX + 1] {
    static NORMS: OnceLock<[[f64; LMAX + 1]; LMAX + 1]> = OnceLock::new();
    NORMS.get_or_init(|| {
        let mut t = [[0.0; LMAX + 1]; LMAX + 1];
        for (l, row) in t.iter_mut().enumerate() {
            for (m, v) in row.iter_mut().enumerate().take(l + 1) {
                let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| k as f64).product();
                *v = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
            }
        }
        t
    })
}

/// Monomials `x^a y^b z^c` are stored at `(a·5 + b)·5 + c`.
pub(crate) const MONO: usize = (LMAX + 1) * (LMAX + 1) * (LMAX + 1);

pub(crate) type Poly = [f64; MONO];

#[inline]
pub(crate) fn mono(a: usize, b: usize, c: usize) -> usize {
    (a * (LMAX + 1) + b) * (LMAX + 1) + c
}

/// Multiply by `x`, `y` or `z` (axis 0, 1, 2), dropping terms above degree LMAX.
fn mul_axis(p: &Poly, axis: usize) -> Poly {
    let mut out = [0.0; MONO];
    for a in 0..=LMAX {
        for b in 0..=LMAX - a {
            for c in 0..=LMAX - a - b {
                let v = p[mono(a, b, c)];
                if v == 0.0 || a + b + c == LMAX {
                    continue;
                }
                let e = match axis {
                    0 => mono(a + 1, b, c),
                    1 => mono(a, b + 1, c),
                    _ => mono(a, b, c + 1),
                };
                out[e] += v;
            }
        }
    }
    out
}

fn lin(pa: f64, a: &Poly, pb: f64, b: &Poly) -> Poly {
    let mut out = [0.0; MONO];
    for i in 0..MONO {
        out[i] = pa * a[i] + pb * b[i];
    }
    out
}

/// Solid harmonics `|x|^l Y_lm(x̂)` as Cartesian polynomials, in the
/// ordering of [`real_harmonics`].
pub(crate) fn solid_harmonics() -> &'static [Poly; COUNT] {
    static SOLID: OnceLock<[Poly; COUNT]> = OnceLock::new();
    SOLID.get_or_init(|| {
        let zero = [0.0; MONO];
        let r2 = |p: &Poly| {
            let x = mul_axis(&mul_axis(p, 0), 0);
            let y = mul_axis(&mul_axis(p, 1), 1);
            let z = mul_axis(&mul_axis(p, 2), 2);
            lin(1.0, &lin(1.0, &x, 1.0, &y), 1.0, &z)
        };
        // (x + iy)^m split into real and imaginary parts
        let mut cm = vec![zero; LMAX + 1];
        let mut sm = vec![zero; LMAX + 1];
        cm[0][mono(0, 0, 0)] = 1.0;
        for m in 1..=LMAX {
            cm[m] = lin(1.0, &mul_axis(&cm[m - 1], 0), -1.0, &mul_axis(&sm[m - 1], 1));
            sm[m] = lin(1.0, &mul_axis(&sm[m - 1], 0), 1.0, &mul_axis(&cm[m - 1], 1));
        }
        let norms = norms();
        let mut out = [zero; COUNT];
        for m in 0..=LMAX {
            let dfact: f64 = (1..=m).map(|k| (2 * k - 1) as f64).product();
            for (trig, sign) in [(&cm[m], 1i64), (&sm[m], -1)] {
                if m == 0 && sign < 0 {
                    continue;
                }
                // r^l P_l^m(cos θ) times the angular factor, by upward recurrence in l
                let mut prev = zero;
                let mut cur = lin(dfact, trig, 0.0, &zero);
                for l in m..=LMAX {
                    if l > m {
                        let zc = mul_axis(&cur, 2);
                        let next = lin(
                            (2 * l - 1) as f64 / (l - m) as f64,
                            &zc,
                            -((l + m - 1) as f64) / (l - m) as f64,
                            &r2(&prev),
                        );
                        prev = cur;
                        cur = next;
                    }
                    let scale = if m == 0 {
                        norms[l][0]
                    } else {
                        std::f64::consts::SQRT_2 * norms[l][m]
                    };
                    let idx = (l * l + l) as i64 + sign * m as i64;
                    out[idx as usize] = lin(scale, &cur, 0.0, &zero);
                }
            }
        }
        out
    })
}

pub(crate) fn degree(index: usize) -> usize {
    (index as f64).sqrt() as usize
}
