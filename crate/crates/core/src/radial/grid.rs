//! Piecewise-uniform radial grids with composite Simpson weights.

/// A run of equally spaced nodes `r0, r0 + h, …, r0 + count·h` whose first
/// node has global index `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub r0: f64,
    pub h: f64,
    pub start: usize,
    pub count: usize,
}

impl Segment {
    pub fn end(&self) -> f64 {
        self.r0 + self.h * self.count as f64
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RadialGrid {
    pub r: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Weights of `∫ g(r) dr` on the nodes.
    pub weights: Vec<f64>,
}

/// Nominal steps: 1e-3 on [0, 2], 2.5e-3 on [2, 6], 1e-2 beyond,
/// each divided by `refine`.
pub(crate) fn graded(r_max: f64, refine: f64) -> RadialGrid {
    let breaks = [
        (0.0, 2.0, 1e-3),
        (2.0, 6.0, 2.5e-3),
        (6.0, f64::INFINITY, 1e-2),
    ];
    let mut segments = Vec::new();
    let mut start = 0;
    for &(a, b, h) in &breaks {
        if a >= r_max {
            break;
        }
        let b = b.min(r_max);
        let mut count = ((b - a) / (h / refine)).ceil() as usize;
        count += count % 2;
        let h = (b - a) / count as f64;
        segments.push(Segment {
            r0: a,
            h,
            start,
            count,
        });
        start += count;
    }
    from_segments(segments)
}

pub(crate) fn from_segments(segments: Vec<Segment>) -> RadialGrid {
    let total = segments.last().map(|s| s.start + s.count).unwrap_or(0) + 1;
    let mut r = vec![0.0; total];
    let mut weights = vec![0.0; total];
    for seg in &segments {
        for k in 0..=seg.count {
            r[seg.start + k] = seg.r0 + seg.h * k as f64;
        }
        let w = simpson(seg.count, seg.h);
        for (k, wk) in w.into_iter().enumerate() {
            weights[seg.start + k] += wk;
        }
    }
    RadialGrid {
        r,
        segments,
        weights,
    }
}

/// Composite Simpson weights for `count` intervals of width `h`; an odd
/// count closes with the 3/8 rule on the last three intervals.
fn simpson(count: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; count + 1];
    if count == 0 {
        return w;
    }
    if count == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_end = if count % 2 == 0 { count } else { count - 3 };
    let mut k = 0;
    while k < simpson_end {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
        k += 2;
    }
    if simpson_end < count {
        let c = 3.0 * h / 8.0;
        w[simpson_end] += c;
        w[simpson_end + 1] += 3.0 * c;
        w[simpson_end + 2] += 3.0 * c;
        w[simpson_end + 3] += c;
    }
    w
}

impl RadialGrid {
    /// Index `i` of the interval `[r_i, r_{i+1}]` containing `r`, clamped to
    /// the grid.
    pub fn locate(&self, r: f64) -> usize {
        let last = self.r.len() - 2;
        for seg in &self.segments {
            if r < seg.end() {
                let k = ((r - seg.r0) / seg.h).floor().max(0.0) as usize;
                return (seg.start + k.min(seg.count - 1)).min(last);
            }
        }
        last
    }

    /// Keep nodes with `r <= r_cut`.
    pub fn truncated(&self, r_cut: f64) -> RadialGrid {
        let mut segments = Vec::new();
        for seg in &self.segments {
            if seg.r0 >= r_cut {
                break;
            }
            let keep = (((r_cut - seg.r0) / seg.h + 1e-9).floor() as usize).min(seg.count);
            if keep == 0 {
                break;
            }
            segments.push(Segment {
                count: keep,
                ..*seg
            });
            if keep < seg.count {
                break;
            }
        }
        from_segments(segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_weights_integrate_cubics() {
        let g = graded(25.0, 1.0);
        let v: f64 = g.r.iter().zip(&g.weights).map(|(r, w)| w * r.powi(3)).sum();
        assert!((v - 25f64.powi(4) / 4.0).abs() < 1e-8 * v);
        let t = g.truncated(8.0);
        let v: f64 = t.r.iter().zip(&t.weights).map(|(r, w)| w * r.powi(3)).sum();
        assert!((v - 8f64.powi(4) / 4.0).abs() < 1e-8 * v);
    }

    #[test]
    fn locate_finds_interval() {
        let g = graded(25.0, 1.0);
        for &r in &[0.0, 0.0005, 1.9999, 2.0, 5.1234, 6.0, 24.999] {
            let i = g.locate(r);
            assert!(g.r[i] <= r + 1e-12 && r <= g.r[i + 1] + 1e-12, "r = {r}");
        }
    }
}
