//! Dip statistic of a weighted discrete distribution.
//!
//! The distribution function of point masses has lower corners
//! `(x_i, F(x_i-))` and upper corners `(x_i, F(x_i))`. For every candidate
//! mode the best unimodal fit is convex to the left (bounded by the convex
//! minorant of the lower corners) and concave to the right (bounded by the
//! concave majorant of the upper corners), and the two sides must meet with a
//! non-negative jump at the mode. The dip is the smallest such half-width over
//! all modes. Exact for unequal masses; with equal masses it reduces to the
//! classical sample statistic.

use crate::error::{Error, Result};
use crate::num::{wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipResult<T> {
    pub dip: T,
    pub modal_interval: (T, T),
}

/// Dip of the point masses `weights` at sorted, distinct positions `x`.
/// Returns the dip and the first and last optimal mode indices.
/// Weights need not be normalized.
pub fn dip_linear(x: &[f64], weights: &[f64]) -> Result<(f64, (usize, usize))> {
    if x.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::DegenerateInput("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("total weight must be positive".into()));
    }
    // zero masses leave the distribution function unchanged
    let keep: Vec<usize> = (0..x.len()).filter(|&i| weights[i] > 0.0).collect();
    if keep.len() < 2 {
        return Ok((0.0, (keep[0], keep[0])));
    }
    let xs: Vec<f64> = keep.iter().map(|&i| x[i]).collect();
    let mut lower = Vec::with_capacity(keep.len());
    let mut upper = Vec::with_capacity(keep.len());
    let mut acc = 0.0;
    for &i in &keep {
        lower.push(acc);
        acc += weights[i] / total;
        upper.push(acc);
    }
    *upper.last_mut().expect("non-empty") = 1.0;

    let fit = Corners::new(&xs, &lower, &upper);
    let widths: Vec<f64> = (0..xs.len()).map(|j| fit.mode_width(j)).collect();
    let dip = widths.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12;
    let first = widths.iter().position(|w| *w <= dip + tol).expect("non-empty");
    let last = widths.iter().rposition(|w| *w <= dip + tol).expect("non-empty");
    Ok((dip, (keep[first], keep[last])))
}

struct Corners<'a> {
    x: &'a [f64],
    lower: &'a [f64],
    upper: &'a [f64],
    /// `prev[i]`: previous vertex of the convex minorant of lower corners `0..=i`
    prev: Vec<usize>,
    /// `next[i]`: next vertex of the concave majorant of upper corners `i..`
    next: Vec<usize>,
}

impl<'a> Corners<'a> {
    fn new(x: &'a [f64], lower: &'a [f64], upper: &'a [f64]) -> Self {
        let n = x.len();
        let mut prev = vec![0usize; n];
        for j in 1..n {
            prev[j] = j - 1;
            loop {
                let a = prev[j];
                if a == 0 {
                    break;
                }
                let b = prev[a];
                // keep `a` while the chain turns upward at it
                if (x[j] - x[a]) * (lower[a] - lower[b]) < (x[a] - x[b]) * (lower[j] - lower[a]) {
                    break;
                }
                prev[j] = b;
            }
        }
        let mut next = vec![n - 1; n];
        for k in (0..n - 1).rev() {
            next[k] = k + 1;
            loop {
                let a = next[k];
                if a == n - 1 {
                    break;
                }
                let b = next[a];
                if (x[k] - x[a]) * (upper[a] - upper[b]) < (x[a] - x[b]) * (upper[k] - upper[a]) {
                    break;
                }
                next[k] = b;
            }
        }
        Self {
            x,
            lower,
            upper,
            prev,
            next,
        }
    }

    fn minorant_chain(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        let mut cur = Some(from);
        std::iter::from_fn(move || {
            let v = cur?;
            cur = (v > 0).then(|| self.prev[v]);
            Some(v)
        })
    }

    fn majorant_chain(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        let last = self.x.len() - 1;
        let mut cur = Some(from);
        std::iter::from_fn(move || {
            let v = cur?;
            cur = (v < last).then(|| self.next[v]);
            Some(v)
        })
    }

    /// Smallest sup-distance of a unimodal fit with its mode at `j`.
    fn mode_width(&self, j: usize) -> f64 {
        let (x, lo, up) = (self.x, self.lower, self.upper);
        let n = x.len();

        // upper corners left of the mode against the convex minorant
        let mut left: f64 = 0.0;
        let verts: Vec<usize> = self.minorant_chain(j).collect();
        for w in verts.windows(2) {
            let (b, a) = (w[0], w[1]);
            let slope = (lo[b] - lo[a]) / (x[b] - x[a]);
            for i in a..b.min(j) {
                left = left.max(up[i] - (lo[a] + slope * (x[i] - x[a])));
            }
        }
        // lower corners right of the mode against the concave majorant
        let mut right: f64 = 0.0;
        let verts: Vec<usize> = self.majorant_chain(j).collect();
        for w in verts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let slope = (up[b] - up[a]) / (x[b] - x[a]);
            for i in (a + 1).max(j + 1)..=b {
                right = right.max(up[a] + slope * (x[i] - x[a]) - lo[i]);
            }
        }

        // Both sides must meet at the mode: the left limit there, bounded
        // below by `α - β t`, may not exceed the right value, bounded above by
        // `γ + δ t`.
        let mut below: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for b in 0..j {
            below.push((up[b], 1.0));
            if b > 0 {
                for a in self.minorant_chain(b - 1) {
                    let r = (x[j] - x[b]) / (x[b] - x[a]);
                    below.push((up[b] * (1.0 + r) - lo[a] * r, 1.0 + 2.0 * r));
                }
            }
        }
        let mut above: Vec<(f64, f64)> = vec![(1.0, 0.0)];
        for b in j + 1..n {
            above.push((lo[b], 1.0));
            if b + 1 < n {
                for c in self.majorant_chain(b + 1) {
                    let s = (x[b] - x[j]) / (x[c] - x[b]);
                    above.push((lo[b] * (1.0 + s) - up[c] * s, 1.0 + 2.0 * s));
                }
            }
        }

        // the gap is convex and decreasing in t; Newton steps along active
        // lines reach its root from the left in finitely many steps
        let mut t = left.max(right) / 2.0;
        for _ in 0..256 {
            let (lv, beta) = envelope(&below, t, true);
            let (rv, delta) = envelope(&above, t, false);
            let gap = lv - rv;
            if gap <= 1e-15 || beta + delta <= 0.0 {
                break;
            }
            t += gap / (beta + delta);
        }
        t
    }
}

/// Value of the upper envelope of `α - β t` (or lower envelope of `α + β t`)
/// and the smallest slope magnitude among lines active at `t`.
fn envelope(lines: &[(f64, f64)], t: f64, upper: bool) -> (f64, f64) {
    let value = |&(a, b): &(f64, f64)| if upper { a - b * t } else { a + b * t };
    let best = lines
        .iter()
        .map(value)
        .fold(if upper { f64::NEG_INFINITY } else { f64::INFINITY }, |m, v| {
            if upper {
                m.max(v)
            } else {
                m.min(v)
            }
        });
    let tol = 1e-14 * (1.0 + best.abs());
    let slope = lines
        .iter()
        .filter(|l| (value(l) - best).abs() <= tol)
        .map(|l| l.1)
        .fold(f64::INFINITY, f64::min);
    (best, slope)
}

/// Dip of a non-negative curve over a circular angle grid. The circle is cut
/// at the antipode of the curve's maximum before the linear statistic is
/// evaluated.
pub fn dip_statistic<T: Real>(theta_grid: &[T], weights: &[T]) -> Result<DipResult<T>> {
    if theta_grid.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_grid.len(),
            got: weights.len(),
        });
    }
    let w: Vec<f64> = weights.iter().map(|v| v.to_f64_lossy()).collect();
    let peak = w
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, &v)| match best {
            Some((_, bv)) if v <= bv => best,
            _ => Some((i, v)),
        })
        .map(|b| b.0)
        .ok_or_else(|| Error::DegenerateInput("empty curve".into()))?;
    let cut = theta_grid[peak].to_f64_lossy() + std::f64::consts::PI;
    let mut order: Vec<(f64, usize)> = theta_grid
        .iter()
        .enumerate()
        .map(|(i, t)| (wrap_angle(t.to_f64_lossy() - cut), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = order.iter().map(|o| o.0).collect();
    let ws: Vec<f64> = order.iter().map(|o| w[o.1]).collect();
    let (dip, (lo, hi)) = dip_linear(&xs, &ws)?;
    Ok(DipResult {
        dip: T::of(dip),
        modal_interval: (theta_grid[order[lo].1], theta_grid[order[hi].1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localization::uniform_grid;
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn point_mass_has_zero_dip() {
        let mut w = vec![0.0; 10];
        w[3] = 2.0;
        assert_eq!(dip_linear(&grid(10), &w).unwrap().0, 0.0);
    }

    #[test]
    fn two_equal_masses() {
        let (d, _) = dip_linear(&[0.0, 5.0], &[0.5, 0.5]).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        let mut w = vec![0.0; 12];
        w[2] = 1.0;
        w[9] = 1.0;
        assert!((dip_linear(&grid(12), &w).unwrap().0 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn three_equal_masses() {
        let (d, _) = dip_linear(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!((d - 1.0 / 6.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn fine_triangular_is_nearly_unimodal() {
        let n = 201;
        let w: Vec<f64> = (0..n).map(|i| 101.0 - (i as f64 - 100.0).abs()).collect();
        let (d, _) = dip_linear(&grid(n), &w).unwrap();
        assert!(d < 0.01, "{d}");
    }

    #[test]
    fn circular_cut_keeps_wrapped_mode_intact() {
        // one mode straddling 0 degrees, fine grid so no single atom dominates
        let g = uniform_grid::<f64>(360);
        let w: Vec<f64> = g
            .iter()
            .map(|t| (-(crate::num::circular_distance(*t, 0.0) / 1.0).powi(2)).exp())
            .collect();
        let r = dip_statistic(&g, &w).unwrap();
        assert!(r.dip < 0.01, "{}", r.dip);
        assert!(crate::num::circular_distance(r.modal_interval.0, 0.0) < 0.3);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(dip_linear(&grid(3), &[0.0; 3]), Err(Error::DegenerateInput(_))));
        assert!(matches!(dip_linear(&grid(2), &[1.0, -1.0]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn dip_never_exceeds_quarter() {
        let w = [1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0, 5.0, 0.1];
        let (d, _) = dip_linear(&grid(10), &w).unwrap();
        assert!((0.0..=0.25).contains(&d));
    }

    proptest! {
        #[test]
        fn dip_is_scale_invariant(w in prop::collection::vec(0.0f64..1.0, 2..40), s in 1e-3f64..1e3) {
            prop_assume!(w.iter().sum::<f64>() > 1e-6);
            let g = grid(w.len());
            let a = dip_linear(&g, &w).unwrap().0;
            let scaled: Vec<f64> = w.iter().map(|v| v * s).collect();
            let b = dip_linear(&g, &scaled).unwrap().0;
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=0.25 + 1e-15).contains(&a));
        }
    }
}
