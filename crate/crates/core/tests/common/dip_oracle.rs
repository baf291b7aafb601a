//! Dip as a linear program: for each candidate mode index, minimize the sup
//! distance between the empirical distribution function and a distribution
//! function that is convex left of the mode and concave right of it.

use super::lp::{Lp, Rel};

fn mode_lp(x: &[f64], p: &[f64], j: usize) -> f64 {
    let n = x.len();
    let (jv, tv) = (n, n + 1);
    let mut lp = Lp::new(n + 2);
    let mut cum = 0.0;
    let mut before = vec![0.0; n];
    let mut after = vec![0.0; n];
    for i in 0..n {
        before[i] = cum;
        cum += p[i];
        after[i] = cum;
    }
    after[n - 1] = 1.0;
    for i in 0..n {
        lp.add(&[(i, 1.0), (tv, 1.0)], Rel::Ge, after[i]);
        let left_limit = if i == j { jv } else { i };
        lp.add(&[(left_limit, 1.0), (tv, -1.0)], Rel::Le, before[i]);
    }
    lp.add(&[(n - 1, 1.0)], Rel::Le, 1.0);
    lp.add(&[(jv, 1.0), (j, -1.0)], Rel::Le, 0.0);

    // (position, variable) chains on each side of the mode
    let left: Vec<(f64, usize)> = (0..j).map(|i| (x[i], i)).chain([(x[j], jv)]).collect();
    let right: Vec<(f64, usize)> = (j..n).map(|i| (x[i], i)).collect();
    let mut chain = |nodes: &[(f64, usize)], convex: bool| {
        for w in nodes.windows(3) {
            let ((xa, a), (xb, b), (xc, c)) = (w[0], w[1], w[2]);
            // (v_b - v_a)(x_c - x_b) - (v_c - v_b)(x_b - x_a)
            let (l, r) = (xc - xb, xb - xa);
            let terms = [(b, l + r), (a, -l), (c, -r)];
            lp.add(&terms, if convex { Rel::Le } else { Rel::Ge }, 0.0);
        }
    };
    chain(&left, true);
    chain(&right, false);
    if left.len() >= 2 {
        lp.add(&[(left[1].1, 1.0), (left[0].1, -1.0)], Rel::Ge, 0.0);
    }
    if right.len() >= 2 {
        let k = right.len();
        lp.add(&[(right[k - 1].1, 1.0), (right[k - 2].1, -1.0)], Rel::Ge, 0.0);
    }
    let mut cost = vec![0.0; n + 2];
    cost[tv] = 1.0;
    lp.minimize(&cost).expect("dip program is always feasible").0
}

/// Exact dip of point masses `weights` at sorted positions `x`.
pub fn dip_oracle(x: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
    (0..x.len()).map(|j| mode_lp(x, &p, j)).fold(f64::INFINITY, f64::min)
}
