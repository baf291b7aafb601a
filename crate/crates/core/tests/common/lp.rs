//! Dense two-phase simplex with Bland's rule. Small problems only.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Lp {
    pub num_vars: usize,
    pub rows: Vec<(Vec<f64>, Rel, f64)>,
}

const EPS: f64 = 1e-11;

impl Lp {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, rows: Vec::new() }
    }

    /// Adds `Σ coef·x rel rhs` from sparse `(var, coef)` terms.
    pub fn add(&mut self, terms: &[(usize, f64)], rel: Rel, rhs: f64) {
        let mut row = vec![0.0; self.num_vars];
        for &(v, c) in terms {
            row[v] += c;
        }
        self.rows.push((row, rel, rhs));
    }

    /// Minimizes `cost · x` over `x ≥ 0`. `None` if infeasible.
    pub fn minimize(&self, cost: &[f64]) -> Option<(f64, Vec<f64>)> {
        let m = self.rows.len();
        let n = self.num_vars;
        let slacks = self.rows.iter().filter(|r| r.1 != Rel::Eq).count();
        let total = n + slacks + m;
        // tableau rows: constraint rows, then the objective
        let mut t = vec![vec![0.0; total + 1]; m + 1];
        let mut basis = vec![0usize; m];
        let mut s = n;
        for (i, (row, rel, rhs)) in self.rows.iter().enumerate() {
            t[i][..n].copy_from_slice(row);
            match rel {
                Rel::Le => {
                    t[i][s] = 1.0;
                    s += 1;
                }
                Rel::Ge => {
                    t[i][s] = -1.0;
                    s += 1;
                }
                Rel::Eq => {}
            }
            t[i][total] = *rhs;
            if *rhs < 0.0 {
                for v in t[i].iter_mut() {
                    *v = -*v;
                }
            }
            let art = n + slacks + i;
            t[i][art] = 1.0;
            basis[i] = art;
        }
        // phase one: minimize the sum of artificials
        let art_start = n + slacks;
        let mut obj = vec![0.0; total + 1];
        for j in art_start..total {
            obj[j] = 1.0;
        }
        t[m] = reduced(&t, &basis, &obj, m);
        pivot_loop(&mut t, &mut basis, total, total);
        if -t[m][total] > 1e-9 {
            return None;
        }
        // drive artificials out of the basis where possible
        for i in 0..m {
            if basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| t[i][j].abs() > EPS) {
                    pivot(&mut t, i, j);
                    basis[i] = j;
                }
            }
        }
        let mut obj = vec![0.0; total + 1];
        obj[..n].copy_from_slice(cost);
        t[m] = reduced(&t, &basis, &obj, m);
        pivot_loop(&mut t, &mut basis, art_start, total);
        let mut x = vec![0.0; n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] = t[i][total];
            }
        }
        let value = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        Some((value, x))
    }
}

fn reduced(t: &[Vec<f64>], basis: &[usize], obj: &[f64], m: usize) -> Vec<f64> {
    let mut r = obj.to_vec();
    for i in 0..m {
        let cb = obj[basis[i]];
        if cb != 0.0 {
            for (rj, tj) in r.iter_mut().zip(&t[i]) {
                *rj -= cb * tj;
            }
        }
    }
    r
}

fn pivot(t: &mut [Vec<f64>], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pr = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                for (a, b) in r.iter_mut().zip(&pr) {
                    *a -= f * b;
                }
            }
        }
    }
}

/// Bland's rule: entering = lowest index with negative reduced cost,
/// leaving = lowest basis index among ratio-test ties.
fn pivot_loop(t: &mut [Vec<f64>], basis: &mut [usize], allowed: usize, rhs: usize) {
    let m = basis.len();
    loop {
        let Some(col) = (0..allowed).find(|&j| t[m][j] < -EPS) else {
            return;
        };
        let mut best: Option<(f64, usize)> = None;
        for i in 0..m {
            if t[i][col] > EPS {
                let ratio = t[i][rhs] / t[i][col];
                best = match best {
                    Some((br, bi)) if ratio > br + 1e-14 || (ratio >= br - 1e-14 && basis[i] > basis[bi]) => {
                        Some((br, bi))
                    }
                    _ => Some((ratio, i)),
                };
            }
        }
        let Some((_, row)) = best else {
            panic!("unbounded linear program");
        };
        pivot(t, row, col);
        basis[row] = col;
    }
}
