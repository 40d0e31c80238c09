//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

/// Bisection root of a continuous `f` with a sign change on `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of `mbar = α(1 − ln α / k)` by plain bisection.
pub fn alpha_by_bisection(k: usize, mbar: f64) -> f64 {
    bisect(|a| a * (1.0 - a.ln() / k as f64) - mbar, 1e-300, mbar)
}

/// θᵢ recomputed from the definition.
pub fn theta(mean: f64, alpha: f64) -> f64 {
    (mean - alpha) / (-alpha * alpha.ln())
}

/// Kolmogorov distance between sorted samples and a CDF whose atoms are
/// right-continuous; `left` gives the left limit.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64, left: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let before = i as f64 / n;
        let after = j as f64 / n;
        d = d.max((before - left(x)).abs()).max((after - cdf(x)).abs());
        i = j;
    }
    d
}

/// Solves `min/max c·x` s.t. `A x (≤|=|≥) b`, `x ≥ 0`, by enumerating every
/// basis. `rel` is -1 for ≤, 0 for =, 1 for ≥. Returns `None` if infeasible.
pub fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], rel: &[i8], b: &[f64], maximize: bool) -> Option<f64> {
    let n = c.len();
    // Active-set view: a vertex makes n linearly independent constraints
    // tight among the rows and the bounds x_j = 0.
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e, 0.0));
    }
    let feasible = |x: &[f64]| {
        x.iter().all(|&v| v >= -1e-9)
            && a.iter().zip(rel).zip(b).all(|((row, &r), &bi)| {
                let lhs: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
                match r {
                    -1 => lhs <= bi + 1e-9,
                    1 => lhs >= bi - 1e-9,
                    _ => (lhs - bi).abs() <= 1e-9,
                }
            })
    };
    let m = rows.len();
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn next(pick: &mut [usize], m: usize) -> bool {
        let n = pick.len();
        let mut i = n;
        while i > 0 {
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let mat: Vec<Vec<f64>> = pick.iter().map(|&r| rows[r].0.clone()).collect();
        let rhs: Vec<f64> = pick.iter().map(|&r| rows[r].1).collect();
        if let Some(x) = gauss(mat, rhs) {
            if feasible(&x) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(match best {
                    None => v,
                    Some(bv) if maximize => bv.max(v),
                    Some(bv) => bv.min(v),
                });
            }
        }
        if !next(&mut pick, m) {
            break;
        }
    }
    best
}

/// Gaussian elimination with partial pivoting; `None` if singular.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// `H_n(v) − H_{n'}(v)` from the case formula for two floors `a < a'`:
/// 0 below `a`, `(v − a)/v` on `[a, a')`, `(a' − a)/v` on `[a', 1)`, 0 at 1.
pub fn fosd_gap(a_small: f64, a_large: f64, v: f64) -> f64 {
    if v < a_small || v >= 1.0 {
        0.0
    } else if v < a_large {
        (v - a_small) / v
    } else {
        (a_large - a_small) / v
    }
}
