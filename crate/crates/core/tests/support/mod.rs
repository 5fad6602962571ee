//! Test-side oracles, written independently of the library's linear
//! algebra so the two can disagree.

#![allow(dead_code)]

/// Gaussian elimination with partial pivoting; None when the system is
/// singular to working precision.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Least squares via the normal equations, solved by Gaussian elimination.
pub fn normal_equations_solve(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = rows.first()?.len();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (row, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * yi;
        }
    }
    gauss_solve(&xtx, &xty)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pinball loss, restated from its definition.
pub fn pinball_ref(y: f64, yhat: f64, tau: f64) -> f64 {
    if y >= yhat {
        tau * (y - yhat)
    } else {
        (1.0 - tau) * (yhat - y)
    }
}

pub fn pinball_objective_ref(rows: &[Vec<f64>], y: &[f64], theta: &[f64], tau: f64) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(row, &yi)| pinball_ref(yi, dot(row, theta), tau))
        .sum()
}

/// Exhaustive search over basic solutions of a quantile regression: for
/// every size-k subset of rows, fit exactly through those points and score
/// the full objective. With a full-column-rank design, some optimum of the
/// pinball problem interpolates k points, so the best subset is the global
/// optimum. Returns (objective, theta).
pub fn best_basic_solution(rows: &[Vec<f64>], y: &[f64], tau: f64) -> Option<(f64, Vec<f64>)> {
    let n = rows.len();
    let k = rows.first()?.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| rows[i].clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&i| y[i]).collect();
        if let Some(theta) = gauss_solve(&a, &b) {
            let obj = pinball_objective_ref(rows, y, &theta, tau);
            if best.as_ref().is_none_or(|(v, _)| obj < *v) {
                best = Some((obj, theta));
            }
        }
        // Next k-combination of 0..n in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] != i + n - k {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut out = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &pos in &idx[i..=j] {
                out[pos] = avg;
            }
            i = j + 1;
        }
        out
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = ra.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..ra.len() {
        cov += (ra[i] - mean) * (rb[i] - mean);
        va += (ra[i] - mean).powi(2);
        vb += (rb[i] - mean).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}
