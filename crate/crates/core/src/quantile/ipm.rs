//! Primal-dual interior-point solver for quantile regression.
//!
//! The fit is posed as the bounded-variable LP dual of the pinball-loss
//! problem: minimize `c'x` subject to `Ax = b`, `0 <= x <= 1`, with
//! `A = X'` (k x n), `b = (1-tau) X' 1`, and `c = -y`. The iterates stay
//! exactly feasible (the start satisfies both equality systems), so only
//! complementarity is driven to zero, Newton steps with a Mehrotra
//! predictor-corrector. The regression coefficients are the negated
//! multipliers on `Ax = b` at the optimum.

use crate::linalg::{to_na, Matrix};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Fraction of the distance to the boundary taken each step.
const STEP_SCALE: f64 = 0.99995;
/// Floor applied when splitting the initial dual residual into z and w.
const INIT_FLOOR: f64 = 1e-8;

pub(crate) enum IpmFailure {
    /// Iteration cap reached, or a Newton system could not be factored.
    NonConvergence { iterations: usize, rel_gap: f64 },
}

/// Cholesky solve with escalating diagonal jitter for nearly singular
/// systems; gives up once the jitter reaches 1e-4 of the diagonal scale.
fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    loop {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(mm) {
            return Some(ch.solve(rhs));
        }
        jitter = if jitter == 0.0 { scale * 1e-14 } else { jitter * 100.0 };
        if jitter > scale * 1e-4 {
            return None;
        }
    }
}

/// Largest step keeping `v + step * dv` non-negative, before scaling.
fn boundary_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut step = f64::INFINITY;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            step = step.min(-v[i] / dv[i]);
        }
    }
    step
}

/// Solves the quantile-regression LP for a full-column-rank `x` (n x k,
/// n >= k) and returns the coefficient vector. `tol` bounds the relative
/// duality gap.
pub(crate) fn solve(
    x: &Matrix,
    y: &[f64],
    tau: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>, IpmFailure> {
    let n = x.rows();
    let k = x.cols();
    debug_assert_eq!(y.len(), n);
    let a = to_na(&x.transpose());
    let at = a.transpose();
    let c = DVector::from_iterator(n, y.iter().map(|v| -v));

    let mut xv = DVector::from_element(n, 1.0 - tau);
    let mut sv = DVector::from_element(n, tau);
    let fail = |iterations, rel_gap| IpmFailure::NonConvergence { iterations, rel_gap };

    // Start the multipliers at the least-squares value, so the initial
    // dual residual is the (negated) least-squares residual.
    let aat = &a * &at;
    let mut ydual = solve_spd(&aat, &(&a * &c)).ok_or_else(|| fail(0, f64::INFINITY))?;
    let r0 = &c - &at * &ydual;
    let floor = INIT_FLOOR.max(tol);
    let mut z = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for i in 0..n {
        let bump = if r0[i].abs() < floor { floor } else { 0.0 };
        z[i] = r0[i].max(0.0) + bump;
        w[i] = (-r0[i]).max(0.0) + bump;
    }

    let mut gap = xv.dot(&z) + sv.dot(&w);
    let mut iterations = 0;
    loop {
        let rel_gap = gap / (1.0 + c.dot(&xv).abs());
        if rel_gap <= tol {
            return Ok((0..k).map(|i| -ydual[i]).collect());
        }
        if iterations >= max_iter {
            return Err(fail(iterations, rel_gap));
        }
        iterations += 1;

        let mut d = DVector::zeros(n);
        for i in 0..n {
            d[i] = 1.0 / (z[i] / xv[i] + w[i] / sv[i]).max(f64::MIN_POSITIVE);
        }
        let zw = &z - &w;
        let mut ad = a.clone();
        for i in 0..n {
            let mut col = ad.column_mut(i);
            col *= d[i];
        }
        let ada = &ad * &at;

        // Affine (predictor) direction: target complementarity zero.
        let mut dy =
            solve_spd(&ada, &(&ad * &zw)).ok_or_else(|| fail(iterations, rel_gap))?;
        let aty = &at * &dy;
        let mut dx = DVector::zeros(n);
        let mut ds = DVector::zeros(n);
        let mut dz = DVector::zeros(n);
        let mut dw = DVector::zeros(n);
        for i in 0..n {
            dx[i] = d[i] * (aty[i] - zw[i]);
            ds[i] = -dx[i];
            dz[i] = -z[i] - z[i] / xv[i] * dx[i];
            dw[i] = -w[i] - w[i] / sv[i] * ds[i];
        }
        let mut alpha_p = (STEP_SCALE * boundary_step(&xv, &dx).min(boundary_step(&sv, &ds))).min(1.0);
        let mut alpha_d = (STEP_SCALE * boundary_step(&z, &dz).min(boundary_step(&w, &dw))).min(1.0);

        if alpha_p.min(alpha_d) < 1.0 {
            // Mehrotra corrector: recenter toward sigma*mu and compensate
            // for the second-order term of the affine step.
            let mu = gap / (2.0 * n as f64);
            let gap_aff = (&xv + alpha_p * &dx).dot(&(&z + alpha_d * &dz))
                + (&sv + alpha_p * &ds).dot(&(&w + alpha_d * &dw));
            let sigma_mu = mu * (gap_aff / gap).powi(3);
            let mut g = DVector::zeros(n);
            for i in 0..n {
                g[i] = zw[i] + sigma_mu * (1.0 / sv[i] - 1.0 / xv[i]) + dx[i] * dz[i] / xv[i]
                    - ds[i] * dw[i] / sv[i];
            }
            let dy2 = solve_spd(&ada, &(&ad * &g)).ok_or_else(|| fail(iterations, rel_gap))?;
            let aty2 = &at * &dy2;
            for i in 0..n {
                let dxi = d[i] * (aty2[i] - g[i]);
                let dsi = -dxi;
                dz[i] = (sigma_mu - dx[i] * dz[i]) / xv[i] - z[i] - z[i] / xv[i] * dxi;
                dw[i] = (sigma_mu - ds[i] * dw[i]) / sv[i] - w[i] - w[i] / sv[i] * dsi;
                dx[i] = dxi;
                ds[i] = dsi;
            }
            dy = dy2;
            alpha_p = (STEP_SCALE * boundary_step(&xv, &dx).min(boundary_step(&sv, &ds))).min(1.0);
            alpha_d = (STEP_SCALE * boundary_step(&z, &dz).min(boundary_step(&w, &dw))).min(1.0);
        }

        xv += alpha_p * &dx;
        sv += alpha_p * &ds;
        ydual += alpha_d * &dy;
        z += alpha_d * &dz;
        w += alpha_d * &dw;
        gap = xv.dot(&z) + sv.dot(&w);
        if !gap.is_finite() {
            return Err(fail(iterations, f64::INFINITY));
        }
    }
}
