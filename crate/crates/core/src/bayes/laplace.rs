//! Gaussian approximation of a posterior around its mode.
//!
//! The mode is located by damped Newton ascent on finite-difference derivatives;
//! the covariance is the inverse of the negated Hessian at the mode (the observed
//! Fisher information).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone)]
pub struct LaplaceResult {
    pub mode: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub log_density_at_mode: f64,
    pub iterations: usize,
}

impl LaplaceResult {
    pub fn std_devs(&self) -> Vec<f64> {
        (0..self.mode.len())
            .map(|i| self.covariance[(i, i)].sqrt())
            .collect()
    }
}

fn step(x: f64) -> f64 {
    (1e-5 * x.abs()).max(1e-7)
}

fn eval<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>) -> f64 {
    f(x.as_slice())
}

fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        let h = step(x[i]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (eval(f, &xp) - eval(f, &xm)) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian with per-coordinate step `max(1e−5·|xᵢ|, 1e−7)`.
fn hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &DVector<f64>, fx: f64) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|&v| step(v)).collect();
    let mut hess = DMatrix::zeros(n, n);
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.clone();
        for &(i, d) in moves {
            y[i] += d;
        }
        eval(f, &y)
    };
    for i in 0..n {
        let fp = shifted(&[(i, h[i])]);
        let fm = shifted(&[(i, -h[i])]);
        hess[(i, i)] = (fp - 2.0 * fx + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = shifted(&[(i, h[i]), (j, h[j])]);
            let fpm = shifted(&[(i, h[i]), (j, -h[j])]);
            let fmp = shifted(&[(i, -h[i]), (j, h[j])]);
            let fmm = shifted(&[(i, -h[i]), (j, -h[j])]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Solves `(−H + τI) d = g`, raising `τ` until the system is positive definite.
fn ascent_direction(hess: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let neg = -hess.clone();
    if let Some(ch) = neg.clone().cholesky() {
        return ch.solve(g);
    }
    let n = g.len();
    let mut tau = 1e-3 * neg.diagonal().amax().max(1e-8);
    loop {
        let damped = &neg + DMatrix::identity(n, n) * tau;
        if let Some(ch) = damped.cholesky() {
            return ch.solve(g);
        }
        tau *= 10.0;
    }
}

/// Finds the mode of `log_posterior` starting from `initial_guess` and returns
/// it with covariance `(−∇² log π)⁻¹`.
///
/// `log_posterior` may return negative infinity outside the support; the line
/// search backs off from such points.
pub fn laplace_approximation<F>(log_posterior: F, initial_guess: &[f64]) -> Result<LaplaceResult>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = DVector::from_column_slice(initial_guess);
    let mut fx = eval(&log_posterior, &x);
    if !fx.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "log posterior is not finite at the initial guess {initial_guess:?}"
        )));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = gradient(&log_posterior, &x);
        let hess = hessian(&log_posterior, &x, fx);
        let d = ascent_direction(&hess, &g);

        let tiny = d
            .iter()
            .zip(x.iter())
            .all(|(di, xi)| di.abs() <= 1e-10 * xi.abs().max(1e-3));
        if tiny {
            converged = true;
            break;
        }

        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-14 {
            let cand = &x + &d * t;
            let fc = eval(&log_posterior, &cand);
            if fc.is_finite() && fc >= fx + 1e-4 * t * slope {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no ascent possible at finite-difference resolution
            converged = g.norm() <= 1e-6 * (1.0 + fx.abs());
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations });
    }

    let hess = hessian(&log_posterior, &x, fx);
    let info = -hess;
    let info = (&info + info.transpose()) * 0.5;
    let covariance = info
        .cholesky()
        .ok_or(Error::NotNegativeDefinite)?
        .inverse();
    let covariance = (&covariance + covariance.transpose()) * 0.5;

    Ok(LaplaceResult {
        mode: x.iter().copied().collect(),
        covariance,
        log_density_at_mode: fx,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GammaParams;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_log_density_is_recovered_exactly() {
        let (m, v) = (3.0, 0.7);
        let r = laplace_approximation(|x| -(x[0] - m).powi(2) / (2.0 * v), &[0.0]).unwrap();
        assert_relative_eq!(r.mode[0], m, max_relative = 1e-9);
        assert_relative_eq!(r.covariance[(0, 0)], v, max_relative = 1e-6);
    }

    #[test]
    fn gamma_mode_and_curvature() {
        // analytic: mode (α−1)β = 2.5, −d²/dx² ln f = (α−1)/x² → variance (α−1)β² = 1.25
        let g = GammaParams::new(6.0, 0.5).unwrap();
        let r = laplace_approximation(|x| g.log_pdf(x[0]), &[1.0]).unwrap();
        assert_relative_eq!(r.mode[0], 2.5, max_relative = 1e-8);
        assert_relative_eq!(r.covariance[(0, 0)], 1.25, max_relative = 1e-4);
    }

    #[test]
    fn correlated_bivariate_normal() {
        // precision [[2, 0.6], [0.6, 1]] → covariance = inverse
        let (a, b, c) = (2.0, 0.6, 1.0);
        let f = |x: &[f64]| {
            let (u, w) = (x[0] - 1.0, x[1] + 2.0);
            -0.5 * (a * u * u + 2.0 * b * u * w + c * w * w)
        };
        let r = laplace_approximation(f, &[5.0, 5.0]).unwrap();
        let det = a * c - b * b;
        assert_relative_eq!(r.mode[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(r.mode[1], -2.0, epsilon = 1e-8);
        assert_relative_eq!(r.covariance[(0, 0)], c / det, max_relative = 1e-5);
        assert_relative_eq!(r.covariance[(0, 1)], -b / det, max_relative = 1e-5);
        assert_relative_eq!(r.covariance[(1, 1)], a / det, max_relative = 1e-5);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let g = GammaParams::new(6.0, 0.5).unwrap();
        assert!(laplace_approximation(|x| g.log_pdf(x[0]), &[-1.0]).is_err());
    }

    #[test]
    fn unbounded_objective_does_not_converge() {
        let r = laplace_approximation(|x| x[0], &[0.0]);
        assert!(matches!(r, Err(Error::NoConvergence { .. })), "{r:?}");
    }

    #[test]
    fn saddle_point_is_not_a_mode() {
        // flat in one direction: no negative-definite Hessian at any point
        let r = laplace_approximation(|x| -(x[0] * x[0]), &[1.0, 1.0]);
        assert!(r.is_err(), "{r:?}");
    }
}
