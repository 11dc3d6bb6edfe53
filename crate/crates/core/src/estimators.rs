//! Maximum-likelihood point estimates for the conditional capital path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `λ̂ = mean(N)`. An all-zero history gives `λ̂ = 0`, which is reported here
/// but rejected by the simulation engine (the Poisson rate must be positive).
pub fn mle_poisson(counts: &[u64]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InsufficientData(
            "at least one observation year is required to estimate lambda".into(),
        ));
    }
    Ok(counts.iter().sum::<u64>() as f64 / counts.len() as f64)
}

/// `(μ̂, σ̂²)`: mean and divide-by-n variance of the log-severities.
pub fn mle_lognormal(severities: &[f64]) -> Result<(f64, f64)> {
    if severities.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "lognormal MLE needs at least 2 severities, got {}",
            severities.len()
        )));
    }
    if let Some(x) = severities.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lognormal severities must be finite and > 0, got {x}"
        )));
    }
    let n = severities.len() as f64;
    let mu = severities.iter().map(|x| x.ln()).sum::<f64>() / n;
    let var = severities.iter().map(|x| (x.ln() - mu).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::InsufficientData(
            "log-severities have zero variance".into(),
        ));
    }
    Ok((mu, var))
}

/// `ξ̂ = n / Σ ln(Xᵢ/L)`.
pub fn mle_pareto(severities: &[f64], threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "pareto threshold must be finite and > 0, got {threshold}"
        )));
    }
    if severities.is_empty() {
        return Err(Error::InsufficientData(
            "pareto MLE needs at least one severity".into(),
        ));
    }
    let mut s = 0.0;
    for &x in severities {
        if !(x >= threshold) || !x.is_finite() {
            return Err(Error::SeverityBelowThreshold {
                value: x,
                threshold,
            });
        }
        s += (x / threshold).ln();
    }
    if !(s > 0.0) {
        return Err(Error::InsufficientData(
            "all severities equal the threshold; tail index is not identified".into(),
        ));
    }
    Ok(severities.len() as f64 / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SeverityMle {
    Lognormal { mu: f64, sigma_sq: f64 },
    Pareto { xi: f64, threshold: f64 },
}

/// Point estimates for one risk cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleReport {
    pub lambda: f64,
    pub severity: SeverityMle,
    pub years: usize,
    pub events: usize,
}

impl MleReport {
    /// `(name, value)` pairs in reporting order; σ is reported alongside σ².
    pub fn estimates(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("lambda", self.lambda)];
        match self.severity {
            SeverityMle::Lognormal { mu, sigma_sq } => {
                v.push(("mu", mu));
                v.push(("sigma", sigma_sq.sqrt()));
                v.push(("sigma_sq", sigma_sq));
            }
            SeverityMle::Pareto { xi, .. } => v.push(("xi", xi)),
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{
        noninformative_lognormal, noninformative_pareto, noninformative_poisson, posterior_mode,
        PosteriorState,
    };
    use crate::distributions::{LognormalParams, ParetoParams};
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn poisson_cases() {
        assert_eq!(mle_poisson(&[2, 3]).unwrap(), 2.5);
        assert_eq!(mle_poisson(&[0, 0, 0]).unwrap(), 0.0);
        let mut c = vec![10u64; 400];
        c[7] = 13;
        assert_relative_eq!(mle_poisson(&c).unwrap(), 10.0075);
        assert!(mle_poisson(&[]).is_err());
    }

    #[test]
    fn lognormal_cases() {
        let (mu, s2) = mle_lognormal(&[1.0, E * E]).unwrap();
        assert_relative_eq!(mu, 1.0, max_relative = 1e-15);
        assert_relative_eq!(s2, 1.0, max_relative = 1e-15);
        assert!(mle_lognormal(&[3.0, 3.0]).is_err());
        assert!(mle_lognormal(&[3.0]).is_err());
        assert!(mle_lognormal(&[3.0, -1.0]).is_err());
    }

    #[test]
    fn lognormal_large_sample() {
        let ln = LognormalParams::from_mu_sigma(1.0, 2.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| ln.sample(&mut rng)).collect();
        let (mu, s2) = mle_lognormal(&xs).unwrap();
        let se_mu = 2.0 / (xs.len() as f64).sqrt();
        assert!((mu - 1.0).abs() < 4.0 * se_mu, "{mu}");
        assert!((s2.sqrt() - 2.0).abs() < 4.0 * 2.0 / (2.0 * xs.len() as f64).sqrt(), "{s2}");
    }

    #[test]
    fn pareto_cases() {
        assert_relative_eq!(mle_pareto(&[E, E * E], 1.0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(mle_pareto(&[E], 1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert!(matches!(
            mle_pareto(&[0.5], 1.0),
            Err(Error::SeverityBelowThreshold { .. })
        ));
        assert!(mle_pareto(&[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn pareto_large_sample() {
        let p = ParetoParams::new(2.0, 1.0).unwrap();
        let mut rng = RngStream::new(4, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| p.sample(&mut rng)).collect();
        let xi = mle_pareto(&xs, 1.0).unwrap();
        assert!((xi - 2.0).abs() < 4.0 * 2.0 / (xs.len() as f64).sqrt(), "{xi}");
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    proptest! {
        #[test]
        fn mle_equals_noninformative_mode(
            counts in prop::collection::vec(0u64..60, 1..50),
            logs in prop::collection::vec(-4.0f64..6.0, 4..60),
            excess in prop::collection::vec(0.0f64..5.0, 1..60),
            l in 0.01f64..1000.0,
        ) {
            let lam = mle_poisson(&counts).unwrap();
            let mode = posterior_mode(&PosteriorState::poisson_rate(noninformative_poisson(&counts).unwrap())).unwrap();
            prop_assert!(rel(lam, mode[0]) < 1e-12 || (lam == 0.0 && mode[0] == 0.0));

            let xs: Vec<f64> = logs.iter().map(|y| y.exp()).collect();
            if let Ok((mu, s2)) = mle_lognormal(&xs) {
                let post = noninformative_lognormal(&logs).unwrap();
                let m = posterior_mode(&PosteriorState::lognormal(post)).unwrap();
                prop_assert!(rel(mu, m[0]) < 1e-10 || (mu - m[0]).abs() < 1e-12);
                prop_assert!(rel(s2, m[1]) < 1e-10);
            }

            let ps: Vec<f64> = excess.iter().map(|e| l * e.exp()).collect();
            if let Ok(xi) = mle_pareto(&ps, l) {
                let post = noninformative_pareto(&ps, l).unwrap();
                let m = posterior_mode(&PosteriorState::pareto_tail(post, l).unwrap()).unwrap();
                prop_assert!(rel(xi, m[0]) < 1e-12);
            }
        }

        #[test]
        fn pareto_scale_equivariance(excess in prop::collection::vec(0.01f64..5.0, 1..40), c in 0.001f64..1000.0) {
            let xs: Vec<f64> = excess.iter().map(|e| e.exp()).collect();
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let a = mle_pareto(&xs, 1.0).unwrap();
            let b = mle_pareto(&scaled, c).unwrap();
            prop_assert!(rel(a, b) < 1e-10);
        }
    }
}
