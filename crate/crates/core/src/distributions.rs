//! Parameter types, samplers and log-densities for the frequency, severity and
//! posterior families.
//!
//! Parameter values are validated at construction; a constructed value is always
//! samplable. Samplers draw only from the caller's [`RngStream`].
//!
//! Inverse chi-squared convention: `InvChiSq(ν, β)` is the law of `β / W` with
//! `W ~ χ²_ν`, i.e. density `∝ x^(−ν/2−1) · exp(−β / (2x))`. Under this form the
//! Normal–inverse-chi-squared update is conjugate and the non-informative joint
//! posterior mode coincides with the lognormal MLE.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erf_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::RngStream;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(what()))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    check(v.is_finite() && v > 0.0, || {
        format!("{name} must be finite and > 0, got {v}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonParams {
    lambda: f64,
}

impl PoissonParams {
    pub fn new(lambda: f64) -> Result<Self> {
        positive("poisson lambda", lambda)?;
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sampler(&self) -> PoissonSampler {
        PoissonSampler(rand_distr::Poisson::new(self.lambda).expect("validated lambda"))
    }

    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        self.sampler().sample(rng)
    }

    pub fn log_pmf(&self, n: u64) -> f64 {
        let n = n as f64;
        -self.lambda + n * self.lambda.ln() - ln_gamma(n + 1.0)
    }
}

/// Prepared Poisson sampler, built once per rate.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSampler(rand_distr::Poisson<f64>);

impl PoissonSampler {
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        self.0.sample(rng) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalParams {
    mu: f64,
    sigma_sq: f64,
}

impl LognormalParams {
    pub fn new(mu: f64, sigma_sq: f64) -> Result<Self> {
        check(mu.is_finite(), || format!("lognormal mu must be finite, got {mu}"))?;
        positive("lognormal sigma^2", sigma_sq)?;
        Ok(Self { mu, sigma_sq })
    }

    /// Convenience for the `LN(μ, σ)` notation where the second argument is the
    /// log-scale standard deviation.
    pub fn from_mu_sigma(mu: f64, sigma: f64) -> Result<Self> {
        positive("lognormal sigma", sigma)?;
        Self::new(mu, sigma * sigma)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma_sq).exp()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.mu + self.sigma() * standard_normal_quantile(p)).exp()
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (self.mu + self.sigma() * z).exp()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let y = x.ln();
        -y - 0.5 * (2.0 * PI * self.sigma_sq).ln() - (y - self.mu).powi(2) / (2.0 * self.sigma_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoParams {
    xi: f64,
    threshold: f64,
}

impl ParetoParams {
    pub fn new(xi: f64, threshold: f64) -> Result<Self> {
        positive("pareto tail index xi", xi)?;
        positive("pareto threshold L", threshold)?;
        Ok(Self { xi, threshold })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `Lξ/(ξ−1)` for `ξ > 1`, infinite otherwise.
    pub fn mean(&self) -> f64 {
        if self.xi > 1.0 {
            self.threshold * self.xi / (self.xi - 1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.threshold {
            0.0
        } else {
            1.0 - (x / self.threshold).powf(-self.xi)
        }
    }

    /// Inverse CDF: `L·(1−u)^(−1/ξ)` for `u ∈ [0, 1)`.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        self.threshold * (1.0 - u).powf(-1.0 / self.xi)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile(rng.uniform())
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x >= self.threshold) {
            return f64::NEG_INFINITY;
        }
        self.xi.ln() - self.threshold.ln() - (self.xi + 1.0) * (x / self.threshold).ln()
    }
}

/// Gamma law with shape `α` and scale `β` (mean `αβ`, variance `αβ²`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    shape: f64,
    scale: f64,
}

impl GammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        positive("gamma shape", shape)?;
        positive("gamma scale", scale)?;
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    /// Marsaglia–Tsang squeeze/rejection; shapes below one use the
    /// `G(α+1)·U^(1/α)` boost.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        rand_distr::Gamma::new(self.shape, self.scale)
            .expect("validated gamma")
            .sample(rng)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x.is_infinite() {
            1.0
        } else {
            gamma_lr(self.shape, x / self.scale)
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else if x.is_infinite() {
            0.0
        } else {
            gamma_ur(self.shape, x / self.scale)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let mut hi = self.mean() + 10.0 * self.variance().sqrt();
        while self.cdf(hi) < p {
            hi *= 2.0;
        }
        bisect(|x| self.cdf(x), p, 0.0, hi)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            // shape == 1 has a finite density at the origin
            if x == 0.0 && self.shape == 1.0 {
                return -self.scale.ln();
            }
            return f64::NEG_INFINITY;
        }
        (self.shape - 1.0) * x.ln() - x / self.scale - ln_gamma(self.shape) - self.shape * self.scale.ln()
    }
}

/// Scaled inverse chi-squared, `β / χ²_ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvChiSqParams {
    dof: f64,
    scale_beta: f64,
}

impl InvChiSqParams {
    pub fn new(dof: f64, scale_beta: f64) -> Result<Self> {
        positive("inverse chi-squared dof", dof)?;
        positive("inverse chi-squared beta", scale_beta)?;
        Ok(Self { dof, scale_beta })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn scale_beta(&self) -> f64 {
        self.scale_beta
    }

    fn chi_sq(&self) -> GammaParams {
        GammaParams {
            shape: 0.5 * self.dof,
            scale: 2.0,
        }
    }

    /// `β/(ν−2)` for `ν > 2`.
    pub fn mean(&self) -> f64 {
        if self.dof > 2.0 {
            self.scale_beta / (self.dof - 2.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.scale_beta / self.chi_sq().sample(rng)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.chi_sq().sf(self.scale_beta / x)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.scale_beta / self.chi_sq().quantile(1.0 - p)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let half = 0.5 * self.dof;
        half * (0.5 * self.scale_beta).ln() - ln_gamma(half) - (half + 1.0) * x.ln()
            - self.scale_beta / (2.0 * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    mean: f64,
    variance: f64,
}

impl NormalParams {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        check(mean.is_finite(), || format!("normal mean must be finite, got {mean}"))?;
        positive("normal variance", variance)?;
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.variance.sqrt() * z
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        -0.5 * (2.0 * PI * self.variance).ln() - (x - self.mean).powi(2) / (2.0 * self.variance)
    }
}

/// Student-t with location and scale: `center + scale·T_ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedTParams {
    dof: f64,
    center: f64,
    scale: f64,
}

impl ShiftedTParams {
    pub fn new(dof: f64, center: f64, scale: f64) -> Result<Self> {
        positive("t dof", dof)?;
        check(center.is_finite(), || format!("t center must be finite, got {center}"))?;
        positive("t scale", scale)?;
        Ok(Self { dof, center, scale })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let nu = self.dof;
        let t = (x - self.center) / self.scale;
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - self.scale.ln()
            - 0.5 * (nu + 1.0) * (1.0 + t * t / nu).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let nu = self.dof;
        let t = (x - self.center) / self.scale;
        if t == 0.0 {
            return 0.5;
        }
        let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t * t));
        if t > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let mut w = self.scale;
        while self.cdf(self.center - w) > p || self.cdf(self.center + w) < p {
            w *= 2.0;
        }
        bisect(|x| self.cdf(x), p, self.center - w, self.center + w)
    }
}

/// Family-tagged parameters for density evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Poisson(PoissonParams),
    Lognormal(LognormalParams),
    Pareto(ParetoParams),
    Gamma(GammaParams),
    InvChiSq(InvChiSqParams),
    Normal(NormalParams),
}

impl Family {
    /// Natural-log density (or mass, for Poisson) at `x`.
    ///
    /// Points outside the support, including non-integer counts for Poisson,
    /// give negative infinity.
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            Family::Poisson(p) => {
                if x >= 0.0 && x.fract() == 0.0 && x.is_finite() {
                    p.log_pmf(x as u64)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Family::Lognormal(p) => p.log_pdf(x),
            Family::Pareto(p) => p.log_pdf(x),
            Family::Gamma(p) => p.log_pdf(x),
            Family::InvChiSq(p) => p.log_pdf(x),
            Family::Normal(p) => p.log_pdf(x),
        }
    }
}

pub fn standard_normal_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0)
}

/// Inverts a monotone CDF on `[lo, hi]` by bisection to full double precision.
pub(crate) fn bisect(cdf: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const N: usize = 100_000;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn poisson_moments() {
        let p = PoissonParams::new(10.0).unwrap();
        let s = p.sampler();
        let mut rng = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..N).map(|_| s.sample(&mut rng) as f64).collect();
        let (m, v) = moments(&xs);
        assert!((m - 10.0).abs() < 3.0 * (10.0 / N as f64).sqrt(), "mean {m}");
        assert!((v / 10.0 - 1.0).abs() < 0.05, "var {v}");
    }

    #[test]
    fn lognormal_log_moments() {
        let p = LognormalParams::new(1.0, 4.0).unwrap();
        let mut rng = RngStream::new(2, 0);
        let ys: Vec<f64> = (0..N)
            .map(|_| {
                let x = p.sample(&mut rng);
                assert!(x > 0.0);
                x.ln()
            })
            .collect();
        let (m, v) = moments(&ys);
        assert!((m - 1.0).abs() < 3.0 * 2.0 / (N as f64).sqrt(), "mean {m}");
        assert!((v / 4.0 - 1.0).abs() < 0.05, "var {v}");
    }

    #[test]
    fn pareto_forced_uniforms() {
        let p = ParetoParams::new(2.0, 1.0).unwrap();
        assert_relative_eq!(p.quantile(0.75), 2.0, max_relative = 1e-15);
        assert_eq!(p.quantile(0.0), 1.0);
    }

    #[test]
    fn pareto_mean_and_support() {
        let p = ParetoParams::new(2.0, 1.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        let xs: Vec<f64> = (0..N).map(|_| p.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x >= 1.0));
        let (m, _) = moments(&xs);
        assert!((m / 2.0 - 1.0).abs() < 0.10, "mean {m}");
    }

    #[test]
    fn pareto_cdf_recovers_uniform() {
        let p = ParetoParams::new(2.7, 3.5).unwrap();
        let mut rng = RngStream::new(4, 0);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((p.cdf(p.quantile(u)) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_moments() {
        let p = GammaParams::new(6.0, 1.0 / 3.0).unwrap();
        let mut rng = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..N).map(|_| p.sample(&mut rng)).collect();
        let (m, v) = moments(&xs);
        assert!((m - 2.0).abs() < 3.0 * (6.0 / 9.0 / N as f64).sqrt(), "mean {m}");
        assert!((v / (2.0 / 3.0) - 1.0).abs() < 0.05, "var {v}");
    }

    #[test]
    fn gamma_shape_one_is_exponential() {
        let p = GammaParams::new(1.0, 2.5).unwrap();
        let mut rng = RngStream::new(6, 0);
        let xs: Vec<f64> = (0..N).map(|_| p.sample(&mut rng)).collect();
        let (m, _) = moments(&xs);
        assert!((m - 2.5).abs() < 5.0 * 2.5 / (N as f64).sqrt());
    }

    #[test]
    fn gamma_small_shape_mean() {
        let p = GammaParams::new(0.3, 2.0).unwrap();
        let mut rng = RngStream::new(7, 0);
        let xs: Vec<f64> = (0..N).map(|_| p.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0));
        let (m, _) = moments(&xs);
        let se = (p.variance() / N as f64).sqrt();
        assert!((m - 0.6).abs() < 5.0 * se, "mean {m}");
    }

    #[test]
    fn inv_chi_sq_mean() {
        let p = InvChiSqParams::new(10.0, 8.0).unwrap();
        let mut rng = RngStream::new(8, 0);
        let xs: Vec<f64> = (0..N).map(|_| p.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0));
        let (m, _) = moments(&xs);
        assert!((m - 1.0).abs() < 0.05, "mean {m}");
    }

    #[test]
    fn inv_chi_sq_median_brute_force() {
        // oracle: 10^6 chi-squared(4) draws built from exponentials (χ²_4 = 2·(E1+E2))
        let mut rng = RngStream::new(9, 1);
        let mut chi: Vec<f64> = (0..1_000_000)
            .map(|_| -2.0 * ((1.0 - rng.uniform()).ln() + (1.0 - rng.uniform()).ln()))
            .collect();
        chi.sort_unstable_by(f64::total_cmp);
        let oracle = 4.0 / chi[chi.len() / 2];

        let p = InvChiSqParams::new(4.0, 4.0).unwrap();
        let mut rng = RngStream::new(9, 2);
        let mut xs: Vec<f64> = (0..N).map(|_| p.sample(&mut rng)).collect();
        xs.sort_unstable_by(f64::total_cmp);
        let median = xs[N / 2];
        assert!((median / oracle - 1.0).abs() < 0.05, "{median} vs {oracle}");
        assert!((oracle - 1.19).abs() < 0.01);
        assert_relative_eq!(p.quantile(0.5), oracle, max_relative = 5e-3);
    }

    #[test]
    fn hand_evaluated_log_densities() {
        let ln = Family::Lognormal(LognormalParams::new(0.0, 1.0).unwrap());
        assert_relative_eq!(ln.log_density(1.0), -(2.0 * PI).sqrt().ln(), max_relative = 1e-14);
        assert_relative_eq!(ln.log_density(1.0), -0.918_938_533, epsilon = 1e-8);
        let par = Family::Pareto(ParetoParams::new(2.0, 1.0).unwrap());
        assert_relative_eq!(par.log_density(1.0), 2f64.ln(), max_relative = 1e-14);
        let poi = Family::Poisson(PoissonParams::new(1.0).unwrap());
        assert_relative_eq!(poi.log_density(0.0), -1.0, max_relative = 1e-14);
    }

    #[test]
    fn out_of_support_is_negative_infinity() {
        let cases = [
            (Family::Lognormal(LognormalParams::new(0.0, 1.0).unwrap()), -1.0),
            (Family::Pareto(ParetoParams::new(2.0, 1.0).unwrap()), 0.5),
            (Family::Gamma(GammaParams::new(2.0, 1.0).unwrap()), -0.1),
            (Family::InvChiSq(InvChiSqParams::new(3.0, 1.0).unwrap()), 0.0),
            (Family::Poisson(PoissonParams::new(3.0).unwrap()), 1.5),
            (Family::Poisson(PoissonParams::new(3.0).unwrap()), -1.0),
        ];
        for (f, x) in cases {
            assert_eq!(f.log_density(x), f64::NEG_INFINITY, "{f:?} at {x}");
        }
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn continuous_densities_integrate_to_one() {
        let fams = [
            (Family::Lognormal(LognormalParams::new(0.5, 0.49).unwrap()), 1e-9_f64, 200.0_f64),
            (Family::Pareto(ParetoParams::new(3.0, 2.0).unwrap()), 2.0, 2e4),
            (Family::Gamma(GammaParams::new(6.0, 0.5).unwrap()), 1e-9, 60.0),
            (Family::InvChiSq(InvChiSqParams::new(10.0, 8.0).unwrap()), 1e-6, 2000.0),
            (Family::Normal(NormalParams::new(1.0, 4.0).unwrap()), -30.0, 30.0),
        ];
        for (f, a, b) in fams {
            // log-spaced substitution handles the long right tails
            let total = if a > 0.0 {
                simpson(|u| { let x = u.exp(); f.log_density(x).exp() * x }, a.ln(), b.ln(), 200_000)
            } else {
                simpson(|x| f.log_density(x).exp(), a, b, 200_000)
            };
            assert!((total - 1.0).abs() < 1e-3, "{f:?}: {total}");
        }
    }

    #[test]
    fn poisson_mass_sums_to_one() {
        let p = Family::Poisson(PoissonParams::new(10.0).unwrap());
        let total: f64 = (0..200).map(|n| p.log_density(n as f64).exp()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gamma_quantile_inverts_cdf() {
        let g = GammaParams::new(4004.0, 1.0 / 400.0).unwrap();
        for p in [0.025, 0.5, 0.975] {
            assert_relative_eq!(g.cdf(g.quantile(p)), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn t_quantile_inverts_cdf() {
        let t = ShiftedTParams::new(1.0, 1.0, 0.5f64.sqrt()).unwrap();
        // Cauchy: exact quantile center + scale·tan(π(p−½))
        for p in [0.025, 0.3, 0.975] {
            let exact = 1.0 + 0.5f64.sqrt() * (PI * (p - 0.5)).tan();
            assert_relative_eq!(t.quantile(p), exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(PoissonParams::new(0.0).is_err());
        assert!(PoissonParams::new(f64::NAN).is_err());
        assert!(LognormalParams::new(0.0, 0.0).is_err());
        assert!(ParetoParams::new(2.0, 0.0).is_err());
        assert!(ParetoParams::new(-1.0, 1.0).is_err());
        assert!(GammaParams::new(1.0, -1.0).is_err());
        assert!(InvChiSqParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn z_quantile() {
        assert_relative_eq!(standard_normal_quantile(0.975), 1.959_963_984_540_054, epsilon = 1e-12);
        assert_eq!(standard_normal_quantile(0.5), 0.0);
    }
}
