//! Conjugate Bayesian inference for the frequency and severity families.
//!
//! | data                 | prior / posterior                    | parameters |
//! |----------------------|--------------------------------------|------------|
//! | annual counts        | Gamma on the Poisson rate            | `[λ]`      |
//! | log-severities       | Normal–inverse-chi-squared           | `[μ, σ²]`  |
//! | severities above `L` | Gamma on the Pareto tail index       | `[ξ]`      |
//!
//! A non-informative (improper constant) prior gives a posterior proportional to
//! the likelihood, so its mode is the maximum-likelihood estimate.

mod laplace;

pub use laplace::{laplace_approximation, LaplaceResult};

use serde::{Deserialize, Serialize};

use crate::distributions::{GammaParams, InvChiSqParams, NormalParams, ShiftedTParams};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Normal–inverse-chi-squared hyper-parameters:
/// `σ² ~ InvChiSq(ν, β)`, `μ | σ² ~ N(θ, σ²/φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NixParams {
    dof_nu: f64,
    scale_beta: f64,
    loc_theta: f64,
    prec_phi: f64,
}

impl NixParams {
    /// `ν` may be zero or negative here (an improper starting point); it must be
    /// positive before the posterior can be sampled.
    pub fn new(dof_nu: f64, scale_beta: f64, loc_theta: f64, prec_phi: f64) -> Result<Self> {
        let ok = dof_nu.is_finite()
            && scale_beta.is_finite()
            && scale_beta > 0.0
            && loc_theta.is_finite()
            && prec_phi.is_finite()
            && prec_phi > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "normal-inverse-chi-squared needs finite nu, beta > 0, finite theta, phi > 0; \
                 got ({dof_nu}, {scale_beta}, {loc_theta}, {prec_phi})"
            )));
        }
        Ok(Self {
            dof_nu,
            scale_beta,
            loc_theta,
            prec_phi,
        })
    }

    pub fn dof_nu(&self) -> f64 {
        self.dof_nu
    }

    pub fn scale_beta(&self) -> f64 {
        self.scale_beta
    }

    pub fn loc_theta(&self) -> f64 {
        self.loc_theta
    }

    pub fn prec_phi(&self) -> f64 {
        self.prec_phi
    }

    fn sigma_sq_law(&self) -> Result<InvChiSqParams> {
        InvChiSqParams::new(self.dof_nu, self.scale_beta).map_err(|_| {
            Error::InsufficientData(format!(
                "lognormal posterior with nu = {} is not samplable (need nu > 0)",
                self.dof_nu
            ))
        })
    }

    /// Joint log-density of `(μ, σ²)`.
    pub fn log_density(&self, mu: f64, sigma_sq: f64) -> f64 {
        let Ok(s2) = self.sigma_sq_law() else {
            return f64::NEG_INFINITY;
        };
        if !(sigma_sq > 0.0) {
            return f64::NEG_INFINITY;
        }
        let cond = NormalParams::new(self.loc_theta, sigma_sq / self.prec_phi)
            .expect("positive variance");
        s2.log_pdf(sigma_sq) + cond.log_pdf(mu)
    }
}

// ---------------------------------------------------------------------------
// Conjugate updates
// ---------------------------------------------------------------------------

/// Gamma prior on a Poisson rate updated with annual counts:
/// `α̂ = α + ΣNᵢ`, `β̂ = β / (1 + β·n)`.
pub fn update_poisson_gamma(prior: &GammaParams, counts: &[u64]) -> GammaParams {
    let n = counts.len() as f64;
    let total: u64 = counts.iter().sum();
    let scale = prior.scale() / (1.0 + prior.scale() * n);
    GammaParams::new(prior.shape() + total as f64, scale).expect("update keeps gamma valid")
}

/// Posterior under a flat prior on `λ`: `Gamma(ΣNᵢ + 1, 1/n)`.
pub fn noninformative_poisson(counts: &[u64]) -> Result<GammaParams> {
    if counts.is_empty() {
        return Err(Error::InsufficientData(
            "at least one observation year is required for the frequency posterior".into(),
        ));
    }
    let total: u64 = counts.iter().sum();
    GammaParams::new(total as f64 + 1.0, 1.0 / counts.len() as f64)
}

/// Mean and sum of squared deviations, with a finiteness check.
fn centered(ys: &[f64]) -> Result<(f64, f64)> {
    if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite log-severity {y}")));
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let ss = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>();
    Ok((mean, ss))
}

/// Normal–inverse-chi-squared update with log-severities `Y`.
///
/// `ν̂ = ν+n`, `φ̂ = φ+n`, `θ̂ = (φθ + nȲ)/(φ+n)` and
/// `β̂ = β + φθ² + n·mean(Y²) − (φθ+nȲ)²/(φ+n)`, evaluated in the equivalent
/// cancellation-free form `β + Σ(Y−Ȳ)² + φn/(φ+n)·(Ȳ−θ)²`.
pub fn update_lognormal(prior: &NixParams, log_severities: &[f64]) -> Result<NixParams> {
    if log_severities.is_empty() {
        return Ok(*prior);
    }
    let n = log_severities.len() as f64;
    let (mean, ss) = centered(log_severities)?;
    let phi = prior.prec_phi;
    let theta = prior.loc_theta;
    NixParams::new(
        prior.dof_nu + n,
        prior.scale_beta + ss + phi * n / (phi + n) * (mean - theta).powi(2),
        (phi * theta + n * mean) / (phi + n),
        phi + n,
    )
}

/// Posterior under flat priors on `(μ, σ²)`: `(ν̂, β̂, θ̂, φ̂) = (n−3, Σ(Y−Ȳ)², Ȳ, n)`.
///
/// Requires `n ≥ 4` so that `ν̂ ≥ 1` and the posterior is proper.
pub fn noninformative_lognormal(log_severities: &[f64]) -> Result<NixParams> {
    let n = log_severities.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "insufficient data for non-informative lognormal posterior: {n} severities, need at least 4"
        )));
    }
    let (mean, ss) = centered(log_severities)?;
    if !(ss > 0.0) {
        return Err(Error::InsufficientData(
            "log-severities have zero sample variance".into(),
        ));
    }
    NixParams::new(n as f64 - 3.0, ss, mean, n as f64)
}

/// Marginal posterior of `μ`: shifted t with `ν̂` degrees of freedom, center `θ̂`
/// and scale `√(β̂/(φ̂ν̂))`.
pub fn marginal_mu(posterior: &NixParams) -> Result<ShiftedTParams> {
    if !(posterior.dof_nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "marginal of mu needs nu > 0, got {}",
            posterior.dof_nu
        )));
    }
    ShiftedTParams::new(
        posterior.dof_nu,
        posterior.loc_theta,
        (posterior.scale_beta / (posterior.prec_phi * posterior.dof_nu)).sqrt(),
    )
}

fn sum_log_excess(severities: &[f64], threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "pareto threshold must be finite and > 0, got {threshold}"
        )));
    }
    let mut total = 0.0;
    for &x in severities {
        if !(x >= threshold) || !x.is_finite() {
            return Err(Error::SeverityBelowThreshold {
                value: x,
                threshold,
            });
        }
        total += (x / threshold).ln();
    }
    Ok(total)
}

/// Gamma prior on the Pareto tail index: `α̂ = α+n`, `1/β̂ = 1/β + Σ ln(Xᵢ/L)`.
pub fn update_pareto(prior: &GammaParams, severities: &[f64], threshold: f64) -> Result<GammaParams> {
    let s = sum_log_excess(severities, threshold)?;
    GammaParams::new(
        prior.shape() + severities.len() as f64,
        1.0 / (1.0 / prior.scale() + s),
    )
}

/// Posterior under a flat prior on `ξ`: `Gamma(n+1, 1/Σ ln(Xᵢ/L))`.
pub fn noninformative_pareto(severities: &[f64], threshold: f64) -> Result<GammaParams> {
    if severities.is_empty() {
        return Err(Error::InsufficientData(
            "at least one severity is required for the tail posterior".into(),
        ));
    }
    let s = sum_log_excess(severities, threshold)?;
    if !(s > 0.0) {
        return Err(Error::InsufficientData(
            "all severities equal the threshold; tail index is not identified".into(),
        ));
    }
    GammaParams::new(severities.len() as f64 + 1.0, 1.0 / s)
}

// ---------------------------------------------------------------------------
// Posterior state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorFamily {
    PoissonRate,
    Lognormal,
    ParetoTail,
}

impl PosteriorFamily {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            PosteriorFamily::PoissonRate => &["lambda"],
            PosteriorFamily::Lognormal => &["mu", "sigma_sq"],
            PosteriorFamily::ParetoTail => &["xi"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Conjugate {
    PoissonRate(GammaParams),
    Lognormal(NixParams),
    ParetoTail { tail: GammaParams, threshold: f64 },
}

/// Closed interval `[lower, upper]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || !(lower < upper) {
            return Err(Error::InvalidParameter(format!(
                "truncation bounds need lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn at_least(lower: f64) -> Result<Self> {
        Self::new(lower, f64::INFINITY)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }

    fn is_unbounded(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }
}

/// One parameter draw from a posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParameterDraw {
    Rate(f64),
    Lognormal { mu: f64, sigma_sq: f64 },
    Tail(f64),
}

impl ParameterDraw {
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            ParameterDraw::Rate(l) => vec![l],
            ParameterDraw::Lognormal { mu, sigma_sq } => vec![mu, sigma_sq],
            ParameterDraw::Tail(x) => vec![x],
        }
    }
}

/// Draws taken from a fixed probe stream when a truncation is applied.
const PROBE_DRAWS: usize = 100_000;
const MIN_ACCEPTANCE: f64 = 1e-4;
const PROBE_SEED: u64 = 0x7275_6e63_6174_6564;
/// Draws used for credible intervals that have no closed form.
const INTERVAL_DRAWS: usize = 1_000_000;
const MAX_REJECTIONS: usize = 100_000_000;

/// Conjugate posterior `π(θ | Y)`, optionally truncated to a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorState {
    conjugate: Conjugate,
    truncation: Option<Vec<Interval>>,
    acceptance: f64,
}

impl PosteriorState {
    pub fn poisson_rate(posterior: GammaParams) -> Self {
        Self::untruncated(Conjugate::PoissonRate(posterior))
    }

    pub fn lognormal(posterior: NixParams) -> Self {
        Self::untruncated(Conjugate::Lognormal(posterior))
    }

    pub fn pareto_tail(posterior: GammaParams, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "pareto threshold must be finite and > 0, got {threshold}"
            )));
        }
        Ok(Self::untruncated(Conjugate::ParetoTail {
            tail: posterior,
            threshold,
        }))
    }

    fn untruncated(conjugate: Conjugate) -> Self {
        Self {
            conjugate,
            truncation: None,
            acceptance: 1.0,
        }
    }

    pub fn family(&self) -> PosteriorFamily {
        match self.conjugate {
            Conjugate::PoissonRate(_) => PosteriorFamily::PoissonRate,
            Conjugate::Lognormal(_) => PosteriorFamily::Lognormal,
            Conjugate::ParetoTail { .. } => PosteriorFamily::ParetoTail,
        }
    }

    pub fn conjugate(&self) -> &Conjugate {
        &self.conjugate
    }

    pub fn truncation(&self) -> Option<&[Interval]> {
        self.truncation.as_deref()
    }

    /// Posterior mass inside the truncation box (exact for Gamma posteriors,
    /// probe estimate for the lognormal one). One when untruncated.
    pub fn acceptance(&self) -> f64 {
        self.acceptance
    }

    pub fn dimension(&self) -> usize {
        self.family().parameter_names().len()
    }

    fn in_bounds(&self, draw: &ParameterDraw) -> bool {
        match &self.truncation {
            None => true,
            Some(b) => match *draw {
                ParameterDraw::Rate(x) | ParameterDraw::Tail(x) => b[0].contains(x),
                ParameterDraw::Lognormal { mu, sigma_sq } => {
                    b[0].contains(mu) && b[1].contains(sigma_sq)
                }
            },
        }
    }

    fn sample_untruncated(&self, rng: &mut RngStream) -> Result<ParameterDraw> {
        Ok(match &self.conjugate {
            Conjugate::PoissonRate(g) => ParameterDraw::Rate(g.sample(rng)),
            Conjugate::ParetoTail { tail, .. } => ParameterDraw::Tail(tail.sample(rng)),
            Conjugate::Lognormal(nix) => {
                let sigma_sq = nix.sigma_sq_law()?.sample(rng);
                let mu = NormalParams::new(nix.loc_theta, sigma_sq / nix.prec_phi)
                    .map_err(|e| Error::InvalidParameter(format!("posterior draw: {e}")))?
                    .sample(rng);
                ParameterDraw::Lognormal { mu, sigma_sq }
            }
        })
    }

    /// One parameter draw. Lognormal draws take `σ²` from `InvChiSq(ν̂, β̂)` and
    /// then `μ` from `N(θ̂, σ²/φ̂)`. Truncated posteriors use rejection.
    pub fn sample(&self, rng: &mut RngStream) -> Result<ParameterDraw> {
        for _ in 0..MAX_REJECTIONS {
            let d = self.sample_untruncated(rng)?;
            if self.in_bounds(&d) {
                return Ok(d);
            }
        }
        Err(Error::ZeroMass(format!(
            "no draw accepted in {MAX_REJECTIONS} attempts"
        )))
    }

    /// Joint log posterior density (unnormalized under truncation).
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dimension() {
            return f64::NEG_INFINITY;
        }
        if let Some(b) = &self.truncation {
            if !theta.iter().zip(b).all(|(x, i)| i.contains(*x)) {
                return f64::NEG_INFINITY;
            }
        }
        match &self.conjugate {
            Conjugate::PoissonRate(g) | Conjugate::ParetoTail { tail: g, .. } => g.log_pdf(theta[0]),
            Conjugate::Lognormal(nix) => nix.log_density(theta[0], theta[1]),
        }
    }

    /// Posterior probability that the Pareto tail index is at most one, which
    /// makes the predictive annual loss mean infinite. `None` for other families.
    pub fn infinite_mean_probability(&self) -> Option<f64> {
        let Conjugate::ParetoTail { tail, .. } = &self.conjugate else {
            return None;
        };
        let Some(b) = &self.truncation else {
            return Some(tail.cdf(1.0));
        };
        let (lo, hi) = (b[0].lower.max(0.0), b[0].upper);
        if lo >= 1.0 {
            return Some(0.0);
        }
        let mass = tail.cdf(hi) - tail.cdf(lo);
        Some(((tail.cdf(hi.min(1.0)) - tail.cdf(lo)) / mass).clamp(0.0, 1.0))
    }
}

/// Restricts a posterior to a box, one interval per parameter (`[λ]`, `[μ, σ²]`
/// or `[ξ]`). Bounds combine with any existing truncation by intersection.
pub fn truncate_posterior(state: &PosteriorState, bounds: &[Interval]) -> Result<PosteriorState> {
    if bounds.len() != state.dimension() {
        return Err(Error::InvalidParameter(format!(
            "{:?} posterior takes {} bounds, got {}",
            state.family(),
            state.dimension(),
            bounds.len()
        )));
    }
    let merged: Vec<Interval> = match &state.truncation {
        None => bounds.to_vec(),
        Some(old) => old
            .iter()
            .zip(bounds)
            .map(|(a, b)| Interval::new(a.lower.max(b.lower), a.upper.min(b.upper)))
            .collect::<Result<_>>()
            .map_err(|_| Error::ZeroMass("truncation boxes do not intersect".into()))?,
    };
    if merged.iter().all(Interval::is_unbounded) {
        return Ok(PosteriorState {
            truncation: None,
            acceptance: 1.0,
            ..state.clone()
        });
    }

    let mut out = PosteriorState {
        conjugate: state.conjugate,
        truncation: Some(merged),
        acceptance: 1.0,
    };

    // rejection-rate probe against the untruncated sampler
    let mut rng = RngStream::new(PROBE_SEED, 0);
    let mut accepted = 0usize;
    for _ in 0..PROBE_DRAWS {
        let d = out.sample_untruncated(&mut rng)?;
        if out.in_bounds(&d) {
            accepted += 1;
        }
    }
    let probe_rate = accepted as f64 / PROBE_DRAWS as f64;
    if probe_rate < MIN_ACCEPTANCE {
        return Err(Error::ZeroMass(format!(
            "acceptance rate {probe_rate:.2e} below {MIN_ACCEPTANCE:e} for bounds {:?}",
            out.truncation.as_deref().unwrap_or_default()
        )));
    }

    out.acceptance = match &out.conjugate {
        Conjugate::PoissonRate(g) | Conjugate::ParetoTail { tail: g, .. } => {
            let b = out.truncation.as_ref().expect("set above")[0];
            g.cdf(b.upper) - g.cdf(b.lower)
        }
        Conjugate::Lognormal(_) => probe_rate,
    };
    Ok(out)
}

/// Central (equal-tailed) credible intervals, one per parameter.
///
/// Gamma posteriors, truncated or not, and the untruncated lognormal marginals
/// (shifted t for `μ`, inverse chi-squared for `σ²`) are inverted numerically.
/// A truncated lognormal posterior uses empirical quantiles of 10⁶ draws from a
/// fixed stream.
pub fn credible_interval(state: &PosteriorState, level: f64) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    let lo_p = 0.5 * (1.0 - level);
    let hi_p = 0.5 * (1.0 + level);
    match &state.conjugate {
        Conjugate::PoissonRate(g) | Conjugate::ParetoTail { tail: g, .. } => {
            let b = state.truncation.as_ref().map_or(Interval::UNBOUNDED, |b| b[0]);
            let (a, z) = (b.lower.max(0.0), b.upper);
            let (fa, fz) = (g.cdf(a), g.cdf(z));
            let q = |p: f64| -> f64 {
                if state.truncation.is_none() {
                    return g.quantile(p);
                }
                let target = fa + p * (fz - fa);
                let mut hi = if z.is_finite() { z } else { a.max(g.mean()) + 10.0 * g.variance().sqrt() };
                while g.cdf(hi) < target {
                    hi *= 2.0;
                }
                crate::distributions::bisect(|x| g.cdf(x), target, a, hi)
            };
            Ok(vec![Interval {
                lower: q(lo_p),
                upper: q(hi_p),
            }])
        }
        Conjugate::Lognormal(nix) => {
            if state.truncation.is_none() {
                let t = marginal_mu(nix)?;
                let s2 = nix.sigma_sq_law()?;
                return Ok(vec![
                    Interval {
                        lower: t.quantile(lo_p),
                        upper: t.quantile(hi_p),
                    },
                    Interval {
                        lower: s2.quantile(lo_p),
                        upper: s2.quantile(hi_p),
                    },
                ]);
            }
            let mut rng = RngStream::new(PROBE_SEED, 1);
            let mut mus = Vec::with_capacity(INTERVAL_DRAWS);
            let mut s2s = Vec::with_capacity(INTERVAL_DRAWS);
            for _ in 0..INTERVAL_DRAWS {
                if let ParameterDraw::Lognormal { mu, sigma_sq } = state.sample(&mut rng)? {
                    mus.push(mu);
                    s2s.push(sigma_sq);
                }
            }
            let eq = |xs: &mut Vec<f64>| {
                xs.sort_unstable_by(f64::total_cmp);
                let at = |p: f64| xs[((p * xs.len() as f64) as usize).min(xs.len() - 1)];
                Interval {
                    lower: at(lo_p),
                    upper: at(hi_p),
                }
            };
            Ok(vec![eq(&mut mus), eq(&mut s2s)])
        }
    }
}

/// Posterior mode (joint mode for the lognormal posterior), respecting any
/// truncation.
///
/// Gamma: `(α−1)β` for `α ≥ 1`, else the lower end of the support. Lognormal:
/// the joint density is `∝ (σ²)^(−(ν+3)/2)·exp(−(β + φ(μ−θ)²)/(2σ²))`, maximized
/// at `μ = θ`, `σ² = β/(ν+3)`; under a box constraint `μ` is clamped first and
/// `σ²` maximized given it.
pub fn posterior_mode(state: &PosteriorState) -> Result<Vec<f64>> {
    let bounds = state.truncation.clone();
    let bound = |i: usize| bounds.as_ref().map_or(Interval::UNBOUNDED, |b| b[i]);
    match &state.conjugate {
        Conjugate::PoissonRate(g) | Conjugate::ParetoTail { tail: g, .. } => {
            let m = if g.shape() >= 1.0 {
                (g.shape() - 1.0) * g.scale()
            } else {
                0.0
            };
            Ok(vec![bound(0).clamp(m)])
        }
        Conjugate::Lognormal(nix) => {
            let k = nix.dof_nu + 3.0;
            if !(k > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "joint mode undefined for nu = {}",
                    nix.dof_nu
                )));
            }
            let mu = bound(0).clamp(nix.loc_theta);
            let s2 = (nix.scale_beta + nix.prec_phi * (mu - nix.loc_theta).powi(2)) / k;
            Ok(vec![mu, bound(1).clamp(s2)])
        }
    }
}
