//! Monte Carlo engine for the annual loss `Z = X₁ + … + X_N`.
//!
//! Both capital paths run through [`simulate_sample`]: the predictive path
//! draws a fresh parameter vector from the posterior before every annual loss,
//! the conditional path holds the parameters fixed at a point estimate.
//!
//! Losses are produced in fixed-size batches. Batch `b` draws frequencies and
//! severities from stream `(seed, b)` and posterior parameters from stream
//! `(seed, b | PARAMETER_STREAM)`, so a sample depends only on `(spec, K, seed,
//! batch size)` and never on the number of worker threads. Sharing the
//! process streams between the two paths also makes conditional and predictive
//! estimates at the same seed positively correlated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{ParameterDraw, PosteriorFamily, PosteriorState};
use crate::distributions::{
    standard_normal_quantile, LognormalParams, ParetoParams, PoissonParams, PoissonSampler,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Hard cap on the number of losses held in memory.
pub const MAX_SAMPLE: usize = 10_000_000;
/// Default number of simulations for a capital run.
pub const DEFAULT_K: usize = 1_000_000;
pub const DEFAULT_BATCH: usize = 10_000;
const PARAMETER_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SeverityParams {
    Lognormal(LognormalParams),
    Pareto(ParetoParams),
}

impl SeverityParams {
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            SeverityParams::Lognormal(p) => p.sample(rng),
            SeverityParams::Pareto(p) => p.sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            SeverityParams::Lognormal(p) => p.mean(),
            SeverityParams::Pareto(p) => p.mean(),
        }
    }
}

/// Fixed parameters `θ = (λ, severity)` of one risk cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub frequency: PoissonParams,
    pub severity: SeverityParams,
}

enum SeveritySampler {
    Lognormal { mu: f64, sigma: f64 },
    Pareto(ParetoParams),
}

/// Parameters prepared once for repeated annual-loss draws.
struct CompoundSampler {
    count: Option<PoissonSampler>,
    severity: SeveritySampler,
}

impl CompoundSampler {
    fn new(frequency: &PoissonParams, severity: &SeverityParams) -> Self {
        Self {
            count: Some(frequency.sampler()),
            severity: match severity {
                SeverityParams::Lognormal(p) => SeveritySampler::Lognormal {
                    mu: p.mu(),
                    sigma: p.sigma(),
                },
                SeverityParams::Pareto(p) => SeveritySampler::Pareto(*p),
            },
        }
    }

    fn from_draws(
        rate: f64,
        severity: ParameterDraw,
        threshold: Option<f64>,
    ) -> Self {
        // a rate drawn as exactly zero (underflow) means no events
        let count = PoissonParams::new(rate).ok().map(|p| p.sampler());
        let severity = match (severity, threshold) {
            (ParameterDraw::Lognormal { mu, sigma_sq }, _) => SeveritySampler::Lognormal {
                mu,
                sigma: sigma_sq.sqrt(),
            },
            (ParameterDraw::Tail(xi), Some(l)) => {
                SeveritySampler::Pareto(ParetoParams::new(xi.max(f64::MIN_POSITIVE), l).expect("positive"))
            }
            (d, _) => unreachable!("severity draw {d:?} is not a severity parameter"),
        };
        Self { count, severity }
    }

    #[inline]
    fn annual_loss(&self, rng: &mut RngStream) -> f64 {
        let n = self.count.as_ref().map_or(0, |c| c.sample(rng));
        let mut z = 0.0;
        match &self.severity {
            SeveritySampler::Lognormal { mu, sigma } => {
                for _ in 0..n {
                    let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
                    z += (mu + sigma * e).exp();
                }
            }
            SeveritySampler::Pareto(p) => {
                for _ in 0..n {
                    z += p.sample(rng);
                }
            }
        }
        z
    }
}

/// One annual loss: `N ~ Poisson(λ)` events with i.i.d. severities. Exactly
/// zero when `N = 0`.
pub fn simulate_annual_loss(
    frequency: &PoissonParams,
    severity: &SeverityParams,
    rng: &mut RngStream,
) -> f64 {
    CompoundSampler::new(frequency, severity).annual_loss(rng)
}

/// Where the parameters of each simulated year come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerSpec {
    /// Parameters fixed at a point estimate.
    Conditional(CellParams),
    /// Parameters redrawn from the posterior for every simulated year.
    Predictive {
        frequency: PosteriorState,
        severity: PosteriorState,
    },
}

impl SamplerSpec {
    pub fn predictive(frequency: PosteriorState, severity: PosteriorState) -> Result<Self> {
        if frequency.family() != PosteriorFamily::PoissonRate {
            return Err(Error::InvalidParameter(format!(
                "frequency posterior must be a poisson rate, got {:?}",
                frequency.family()
            )));
        }
        if severity.family() == PosteriorFamily::PoissonRate {
            return Err(Error::InvalidParameter(
                "severity posterior must be lognormal or pareto-tail".into(),
            ));
        }
        // surfaces unsamplable posteriors (e.g. lognormal ν ≤ 0) before any work
        let mut probe = RngStream::new(0, 0);
        frequency.sample(&mut probe)?;
        severity.sample(&mut probe)?;
        Ok(SamplerSpec::Predictive {
            frequency,
            severity,
        })
    }

    fn run_batch(&self, seed: u64, batch: u64, size: usize) -> Result<Vec<f64>> {
        let mut process = RngStream::new(seed, batch);
        let mut out = Vec::with_capacity(size);
        match self {
            SamplerSpec::Conditional(theta) => {
                let s = CompoundSampler::new(&theta.frequency, &theta.severity);
                for _ in 0..size {
                    out.push(s.annual_loss(&mut process));
                }
            }
            SamplerSpec::Predictive {
                frequency,
                severity,
            } => {
                let mut params = RngStream::new(seed, batch | PARAMETER_STREAM);
                let threshold = match severity.conjugate() {
                    crate::bayes::Conjugate::ParetoTail { threshold, .. } => Some(*threshold),
                    _ => None,
                };
                for _ in 0..size {
                    let ParameterDraw::Rate(rate) = frequency.sample(&mut params)? else {
                        unreachable!("checked in SamplerSpec::predictive")
                    };
                    let sev = severity.sample(&mut params)?;
                    let s = CompoundSampler::from_draws(rate, sev, threshold);
                    out.push(s.annual_loss(&mut process));
                }
            }
        }
        Ok(out)
    }
}

/// Execution knobs that do not change results beyond the batch layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    pub batch_size: usize,
    /// `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH,
            workers: None,
        }
    }
}

impl SimOptions {
    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }
}

/// Ascending-sorted annual losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    values: Vec<f64>,
    master_seed: u64,
}

impl LossSample {
    pub fn from_values(mut values: Vec<f64>, master_seed: u64) -> Self {
        values.sort_unstable_by(f64::total_cmp);
        Self {
            values,
            master_seed,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// 1-based order statistic.
    fn order_stat(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    fn merge_sorted(&mut self, mut other: Vec<f64>) {
        other.sort_unstable_by(f64::total_cmp);
        let mut merged = Vec::with_capacity(self.values.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let a = &self.values;
        while i < a.len() && j < other.len() {
            if a[i].total_cmp(&other[j]).is_le() {
                merged.push(a[i]);
                i += 1;
            } else {
                merged.push(other[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&a[i..]);
        merged.extend_from_slice(&other[j..]);
        self.values = merged;
    }
}

fn batches(k: usize, batch_size: usize) -> impl Iterator<Item = (u64, usize)> {
    let n = k.div_ceil(batch_size);
    (0..n).map(move |b| (b as u64, batch_size.min(k - b * batch_size)))
}

fn run_batches(spec: &SamplerSpec, seed: u64, plan: &[(u64, usize)], opts: &SimOptions) -> Result<Vec<f64>> {
    let parts: Vec<Result<Vec<f64>>> = opts.install(|| {
        plan.par_iter()
            .map(|&(b, size)| spec.run_batch(seed, b, size))
            .collect()
    })?;
    let mut out = Vec::with_capacity(plan.iter().map(|p| p.1).sum());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if k > MAX_SAMPLE {
        return Err(Error::SampleTooLarge {
            requested: k,
            cap: MAX_SAMPLE,
        });
    }
    Ok(())
}

pub fn simulate_sample(spec: &SamplerSpec, k: usize, seed: u64, opts: &SimOptions) -> Result<LossSample> {
    check_k(k)?;
    if opts.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let plan: Vec<_> = batches(k, opts.batch_size).collect();
    Ok(LossSample::from_values(run_batches(spec, seed, &plan, opts)?, seed))
}

/// `K` annual losses with every year simulated at the fixed parameters `θ̂`.
pub fn simulate_conditional_sample(
    theta: &CellParams,
    k: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<LossSample> {
    simulate_sample(&SamplerSpec::Conditional(*theta), k, seed, opts)
}

/// `K` draws from the predictive distribution: each year first draws its
/// parameters from the posteriors, then an annual loss given them.
pub fn simulate_predictive_sample(
    frequency: &PosteriorState,
    severity: &PosteriorState,
    k: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<LossSample> {
    let spec = SamplerSpec::predictive(frequency.clone(), severity.clone())?;
    simulate_sample(&spec, k, seed, opts)
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("quantile level must lie in (0, 1), got {q}")))
    }
}

/// `K·q`, snapped to the nearest integer when it is one up to rounding noise
/// (e.g. `1000 × 0.999`).
fn kq(k: usize, q: f64) -> f64 {
    let x = k as f64 * q;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r
    } else {
        x
    }
}

/// 1-based index `min(⌊Kq + 1⌋, K)` of the quantile order statistic.
pub fn quantile_index(k: usize, q: f64) -> usize {
    ((kq(k, q) + 1.0).floor() as usize).clamp(1, k)
}

/// `Q_q ≈ Z_(⌊Kq+1⌋)`.
pub fn empirical_quantile(sample: &LossSample, q: f64) -> Result<f64> {
    check_q(q)?;
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty loss sample".into()));
    }
    Ok(sample.order_stat(quantile_index(sample.len(), q)))
}

/// Order-statistic confidence interval `[Z_r, Z_s]` for `Q_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileCi {
    /// 1-based, clamped to `[1, K]`.
    pub r: usize,
    pub s: usize,
    pub lower: f64,
    pub upper: f64,
    /// `Kq(1−q) ≥ 50`, where the normal approximation to the binomial holds.
    pub reliable: bool,
}

/// The number of losses not exceeding `Q_q` is `Binomial(K, q)`; with the normal
/// approximation `r = ⌊Kq − z√(Kq(1−q))⌋` and `s = ⌈Kq + z√(Kq(1−q))⌉`, where
/// `z` is the `(1+γ)/2` standard normal quantile.
pub fn quantile_ci_indices(k: usize, q: f64, gamma: f64) -> Result<(usize, usize, bool)> {
    check_q(q)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {gamma}"
        )));
    }
    let z = standard_normal_quantile(0.5 * (1.0 + gamma));
    let m = kq(k, q);
    let var = m * (1.0 - q);
    let half = z * var.sqrt();
    let r = (m - half).floor().max(1.0).min(k as f64) as usize;
    let s = (m + half).ceil().max(1.0).min(k as f64) as usize;
    Ok((r, s, var >= 50.0))
}

pub fn quantile_ci(sample: &LossSample, q: f64, gamma: f64) -> Result<QuantileCi> {
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty loss sample".into()));
    }
    let (r, s, reliable) = quantile_ci_indices(sample.len(), q, gamma)?;
    Ok(QuantileCi {
        r,
        s,
        lower: sample.order_stat(r),
        upper: sample.order_stat(s),
        reliable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub q: f64,
    pub value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub ci_level: f64,
    pub k: usize,
    pub reliable_ci: bool,
    /// False only when adaptive sampling hit its cap before the target accuracy.
    pub converged: bool,
    pub seed: u64,
}

impl QuantileEstimate {
    /// `(upper − lower) / (2·value)`.
    pub fn relative_half_width(&self) -> f64 {
        let w = self.ci_upper - self.ci_lower;
        if w == 0.0 {
            0.0
        } else {
            w / (2.0 * self.value)
        }
    }
}

/// Point estimate plus interval. The reported interval is widened to contain
/// the point estimate, which only matters when the indices are clamped or `γ`
/// is tiny.
pub fn estimate_quantile(sample: &LossSample, q: f64, gamma: f64) -> Result<QuantileEstimate> {
    let value = empirical_quantile(sample, q)?;
    let ci = quantile_ci(sample, q, gamma)?;
    Ok(QuantileEstimate {
        q,
        value,
        ci_lower: ci.lower.min(value),
        ci_upper: ci.upper.max(value),
        ci_level: gamma,
        k: sample.len(),
        reliable_ci: ci.reliable,
        converged: true,
        seed: sample.master_seed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyTarget {
    /// Stop once `(ci_upper − ci_lower)/(2·value)` is at most this.
    pub rel_half_width: f64,
    pub batch_k: usize,
    pub max_k: usize,
}

/// Adds batches of `batch_k` simulations until the relative half-width of the
/// quantile interval reaches the target or `max_k` is reached. Batch `b` uses
/// the same streams as in [`simulate_sample`] with batch size `batch_k`.
pub fn run_until_accuracy(
    spec: &SamplerSpec,
    q: f64,
    gamma: f64,
    target: &AccuracyTarget,
    seed: u64,
    opts: &SimOptions,
) -> Result<QuantileEstimate> {
    if !(target.rel_half_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target relative half-width must be > 0, got {}",
            target.rel_half_width
        )));
    }
    if target.batch_k == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    check_k(target.max_k)?;
    check_q(q)?;
    quantile_ci_indices(1, q, gamma)?;

    let mut sample = LossSample {
        values: Vec::new(),
        master_seed: seed,
    };
    let mut next_batch = 0u64;
    loop {
        let size = target.batch_k.min(target.max_k - sample.len()).max(1);
        let fresh = run_batches(spec, seed, &[(next_batch, size)], opts)?;
        next_batch += 1;
        sample.merge_sorted(fresh);
        let mut est = estimate_quantile(&sample, q, gamma)?;
        let done = est.relative_half_width() <= target.rel_half_width;
        if done || sample.len() >= target.max_k {
            est.converged = done;
            return Ok(est);
        }
    }
}
