//! Risk-cell and bank-level capital.
//!
//! A cell's capital is the `q` quantile of its annual loss. The conditional
//! path simulates at the maximum-likelihood estimates; the predictive path
//! integrates over the posterior. Both use the same engine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bayes::{
    credible_interval, noninformative_lognormal, noninformative_pareto, noninformative_poisson,
    posterior_mode, truncate_posterior, update_lognormal, update_pareto, update_poisson_gamma,
    Interval, NixParams, PosteriorFamily, PosteriorState,
};
use crate::distributions::{GammaParams, LognormalParams, ParetoParams, PoissonParams};
use crate::error::{Error, Result};
use crate::estimators::{mle_lognormal, mle_pareto, mle_poisson, MleReport, SeverityMle};
use crate::mc_engine::{
    estimate_quantile, run_until_accuracy, simulate_sample, AccuracyTarget, CellParams,
    QuantileEstimate, SamplerSpec, SeverityParams, SimOptions, DEFAULT_K,
};
use crate::rng::{derive_seed, stable_hash};

/// Posterior probability of `ξ ≤ 1` above which a Pareto cell is flagged.
pub const INFINITE_MEAN_TOLERANCE: f64 = 1e-6;

/// Attached to every bank total.
pub const AGGREGATION_NOTE: &str = "summing cell quantiles is equivalent to assuming perfect \
dependence between risks";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SeverityModel {
    Lognormal,
    Pareto { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SeverityPrior {
    Lognormal(NixParams),
    Pareto(GammaParams),
}

/// `None` selects the non-informative prior for that block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(default)]
    pub frequency: Option<GammaParams>,
    #[serde(default)]
    pub severity: Option<SeverityPrior>,
}

/// Posterior truncation boxes: `[λ]` and `[μ, σ²]` or `[ξ]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    #[serde(default)]
    pub frequency: Option<Interval>,
    #[serde(default)]
    pub severity: Option<Vec<Interval>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    pub cell_id: String,
    pub severity: SeverityModel,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub truncation: TruncationSpec,
    /// Restrict the Pareto tail posterior to `ξ > 1` (finite mean).
    #[serde(default)]
    pub pareto_finite_mean: bool,
}

impl CellModel {
    pub fn new(cell_id: impl Into<String>, severity: SeverityModel) -> Self {
        Self {
            cell_id: cell_id.into(),
            severity,
            prior: PriorSpec::default(),
            truncation: TruncationSpec::default(),
            pareto_finite_mean: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_id.is_empty() {
            return Err(Error::Validation("cell_id must not be empty".into()));
        }
        let sev_dim = match self.severity {
            SeverityModel::Lognormal => {
                if matches!(self.prior.severity, Some(SeverityPrior::Pareto(_))) {
                    return Err(Error::Validation(format!(
                        "cell {}: pareto prior given for a lognormal severity",
                        self.cell_id
                    )));
                }
                if self.pareto_finite_mean {
                    return Err(Error::Validation(format!(
                        "cell {}: pareto_finite_mean requires a pareto severity",
                        self.cell_id
                    )));
                }
                2
            }
            SeverityModel::Pareto { threshold } => {
                if !(threshold > 0.0 && threshold.is_finite()) {
                    return Err(Error::Validation(format!(
                        "cell {}: pareto threshold must be finite and > 0, got {threshold}",
                        self.cell_id
                    )));
                }
                if matches!(self.prior.severity, Some(SeverityPrior::Lognormal(_))) {
                    return Err(Error::Validation(format!(
                        "cell {}: lognormal prior given for a pareto severity",
                        self.cell_id
                    )));
                }
                1
            }
        };
        if let Some(b) = &self.truncation.severity {
            if b.len() != sev_dim {
                return Err(Error::Validation(format!(
                    "cell {}: severity truncation needs {sev_dim} intervals, got {}",
                    self.cell_id,
                    b.len()
                )));
            }
        }
        Ok(())
    }
}

/// `Y = (N₁, …, N_M, X₁, …, X_n)` with `n = ΣN_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossData {
    counts: Vec<u64>,
    severities: Vec<f64>,
}

impl LossData {
    pub fn new(counts: Vec<u64>, severities: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Validation("loss data needs at least one year".into()));
        }
        let n: u64 = counts.iter().sum();
        if n as usize != severities.len() {
            return Err(Error::Validation(format!(
                "annual counts sum to {n} but {} severities were given",
                severities.len()
            )));
        }
        if let Some(x) = severities.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::Validation(format!(
                "severities must be finite and > 0, got {x}"
            )));
        }
        Ok(Self { counts, severities })
    }

    pub fn years(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn severities(&self) -> &[f64] {
        &self.severities
    }

    pub fn events(&self) -> usize {
        self.severities.len()
    }

    /// First `m` years and their events.
    pub fn prefix(&self, m: usize) -> Result<LossData> {
        if m == 0 || m > self.years() {
            return Err(Error::InvalidParameter(format!(
                "prefix of {m} years out of range 1..={}",
                self.years()
            )));
        }
        let n: u64 = self.counts[..m].iter().sum();
        Ok(Self {
            counts: self.counts[..m].to_vec(),
            severities: self.severities[..n as usize].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapitalMode {
    Conditional,
    Predictive,
}

impl fmt::Display for CapitalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapitalMode::Conditional => "conditional",
            CapitalMode::Predictive => "predictive",
        })
    }
}

impl std::str::FromStr for CapitalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(CapitalMode::Conditional),
            "predictive" => Ok(CapitalMode::Predictive),
            _ => Err(Error::Validation(format!("unknown capital mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The predictive (or fitted) Pareto mean is infinite with this probability.
    InfiniteMean { probability: f64 },
    /// `Kq(1−q) < 50`.
    UnreliableCi,
    /// Adaptive sampling stopped at its cap.
    Unconverged { rel_half_width: f64 },
}

impl Warning {
    pub fn code(&self) -> &'static str {
        match self {
            Warning::InfiniteMean { .. } => "infinite_mean",
            Warning::UnreliableCi => "unreliable_ci",
            Warning::Unconverged { .. } => "unconverged",
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::InfiniteMean { probability } => write!(
                f,
                "Pr[xi <= 1] = {probability:.3e}: the annual loss mean is infinite; \
                 consider pareto_finite_mean"
            ),
            Warning::UnreliableCi => f.write_str("Kq(1-q) < 50: the quantile interval is unreliable"),
            Warning::Unconverged { rel_half_width } => write!(
                f,
                "sample cap reached at relative half-width {rel_half_width:.3e}"
            ),
        }
    }
}

/// Posterior modes and equal-tailed credible intervals. Lognormal cells report
/// `σ` (square roots of the `σ²` mode and bounds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    pub modes: Vec<f64>,
    pub intervals: Vec<Interval>,
    pub level: f64,
}

impl PosteriorSummary {
    pub fn of(states: &[&PosteriorState], level: f64) -> Result<Self> {
        let mut s = PosteriorSummary {
            names: vec![],
            modes: vec![],
            intervals: vec![],
            level,
        };
        for st in states {
            let names = st.family().parameter_names();
            let modes = posterior_mode(st)?;
            let ints = credible_interval(st, level)?;
            for ((name, m), iv) in names.iter().zip(modes).zip(ints) {
                if *name == "sigma_sq" {
                    s.names.push("sigma".into());
                    s.modes.push(m.sqrt());
                    s.intervals.push(Interval {
                        lower: iv.lower.sqrt(),
                        upper: iv.upper.sqrt(),
                    });
                } else {
                    s.names.push((*name).into());
                    s.modes.push(m);
                    s.intervals.push(iv);
                }
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalReport {
    pub cell_id: String,
    pub mode: CapitalMode,
    pub estimate: QuantileEstimate,
    /// Always present for conditional reports; present for predictive reports
    /// when the data identify the MLE.
    pub mle: Option<MleReport>,
    /// Present for predictive reports only.
    pub posterior: Option<PosteriorSummary>,
    pub warnings: Vec<Warning>,
}

/// Simulation settings shared by both capital paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapitalSettings {
    pub q: f64,
    pub k: usize,
    pub gamma: f64,
    pub seed: u64,
    /// With a target, `k` is the sample cap and simulation stops early once the
    /// relative half-width of the interval drops to the target.
    pub target_rel_half_width: Option<f64>,
    pub sim: SimOptions,
}

impl CapitalSettings {
    pub fn new(seed: u64) -> Self {
        Self {
            q: 0.999,
            k: DEFAULT_K,
            gamma: 0.95,
            seed,
            target_rel_half_width: None,
            sim: SimOptions::default(),
        }
    }

    fn estimate(&self, spec: &SamplerSpec) -> Result<QuantileEstimate> {
        match self.target_rel_half_width {
            None => {
                let sample = simulate_sample(spec, self.k, self.seed, &self.sim)?;
                estimate_quantile(&sample, self.q, self.gamma)
            }
            Some(t) => {
                let target = AccuracyTarget {
                    rel_half_width: t,
                    batch_k: self.sim.batch_size.min(self.k),
                    max_k: self.k,
                };
                run_until_accuracy(spec, self.q, self.gamma, &target, self.seed, &self.sim)
            }
        }
    }
}

/// Master seed for one cell of a bank-wide run.
pub fn cell_seed(bank_seed: u64, cell_id: &str) -> u64 {
    derive_seed(bank_seed, &[stable_hash(cell_id)])
}

fn threshold_check(severities: &[f64], threshold: f64) -> Result<()> {
    match severities.iter().find(|&&x| x < threshold) {
        Some(&x) => Err(Error::SeverityBelowThreshold {
            value: x,
            threshold,
        }),
        None => Ok(()),
    }
}

/// Maximum-likelihood fit of both blocks of a cell.
pub fn fit_mle(model: &CellModel, data: &LossData) -> Result<MleReport> {
    model.validate()?;
    let lambda = mle_poisson(data.counts())?;
    let severity = match model.severity {
        SeverityModel::Lognormal => {
            let (mu, sigma_sq) = mle_lognormal(data.severities())?;
            SeverityMle::Lognormal { mu, sigma_sq }
        }
        SeverityModel::Pareto { threshold } => SeverityMle::Pareto {
            xi: mle_pareto(data.severities(), threshold)?,
            threshold,
        },
    };
    Ok(MleReport {
        lambda,
        severity,
        years: data.years(),
        events: data.events(),
    })
}

/// Frequency and severity posteriors of a cell, truncated as configured.
pub fn fit_posteriors(model: &CellModel, data: &LossData) -> Result<(PosteriorState, PosteriorState)> {
    model.validate()?;
    let g = match &model.prior.frequency {
        Some(p) => update_poisson_gamma(p, data.counts()),
        None => noninformative_poisson(data.counts())?,
    };
    let mut freq = PosteriorState::poisson_rate(g);
    if let Some(b) = model.truncation.frequency {
        freq = truncate_posterior(&freq, &[b])?;
    }

    let mut sev = match model.severity {
        SeverityModel::Lognormal => {
            let logs: Vec<f64> = data.severities().iter().map(|x| x.ln()).collect();
            let nix = match &model.prior.severity {
                Some(SeverityPrior::Lognormal(p)) => update_lognormal(p, &logs)?,
                _ => noninformative_lognormal(&logs)?,
            };
            PosteriorState::lognormal(nix)
        }
        SeverityModel::Pareto { threshold } => {
            threshold_check(data.severities(), threshold)?;
            let g = match &model.prior.severity {
                Some(SeverityPrior::Pareto(p)) => update_pareto(p, data.severities(), threshold)?,
                _ => noninformative_pareto(data.severities(), threshold)?,
            };
            PosteriorState::pareto_tail(g, threshold)?
        }
    };
    if let Some(b) = &model.truncation.severity {
        sev = truncate_posterior(&sev, b)?;
    }
    if model.pareto_finite_mean {
        sev = truncate_posterior(&sev, &[Interval::at_least(1.0)?])?;
    }
    Ok((freq, sev))
}

fn quantile_warnings(estimate: &QuantileEstimate, warnings: &mut Vec<Warning>) {
    if !estimate.reliable_ci {
        warnings.push(Warning::UnreliableCi);
    }
    if !estimate.converged {
        warnings.push(Warning::Unconverged {
            rel_half_width: estimate.relative_half_width(),
        });
    }
}

/// Capital at fixed parameters, bypassing any fitting.
pub fn capital_at(cell_id: &str, theta: &CellParams, settings: &CapitalSettings) -> Result<CapitalReport> {
    let estimate = settings.estimate(&SamplerSpec::Conditional(*theta))?;
    let mut warnings = vec![];
    if let SeverityParams::Pareto(p) = theta.severity {
        if p.xi() <= 1.0 {
            warnings.push(Warning::InfiniteMean { probability: 1.0 });
        }
    }
    quantile_warnings(&estimate, &mut warnings);
    Ok(CapitalReport {
        cell_id: cell_id.into(),
        mode: CapitalMode::Conditional,
        estimate,
        mle: None,
        posterior: None,
        warnings,
    })
}

/// `Q̂_q`: the quantile of the annual loss simulated at the MLEs.
pub fn conditional_capital(model: &CellModel, data: &LossData, settings: &CapitalSettings) -> Result<CapitalReport> {
    let mle = fit_mle(model, data)?;
    if mle.lambda == 0.0 {
        return Err(Error::InsufficientData(format!(
            "cell {}: no events in {} years, the frequency MLE is 0",
            model.cell_id,
            data.years()
        )));
    }
    let severity = match mle.severity {
        SeverityMle::Lognormal { mu, sigma_sq } => SeverityParams::Lognormal(LognormalParams::new(mu, sigma_sq)?),
        SeverityMle::Pareto { xi, threshold } => SeverityParams::Pareto(ParetoParams::new(xi, threshold)?),
    };
    let theta = CellParams {
        frequency: PoissonParams::new(mle.lambda)?,
        severity,
    };
    let mut report = capital_at(&model.cell_id, &theta, settings)?;
    report.mle = Some(mle);
    Ok(report)
}

/// `Q̂ᴮ_q`: the quantile of the predictive annual loss, which redraws the
/// parameters from their posterior for every simulated year.
pub fn predictive_capital(model: &CellModel, data: &LossData, settings: &CapitalSettings) -> Result<CapitalReport> {
    let (freq, sev) = fit_posteriors(model, data).map_err(|e| match e {
        Error::InsufficientData(m) => Error::InsufficientData(format!(
            "cell {}: {m}; supply more events or an informative prior",
            model.cell_id
        )),
        e => e,
    })?;
    let posterior = PosteriorSummary::of(&[&freq, &sev], 0.95)?;
    let mut warnings = vec![];
    if let Some(p) = sev.infinite_mean_probability() {
        if p > INFINITE_MEAN_TOLERANCE {
            warnings.push(Warning::InfiniteMean { probability: p });
        }
    }
    debug_assert_eq!(freq.family(), PosteriorFamily::PoissonRate);
    let spec = SamplerSpec::predictive(freq, sev)?;
    let estimate = settings.estimate(&spec)?;
    quantile_warnings(&estimate, &mut warnings);
    Ok(CapitalReport {
        cell_id: model.cell_id.clone(),
        mode: CapitalMode::Predictive,
        estimate,
        mle: fit_mle(model, data).ok(),
        posterior: Some(posterior),
        warnings,
    })
}

/// One cell's contribution to a bank total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCapital {
    pub cell_id: String,
    pub mode: CapitalMode,
    pub q: f64,
    pub value: f64,
}

impl From<&CapitalReport> for CellCapital {
    fn from(r: &CapitalReport) -> Self {
        Self {
            cell_id: r.cell_id.clone(),
            mode: r.mode,
            q: r.estimate.q,
            value: r.estimate.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankCapital {
    pub mode: CapitalMode,
    pub q: f64,
    pub total: f64,
    pub cells: Vec<CellCapital>,
    pub note: String,
}

/// Sum of cell quantiles. All cells must share mode and `q`.
pub fn aggregate_cells(cells: &[CellCapital]) -> Result<BankCapital> {
    let first = cells
        .first()
        .ok_or_else(|| Error::InconsistentReports("no cell reports to aggregate".into()))?;
    for c in cells {
        if c.mode != first.mode {
            return Err(Error::InconsistentReports(format!(
                "cell {} is {} but cell {} is {}",
                c.cell_id, c.mode, first.cell_id, first.mode
            )));
        }
        if c.q != first.q {
            return Err(Error::InconsistentReports(format!(
                "cell {} has q = {} but cell {} has q = {}",
                c.cell_id, c.q, first.cell_id, first.q
            )));
        }
    }
    Ok(BankCapital {
        mode: first.mode,
        q: first.q,
        total: cells.iter().map(|c| c.value).sum(),
        cells: cells.to_vec(),
        note: AGGREGATION_NOTE.into(),
    })
}

pub fn aggregate_bank_capital(reports: &[CapitalReport]) -> Result<BankCapital> {
    aggregate_cells(&reports.iter().map(CellCapital::from).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn synthetic(years: usize, seed: u64) -> LossData {
        let p = PoissonParams::new(10.0).unwrap();
        let ln = LognormalParams::from_mu_sigma(1.0, 2.0).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let counts: Vec<u64> = (0..years).map(|_| p.sample(&mut rng)).collect();
        let n: u64 = counts.iter().sum();
        let sev = (0..n).map(|_| ln.sample(&mut rng)).collect();
        LossData::new(counts, sev).unwrap()
    }

    fn small(seed: u64) -> CapitalSettings {
        CapitalSettings {
            k: 20_000,
            ..CapitalSettings::new(seed)
        }
    }

    #[test]
    fn loss_data_validation() {
        assert!(LossData::new(vec![], vec![]).is_err());
        assert!(LossData::new(vec![2], vec![1.0]).is_err());
        assert!(LossData::new(vec![1], vec![0.0]).is_err());
        assert!(LossData::new(vec![1], vec![f64::NAN]).is_err());
        let d = LossData::new(vec![0, 2, 1], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.prefix(2).unwrap().severities(), &[1.0, 2.0]);
        assert_eq!(d.prefix(1).unwrap().events(), 0);
    }

    #[test]
    fn model_validation() {
        let mut m = CellModel::new("a", SeverityModel::Pareto { threshold: 0.0 });
        assert!(m.validate().is_err());
        m.severity = SeverityModel::Lognormal;
        m.prior.severity = Some(SeverityPrior::Pareto(GammaParams::new(1.0, 1.0).unwrap()));
        assert!(m.validate().is_err());
        m.prior.severity = None;
        m.truncation.severity = Some(vec![Interval::UNBOUNDED]);
        assert!(m.validate().is_err());
    }

    #[test]
    fn few_severities_cannot_support_noninformative_lognormal() {
        let d = LossData::new(vec![1, 2], vec![1.0, 2.0, 3.0]).unwrap();
        let m = CellModel::new("c", SeverityModel::Lognormal);
        let err = predictive_capital(&m, &d, &small(1)).unwrap_err();
        assert!(err.to_string().contains("insufficient data"), "{err}");
        // conditional still works with three severities
        assert!(conditional_capital(&m, &d, &small(1)).is_ok());
    }

    #[test]
    fn tiny_k_is_flagged_unreliable() {
        let theta = CellParams {
            frequency: PoissonParams::new(10.0).unwrap(),
            severity: SeverityParams::Lognormal(LognormalParams::from_mu_sigma(1.0, 2.0).unwrap()),
        };
        let s = CapitalSettings {
            k: 10,
            ..CapitalSettings::new(3)
        };
        let r = capital_at("t", &theta, &s).unwrap();
        assert!(r.warnings.contains(&Warning::UnreliableCi));
    }

    #[test]
    fn reports_are_deterministic() {
        let d = synthetic(20, 5);
        let m = CellModel::new("c", SeverityModel::Lognormal);
        assert_eq!(
            predictive_capital(&m, &d, &small(9)).unwrap(),
            predictive_capital(&m, &d, &small(9)).unwrap()
        );
        assert_eq!(
            conditional_capital(&m, &d, &small(9)).unwrap(),
            conditional_capital(&m, &d, &small(9)).unwrap()
        );
    }

    #[test]
    fn predictive_report_fields() {
        let d = synthetic(20, 6);
        let m = CellModel::new("c", SeverityModel::Lognormal);
        let r = predictive_capital(&m, &d, &small(2)).unwrap();
        let post = r.posterior.unwrap();
        assert_eq!(post.names, ["lambda", "mu", "sigma"]);
        let mle = r.mle.unwrap();
        assert!((post.modes[0] - mle.lambda).abs() < 1e-12);
        for (m, iv) in post.modes.iter().zip(&post.intervals) {
            assert!(iv.lower < *m && *m < iv.upper);
        }
        let c = conditional_capital(&m, &d, &small(2)).unwrap();
        assert!(c.posterior.is_none() && c.mle.is_some());
    }

    #[test]
    fn pareto_warning_and_its_remedy() {
        let p = ParetoParams::new(1.5, 1.0).unwrap();
        let mut rng = RngStream::new(4, 0);
        let counts = vec![3, 2, 4];
        let sev = (0..9).map(|_| p.sample(&mut rng)).collect();
        let d = LossData::new(counts, sev).unwrap();
        let mut m = CellModel::new("p", SeverityModel::Pareto { threshold: 1.0 });
        let r = predictive_capital(&m, &d, &small(1)).unwrap();
        assert!(r.warnings.iter().any(|w| w.code() == "infinite_mean"), "{:?}", r.warnings);
        m.pareto_finite_mean = true;
        let r = predictive_capital(&m, &d, &small(1)).unwrap();
        assert!(r.warnings.iter().all(|w| w.code() != "infinite_mean"), "{:?}", r.warnings);
    }

    #[test]
    fn pareto_below_threshold_is_rejected() {
        let d = LossData::new(vec![2], vec![0.5, 3.0]).unwrap();
        let m = CellModel::new("p", SeverityModel::Pareto { threshold: 1.0 });
        assert!(matches!(
            predictive_capital(&m, &d, &small(1)),
            Err(Error::SeverityBelowThreshold { .. })
        ));
        assert!(matches!(
            conditional_capital(&m, &d, &small(1)),
            Err(Error::SeverityBelowThreshold { .. })
        ));
    }

    #[test]
    fn adaptive_settings_respect_cap() {
        let d = synthetic(10, 8);
        let m = CellModel::new("c", SeverityModel::Lognormal);
        let s = CapitalSettings {
            k: 30_000,
            target_rel_half_width: Some(1e-6),
            ..CapitalSettings::new(1)
        };
        let r = conditional_capital(&m, &d, &s).unwrap();
        assert_eq!(r.estimate.k, 30_000);
        assert!(r.warnings.iter().any(|w| w.code() == "unconverged"));
    }

    #[test]
    fn aggregation() {
        let c = |id: &str, v: f64| CellCapital {
            cell_id: id.into(),
            mode: CapitalMode::Predictive,
            q: 0.999,
            value: v,
        };
        assert_eq!(aggregate_cells(&[c("a", 4.9)]).unwrap().total, 4.9);
        let b = aggregate_cells(&[c("a", 3.0), c("b", 4.0)]).unwrap();
        assert_eq!(b.total, 7.0);
        assert!(b.note.contains("perfect dependence"));
        assert!(aggregate_cells(&[]).is_err());
        let mut other = c("b", 1.0);
        other.q = 0.99;
        assert!(matches!(
            aggregate_cells(&[c("a", 1.0), other.clone()]),
            Err(Error::InconsistentReports(_))
        ));
        other.q = 0.999;
        other.mode = CapitalMode::Conditional;
        assert!(aggregate_cells(&[c("a", 1.0), other]).is_err());
    }

    #[test]
    fn bank_total_from_real_reports() {
        let m = CellModel::new("x", SeverityModel::Lognormal);
        let reports: Vec<_> = (0..3u64)
            .map(|i| {
                let mut mi = m.clone();
                mi.cell_id = format!("cell{i}");
                conditional_capital(&mi, &synthetic(10, i), &small(cell_seed(7, &mi.cell_id))).unwrap()
            })
            .collect();
        let b = aggregate_bank_capital(&reports).unwrap();
        let max = reports.iter().map(|r| r.estimate.value).fold(0.0, f64::max);
        assert!(b.total >= max);
    }

    proptest! {
        #[test]
        fn aggregate_is_permutation_invariant(vals in prop::collection::vec(0.0f64..1e6, 1..8), rot in 0usize..8) {
            let cells: Vec<CellCapital> = vals.iter().enumerate().map(|(i, v)| CellCapital {
                cell_id: format!("c{i}"), mode: CapitalMode::Conditional, q: 0.999, value: *v,
            }).collect();
            let mut shuffled = cells.clone();
            shuffled.rotate_left(rot % cells.len());
            shuffled.reverse();
            let a = aggregate_cells(&cells).unwrap().total;
            let b = aggregate_cells(&shuffled).unwrap().total;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            // associativity: sum of sub-totals
            let k = cells.len() / 2;
            let parts = if k == 0 { a } else {
                aggregate_cells(&cells[..k]).unwrap().total + aggregate_cells(&cells[k..]).unwrap().total
            };
            prop_assert!((a - parts).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
