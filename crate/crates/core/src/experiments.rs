//! Synthetic-data studies of the predictive versus conditional quantile.
//!
//! Every dataset is generated year by year (the count, then that year's
//! severities), so the first `m` years of a longer history are exactly the
//! history a shorter run would have drawn. A track over a grid of `M` therefore
//! follows one growing realization.

use serde::{Deserialize, Serialize};

use crate::capital::{
    capital_at, conditional_capital, predictive_capital, CapitalSettings, CellModel, LossData,
    PosteriorSummary, SeverityModel,
};
use crate::distributions::{LognormalParams, ParetoParams, PoissonParams};
use crate::error::{Error, Result};
use crate::estimators::MleReport;
use crate::mc_engine::{CellParams, SeverityParams, SimOptions};
use crate::rng::{derive_seed, RngStream};

/// Observation-year grid of the single-realization table.
pub const DEFAULT_GRID: [usize; 10] = [5, 10, 15, 20, 40, 60, 80, 100, 200, 400];
/// Simulations used for the true-parameter reference quantile `Q⁽⁰⁾`.
pub const Q0_K: usize = 1_000_000;

const STAGE_DATA: u64 = 1;
const STAGE_SIM: u64 = 2;
const STAGE_Q0: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub lambda0: f64,
    pub severity: SeverityParams,
}

impl TrueModel {
    pub fn new(lambda0: f64, severity: SeverityParams) -> Result<Self> {
        PoissonParams::new(lambda0)?;
        Ok(Self { lambda0, severity })
    }

    /// `Poisson(10)` with `LN(μ = 1, σ = 2)` severities.
    pub fn lognormal_reference() -> Self {
        Self {
            lambda0: 10.0,
            severity: SeverityParams::Lognormal(LognormalParams::from_mu_sigma(1.0, 2.0).expect("valid")),
        }
    }

    /// `Poisson(10)` with `Pareto(ξ = 2, L = 1)` severities.
    pub fn pareto_reference() -> Self {
        Self {
            lambda0: 10.0,
            severity: SeverityParams::Pareto(ParetoParams::new(2.0, 1.0).expect("valid")),
        }
    }

    pub fn params(&self) -> CellParams {
        CellParams {
            frequency: PoissonParams::new(self.lambda0).expect("checked in new"),
            severity: self.severity,
        }
    }

    /// Non-informative model of the same families.
    pub fn cell_model(&self, cell_id: &str) -> CellModel {
        let sev = match self.severity {
            SeverityParams::Lognormal(_) => SeverityModel::Lognormal,
            SeverityParams::Pareto(p) => SeverityModel::Pareto {
                threshold: p.threshold(),
            },
        };
        CellModel::new(cell_id, sev)
    }
}

/// `M` years of losses from the true model.
pub fn generate_synthetic(model: &TrueModel, years: usize, rng: &mut RngStream) -> Result<LossData> {
    if years == 0 {
        return Err(Error::InvalidParameter("need at least one year".into()));
    }
    let freq = PoissonParams::new(model.lambda0)?;
    let mut counts = Vec::with_capacity(years);
    let mut sev = Vec::new();
    for _ in 0..years {
        let n = freq.sample(rng);
        counts.push(n);
        sev.extend((0..n).map(|_| model.severity.sample(rng)));
    }
    LossData::new(counts, sev)
}

/// One row of the single-realization table. Quantiles are in thousands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRecord {
    pub years: usize,
    pub events: usize,
    pub mle: MleReport,
    pub posterior: PosteriorSummary,
    pub q_conditional: f64,
    pub q_predictive: f64,
}

fn check_grid(grid: &[usize]) -> Result<usize> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!(
            "year grid must be non-empty, positive and strictly ascending, got {grid:?}"
        )));
    }
    Ok(*grid.last().expect("non-empty"))
}

fn settings(q: f64, k: usize, seed: u64, sim: SimOptions) -> CapitalSettings {
    CapitalSettings {
        q,
        k,
        sim,
        ..CapitalSettings::new(seed)
    }
}

/// Conditional and predictive quantiles, both at the same seed.
fn compare(model: &TrueModel, data: &LossData, s: &CapitalSettings) -> Result<(f64, f64, MleReport, PosteriorSummary)> {
    let cell = model.cell_model("synthetic");
    let c = conditional_capital(&cell, data, s)?;
    let p = predictive_capital(&cell, data, s)?;
    Ok((
        c.estimate.value,
        p.estimate.value,
        c.mle.expect("conditional reports carry the MLE"),
        p.posterior.expect("predictive reports carry the posterior"),
    ))
}

/// Fits one growing realization at each `M` of the grid and compares the two
/// quantile estimators under non-informative priors.
pub fn single_realization_track(
    model: &TrueModel,
    grid: &[usize],
    q: f64,
    k_sims: usize,
    seed: u64,
    sim: SimOptions,
) -> Result<Vec<BiasRecord>> {
    let max_m = check_grid(grid)?;
    let mut rng = RngStream::new(derive_seed(seed, &[STAGE_DATA]), 0);
    let full = generate_synthetic(model, max_m, &mut rng)?;
    grid.iter()
        .map(|&m| {
            let data = full.prefix(m)?;
            let s = settings(q, k_sims, derive_seed(seed, &[STAGE_SIM, m as u64]), sim);
            let (qc, qp, mle, posterior) = compare(model, &data, &s)?;
            Ok(BiasRecord {
                years: m,
                events: data.events(),
                mle,
                posterior,
                q_conditional: qc / 1000.0,
                q_predictive: qp / 1000.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 20 realizations at `K = 10⁵`.
    Desk,
    /// 100 realizations at `K = 10⁶`.
    Paper,
}

impl Scale {
    pub fn realizations(self) -> usize {
        match self {
            Scale::Desk => 20,
            Scale::Paper => 100,
        }
    }

    pub fn k_sims(self) -> usize {
        match self {
            Scale::Desk => 100_000,
            Scale::Paper => 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub years: usize,
    /// `mean(Q̂ᴮ − Q̂) / Q⁽⁰⁾`.
    pub relative_bias: f64,
    /// Standard error of the mean difference, in the same units.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub points: Vec<BiasPoint>,
    pub realizations: usize,
    /// Conditional quantile at the true parameters, in loss units.
    pub q0: f64,
}

/// Relative bias `E[Q̂ᴮ − Q̂] / Q⁽⁰⁾` over independent realizations. Within a
/// realization the data are nested across the grid; `(r, M)` pairs use
/// independent simulation streams.
pub fn bias_study(
    model: &TrueModel,
    grid: &[usize],
    realizations: usize,
    q: f64,
    k_sims: usize,
    seed: u64,
    sim: SimOptions,
) -> Result<BiasCurve> {
    let max_m = check_grid(grid)?;
    if realizations == 0 {
        return Err(Error::InvalidParameter("need at least one realization".into()));
    }
    let q0 = capital_at(
        "q0",
        &model.params(),
        &settings(q, Q0_K, derive_seed(seed, &[STAGE_Q0]), sim),
    )?
    .estimate
    .value;

    let mut diffs = vec![Vec::with_capacity(realizations); grid.len()];
    for r in 0..realizations as u64 {
        let mut rng = RngStream::new(derive_seed(seed, &[STAGE_DATA, r]), 0);
        let full = generate_synthetic(model, max_m, &mut rng)?;
        for (i, &m) in grid.iter().enumerate() {
            let s = settings(q, k_sims, derive_seed(seed, &[STAGE_SIM, r, m as u64]), sim);
            let (qc, qp, _, _) = compare(model, &full.prefix(m)?, &s)?;
            diffs[i].push(qp - qc);
        }
    }

    let points = grid
        .iter()
        .zip(&diffs)
        .map(|(&m, d)| {
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let se = if d.len() > 1 {
                (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                f64::NAN
            };
            BiasPoint {
                years: m,
                relative_bias: mean / q0,
                std_error: se / q0,
            }
        })
        .collect();
    Ok(BiasCurve {
        points,
        realizations,
        q0,
    })
}
