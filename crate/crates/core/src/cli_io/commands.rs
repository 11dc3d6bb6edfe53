use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::*;
use crate::bayes::Conjugate;
use crate::capital::{
    aggregate_cells, cell_seed, conditional_capital, fit_mle, fit_posteriors, predictive_capital,
    PosteriorSummary, SeverityModel,
};
use crate::distributions::{LognormalParams, ParetoParams};
use crate::error::ErrorClass;
use crate::experiments::{bias_study, single_realization_track, generate_synthetic, Scale, TrueModel, DEFAULT_GRID};
use crate::mc_engine::SeverityParams;
use crate::rng::{derive_seed, RngStream};

#[derive(Debug, Parser)]
#[command(name = "riskcap", version, about = "Loss-distribution capital with parameter uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit MLEs and posteriors and print them with credible intervals.
    Fit(FitArgs),
    /// Estimate conditional and/or predictive capital per cell.
    Capital(CapitalArgs),
    /// Write synthetic counts and events files from a known model.
    Simulate(SimulateArgs),
    /// Synthetic studies: the single-realization table or the bias curve.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Sum per-cell capital from capital CSVs into a bank total.
    Aggregate(AggregateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Lognormal,
    Pareto,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `year,count` file (single-cell runs).
    #[arg(long)]
    counts: Option<PathBuf>,
    /// `year,amount` file (single-cell runs).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Severity family when no config is given.
    #[arg(long, value_enum)]
    severity: Option<Family>,
    /// Pareto threshold L.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "cell")]
    cell_id: String,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Credible level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// CSV output path.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CapitalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    mode: Option<ModeSelection>,
    #[arg(long)]
    q: Option<f64>,
    /// Number of simulated years (the cap when --target is set).
    #[arg(long, short = 'k')]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stop once the interval's relative half-width reaches this.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrueModelArgs {
    #[arg(long, default_value_t = 10.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "lognormal")]
    severity: Family,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    xi: f64,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
}

impl TrueModelArgs {
    fn model(&self) -> Result<TrueModel> {
        let sev = match self.severity {
            Family::Lognormal => SeverityParams::Lognormal(LognormalParams::from_mu_sigma(self.mu, self.sigma)?),
            Family::Pareto => SeverityParams::Pareto(ParetoParams::new(self.xi, self.threshold)?),
        };
        TrueModel::new(self.lambda, sev)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: TrueModelArgs,
    #[arg(long)]
    years: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    events: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

impl From<ScaleArg> for Scale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        }
    }
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Observation years, comma separated and ascending.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// desk: 20 realizations at K=1e5; paper: 100 at K=1e6.
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    #[arg(long, short = 'k')]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.999)]
    q: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// One growing realization fitted at each M of the grid.
    Table1 {
        #[command(flatten)]
        model: TrueModelArgs,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Relative bias of the predictive quantile averaged over realizations.
    Bias {
        #[command(flatten)]
        study: StudyArgs,
        /// Reference models: Poisson(10) with LN(1, 2) and/or Pareto(2, L=1).
        #[arg(long, value_enum, default_value = "both")]
        family: BiasFamily,
        #[arg(long)]
        realizations: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BiasFamily {
    Lognormal,
    Pareto,
    Both,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    /// Capital CSVs produced by `riskcap capital`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Keep only rows of this mode (needed for files written with mode both).
    #[arg(long, value_enum)]
    mode: Option<ModeFilter>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeFilter {
    Conditional,
    Predictive,
}

pub fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Computation => 3,
        ErrorClass::Io => 4,
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|e| Error::io("<stdout>", e))?
    };
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Capital(a) => cmd_capital(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Experiment(e) => cmd_experiment(e, out),
        Command::Aggregate(a) => cmd_aggregate(a, out),
    }
}

fn load_cells(a: &DataArgs) -> Result<(RunConfig, Vec<(CellModel, LossData)>)> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cfg.cells.is_empty() {
        let family = a.severity.ok_or_else(|| {
            Error::Validation("give --config with cells, or --severity with --counts and --events".into())
        })?;
        let sev = match family {
            Family::Lognormal => SeverityModel::Lognormal,
            Family::Pareto => SeverityModel::Pareto {
                threshold: a
                    .threshold
                    .ok_or_else(|| Error::Validation("--threshold is required for pareto".into()))?,
            },
        };
        cfg.cells.push(CellConfig {
            model: CellModel::new(a.cell_id.clone(), sev),
            counts: None,
            events: None,
        });
    }
    if a.counts.is_some() || a.events.is_some() {
        if cfg.cells.len() != 1 {
            return Err(Error::Validation(
                "--counts/--events apply to single-cell runs only".into(),
            ));
        }
        let c = &mut cfg.cells[0];
        c.counts = a.counts.clone().or(c.counts.take());
        c.events = a.events.clone().or(c.events.take());
    }
    cfg.validate()?;
    let cells = cfg
        .cells
        .iter()
        .map(|c| {
            let (Some(cp), Some(ep)) = (&c.counts, &c.events) else {
                return Err(Error::Validation(format!(
                    "cell {}: counts and events files are required",
                    c.model.cell_id
                )));
            };
            Ok((c.model.clone(), load_loss_data(cp, ep)?))
        })
        .collect::<Result<_>>()?;
    Ok((cfg, cells))
}

fn describe(c: &Conjugate) -> String {
    match c {
        Conjugate::PoissonRate(g) => format!("lambda ~ Gamma(shape {}, scale {})", sig4(g.shape()), sig4(g.scale())),
        Conjugate::Lognormal(n) => format!(
            "(mu, sigma^2) ~ NIX(nu {}, beta {}, theta {}, phi {})",
            sig4(n.dof_nu()),
            sig4(n.scale_beta()),
            sig4(n.loc_theta()),
            sig4(n.prec_phi())
        ),
        Conjugate::ParetoTail { tail, .. } => {
            format!("xi ~ Gamma(shape {}, scale {})", sig4(tail.shape()), sig4(tail.scale()))
        }
    }
}

fn bracket(v: f64, lo: f64, hi: f64) -> String {
    format!("{} ({}, {})", sig4(v), sig4(lo), sig4(hi))
}

fn cmd_fit(a: FitArgs, out: &mut dyn Write) -> Result<()> {
    let (_, cells) = load_cells(&a.data)?;
    let mut rows: Vec<[String; 6]> = vec![];
    for (model, data) in &cells {
        let mle = fit_mle(model, data)?;
        let (freq, sev) = fit_posteriors(model, data)?;
        let summary = PosteriorSummary::of(&[&freq, &sev], a.level)?;
        let est: BTreeMap<&str, f64> = mle.estimates().into_iter().collect();
        say!(out, "cell {}: {} years, {} events", model.cell_id, data.years(), data.events());
        say!(out, "  posterior {}", describe(freq.conjugate()));
        say!(out, "  posterior {}", describe(sev.conjugate()));
        let pct = a.level * 100.0;
        for ((name, mode), iv) in summary.names.iter().zip(&summary.modes).zip(&summary.intervals) {
            say!(
                out,
                "  {name:<7} MLE {}  mode {}  {pct}% interval ({}, {})",
                sig4(est[name.as_str()]),
                sig4(*mode),
                sig4(iv.lower),
                sig4(iv.upper)
            );
            rows.push([
                model.cell_id.clone(),
                name.clone(),
                est[name.as_str()].to_string(),
                mode.to_string(),
                iv.lower.to_string(),
                iv.upper.to_string(),
            ]);
        }
        if let Some(p) = sev.infinite_mean_probability().filter(|p| *p > crate::capital::INFINITE_MEAN_TOLERANCE) {
            say!(out, "  warning: {}", crate::capital::Warning::InfiniteMean { probability: p });
        }
    }
    if let Some(path) = &a.output {
        let mut w = create_csv(path)?;
        w.write_record(["cell_id", "parameter", "mle", "posterior_mode", "lower", "upper"])?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn cmd_capital(a: CapitalArgs, out: &mut dyn Write) -> Result<()> {
    let (mut cfg, cells) = load_cells(&a.data)?;
    cfg.q = a.q.unwrap_or(cfg.q);
    cfg.k = a.k.unwrap_or(cfg.k);
    cfg.gamma = a.gamma.unwrap_or(cfg.gamma);
    cfg.mode = a.mode.unwrap_or(cfg.mode);
    cfg.target_rel_half_width = a.target.or(cfg.target_rel_half_width);
    cfg.workers = a.workers.or(cfg.workers);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    cfg.validate()?;
    let seed = resolve_seed(a.seed, cfg.seed)?;
    say!(out, "# riskcap capital seed={seed} q={} K={} gamma={}", cfg.q, cfg.k, cfg.gamma);

    let mut reports = vec![];
    for (model, data) in &cells {
        let settings = cfg.settings(cell_seed(seed, &model.cell_id));
        for mode in cfg.mode.modes() {
            let r = match mode {
                CapitalMode::Conditional => conditional_capital(model, data, &settings)?,
                CapitalMode::Predictive => predictive_capital(model, data, &settings)?,
            };
            let e = &r.estimate;
            say!(
                out,
                "{} {:<11} Q({}) = {}  {}% CI ({}, {})  K = {}",
                r.cell_id,
                r.mode,
                e.q,
                sig4(e.value),
                e.ci_level * 100.0,
                sig4(e.ci_lower),
                sig4(e.ci_upper),
                e.k
            );
            if let Some(p) = &r.posterior {
                let parts: Vec<String> = p
                    .names
                    .iter()
                    .zip(&p.modes)
                    .zip(&p.intervals)
                    .map(|((n, m), iv)| format!("{n} {}", bracket(*m, iv.lower, iv.upper)))
                    .collect();
                say!(out, "  posterior modes: {}", parts.join(", "));
            } else if let Some(m) = &r.mle {
                let parts: Vec<String> = m
                    .estimates()
                    .iter()
                    .filter(|(n, _)| *n != "sigma_sq")
                    .map(|(n, v)| format!("{n} {}", sig4(*v)))
                    .collect();
                say!(out, "  MLE: {}", parts.join(", "));
            }
            for w in &r.warnings {
                say!(out, "  warning: {w}");
            }
            reports.push(r);
        }
    }
    if let Some(path) = &a.output {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        write_capital_csv(f, &reports)?;
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let model = a.model.model()?;
    let seed = resolve_seed(a.seed, None)?;
    let data = generate_synthetic(&model, a.years, &mut RngStream::new(seed, 0))?;
    write_loss_files(&data, &a.counts, &a.events)?;
    say!(
        out,
        "# riskcap simulate seed={seed}: {} years, {} events -> {}, {}",
        data.years(),
        data.events(),
        a.counts.display(),
        a.events.display()
    );
    Ok(())
}

fn study_options(s: &StudyArgs) -> Result<(Vec<usize>, usize, SimOptions, u64)> {
    let grid = s.grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let k = s.k.unwrap_or(Scale::from(s.scale).k_sims());
    if s.workers == Some(0) {
        return Err(Error::Validation("workers must be at least 1".into()));
    }
    let sim = SimOptions {
        workers: s.workers,
        ..SimOptions::default()
    };
    Ok((grid, k, sim, resolve_seed(s.seed, None)?))
}

fn write_output(path: &Option<PathBuf>, f: impl FnOnce(File) -> Result<()>) -> Result<()> {
    if let Some(p) = path {
        f(File::create(p).map_err(|e| Error::io(p, e))?)?;
    }
    Ok(())
}

fn cmd_experiment(e: ExperimentCommand, out: &mut dyn Write) -> Result<()> {
    match e {
        ExperimentCommand::Table1 { model, study } => {
            let tm = model.model()?;
            let (grid, k, sim, seed) = study_options(&study)?;
            say!(out, "# riskcap experiment table1 seed={seed} K={k} q={} (quantiles in thousands)", study.q);
            let rows = single_realization_track(&tm, &grid, study.q, k, seed, sim)?;
            for r in &rows {
                let est: BTreeMap<&str, f64> = r.mle.estimates().into_iter().collect();
                let params: Vec<String> = r
                    .posterior
                    .names
                    .iter()
                    .zip(&r.posterior.intervals)
                    .map(|(n, iv)| format!("{n} {}", bracket(est[n.as_str()], iv.lower, iv.upper)))
                    .collect();
                say!(
                    out,
                    "M={:<4} K={:<5} {}  Q={}  QB={}",
                    r.years,
                    r.events,
                    params.join("  "),
                    sig4(r.q_conditional),
                    sig4(r.q_predictive)
                );
            }
            write_output(&study.output, |f| write_table1_csv(f, &rows))
        }
        ExperimentCommand::Bias {
            study,
            family,
            realizations,
        } => {
            let (grid, k, sim, seed) = study_options(&study)?;
            let r = realizations.unwrap_or(Scale::from(study.scale).realizations());
            say!(out, "# riskcap experiment bias seed={seed} R={r} K={k} q={}", study.q);
            let mut models = vec![];
            if family != BiasFamily::Pareto {
                models.push(("lognormal", TrueModel::lognormal_reference()));
            }
            if family != BiasFamily::Lognormal {
                models.push(("pareto", TrueModel::pareto_reference()));
            }
            let mut curves = vec![];
            for (i, (name, m)) in models.into_iter().enumerate() {
                let c = bias_study(&m, &grid, r, study.q, k, derive_seed(seed, &[i as u64]), sim)?;
                say!(out, "{name}: Q0 = {}", sig4(c.q0));
                for p in &c.points {
                    say!(out, "  M={:<4} relative bias {} (se {})", p.years, sig4(p.relative_bias), sig4(p.std_error));
                }
                curves.push((name, c));
            }
            write_output(&study.output, |f| write_bias_csv(f, &curves))
        }
    }
}

fn cmd_aggregate(a: AggregateArgs, out: &mut dyn Write) -> Result<()> {
    let mut rows = vec![];
    for p in &a.inputs {
        rows.extend(read_capital_csv(p)?);
    }
    if let Some(m) = a.mode {
        let keep = match m {
            ModeFilter::Conditional => CapitalMode::Conditional,
            ModeFilter::Predictive => CapitalMode::Predictive,
        };
        rows.retain(|r| r.mode == keep);
    }
    let cells: Vec<CellCapital> = rows.iter().map(CellCapital::from).collect();
    let bank = aggregate_cells(&cells)?;
    say!(out, "# riskcap aggregate mode={} q={}", bank.mode, bank.q);
    for c in &bank.cells {
        say!(out, "{:<16} {}", c.cell_id, sig4(c.value));
    }
    say!(out, "{:<16} {}", TOTAL_ROW, sig4(bank.total));
    say!(out, "note: {}", bank.note);
    write_output(&a.output, |f| write_aggregate_csv(f, &bank))
}
