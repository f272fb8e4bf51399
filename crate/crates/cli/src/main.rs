use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sirid::estimation::{
    estimate_remaining, fit_growth_rate, survey_immunity, survey_reporting_at_peak, PeakScope, SummaryStats, Supplied,
    DEFAULT_GROWTH_THRESHOLD,
};
use sirid::harness::{self, Branch, ExperimentConfig};
use sirid::identifiability::{self, Pin};
use sirid::likelihood::{self, LikelihoodInput, Point};
use sirid::ode::{self, TimeGrid};
use sirid::stochastic::{self, EventLog};
use sirid::{InitialConditions, ModelParams, Scenario, SeededRng};

#[derive(Parser)]
#[command(
    name = "sirid",
    version,
    about = "SIR epidemics with under-reporting and prior immunity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Random seed
    #[arg(long, default_value_t = 2025)]
    seed: u64,
    /// Parameter file {"beta_r","beta_u","p","pi","gamma","n","i0"}; defaults to the reference set
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output file; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn scenario(&self) -> Result<(ModelParams, InitialConditions)> {
        let scenario = match &self.params {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Scenario::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Scenario::reference(),
        };
        Ok(scenario.split()?)
    }

    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one stochastic epidemic and write its event log
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Stop at this time instead of at extinction
        #[arg(long)]
        end_time: Option<f64>,
    },
    /// Integrate the deterministic model
    Integrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long, default_value_t = ode::DEFAULT_DT)]
        dt: f64,
        /// Write every k-th grid point
        #[arg(long, default_value_t = 100)]
        stride: usize,
        /// Integrate the one-dimensional reported equation and rebuild the rest
        #[arg(long)]
        reduced: bool,
    },
    /// Find the parameter set sharing the reported trajectory with a pinned value
    Equivalent {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pin: PinArgs,
        #[arg(long, default_value_t = 30.0)]
        t_end: f64,
        #[arg(long, default_value_t = ode::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
    /// Parameter sets consistent with a growth rate and reported final size
    Scan {
        #[command(flatten)]
        common: Common,
        /// Growth rate; defaults to the value implied by the parameters
        #[arg(long)]
        rho: Option<f64>,
        /// Reported final size; defaults to the value implied by the parameters
        #[arg(long)]
        z_r: Option<f64>,
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Estimate the remaining parameters from summaries and one supplied value
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Event log CSV to take the growth rate, final size and surveys from
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        rho_hat: Option<f64>,
        #[arg(long)]
        z_r_hat: Option<f64>,
        /// Known immune fraction
        #[arg(long, conflicts_with = "p")]
        pi: Option<f64>,
        /// Known reporting fraction
        #[arg(long)]
        p: Option<f64>,
        /// Survey the log instead of supplying pi or p
        #[arg(long, value_enum, requires = "log")]
        survey: Option<SurveyArg>,
        #[arg(long, default_value_t = 1000)]
        survey_size: u64,
        #[arg(long, value_enum, default_value_t = ScopeArg::NonSusceptible)]
        peak_scope: ScopeArg,
        #[arg(long, default_value_t = DEFAULT_GROWTH_THRESHOLD)]
        growth_threshold: f64,
    },
    /// Run the Monte Carlo estimation experiment
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        target: usize,
        #[arg(long)]
        max_attempts: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        survey_size: u64,
        #[arg(long, value_enum, default_value_t = BranchArg::Both)]
        branch: BranchArg,
        #[arg(long, value_enum, default_value_t = ScopeArg::NonSusceptible)]
        peak_scope: ScopeArg,
        #[arg(long, default_value_t = 0.05)]
        outbreak_threshold: f64,
        #[arg(long, default_value_t = DEFAULT_GROWTH_THRESHOLD)]
        growth_threshold: f64,
        /// Also write the per-replicate CSV here (JSON format only)
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Compare analytic likelihood derivatives with finite differences
    LikCheck {
        #[command(flatten)]
        common: Common,
        /// Event log CSV
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        beta_star: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        pi: Option<f64>,
        /// Observation horizon; defaults to the last event
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        rel_step: f64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PinArgs {
    #[arg(long)]
    pin_p: Option<f64>,
    #[arg(long)]
    pin_pi: Option<f64>,
    #[arg(long)]
    pin_beta: Option<f64>,
}

impl PinArgs {
    fn pin(&self) -> Pin {
        match (self.pin_p, self.pin_pi, self.pin_beta) {
            (Some(p), _, _) => Pin::ReportingFraction(p),
            (_, Some(pi), _) => Pin::ImmuneFraction(pi),
            (_, _, Some(b)) => Pin::EffectiveBeta(b),
            _ => unreachable!("clap enforces exactly one pin"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SurveyArg {
    Immunity,
    Peak,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Infectious,
    NonSusceptible,
}

impl From<ScopeArg> for PeakScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Infectious => PeakScope::Infectious,
            ScopeArg::NonSusceptible => PeakScope::NonSusceptible,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    GivenPi,
    GivenP,
    Both,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::GivenPi => Branch::GivenPi,
            BranchArg::GivenP => Branch::GivenP,
            BranchArg::Both => Branch::Both,
        }
    }
}

fn write_json<T: Serialize>(mut w: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_log(path: &Path) -> Result<EventLog> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    EventLog::read_csv(BufReader::new(file)).with_context(|| format!("reading event log {}", path.display()))
}

#[derive(Serialize)]
struct PathRow {
    t: f64,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "Ir")]
    ir: f64,
    #[serde(rename = "Iu")]
    iu: f64,
    #[serde(rename = "Rr")]
    rr: f64,
    #[serde(rename = "Ru")]
    ru: f64,
    #[serde(rename = "intIr")]
    int_ir: f64,
}

fn integrate(common: &Common, t_end: f64, dt: f64, stride: usize, reduced: bool) -> Result<()> {
    let (params, init) = common.scenario()?;
    let grid = TimeGrid::new(0.0, t_end, dt)?;
    let path = if reduced {
        ode::reconstruct_compartments(&ode::integrate_reduced(&params, &init, &grid)?, &params, &init)?
    } else {
        ode::integrate_full(&params, &init, &grid)?
    };
    let w = common.writer()?;
    match common.format_or(Format::Csv) {
        Format::Csv => path.write_csv(w, stride)?,
        Format::Json => {
            let stride = stride.max(1);
            let rows: Vec<PathRow> = path
                .states
                .iter()
                .zip(&path.cumulative_ir_integral)
                .enumerate()
                .filter(|(i, _)| i % stride == 0 || *i == grid.steps())
                .map(|(i, (s, &int_ir))| PathRow {
                    t: grid.time(i),
                    s: s.s,
                    ir: s.ir,
                    iu: s.iu,
                    rr: s.rr,
                    ru: s.ru,
                    int_ir,
                })
                .collect();
            write_json(w, &rows)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EquivalentOutput {
    base: Scenario,
    equivalent: Scenario,
    base_invariants: identifiability::EquivalenceInvariants,
    equivalent_invariants: identifiability::EquivalenceInvariants,
    identity: identifiability::IdentityReport,
}

fn equivalent(common: &Common, pin: Pin, t_end: f64, dt: f64, stride: usize) -> Result<()> {
    let (base, init) = common.scenario()?;
    let other = identifiability::equivalent_params(&base, pin)?;
    let grid = TimeGrid::new(0.0, t_end, dt)?;
    let w = common.writer()?;
    match common.format_or(Format::Json) {
        Format::Json => {
            let identity = identifiability::certify_identity(
                &base,
                &other,
                &init,
                &grid,
                identifiability::default_tolerance(&init),
            )?;
            write_json(
                w,
                &EquivalentOutput {
                    base: Scenario::from_parts(&base, &init),
                    equivalent: Scenario::from_parts(&other, &init),
                    base_invariants: identifiability::invariants_of(&base),
                    equivalent_invariants: identifiability::invariants_of(&other),
                    identity,
                },
            )?;
        }
        Format::Csv => {
            let a = ode::integrate_full(&base, &init, &grid)?;
            let b = ode::integrate_full(&other, &init, &grid)?;
            let mut w = w;
            writeln!(w, "t,Ir_base,Ir_equivalent,S_base,S_equivalent")?;
            for (i, (x, y)) in a.states.iter().zip(&b.states).enumerate() {
                if i % stride.max(1) == 0 || i == grid.steps() {
                    writeln!(
                        w,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        grid.time(i),
                        x.ir,
                        y.ir,
                        x.s,
                        y.s
                    )?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn scan(common: &Common, rho: Option<f64>, z_r: Option<f64>, points: usize) -> Result<()> {
    let (params, _) = common.scenario()?;
    let rho = rho.unwrap_or(params.derived_rates().rho);
    let z_r = z_r.unwrap_or_else(|| sirid::estimation::predicted_reported_final_size(&params));
    let grid = identifiability::default_pi_grid(rho, params.gamma(), points);
    let result = identifiability::manifold_scan(rho, z_r, params.gamma(), &grid)?;
    let w = common.writer()?;
    match common.format_or(Format::Csv) {
        Format::Csv => identifiability::write_scan_csv(&result, w)?,
        Format::Json => write_json(w, &result)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput {
    rho_hat: f64,
    z_r_hat: f64,
    z_hat: f64,
    supplied: Supplied,
    p_hat: f64,
    pi_hat: f64,
    beta_star_hat: f64,
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    common: &Common,
    log: Option<&Path>,
    rho_hat: Option<f64>,
    z_r_hat: Option<f64>,
    pi: Option<f64>,
    p: Option<f64>,
    survey: Option<SurveyArg>,
    survey_size: u64,
    scope: PeakScope,
    growth_threshold: f64,
) -> Result<()> {
    let (params, _) = common.scenario()?;
    let log = log.map(read_log).transpose()?;
    let rho_hat = match (rho_hat, &log) {
        (Some(r), _) => r,
        (None, Some(log)) => fit_growth_rate(log, growth_threshold)?.rho_hat,
        (None, None) => bail!("give --rho-hat or --log"),
    };
    let z_r_hat = match (z_r_hat, &log) {
        (Some(z), _) => z,
        (None, Some(log)) => stochastic::final_reported_fraction(log)?,
        (None, None) => bail!("give --z-r-hat or --log"),
    };
    let mut rng = SeededRng::new(common.seed);
    let known = match (pi, p, survey, &log) {
        (Some(pi), _, _, _) => Supplied::ImmuneFraction(pi),
        (_, Some(p), _, _) => Supplied::ReportingFraction(p),
        (_, _, Some(SurveyArg::Immunity), Some(log)) => {
            Supplied::from(&survey_immunity(&log.initial_state, survey_size, &mut rng))
        }
        (_, _, Some(SurveyArg::Peak), Some(log)) => {
            Supplied::from(&survey_reporting_at_peak(log, survey_size, scope, &mut rng)?)
        }
        _ => bail!("give --pi, --p or --survey"),
    };
    let stats = SummaryStats {
        rho_hat,
        z_r_hat,
        gamma: params.gamma(),
    };
    let est = estimate_remaining(&stats, known)?;
    let out = EstimateOutput {
        rho_hat,
        z_r_hat,
        z_hat: est.z_hat,
        supplied: est.supplied,
        p_hat: est.p_hat,
        pi_hat: est.pi_hat,
        beta_star_hat: est.beta_star_hat,
    };
    let mut w = common.writer()?;
    match common.format_or(Format::Json) {
        Format::Json => write_json(w, &out)?,
        Format::Csv => {
            let (kind, value) = match out.supplied {
                Supplied::ImmuneFraction(v) => ("pi", v),
                Supplied::ReportingFraction(v) => ("p", v),
            };
            writeln!(
                w,
                "rho_hat,z_r_hat,z_hat,supplied_kind,supplied_value,p_hat,pi_hat,beta_star_hat"
            )?;
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{kind},{:.16e},{:.16e},{:.16e},{:.16e}",
                out.rho_hat, out.z_r_hat, out.z_hat, value, out.p_hat, out.pi_hat, out.beta_star_hat
            )?;
            w.flush()?;
        }
    }
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>()
            .or(match c.downcast_ref::<sirid::Error>() {
                Some(sirid::Error::Io(e)) => Some(e),
                _ => None,
            })
            .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> Result<()> {
    match run(Cli::parse()) {
        Err(e) if is_broken_pipe(&e) => Ok(()),
        other => other,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, end_time } => {
            let (params, init) = common.scenario()?;
            let mut rng = SeededRng::new(common.seed);
            let log = stochastic::simulate(&params, &init, end_time.unwrap_or(f64::INFINITY), &mut rng)?;
            let w = common.writer()?;
            match common.format_or(Format::Csv) {
                Format::Csv => log.write_csv(w)?,
                Format::Json => write_json(w, &log)?,
            }
        }
        Command::Integrate {
            common,
            t_end,
            dt,
            stride,
            reduced,
        } => integrate(&common, t_end, dt, stride, reduced)?,
        Command::Equivalent {
            common,
            pin,
            t_end,
            dt,
            stride,
        } => equivalent(&common, pin.pin(), t_end, dt, stride)?,
        Command::Scan {
            common,
            rho,
            z_r,
            points,
        } => scan(&common, rho, z_r, points)?,
        Command::Estimate {
            common,
            log,
            rho_hat,
            z_r_hat,
            pi,
            p,
            survey,
            survey_size,
            peak_scope,
            growth_threshold,
        } => estimate(
            &common,
            log.as_deref(),
            rho_hat,
            z_r_hat,
            pi,
            p,
            survey,
            survey_size,
            peak_scope.into(),
            growth_threshold,
        )?,
        Command::Experiment {
            common,
            target,
            max_attempts,
            survey_size,
            branch,
            peak_scope,
            outbreak_threshold,
            growth_threshold,
            rows,
        } => {
            let (params, init) = common.scenario()?;
            let config = ExperimentConfig {
                survey_size,
                target_outbreaks: target,
                outbreak_threshold,
                growth_threshold,
                branch: branch.into(),
                peak_scope: peak_scope.into(),
                max_attempts: max_attempts.unwrap_or(10 * target),
                ..ExperimentConfig::new(params, init, common.seed)
            };
            let report = harness::run_experiment(&config)?;
            let w = common.writer()?;
            match common.format_or(Format::Json) {
                Format::Json => {
                    harness::write_report_json(&report, w)?;
                    if let Some(path) = rows {
                        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                        harness::write_rows_csv(&report.rows, BufWriter::new(file))?;
                    }
                }
                Format::Csv => harness::write_rows_csv(&report.rows, w)?,
            }
        }
        Command::LikCheck {
            common,
            log,
            beta_star,
            p,
            pi,
            horizon,
            rel_step,
        } => {
            let (params, _) = common.scenario()?;
            let log = read_log(&log)?;
            let input = LikelihoodInput::from_log(&log, horizon, params.gamma());
            let point = Point {
                beta_star: beta_star.unwrap_or(params.effective_beta()),
                p: p.unwrap_or(params.p()),
                pi: pi.unwrap_or(params.pi()),
            };
            let check = likelihood::check_point(&input, &point, rel_step)?;
            let mut w = common.writer()?;
            match common.format_or(Format::Json) {
                Format::Json => write_json(w, &check)?,
                Format::Csv => {
                    writeln!(w, "beta_star,p,pi,loglik,max_rel_err_grad,max_rel_err_hess")?;
                    writeln!(
                        w,
                        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        point.beta_star,
                        point.p,
                        point.pi,
                        check.loglik,
                        check.max_rel_err_grad,
                        check.max_rel_err_hess
                    )?;
                    w.flush()?;
                }
            }
        }
    }
    Ok(())
}
