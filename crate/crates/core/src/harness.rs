//! Monte Carlo estimation experiment: simulate, survey, estimate, aggregate.
//!
//! Replicate `index` always uses the seed `replicate_seed(master, index)`, and
//! rows are reduced in index order, so reports do not depend on how many
//! workers ran the replicates.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    estimate_remaining, fit_growth_rate, survey_immunity, survey_reporting_at_peak, PeakScope, SummaryStats, Supplied,
    DEFAULT_GROWTH_THRESHOLD,
};
use crate::model::{InitialConditions, ModelParams};
use crate::rng::{replicate_seed, SeededRng, RNG_ID};
use crate::stochastic::{final_reported_fraction, simulate};

pub const CSV_HEADER: [&str; 11] = [
    "index",
    "seed",
    "status",
    "rho_hat",
    "z_r_hat",
    "pi_survey",
    "p_survey",
    "p_hat_givenpi",
    "beta_hat_givenpi",
    "pi_hat_givenp",
    "beta_hat_givenp",
];

/// Which external quantity is surveyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Prior immunity surveyed at time zero.
    GivenPi,
    /// Reporting fraction surveyed at the peak.
    GivenP,
    /// Both, on the same simulated epidemic.
    Both,
}

impl Branch {
    fn wants_pi(self) -> bool {
        matches!(self, Branch::GivenPi | Branch::Both)
    }

    fn wants_p(self) -> bool {
        matches!(self, Branch::GivenP | Branch::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub init: InitialConditions,
    pub survey_size: u64,
    pub target_outbreaks: usize,
    /// Minimum final reported fraction of a major outbreak.
    pub outbreak_threshold: f64,
    pub growth_threshold: f64,
    pub master_seed: u64,
    pub branch: Branch,
    pub peak_scope: PeakScope,
    /// Gives up after this many replicates even if the target is not met.
    pub max_attempts: usize,
}

impl ExperimentConfig {
    pub fn new(params: ModelParams, init: InitialConditions, master_seed: u64) -> Self {
        Self {
            params,
            init,
            survey_size: 1000,
            target_outbreaks: 100,
            outbreak_threshold: 0.05,
            growth_threshold: DEFAULT_GROWTH_THRESHOLD,
            master_seed,
            branch: Branch::Both,
            peak_scope: PeakScope::NonSusceptible,
            max_attempts: 1000,
        }
    }

    pub fn reference(master_seed: u64) -> Self {
        Self::new(ModelParams::reference(), InitialConditions::reference(), master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.survey_size > self.init.n {
            return Err(Error::InvalidParameter {
                name: "survey_size",
                reason: format!("{} exceeds population {}", self.survey_size, self.init.n),
            });
        }
        if self.target_outbreaks == 0 {
            return Err(Error::InvalidParameter {
                name: "target_outbreaks",
                reason: "must be >= 1".into(),
            });
        }
        if self.max_attempts < self.target_outbreaks {
            return Err(Error::InvalidParameter {
                name: "max_attempts",
                reason: format!(
                    "{} is below target_outbreaks {}",
                    self.max_attempts, self.target_outbreaks
                ),
            });
        }
        for (name, v) in [
            ("outbreak_threshold", self.outbreak_threshold),
            ("growth_threshold", self.growth_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must lie in (0, 1], got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplicateStatus {
    Ok,
    MinorOutbreak,
    EstimationFailed(String),
}

impl ReplicateStatus {
    pub fn label(&self) -> String {
        match self {
            ReplicateStatus::Ok => "ok".into(),
            ReplicateStatus::MinorOutbreak => "minor_outbreak".into(),
            ReplicateStatus::EstimationFailed(reason) => format!("failed: {reason}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(ReplicateStatus::Ok),
            "minor_outbreak" => Ok(ReplicateStatus::MinorOutbreak),
            other => other
                .strip_prefix("failed: ")
                .map(|r| ReplicateStatus::EstimationFailed(r.to_string()))
                .ok_or_else(|| Error::Parse(format!("unknown replicate status {other:?}"))),
        }
    }
}

/// Estimates for one replicate; every field is `None` unless the status is
/// `Ok`, and branch fields also stay `None` for branches not requested.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub index: u64,
    pub seed: u64,
    pub status: ReplicateStatus,
    pub rho_hat: Option<f64>,
    pub z_r_hat: Option<f64>,
    pub pi_survey: Option<f64>,
    pub p_survey: Option<f64>,
    pub p_hat_givenpi: Option<f64>,
    pub beta_hat_givenpi: Option<f64>,
    pub pi_hat_givenp: Option<f64>,
    pub beta_hat_givenp: Option<f64>,
}

impl ReplicateRow {
    fn empty(index: u64, seed: u64, status: ReplicateStatus) -> Self {
        Self {
            index,
            seed,
            status,
            rho_hat: None,
            z_r_hat: None,
            pi_survey: None,
            p_survey: None,
            p_hat_givenpi: None,
            beta_hat_givenpi: None,
            pi_hat_givenp: None,
            beta_hat_givenp: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ReplicateStatus::Ok
    }
}

/// Runs replicate `index` of the experiment.
pub fn run_replicate(config: &ExperimentConfig, index: u64) -> ReplicateRow {
    let seed = replicate_seed(config.master_seed, index);
    let mut rng = SeededRng::new(seed);
    match replicate_estimates(config, index, &mut rng) {
        Ok(row) => row,
        Err(e) => ReplicateRow::empty(index, seed, ReplicateStatus::EstimationFailed(e.to_string())),
    }
}

fn replicate_estimates(config: &ExperimentConfig, index: u64, rng: &mut SeededRng) -> Result<ReplicateRow> {
    let seed = rng.seed();
    let log = simulate(&config.params, &config.init, f64::INFINITY, rng)?;
    let z_r_hat = final_reported_fraction(&log)?;
    if z_r_hat < config.outbreak_threshold {
        return Ok(ReplicateRow::empty(index, seed, ReplicateStatus::MinorOutbreak));
    }
    let fit = fit_growth_rate(&log, config.growth_threshold)?;
    let stats = SummaryStats {
        rho_hat: fit.rho_hat,
        z_r_hat,
        gamma: config.params.gamma(),
    };
    let mut row = ReplicateRow {
        rho_hat: Some(fit.rho_hat),
        z_r_hat: Some(z_r_hat),
        ..ReplicateRow::empty(index, seed, ReplicateStatus::Ok)
    };
    if config.branch.wants_pi() {
        let survey = survey_immunity(&log.initial_state, config.survey_size, &mut rng.fork(1));
        let est = estimate_remaining(&stats, Supplied::from(&survey))?;
        row.pi_survey = Some(survey.estimate);
        row.p_hat_givenpi = Some(est.p_hat);
        row.beta_hat_givenpi = Some(est.beta_star_hat);
    }
    if config.branch.wants_p() {
        let survey = survey_reporting_at_peak(&log, config.survey_size, config.peak_scope, &mut rng.fork(2))?;
        let est = estimate_remaining(&stats, Supplied::from(&survey))?;
        row.p_survey = Some(survey.estimate);
        row.pi_hat_givenp = Some(est.pi_hat);
        row.beta_hat_givenp = Some(est.beta_star_hat);
    }
    Ok(row)
}

fn run_batch(config: &ExperimentConfig, indices: std::ops::Range<u64>) -> Vec<ReplicateRow> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        indices.into_par_iter().map(|i| run_replicate(config, i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        indices.map(|i| run_replicate(config, i)).collect()
    }
}

/// Runs replicates `0, 1, 2, ...` until `target_outbreaks` rows are `Ok` or
/// `max_attempts` replicates have been tried.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut rows: Vec<ReplicateRow> = Vec::new();
    let mut ok = 0;
    while ok < config.target_outbreaks && rows.len() < config.max_attempts {
        let start = rows.len() as u64;
        let want = (config.target_outbreaks - ok).max(16);
        let end = (start + want as u64).min(config.max_attempts as u64);
        for row in run_batch(config, start..end) {
            if ok == config.target_outbreaks {
                break;
            }
            ok += row.is_ok() as usize;
            rows.push(row);
        }
    }
    Ok(ExperimentReport {
        config: *config,
        rng: RNG_ID.to_string(),
        summary: summarize(&rows),
        rows,
    })
}

/// Mean and sample standard deviation (`k - 1` denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub k: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let k = xs.len();
        if k == 0 {
            return Self {
                k,
                mean: None,
                sd: None,
            };
        }
        let mean = xs.iter().sum::<f64>() / k as f64;
        let sd = (k > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt());
        Self {
            k,
            mean: Some(mean),
            sd,
        }
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> Option<f64> {
        self.sd.map(|s| s / (self.k as f64).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub p: Moments,
    pub pi: Moments,
    pub beta_star: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub attempts: usize,
    pub ok: usize,
    pub minor_outbreaks: usize,
    pub estimation_failures: usize,
    pub rho_hat: Moments,
    pub z_r_hat: Moments,
    pub given_pi: Option<BranchSummary>,
    pub given_p: Option<BranchSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rng: String,
    #[serde(flatten)]
    pub summary: Summary,
    #[serde(skip)]
    pub rows: Vec<ReplicateRow>,
}

fn column(rows: &[&ReplicateRow], f: impl Fn(&ReplicateRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(|r| f(r)).collect()
}

/// Aggregates `Ok` rows in the order given.
pub fn summarize(rows: &[ReplicateRow]) -> Summary {
    let ok: Vec<&ReplicateRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let branch = |p: fn(&ReplicateRow) -> Option<f64>,
                  pi: fn(&ReplicateRow) -> Option<f64>,
                  b: fn(&ReplicateRow) -> Option<f64>| {
        let beta = column(&ok, b);
        (!beta.is_empty()).then(|| BranchSummary {
            p: Moments::of(&column(&ok, p)),
            pi: Moments::of(&column(&ok, pi)),
            beta_star: Moments::of(&beta),
        })
    };
    Summary {
        attempts: rows.len(),
        ok: ok.len(),
        minor_outbreaks: rows
            .iter()
            .filter(|r| r.status == ReplicateStatus::MinorOutbreak)
            .count(),
        estimation_failures: rows
            .iter()
            .filter(|r| matches!(r.status, ReplicateStatus::EstimationFailed(_)))
            .count(),
        rho_hat: Moments::of(&column(&ok, |r| r.rho_hat)),
        z_r_hat: Moments::of(&column(&ok, |r| r.z_r_hat)),
        given_pi: branch(|r| r.p_hat_givenpi, |r| r.pi_survey, |r| r.beta_hat_givenpi),
        given_p: branch(|r| r.p_survey, |r| r.pi_hat_givenp, |r| r.beta_hat_givenp),
    }
}

pub fn write_report_json<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, report)?;
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

pub fn write_rows_csv<W: Write>(rows: &[ReplicateRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            r.status.label(),
            fmt_opt(r.rho_hat),
            fmt_opt(r.z_r_hat),
            fmt_opt(r.pi_survey),
            fmt_opt(r.p_survey),
            fmt_opt(r.p_hat_givenpi),
            fmt_opt(r.beta_hat_givenpi),
            fmt_opt(r.pi_hat_givenp),
            fmt_opt(r.beta_hat_givenp),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(reader: R) -> Result<Vec<ReplicateRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Parse("unexpected replicate CSV header".into()));
    }
    let parse_f = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad number {s:?}")))
        }
    };
    let parse_u = |s: &str| s.parse::<u64>().map_err(|_| Error::Parse(format!("bad integer {s:?}")));
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ReplicateRow {
                index: parse_u(&rec[0])?,
                seed: parse_u(&rec[1])?,
                status: ReplicateStatus::parse(&rec[2])?,
                rho_hat: parse_f(&rec[3])?,
                z_r_hat: parse_f(&rec[4])?,
                pi_survey: parse_f(&rec[5])?,
                p_survey: parse_f(&rec[6])?,
                p_hat_givenpi: parse_f(&rec[7])?,
                beta_hat_givenpi: parse_f(&rec[8])?,
                pi_hat_givenp: parse_f(&rec[9])?,
                beta_hat_givenp: parse_f(&rec[10])?,
            })
        })
        .collect()
}
