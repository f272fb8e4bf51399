//! Exact event-driven simulation of the stochastic model.
//!
//! Four events can occur: a reported or unreported infection, each with rate
//! proportional to the force of infection `beta_r Ir + beta_u Iu` times `S/n`
//! split by `p : 1-p`, and a reported or unreported recovery at rate `gamma`
//! per infectious individual. Counting processes follow the convention
//! `N1` = reported infections, `N2` = reported recoveries,
//! `N3` = unreported infections, `N4` = unreported recoveries.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{initial_counts, CountState, InitialConditions, ModelParams};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    ReportedInfection,
    UnreportedInfection,
    ReportedRecovery,
    UnreportedRecovery,
}

impl EventKind {
    pub fn code(self) -> &'static str {
        match self {
            EventKind::ReportedInfection => "RI",
            EventKind::UnreportedInfection => "UI",
            EventKind::ReportedRecovery => "RR",
            EventKind::UnreportedRecovery => "UR",
        }
    }

    fn apply(self, state: &mut CountState) {
        match self {
            EventKind::ReportedInfection => {
                state.s -= 1;
                state.ir += 1;
            }
            EventKind::UnreportedInfection => {
                state.s -= 1;
                state.iu += 1;
            }
            EventKind::ReportedRecovery => {
                state.ir -= 1;
                state.rr += 1;
            }
            EventKind::UnreportedRecovery => {
                state.iu -= 1;
                state.ru += 1;
            }
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RI" => Ok(EventKind::ReportedInfection),
            "UI" => Ok(EventKind::UnreportedInfection),
            "RR" => Ok(EventKind::ReportedRecovery),
            "UR" => Ok(EventKind::UnreportedRecovery),
            other => Err(Error::Parse(format!("unknown event kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub state_after: CountState,
}

/// Cumulative event counts `N1..N4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub n4: u64,
}

impl Counts {
    fn record(&mut self, kind: EventKind) {
        match kind {
            EventKind::ReportedInfection => self.n1 += 1,
            EventKind::ReportedRecovery => self.n2 += 1,
            EventKind::UnreportedInfection => self.n3 += 1,
            EventKind::UnreportedRecovery => self.n4 += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub initial_state: CountState,
    pub n: u64,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn final_state(&self) -> CountState {
        self.events.last().map_or(self.initial_state, |e| e.state_after)
    }

    pub fn is_extinct(&self) -> bool {
        self.final_state().infectious() == 0
    }

    /// Counts after every event, in event order.
    pub fn counts(&self) -> impl Iterator<Item = Counts> + '_ {
        self.events.iter().scan(Counts::default(), |c, e| {
            c.record(e.kind);
            Some(*c)
        })
    }

    pub fn final_counts(&self) -> Counts {
        self.counts().last().unwrap_or_default()
    }

    /// Times of reported infections, in order.
    pub fn reported_infection_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::ReportedInfection)
            .map(|e| e.time)
    }

    pub fn end_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }

    /// Writes the event-log CSV: an `INIT` row at time 0, then one row per
    /// event, times printed with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "kind", "S", "Ir", "Iu", "Rr", "Ru", "N1", "N2", "N3", "N4"])?;
        let row = |time: f64, kind: &str, s: &CountState, c: &Counts| {
            vec![
                format!("{time:.16e}"),
                kind.to_string(),
                s.s.to_string(),
                s.ir.to_string(),
                s.iu.to_string(),
                s.rr.to_string(),
                s.ru.to_string(),
                c.n1.to_string(),
                c.n2.to_string(),
                c.n3.to_string(),
                c.n4.to_string(),
            ]
        };
        w.write_record(row(0.0, "INIT", &self.initial_state, &Counts::default()))?;
        for (e, c) in self.events.iter().zip(self.counts()) {
            w.write_record(row(e.time, e.kind.code(), &e.state_after, &c))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an event-log CSV, checking that the state and count columns are
    /// consistent with the event sequence.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != ["time", "kind", "S", "Ir", "Iu", "Rr", "Ru", "N1", "N2", "N3", "N4"] {
            return Err(Error::Parse(format!("unexpected event-log header {header:?}")));
        }
        let mut records = r.records();
        let first = records
            .next()
            .ok_or_else(|| Error::Parse("event log has no INIT row".into()))??;
        if &first[1] != "INIT" {
            return Err(Error::Parse("first event-log row must be INIT".into()));
        }
        let parse_u = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::Parse(format!("bad count {s:?}"))) };
        let parse_state = |rec: &csv::StringRecord| -> Result<CountState> {
            Ok(CountState {
                s: parse_u(&rec[2])?,
                ir: parse_u(&rec[3])?,
                iu: parse_u(&rec[4])?,
                rr: parse_u(&rec[5])?,
                ru: parse_u(&rec[6])?,
            })
        };
        let initial_state = parse_state(&first)?;
        let n = initial_state.total();
        let mut events = Vec::new();
        let mut state = initial_state;
        let mut counts = Counts::default();
        for rec in records {
            let rec = rec?;
            let time: f64 = rec[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad time {:?}", &rec[0])))?;
            let kind: EventKind = rec[1].parse()?;
            let after = parse_state(&rec)?;
            if !matches_transition(&state, kind) {
                return Err(Error::Parse(format!("event {kind} impossible at t = {time}")));
            }
            kind.apply(&mut state);
            counts.record(kind);
            let listed = Counts {
                n1: parse_u(&rec[7])?,
                n2: parse_u(&rec[8])?,
                n3: parse_u(&rec[9])?,
                n4: parse_u(&rec[10])?,
            };
            if after != state || listed != counts {
                return Err(Error::Parse(format!("inconsistent row at t = {time}")));
            }
            events.push(Event {
                time,
                kind,
                state_after: after,
            });
        }
        Ok(Self {
            initial_state,
            n,
            events,
        })
    }
}

fn matches_transition(state: &CountState, kind: EventKind) -> bool {
    match kind {
        EventKind::ReportedInfection | EventKind::UnreportedInfection => state.s > 0,
        EventKind::ReportedRecovery => state.ir > 0,
        EventKind::UnreportedRecovery => state.iu > 0,
    }
}

/// Simulates from the rounded initial compartments until `end_time` or
/// extinction, whichever comes first. Pass `f64::INFINITY` to run to
/// extinction.
pub fn simulate(
    params: &ModelParams,
    init: &InitialConditions,
    end_time: f64,
    rng: &mut SeededRng,
) -> Result<EventLog> {
    let start = initial_counts(params, init)?;
    Ok(simulate_from(params, start, end_time, rng))
}

pub fn simulate_from(params: &ModelParams, start: CountState, end_time: f64, rng: &mut SeededRng) -> EventLog {
    let n = start.total();
    let nf = n as f64;
    let (beta_r, beta_u, p, gamma) = (params.beta_r(), params.beta_u(), params.p(), params.gamma());
    let mut state = start;
    let mut time = 0.0;
    let mut events = Vec::new();

    while time < end_time && state.infectious() > 0 {
        let force = beta_r * state.ir as f64 + beta_u * state.iu as f64;
        let a1 = p * force * state.s as f64 / nf;
        let a2 = (1.0 - p) * force * state.s as f64 / nf;
        let a3 = gamma * state.ir as f64;
        let a4 = gamma * state.iu as f64;
        let total = a1 + a2 + a3 + a4;

        let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
        time += wait;
        if time >= end_time {
            break;
        }
        let u = rng.random::<f64>() * total;
        let kind = if u < a1 {
            EventKind::ReportedInfection
        } else if u < a1 + a2 {
            EventKind::UnreportedInfection
        } else if u < a1 + a2 + a3 {
            EventKind::ReportedRecovery
        } else {
            EventKind::UnreportedRecovery
        };
        debug_assert!(matches_transition(&state, kind));
        kind.apply(&mut state);
        events.push(Event {
            time,
            kind,
            state_after: state,
        });
    }

    EventLog {
        initial_state: start,
        n,
        events,
    }
}

/// Right-continuous step functions `N1..N4` with jumps at `times`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingPaths {
    pub times: Vec<f64>,
    /// `values[k]` holds the counts on `[times[k], times[k + 1])`.
    pub values: Vec<Counts>,
}

impl CountingPaths {
    pub fn at(&self, t: f64) -> Counts {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            Counts::default()
        } else {
            self.values[k - 1]
        }
    }
}

pub fn counting_paths(log: &EventLog) -> CountingPaths {
    CountingPaths {
        times: log.events.iter().map(|e| e.time).collect(),
        values: log.counts().collect(),
    }
}

/// Final reported fraction `N1(inf) / n`; the log must end in extinction.
pub fn final_reported_fraction(log: &EventLog) -> Result<f64> {
    let last = log.final_state();
    if last.infectious() > 0 {
        return Err(Error::NotExtinct {
            infectious: last.infectious(),
        });
    }
    Ok(log.final_counts().n1 as f64 / log.n as f64)
}
