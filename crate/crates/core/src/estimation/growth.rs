use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::DeterministicPath;
use crate::stochastic::EventLog;

/// Fraction of the population reported infected that ends the early phase.
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 0.075;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub rho_hat: f64,
    pub intercept: f64,
    pub n_points: usize,
    pub window_end_time: f64,
    /// False when the epidemic ended before the threshold count was reached;
    /// the fit then uses every reported infection.
    pub threshold_reached: bool,
}

/// Ordinary least squares `y = intercept + slope x`, returned as
/// `(slope, intercept)`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (sxy, sxx) = x.iter().zip(y).fold((0.0, 0.0), |(sxy, sxx), (xi, yi)| {
        (sxy + (xi - mx) * (yi - my), sxx + (xi - mx) * (xi - mx))
    });
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fits `log N1(t_k) = a + rho t_k` where `t_k` is the time at which the
/// reported count first reaches `k`. Points run up to and including the
/// time the count reaches `ceil(threshold_fraction * n)`.
pub fn fit_log_cumulative(reported_times: &[f64], n: u64, threshold_fraction: f64) -> Result<GrowthFit> {
    let target = (threshold_fraction * n as f64).ceil().max(1.0) as usize;
    let used = reported_times.len().min(target);
    if used < 2 {
        return Err(Error::InsufficientData(format!(
            "{used} reported infection(s) before the growth threshold"
        )));
    }
    let times = &reported_times[..used];
    let logs: Vec<f64> = (1..=used).map(|k| (k as f64).ln()).collect();
    let (rho_hat, intercept) =
        ols(times, &logs).ok_or_else(|| Error::InsufficientData("reported infection times are all equal".into()))?;
    Ok(GrowthFit {
        rho_hat,
        intercept,
        n_points: used,
        window_end_time: times[used - 1],
        threshold_reached: reported_times.len() >= target,
    })
}

/// Growth-rate fit on the reported infections of a simulated epidemic.
/// Initially infectious individuals are not counted.
pub fn fit_growth_rate(log: &EventLog, threshold_fraction: f64) -> Result<GrowthFit> {
    let times: Vec<f64> = log.reported_infection_times().collect();
    fit_log_cumulative(&times, log.n, threshold_fraction)
}

/// Times at which the deterministic reported count `(Ir + Rr) - (Ir + Rr)(0)`
/// crosses `1, 2, ..., max_count`, by linear interpolation on the grid.
pub fn deterministic_reported_times(path: &DeterministicPath, max_count: usize) -> Vec<f64> {
    let cum = path.cumulative_reported();
    let mut out = Vec::with_capacity(max_count);
    let mut k = 1usize;
    for i in 1..cum.len() {
        while k <= max_count && cum[i] >= k as f64 {
            let (c0, c1) = (cum[i - 1], cum[i]);
            let (t0, t1) = (path.grid.time(i - 1), path.grid.time(i));
            let w = if c1 > c0 { (k as f64 - c0) / (c1 - c0) } else { 1.0 };
            out.push(t0 + w.clamp(0.0, 1.0) * (t1 - t0));
            k += 1;
        }
        if k > max_count {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CountState, InitialConditions, ModelParams};
    use crate::ode::{integrate_full, TimeGrid};
    use crate::stochastic::{Event, EventKind};

    fn synthetic_log(times: &[f64], n: u64) -> EventLog {
        let mut state = CountState {
            s: n - 1,
            ir: 1,
            iu: 0,
            rr: 0,
            ru: 0,
        };
        let initial_state = state;
        let events = times
            .iter()
            .map(|&time| {
                state.s -= 1;
                state.ir += 1;
                Event {
                    time,
                    kind: EventKind::ReportedInfection,
                    state_after: state,
                }
            })
            .collect();
        EventLog {
            initial_state,
            n,
            events,
        }
    }

    #[test]
    fn exact_log_linear_data() {
        let times: Vec<f64> = (1..=200).map(|k| (k as f64).ln() / 0.33).collect();
        let fit = fit_growth_rate(&synthetic_log(&times, 1000), 0.075).unwrap();
        assert!((fit.rho_hat - 0.33).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-10);
        assert_eq!(fit.n_points, 75);
        assert!(fit.threshold_reached);
        assert_eq!(fit.window_end_time, times[74]);
    }

    #[test]
    fn threshold_event_is_last_point() {
        let times: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        // ceil(0.075 * 100) = 8
        let fit = fit_growth_rate(&synthetic_log(&times, 100), 0.075).unwrap();
        assert_eq!(fit.n_points, 8);
        assert_eq!(fit.window_end_time, 8.0);
    }

    #[test]
    fn single_infection_is_insufficient() {
        let log = synthetic_log(&[1.0], 100);
        assert!(matches!(fit_growth_rate(&log, 0.075), Err(Error::InsufficientData(_))));
        let empty = synthetic_log(&[], 100);
        assert!(matches!(
            fit_growth_rate(&empty, 0.075),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn short_epidemic_uses_all_points() {
        let times = [1.0, 2.0, 3.0];
        let fit = fit_growth_rate(&synthetic_log(&times, 1000), 0.075).unwrap();
        assert_eq!(fit.n_points, 3);
        assert!(!fit.threshold_reached);
    }

    #[test]
    fn ols_known_line() {
        let (s, i) = ols(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-15 && (i - 1.0).abs() < 1e-15);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn deterministic_crossings_are_monotone() {
        let grid = TimeGrid::new(0.0, 40.0, 1e-2).unwrap();
        let path = integrate_full(&ModelParams::reference(), &InitialConditions::reference(), &grid).unwrap();
        let times = deterministic_reported_times(&path, 750);
        assert_eq!(times.len(), 750);
        assert!(times.windows(2).all(|w| w[1] >= w[0]));
    }
}
