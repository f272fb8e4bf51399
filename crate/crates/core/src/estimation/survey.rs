use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CountState;
use crate::rng::SeededRng;
use crate::stochastic::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurveyKind {
    ImmunityAtT0,
    ReportingAtPeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyEstimate {
    pub kind: SurveyKind,
    pub sample_size: u64,
    pub positives: u64,
    pub denominator: u64,
    pub estimate: f64,
}

/// Which sampled individuals carry a reported/unreported label for the
/// peak survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakScope {
    /// Currently infectious individuals only: `Ir / (Ir + Iu)` in the sample.
    #[default]
    Infectious,
    /// Every non-susceptible individual, infectious or recovered (including
    /// the initially immune): `(Ir + Rr) / (Ir + Iu + Rr + Ru)` in the sample.
    NonSusceptible,
}

/// Draws `m` individuals one at a time without replacement from groups of
/// the given sizes and returns how many came from each group.
pub fn draw_without_replacement(groups: &[u64], m: u64, rng: &mut SeededRng) -> Vec<u64> {
    let mut left = groups.to_vec();
    let mut remaining_pop: u64 = groups.iter().sum();
    assert!(m <= remaining_pop, "sample size {m} exceeds population {remaining_pop}");
    let mut out = vec![0; groups.len()];
    for _ in 0..m {
        let mut u = rng.random_range(0..remaining_pop);
        let g = left
            .iter()
            .position(|&size| {
                if u < size {
                    true
                } else {
                    u -= size;
                    false
                }
            })
            .expect("draw lies inside the population");
        left[g] -= 1;
        out[g] += 1;
        remaining_pop -= 1;
    }
    out
}

/// Fraction immune among `m` individuals sampled at time zero.
pub fn survey_immunity(initial_state: &CountState, m: u64, rng: &mut SeededRng) -> SurveyEstimate {
    let immune = initial_state.rr + initial_state.ru;
    let others = initial_state.total() - immune;
    let drawn = draw_without_replacement(&[immune, others], m, rng);
    SurveyEstimate {
        kind: SurveyKind::ImmunityAtT0,
        sample_size: m,
        positives: drawn[0],
        denominator: m,
        estimate: if m == 0 { 0.0 } else { drawn[0] as f64 / m as f64 },
    }
}

/// State at the first time total prevalence `Ir + Iu` is maximal.
pub fn peak_state(log: &EventLog) -> CountState {
    let mut best = log.initial_state;
    for e in &log.events {
        if e.state_after.infectious() > best.infectious() {
            best = e.state_after;
        }
    }
    best
}

/// Fraction reported among the labelled individuals in a sample of `m`
/// taken at the epidemic peak.
pub fn survey_reporting_at_peak(
    log: &EventLog,
    m: u64,
    scope: PeakScope,
    rng: &mut SeededRng,
) -> Result<SurveyEstimate> {
    let peak = peak_state(log);
    let (reported, denominator) = match scope {
        PeakScope::Infectious => {
            let d = draw_without_replacement(&[peak.ir, peak.iu, peak.s + peak.rr + peak.ru], m, rng);
            (d[0], d[0] + d[1])
        }
        PeakScope::NonSusceptible => {
            let d = draw_without_replacement(&[peak.ir + peak.rr, peak.iu + peak.ru, peak.s], m, rng);
            (d[0], d[0] + d[1])
        }
    };
    if denominator == 0 {
        return Err(Error::EmptyDenominator);
    }
    Ok(SurveyEstimate {
        kind: SurveyKind::ReportingAtPeak,
        sample_size: m,
        positives: reported,
        denominator,
        estimate: reported as f64 / denominator as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialConditions, ModelParams};
    use crate::stochastic::simulate;

    fn reference_state() -> CountState {
        crate::model::initial_counts(&ModelParams::reference(), &InitialConditions::reference()).unwrap()
    }

    #[test]
    fn census_is_exact() {
        let s = reference_state();
        let e = survey_immunity(&s, s.total(), &mut SeededRng::new(1));
        assert_eq!(e.estimate, 0.3);
        assert_eq!(e.positives, 3000);
    }

    #[test]
    fn no_immunity_gives_zero() {
        let s = CountState {
            s: 990,
            ir: 10,
            iu: 0,
            rr: 0,
            ru: 0,
        };
        let mut rng = SeededRng::new(2);
        for _ in 0..20 {
            assert_eq!(survey_immunity(&s, 100, &mut rng).estimate, 0.0);
        }
    }

    #[test]
    fn draws_respect_group_sizes() {
        let mut rng = SeededRng::new(5);
        for _ in 0..200 {
            let d = draw_without_replacement(&[3, 50, 7, 0, 40], 60, &mut rng);
            assert_eq!(d.iter().sum::<u64>(), 60);
            assert!(d[0] <= 3 && d[1] <= 50 && d[2] <= 7 && d[3] == 0 && d[4] <= 40);
        }
        assert_eq!(draw_without_replacement(&[3, 5], 8, &mut rng), vec![3, 5]);
    }

    #[test]
    fn immunity_survey_is_unbiased_with_hypergeometric_spread() {
        let s = reference_state();
        let mut rng = SeededRng::new(99);
        let draws: Vec<f64> = (0..4000)
            .map(|_| survey_immunity(&s, 1000, &mut rng).estimate)
            .collect();
        let k = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / k;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let sd_exact = (0.3f64 * 0.7 / 1000.0 * (9000.0 / 9999.0)).sqrt();
        assert!((mean - 0.3).abs() < 3.0 * sd_exact / k.sqrt(), "mean {mean}");
        assert!((sd / sd_exact - 1.0).abs() < 0.05, "sd {sd} vs {sd_exact}");
    }

    #[test]
    fn peak_census_is_exact() {
        let log = simulate(
            &ModelParams::reference(),
            &InitialConditions::reference(),
            f64::INFINITY,
            &mut SeededRng::new(12),
        )
        .unwrap();
        let peak = peak_state(&log);
        let e = survey_reporting_at_peak(&log, log.n, PeakScope::Infectious, &mut SeededRng::new(0)).unwrap();
        assert_eq!(e.estimate, peak.ir as f64 / peak.infectious() as f64);
        let e = survey_reporting_at_peak(&log, log.n, PeakScope::NonSusceptible, &mut SeededRng::new(0)).unwrap();
        let labelled = peak.ir + peak.iu + peak.rr + peak.ru;
        assert_eq!(e.estimate, (peak.ir + peak.rr) as f64 / labelled as f64);
    }

    #[test]
    fn peak_is_first_maximum() {
        let log = simulate(
            &ModelParams::reference(),
            &InitialConditions::reference(),
            f64::INFINITY,
            &mut SeededRng::new(3),
        )
        .unwrap();
        let peak = peak_state(&log);
        let first = log
            .events
            .iter()
            .map(|e| e.state_after)
            .find(|s| s.infectious() == peak.infectious())
            .unwrap_or(log.initial_state);
        assert_eq!(first, peak);
        assert!(log
            .events
            .iter()
            .all(|e| e.state_after.infectious() <= peak.infectious()));
    }

    #[test]
    fn extinct_epidemic_has_empty_denominator() {
        let log = EventLog {
            initial_state: CountState {
                s: 1000,
                ir: 0,
                iu: 0,
                rr: 0,
                ru: 0,
            },
            n: 1000,
            events: vec![],
        };
        assert!(matches!(
            survey_reporting_at_peak(&log, 100, PeakScope::Infectious, &mut SeededRng::new(1)),
            Err(Error::EmptyDenominator)
        ));
    }

    #[test]
    fn peak_survey_is_unbiased() {
        let state = CountState {
            s: 6000,
            ir: 120,
            iu: 180,
            rr: 1400,
            ru: 2300,
        };
        let log = EventLog {
            initial_state: state,
            n: state.total(),
            events: vec![],
        };
        let mut rng = SeededRng::new(8);
        let mut xs = Vec::new();
        let mut dens = Vec::new();
        for _ in 0..3000 {
            if let Ok(e) = survey_reporting_at_peak(&log, 1000, PeakScope::Infectious, &mut rng) {
                xs.push(e.estimate);
                dens.push(e.denominator as f64);
            }
        }
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        // the ratio estimator is unbiased conditional on a non-empty denominator
        assert!((mean - 0.4).abs() < 3.0 * sd / k.sqrt(), "mean {mean}");
        assert!((dens.iter().sum::<f64>() / k - 30.0).abs() < 0.5);
    }
}
