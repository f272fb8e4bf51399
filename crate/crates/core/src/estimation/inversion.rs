use serde::{Deserialize, Serialize};

use super::final_size::solve_final_size;
use super::survey::{SurveyEstimate, SurveyKind};
use crate::error::{Error, Result};

/// The observable summaries of one epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub rho_hat: f64,
    pub z_r_hat: f64,
    pub gamma: f64,
}

/// The parameter supplied from outside the incidence data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Supplied {
    #[serde(rename = "pi")]
    ImmuneFraction(f64),
    #[serde(rename = "p")]
    ReportingFraction(f64),
}

impl From<&SurveyEstimate> for Supplied {
    fn from(s: &SurveyEstimate) -> Self {
        match s.kind {
            SurveyKind::ImmunityAtT0 => Supplied::ImmuneFraction(s.estimate),
            SurveyKind::ReportingAtPeak => Supplied::ReportingFraction(s.estimate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationResult {
    pub p_hat: f64,
    pub pi_hat: f64,
    pub beta_star_hat: f64,
    pub supplied: Supplied,
    /// Root of the final-size equation at the estimated `R_E`.
    pub z_hat: f64,
}

/// Inverts the growth-rate and reported-final-size relations given either
/// `pi` or `p`. Solutions outside `p in (0, 1]`, `pi in [0, 1)` are errors.
pub fn estimate_remaining(stats: &SummaryStats, known: Supplied) -> Result<EstimationResult> {
    if !(stats.rho_hat > 0.0) {
        return Err(Error::Subcritical { rho_hat: stats.rho_hat });
    }
    if !(stats.gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be > 0, got {}", stats.gamma),
        });
    }
    let re = (stats.rho_hat + stats.gamma) / stats.gamma;
    let z = solve_final_size(re).z;
    // p (1 - pi)
    let product = stats.z_r_hat / z;
    let (p_hat, pi_hat) = match known {
        Supplied::ImmuneFraction(pi) => {
            if !(0.0..1.0).contains(&pi) {
                return Err(Error::DomainViolation(format!("supplied pi = {pi} outside [0, 1)")));
            }
            (product / (1.0 - pi), pi)
        }
        Supplied::ReportingFraction(p) => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::DomainViolation(format!("supplied p = {p} outside (0, 1]")));
            }
            (p, 1.0 - product / p)
        }
    };
    if !(p_hat > 0.0 && p_hat <= 1.0) {
        return Err(Error::DomainViolation(format!("p_hat = {p_hat} outside (0, 1]")));
    }
    if !(0.0..1.0).contains(&pi_hat) {
        return Err(Error::DomainViolation(format!("pi_hat = {pi_hat} outside [0, 1)")));
    }
    Ok(EstimationResult {
        p_hat,
        pi_hat,
        beta_star_hat: (stats.rho_hat + stats.gamma) / (1.0 - pi_hat),
        supplied: known,
        z_hat: z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::predicted_reported_final_size;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    fn reference_stats() -> SummaryStats {
        let params = ModelParams::reference();
        SummaryStats {
            rho_hat: params.derived_rates().rho,
            z_r_hat: predicted_reported_final_size(&params),
            gamma: 1.0,
        }
    }

    #[test]
    fn given_pi_recovers_reference() {
        let r = estimate_remaining(&reference_stats(), Supplied::ImmuneFraction(0.3)).unwrap();
        assert!((r.p_hat - 0.4).abs() < 1e-12);
        assert!((r.beta_star_hat - 1.9).abs() < 1e-12);
    }

    #[test]
    fn given_p_recovers_reference() {
        let r = estimate_remaining(&reference_stats(), Supplied::ReportingFraction(0.4)).unwrap();
        assert!((r.pi_hat - 0.3).abs() < 1e-12);
        assert!((r.beta_star_hat - 1.9).abs() < 1e-12);
    }

    #[test]
    fn rounded_inputs() {
        let stats = SummaryStats {
            rho_hat: 0.33,
            z_r_hat: 0.1263,
            gamma: 1.0,
        };
        let r = estimate_remaining(&stats, Supplied::ImmuneFraction(0.3)).unwrap();
        assert!((r.p_hat - 0.40).abs() < 1e-3 && (r.beta_star_hat - 1.90).abs() < 1e-9);
        let r = estimate_remaining(&stats, Supplied::ReportingFraction(0.4)).unwrap();
        assert!((r.pi_hat - 0.30).abs() < 1e-3 && (r.beta_star_hat - 1.90).abs() < 1e-2);
    }

    #[test]
    fn boundary_of_admissible_pi() {
        let stats = reference_stats();
        let z = solve_final_size(1.33).z;
        let edge = 1.0 - stats.z_r_hat / z;
        assert!(estimate_remaining(&stats, Supplied::ImmuneFraction(edge - 1e-6)).is_ok());
        assert!(matches!(
            estimate_remaining(&stats, Supplied::ImmuneFraction(edge + 1e-6)),
            Err(Error::DomainViolation(_))
        ));
        // p too small forces pi < 0
        assert!(matches!(
            estimate_remaining(&stats, Supplied::ReportingFraction(0.2)),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn subcritical_growth_rejected() {
        let stats = SummaryStats {
            rho_hat: -0.1,
            z_r_hat: 0.01,
            gamma: 1.0,
        };
        assert!(matches!(
            estimate_remaining(&stats, Supplied::ImmuneFraction(0.3)),
            Err(Error::Subcritical { .. })
        ));
    }

    #[test]
    fn serializes_supplied_as_kind_and_value() {
        let json = serde_json::to_string(&Supplied::ImmuneFraction(0.25)).unwrap();
        assert_eq!(json, r#"{"kind":"pi","value":0.25}"#);
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    proptest! {
        #[test]
        fn inversion_round_trip(beta in 0.5..6.0f64, p in 0.05..=1.0f64, pi in 0.0..0.8f64, gamma in 0.2..2.0f64) {
            let params = ModelParams::from_effective(beta, p, pi, gamma).unwrap();
            let d = params.derived_rates();
            prop_assume!(d.re > 1.01);
            let stats = SummaryStats { rho_hat: d.rho, z_r_hat: predicted_reported_final_size(&params), gamma };
            let a = estimate_remaining(&stats, Supplied::ImmuneFraction(pi)).unwrap();
            prop_assert!(rel(a.p_hat, p) <= 1e-9);
            prop_assert!(rel(a.beta_star_hat, beta) <= 1e-9);
            let b = estimate_remaining(&stats, Supplied::ReportingFraction(p)).unwrap();
            prop_assert!((b.pi_hat - pi).abs() <= 1e-9 * (1.0 - pi));
            prop_assert!(rel(b.beta_star_hat, beta) <= 1e-9);
        }
    }
}
