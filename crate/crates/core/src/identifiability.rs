//! Equivalence classes of parameters that share a reported trajectory.
//!
//! Two parameter sets with the same initial reported count produce the same
//! deterministic `Ir(t)` exactly when they agree on `beta*/p` and
//! `beta*(1 - pi)`. Fixing any one of `p`, `pi`, `beta*` therefore selects a
//! unique member of the class. The other compartments differ between class
//! members.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::solve_final_size;
use crate::model::{InitialConditions, ModelParams};
use crate::ode::{integrate_reduced, reconstruct_compartments, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceInvariants {
    pub beta_over_p: f64,
    pub beta_times_sfrac: f64,
}

impl EquivalenceInvariants {
    /// Largest relative difference over the two coordinates.
    pub fn relative_difference(&self, other: &Self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        rel(self.beta_over_p, other.beta_over_p).max(rel(self.beta_times_sfrac, other.beta_times_sfrac))
    }
}

pub fn invariants_of(params: &ModelParams) -> EquivalenceInvariants {
    let beta = params.effective_beta();
    EquivalenceInvariants {
        beta_over_p: beta / params.p(),
        beta_times_sfrac: beta * (1.0 - params.pi()),
    }
}

/// The parameter held fixed when moving within an equivalence class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Pin {
    ReportingFraction(f64),
    ImmuneFraction(f64),
    EffectiveBeta(f64),
}

/// Member of `base`'s equivalence class with the pinned parameter set to the
/// given value. `gamma` is carried over; the returned set uses
/// `beta_r = beta_u = beta*`. Pinning a parameter to the base's own value
/// returns `base` itself.
pub fn equivalent_params(base: &ModelParams, pin: Pin) -> Result<ModelParams> {
    let beta1 = base.effective_beta();
    let same = match pin {
        Pin::ReportingFraction(p) => p == base.p(),
        Pin::ImmuneFraction(pi) => pi == base.pi(),
        Pin::EffectiveBeta(b) => b == beta1,
    };
    if same {
        return Ok(*base);
    }
    let inv = invariants_of(base);
    let (beta2, p2, pi2) = match pin {
        Pin::ImmuneFraction(pi2) => {
            if !(0.0..1.0).contains(&pi2) {
                return Err(Error::OutOfRange(format!("pinned pi = {pi2} outside [0, 1)")));
            }
            let beta2 = inv.beta_times_sfrac / (1.0 - pi2);
            (beta2, base.p() * beta2 / beta1, pi2)
        }
        Pin::ReportingFraction(p2) => {
            if !(p2 > 0.0 && p2 <= 1.0) {
                return Err(Error::OutOfRange(format!("pinned p = {p2} outside (0, 1]")));
            }
            let beta2 = beta1 * p2 / base.p();
            (beta2, p2, 1.0 - inv.beta_times_sfrac / beta2)
        }
        Pin::EffectiveBeta(beta2) => {
            if !(beta2 > 0.0 && beta2.is_finite()) {
                return Err(Error::OutOfRange(format!("pinned beta* = {beta2} must be > 0")));
            }
            (beta2, base.p() * beta2 / beta1, 1.0 - inv.beta_times_sfrac / beta2)
        }
    };
    if !(p2 > 0.0 && p2 <= 1.0) {
        return Err(Error::OutOfRange(format!("solved p = {p2} outside (0, 1]")));
    }
    if !(0.0..1.0).contains(&pi2) {
        return Err(Error::OutOfRange(format!("solved pi = {pi2} outside [0, 1)")));
    }
    ModelParams::from_effective(beta2, p2, pi2, base.gamma())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub max_abs_diff_ir: f64,
    pub max_abs_diff_s: f64,
    pub identical_ir: bool,
    pub other_compartments_differ: bool,
    pub tolerance: f64,
}

/// Default certification tolerance, `1e-8 n`.
pub fn default_tolerance(init: &InitialConditions) -> f64 {
    1e-8 * init.n_f64()
}

/// Integrates the reduced equation for both sets on `grid` and compares the
/// reported trajectories in sup-norm. Susceptible paths are reconstructed and
/// compared at `10 tol`.
pub fn certify_identity(
    params1: &ModelParams,
    params2: &ModelParams,
    init: &InitialConditions,
    grid: &TimeGrid,
    tol: f64,
) -> Result<IdentityReport> {
    let a = integrate_reduced(params1, init, grid)?;
    let b = integrate_reduced(params2, init, grid)?;
    let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let max_abs_diff_ir = sup(&a.ir, &b.ir);
    let sa: Vec<f64> = reconstruct_compartments(&a, params1, init)?
        .states
        .iter()
        .map(|s| s.s)
        .collect();
    let sb: Vec<f64> = reconstruct_compartments(&b, params2, init)?
        .states
        .iter()
        .map(|s| s.s)
        .collect();
    let max_abs_diff_s = sup(&sa, &sb);
    Ok(IdentityReport {
        max_abs_diff_ir,
        max_abs_diff_s,
        identical_ir: max_abs_diff_ir <= tol,
        other_compartments_differ: max_abs_diff_s > 10.0 * tol,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub pi: f64,
    pub p: f64,
    pub beta_star: f64,
    pub beta_over_p: f64,
    pub beta_times_sfrac: f64,
}

/// `points` equally spaced values on `[0, gamma/(rho + gamma) - 1e-9]`.
pub fn default_pi_grid(rho: f64, gamma: f64, points: usize) -> Vec<f64> {
    let upper = 1.0 - rho / (rho + gamma) - 1e-9;
    match points {
        0 => vec![],
        1 => vec![0.0],
        k => (0..k).map(|i| upper * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Parameter sets reproducing a growth rate and reported final size, one per
/// admissible `pi` on the grid: `beta* = (rho + gamma)/(1 - pi)` and
/// `p = z_r / ((1 - pi) z)`.
pub fn manifold_scan(rho: f64, z_r: f64, gamma: f64, pis: &[f64]) -> Result<Vec<ScanPoint>> {
    let re = (rho + gamma) / gamma;
    let root = solve_final_size(re);
    if root.subcritical {
        return Err(Error::NoEpidemic { re });
    }
    Ok(pis
        .iter()
        .filter(|pi| (0.0..1.0).contains(*pi))
        .filter_map(|&pi| {
            let beta_star = (rho + gamma) / (1.0 - pi);
            let p = z_r / ((1.0 - pi) * root.z);
            (p > 0.0 && p <= 1.0).then(|| ScanPoint {
                pi,
                p,
                beta_star,
                beta_over_p: beta_star / p,
                beta_times_sfrac: beta_star * (1.0 - pi),
            })
        })
        .collect())
}

pub fn write_scan_csv<W: Write>(points: &[ScanPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pi", "p", "beta_star", "beta_over_p", "beta_times_sfrac"])?;
    for s in points {
        w.write_record(
            [s.pi, s.p, s.beta_star, s.beta_over_p, s.beta_times_sfrac]
                .iter()
                .map(|x| format!("{x:.16e}")),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::predicted_reported_final_size;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reference_invariants() {
        let inv = invariants_of(&ModelParams::reference());
        assert!(close(inv.beta_over_p, 4.75, 1e-12));
        assert!(close(inv.beta_times_sfrac, 1.33, 1e-12));
        let plain = ModelParams::from_effective(1.7, 1.0, 0.0, 1.0).unwrap();
        let inv = invariants_of(&plain);
        assert_eq!(inv.beta_over_p, 1.7);
        assert_eq!(inv.beta_times_sfrac, 1.7);
    }

    #[test]
    fn pin_no_prior_immunity() {
        let base = ModelParams::reference();
        let eq = equivalent_params(&base, Pin::ImmuneFraction(0.0)).unwrap();
        assert!(close(eq.p(), 0.28, 1e-12));
        assert!(close(eq.effective_beta(), 1.33, 1e-12));
        assert_eq!(eq.pi(), 0.0);
        assert_eq!(eq.gamma(), base.gamma());
        // ignoring immunity underestimates beta* = R0
        assert!(eq.effective_beta() < base.effective_beta());
    }

    #[test]
    fn pin_reporting_fraction() {
        let eq = equivalent_params(&ModelParams::reference(), Pin::ReportingFraction(0.8)).unwrap();
        assert!(close(eq.effective_beta(), 3.8, 1e-12));
        assert!(close(eq.pi(), 0.65, 1e-12));
    }

    #[test]
    fn pinning_own_value_returns_base() {
        let base = ModelParams::reference();
        assert_eq!(equivalent_params(&base, Pin::ImmuneFraction(0.3)).unwrap(), base);
        assert_eq!(equivalent_params(&base, Pin::ReportingFraction(0.4)).unwrap(), base);
        assert_eq!(
            equivalent_params(&base, Pin::EffectiveBeta(base.effective_beta())).unwrap(),
            base
        );
    }

    #[test]
    fn out_of_range_pins() {
        let base = ModelParams::reference();
        // pi2 = 0.9 needs beta2 = 13.3 and p2 = 2.8
        assert!(matches!(
            equivalent_params(&base, Pin::ImmuneFraction(0.9)),
            Err(Error::OutOfRange(_))
        ));
        // p2 = 0.2 needs pi2 = 1 - 1.33/0.95 < 0
        assert!(matches!(
            equivalent_params(&base, Pin::ReportingFraction(0.2)),
            Err(Error::OutOfRange(_))
        ));
        assert!(equivalent_params(&base, Pin::EffectiveBeta(-1.0)).is_err());
    }

    #[test]
    fn certify_reference_against_no_immunity_equivalent() {
        let base = ModelParams::reference();
        let init = InitialConditions::reference();
        let eq = equivalent_params(&base, Pin::ImmuneFraction(0.0)).unwrap();
        let grid = TimeGrid::new(0.0, 30.0, 1e-3).unwrap();
        let tol = default_tolerance(&init);
        let r = certify_identity(&base, &eq, &init, &grid, tol).unwrap();
        assert!(r.identical_ir, "{r:?}");
        assert!(r.other_compartments_differ);

        let same = certify_identity(&base, &base, &init, &grid, tol).unwrap();
        assert!(same.identical_ir && !same.other_compartments_differ);
        assert_eq!(same.max_abs_diff_ir, 0.0);

        let bumped = ModelParams::from_effective(1.91, 0.4, 0.3, 1.0).unwrap();
        let r = certify_identity(&base, &bumped, &init, &grid, tol).unwrap();
        assert!(!r.identical_ir);
    }

    #[test]
    fn scan_recovers_reference_and_equivalent() {
        let pis = [0.0, 0.3];
        let pts = manifold_scan(0.33, 0.126378532229051, 1.0, &pis).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(close(pts[1].p, 0.4, 1e-6) && close(pts[1].beta_star, 1.9, 1e-12));
        assert!(close(pts[0].p, 0.28, 1e-6) && close(pts[0].beta_star, 1.33, 1e-12));
    }

    #[test]
    fn scan_rejects_no_epidemic() {
        assert!(matches!(
            manifold_scan(0.0, 0.1, 1.0, &[0.0]),
            Err(Error::NoEpidemic { .. })
        ));
        assert!(manifold_scan(-0.2, 0.1, 1.0, &[0.0]).is_err());
    }

    #[test]
    fn default_scan_is_constant_in_invariants() {
        let params = ModelParams::reference();
        let rho = params.derived_rates().rho;
        let zr = predicted_reported_final_size(&params);
        let grid = default_pi_grid(rho, 1.0, 101);
        assert_eq!(grid.len(), 101);
        let pts = manifold_scan(rho, zr, 1.0, &grid).unwrap();
        // p <= 1 cuts the grid at pi = 1 - z_r / z = 0.72
        assert!(pts.len() > 90 && pts.len() < 101);
        assert!(pts.iter().all(|s| s.pi <= 0.72 + 1e-9));
        let first = pts[0];
        for s in &pts {
            assert!((s.beta_over_p / first.beta_over_p - 1.0).abs() <= 1e-10);
            assert!((s.beta_times_sfrac / first.beta_times_sfrac - 1.0).abs() <= 1e-10);
        }
        let mut buf = Vec::new();
        write_scan_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("pi,p,beta_star,beta_over_p,beta_times_sfrac\n"));
    }

    proptest! {
        #[test]
        fn class_members_share_invariants(
            beta in 0.5..5.0f64, p in 0.05..=1.0f64, pi in 0.0..0.9f64, target in 0.0..0.9f64,
        ) {
            let base = ModelParams::from_effective(beta, p, pi, 1.0).unwrap();
            if let Ok(eq) = equivalent_params(&base, Pin::ImmuneFraction(target)) {
                prop_assert!(invariants_of(&base).relative_difference(&invariants_of(&eq)) <= 1e-12);
                if target < pi {
                    prop_assert!(eq.effective_beta() < base.effective_beta());
                }
            }
        }
    }
}
