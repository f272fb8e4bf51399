use serde::Serialize;

use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinalSizeRoot {
    pub z: f64,
    /// True when `re <= 1` and only the trivial root exists.
    pub subcritical: bool,
}

/// Bisection for the root of `g` on `(lo, hi)` with `g(lo) > 0 > g(hi)`,
/// run until the bracket can no longer be halved in floating point.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest root of `1 - z = exp(-re z)` in `[0, 1)`.
pub fn solve_final_size(re: f64) -> FinalSizeRoot {
    // 1 - z - exp(-re z), written to avoid cancellation near z = 0
    let g = |z: f64| -z - (-re * z).exp_m1();
    let lo = f64::EPSILON;
    let hi = 1.0 - f64::EPSILON;
    if !(re > 1.0) || g(lo) <= 0.0 {
        return FinalSizeRoot {
            z: 0.0,
            subcritical: true,
        };
    }
    FinalSizeRoot {
        z: bisect(g, lo, hi),
        subcritical: false,
    }
}

/// Root of `1 - zr/c = exp(-re zr/c)` with `c = p (1 - pi)`, solved directly
/// in `zr` on `(0, c)`.
pub fn solve_reported_final_size(re: f64, p: f64, pi: f64) -> f64 {
    let c = p * (1.0 - pi);
    let g = |zr: f64| {
        let x = zr / c;
        -x - (-re * x).exp_m1()
    };
    let lo = c * f64::EPSILON;
    let hi = c * (1.0 - f64::EPSILON);
    if !(re > 1.0) || g(lo) <= 0.0 {
        return 0.0;
    }
    bisect(g, lo, hi)
}

/// Final reported fraction `p (1 - pi) z(R_E)`.
pub fn predicted_reported_final_size(params: &ModelParams) -> f64 {
    let re = params.derived_rates().re;
    let zr = params.p() * (1.0 - params.pi()) * solve_final_size(re).z;
    debug_assert!((zr - solve_reported_final_size(re, params.p(), params.pi())).abs() <= 1e-10);
    zr
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Frozen from an independent Brent solve (scipy.optimize.brentq, xtol 1e-15).
    const Z_RE_2: f64 = 0.79681213002002;
    const Z_RE_133: f64 = 0.4513519008180399;

    #[test]
    fn threshold_has_only_trivial_root() {
        assert_eq!(
            solve_final_size(1.0),
            FinalSizeRoot {
                z: 0.0,
                subcritical: true
            }
        );
        assert!(solve_final_size(0.5).subcritical);
        assert_eq!(solve_reported_final_size(1.0, 0.4, 0.3), 0.0);
    }

    #[test]
    fn known_roots() {
        assert!((solve_final_size(2.0).z - Z_RE_2).abs() < 1e-12);
        assert!((solve_final_size(1.33).z - Z_RE_133).abs() < 1e-12);
    }

    #[test]
    fn reference_reported_final_size() {
        let zr = predicted_reported_final_size(&ModelParams::reference());
        assert!((zr - 0.28 * Z_RE_133).abs() < 1e-12);
        assert!((zr - 0.1263785).abs() < 1e-6);
    }

    #[test]
    fn subcritical_params_predict_zero() {
        let params = ModelParams::from_effective(1.2, 0.5, 0.2, 1.0).unwrap();
        assert_eq!(predicted_reported_final_size(&params), 0.0);
    }

    #[test]
    fn standard_sir_reduction() {
        let params = ModelParams::from_effective(2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(predicted_reported_final_size(&params), solve_final_size(2.0).z);
    }

    #[test]
    fn near_threshold_root_is_small_and_accurate() {
        let root = solve_final_size(1.001);
        assert!(!root.subcritical);
        // z ~ 2 (re - 1) / re^2 to leading order
        assert!((root.z - 0.002).abs() < 1e-5);
        assert!((1.0 - root.z - (-1.001 * root.z).exp()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn root_satisfies_equation(re in 1.0001..20.0f64) {
            let z = solve_final_size(re).z;
            prop_assert!(z > 0.0 && z < 1.0);
            prop_assert!((1.0 - z - (-re * z).exp()).abs() <= 1e-12);
        }

        #[test]
        fn root_increases_with_re(re in 1.001..10.0f64, d in 1e-3..1.0f64) {
            prop_assert!(solve_final_size(re + d).z > solve_final_size(re).z);
        }

        #[test]
        fn both_routes_agree(re in 1.0001..10.0f64, p in 0.01..=1.0f64, pi in 0.0..0.95f64) {
            let direct = solve_reported_final_size(re, p, pi);
            let via_z = p * (1.0 - pi) * solve_final_size(re).z;
            prop_assert!((direct - via_z).abs() <= 1e-10);
        }
    }
}
