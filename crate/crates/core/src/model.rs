//! Model parameters, derived epidemiological quantities and initial states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transmission, reporting, immunity and recovery parameters.
///
/// Validated once at construction; every other operation assumes validity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    beta_r: f64,
    beta_u: f64,
    p: f64,
    pi: f64,
    gamma: f64,
}

impl ModelParams {
    pub fn new(beta_r: f64, beta_u: f64, p: f64, pi: f64, gamma: f64) -> Result<Self> {
        check(
            beta_r.is_finite() && beta_r >= 0.0,
            "beta_r",
            "must be finite and >= 0",
            beta_r,
        )?;
        check(
            beta_u.is_finite() && beta_u >= 0.0,
            "beta_u",
            "must be finite and >= 0",
            beta_u,
        )?;
        check(p > 0.0 && p <= 1.0, "p", "must lie in (0, 1]", p)?;
        check((0.0..1.0).contains(&pi), "pi", "must lie in [0, 1)", pi)?;
        check(
            gamma.is_finite() && gamma > 0.0,
            "gamma",
            "must be finite and > 0",
            gamma,
        )?;
        Ok(Self {
            beta_r,
            beta_u,
            p,
            pi,
            gamma,
        })
    }

    /// Parameters for deterministic work, where only `beta*` enters the
    /// dynamics: the reported and unreported rates are both set to `beta*`.
    pub fn from_effective(beta_star: f64, p: f64, pi: f64, gamma: f64) -> Result<Self> {
        Self::new(beta_star, beta_star, p, pi, gamma)
    }

    /// The scenario used throughout: `beta_r = 2.5`, `beta_u = 1.5`,
    /// `p = 0.4`, `pi = 0.3`, `gamma = 1`.
    pub fn reference() -> Self {
        Self::new(2.5, 1.5, 0.4, 0.3, 1.0).expect("reference parameters are valid")
    }

    pub fn beta_r(&self) -> f64 {
        self.beta_r
    }

    pub fn beta_u(&self) -> f64 {
        self.beta_u
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Reporting-weighted transmission rate `p beta_r + (1 - p) beta_u`.
    pub fn effective_beta(&self) -> f64 {
        self.p * self.beta_r + (1.0 - self.p) * self.beta_u
    }

    pub fn derived_rates(&self) -> DerivedRates {
        let beta_star = self.effective_beta();
        let r0 = beta_star / self.gamma;
        let re = r0 * (1.0 - self.pi);
        DerivedRates {
            beta_star,
            r0,
            re,
            rho: self.gamma * (re - 1.0),
        }
    }
}

fn check(ok: bool, name: &'static str, what: &str, value: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{what}, got {value}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub beta_star: f64,
    pub r0: f64,
    pub re: f64,
    /// Initial exponential growth rate `beta*(1 - pi) - gamma`.
    pub rho: f64,
}

/// Population size and the initially reported infectious fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub n: u64,
    pub i0: f64,
}

impl InitialConditions {
    pub fn new(n: u64, i0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "population size must be >= 1".into(),
            });
        }
        check(i0.is_finite() && i0 > 0.0 && i0 < 1.0, "i0", "must lie in (0, 1)", i0)?;
        Ok(Self { n, i0 })
    }

    pub fn reference() -> Self {
        Self { n: 10_000, i0: 0.001 }
    }

    pub fn n_f64(&self) -> f64 {
        self.n as f64
    }

    /// Unreported initial fraction implied by the reporting fraction.
    pub fn unreported_fraction(&self, params: &ModelParams) -> f64 {
        (1.0 - params.p()) / params.p() * self.i0
    }
}

/// Occupancy of the five compartments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Compartments<T> {
    pub s: T,
    pub ir: T,
    pub iu: T,
    pub rr: T,
    pub ru: T,
}

pub type CountState = Compartments<u64>;
pub type RealState = Compartments<f64>;

impl<T: Copy + std::ops::Add<Output = T>> Compartments<T> {
    pub fn total(&self) -> T {
        self.s + self.ir + self.iu + self.rr + self.ru
    }

    pub fn infectious(&self) -> T {
        self.ir + self.iu
    }
}

impl CountState {
    pub fn to_real(&self) -> RealState {
        RealState {
            s: self.s as f64,
            ir: self.ir as f64,
            iu: self.iu as f64,
            rr: self.rr as f64,
            ru: self.ru as f64,
        }
    }
}

impl RealState {
    pub fn min_component(&self) -> (&'static str, f64) {
        [
            ("S", self.s),
            ("Ir", self.ir),
            ("Iu", self.iu),
            ("Rr", self.rr),
            ("Ru", self.ru),
        ]
        .into_iter()
        .fold(("S", f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc })
    }
}

/// Real-valued initial compartments:
/// `Ir = n i0`, `Iu = n (1-p)/p i0`, `Rr = n p pi`, `Ru = n (1-p) pi` and
/// `S = n (1 - pi) - n i0 / p`.
pub fn initial_real(params: &ModelParams, init: &InitialConditions) -> Result<RealState> {
    let n = init.n_f64();
    let p = params.p();
    let pi = params.pi();
    let s = n * (1.0 - pi) - n * init.i0 / p;
    if s.is_nan() || s <= 0.0 {
        return Err(Error::InfeasibleInitialState { s0: s });
    }
    Ok(RealState {
        s,
        ir: n * init.i0,
        iu: n * (1.0 - p) / p * init.i0,
        rr: n * p * pi,
        ru: n * (1.0 - p) * pi,
    })
}

/// Integer initial compartments for stochastic simulation. The four
/// non-susceptible compartments are rounded to the nearest integer and the
/// remainder of the population is assigned to `S`.
pub fn initial_counts(params: &ModelParams, init: &InitialConditions) -> Result<CountState> {
    let real = initial_real(params, init)?;
    let round = |x: f64| x.round() as u64;
    let ir = round(real.ir);
    let iu = round(real.iu);
    let rr = round(real.rr);
    let ru = round(real.ru);
    let taken = ir + iu + rr + ru;
    if taken > init.n {
        return Err(Error::InfeasibleInitialState {
            s0: init.n as f64 - taken as f64,
        });
    }
    Ok(CountState {
        s: init.n - taken,
        ir,
        iu,
        rr,
        ru,
    })
}

/// Parameter file: `{"beta_r","beta_u","p","pi","gamma","n","i0"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub beta_r: f64,
    pub beta_u: f64,
    pub p: f64,
    pub pi: f64,
    pub gamma: f64,
    pub n: u64,
    pub i0: f64,
}

impl Scenario {
    pub fn reference() -> Self {
        Self::from_parts(&ModelParams::reference(), &InitialConditions::reference())
    }

    pub fn from_parts(params: &ModelParams, init: &InitialConditions) -> Self {
        Self {
            beta_r: params.beta_r(),
            beta_u: params.beta_u(),
            p: params.p(),
            pi: params.pi(),
            gamma: params.gamma(),
            n: init.n,
            i0: init.i0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validates the file contents, including feasibility of `S(0)`.
    pub fn split(&self) -> Result<(ModelParams, InitialConditions)> {
        let params = ModelParams::new(self.beta_r, self.beta_u, self.p, self.pi, self.gamma)?;
        let init = InitialConditions::new(self.n, self.i0)?;
        initial_real(&params, &init)?;
        Ok((params, init))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn effective_beta_examples() {
        assert!((ModelParams::reference().effective_beta() - 1.9).abs() < 1e-12);
        let full = ModelParams::new(2.0, 123.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(full.effective_beta(), 2.0);
        let half = ModelParams::new(2.0, 1.0, 0.5, 0.0, 1.0).unwrap();
        assert_eq!(half.effective_beta(), 1.5);
    }

    #[test]
    fn derived_rates_reference() {
        let d = ModelParams::reference().derived_rates();
        assert!((d.beta_star - 1.9).abs() < 1e-12);
        assert!((d.r0 - 1.9).abs() < 1e-12);
        assert!((d.re - 1.33).abs() < 1e-12);
        assert!((d.rho - 0.33).abs() < 1e-12);
    }

    #[test]
    fn threshold_cases() {
        let d = ModelParams::from_effective(1.0, 0.5, 0.0, 1.0).unwrap().derived_rates();
        assert_eq!(d.rho, 0.0);
        assert_eq!(d.re, 1.0);
        let d = ModelParams::from_effective(2.0, 0.7, 0.5, 1.0).unwrap().derived_rates();
        assert_eq!(d.rho, 0.0);
        assert_eq!(d.re, 1.0);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.1, 0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.5, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.5, 0.0, 0.0).is_err());
        assert!(ModelParams::new(-1.0, 1.0, 0.5, 0.0, 1.0).is_err());
        assert!(InitialConditions::new(0, 0.01).is_err());
        assert!(InitialConditions::new(10, 0.0).is_err());
    }

    #[test]
    fn reference_initial_counts() {
        let c = initial_counts(&ModelParams::reference(), &InitialConditions::reference()).unwrap();
        assert_eq!(
            c,
            CountState {
                s: 6975,
                ir: 10,
                iu: 15,
                rr: 1200,
                ru: 1800
            }
        );
        let init = InitialConditions::reference();
        let iu = init.unreported_fraction(&ModelParams::reference());
        assert!((iu - 0.0015).abs() < 1e-15);
    }

    #[test]
    fn standard_sir_reduction() {
        let params = ModelParams::new(2.0, 2.0, 1.0, 0.0, 1.0).unwrap();
        let init = InitialConditions::new(1000, 0.01).unwrap();
        let r = initial_real(&params, &init).unwrap();
        assert_eq!(r.iu, 0.0);
        assert_eq!(r.rr, 0.0);
        assert_eq!(r.ru, 0.0);
        assert!((r.s - 990.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_initial_state() {
        let params = ModelParams::from_effective(2.0, 0.1, 0.9, 1.0).unwrap();
        let init = InitialConditions::new(1000, 0.05).unwrap();
        assert!(matches!(
            initial_real(&params, &init),
            Err(Error::InfeasibleInitialState { .. })
        ));
        assert!(initial_counts(&params, &init).is_err());
    }

    #[test]
    fn scenario_rejects_unknown_keys() {
        let ok = r#"{"beta_r":2.5,"beta_u":1.5,"p":0.4,"pi":0.3,"gamma":1.0,"n":10000,"i0":0.001}"#;
        let s = Scenario::from_json(ok).unwrap();
        assert_eq!(s, Scenario::reference());
        let bad = r#"{"beta_r":2.5,"beta_u":1.5,"p":0.4,"pi":0.3,"gamma":1.0,"n":10000,"i0":0.001,"x":1}"#;
        assert!(Scenario::from_json(bad).is_err());
        let missing = r#"{"beta_r":2.5,"beta_u":1.5,"p":0.4,"pi":0.3,"gamma":1.0,"n":10000}"#;
        assert!(Scenario::from_json(missing).is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (0.0..5.0f64, 0.0..5.0f64, 0.01..=1.0f64, 0.0..0.95f64, 0.05..3.0f64)
            .prop_map(|(br, bu, p, pi, g)| ModelParams::new(br, bu, p, pi, g).unwrap())
    }

    proptest! {
        #[test]
        fn derived_rate_identities(params in arb_params()) {
            let d = params.derived_rates();
            prop_assert!((d.re - d.r0 * (1.0 - params.pi())).abs() <= 1e-15 * d.re.abs().max(1.0));
            prop_assert!((d.rho - params.gamma() * (d.re - 1.0)).abs() <= 1e-15 * d.rho.abs().max(1.0));
            prop_assert!(d.beta_star >= 0.0);
        }

        #[test]
        fn initial_state_conservation(
            params in arb_params(),
            n in 1u64..1_000_000,
            i0 in 1e-5..0.05f64,
        ) {
            let init = InitialConditions::new(n, i0).unwrap();
            if let Ok(real) = initial_real(&params, &init) {
                let nf = n as f64;
                prop_assert!((real.total() - nf).abs() <= 1e-12 * nf);
                let ratio = (1.0 - params.p()) / params.p();
                prop_assert!((real.iu - ratio * real.ir).abs() <= 1e-12 * real.iu.max(1.0));
                prop_assert!((real.ru - ratio * real.rr).abs() <= 1e-12 * real.ru.max(1.0));
                if let Ok(c) = initial_counts(&params, &init) {
                    prop_assert_eq!(c.total(), n);
                }
            }
        }
    }
}
