//! Fixed-step RK4 integration of the deterministic model.
//!
//! The full system tracks all five compartments. Since
//! `beta_r Ir + beta_u Iu = (beta*/p) Ir` along solutions with
//! `Iu = (1-p)/p Ir`, the dynamics reduce to a single equation for `Ir`
//! driven by the running integral of `Ir`, from which every other
//! compartment can be reconstructed in closed form. Both integrators carry
//! `int_0^t Ir(u) du` as an extra state variable.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{initial_real, InitialConditions, ModelParams, RealState};

pub const DEFAULT_DT: f64 = 1e-3;

/// Equally spaced grid with an integral number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_start < t_end) || !(dt > 0.0) || !dt.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("need t_start < t_end and dt > 0, got [{t_start}, {t_end}] / {dt}"),
            });
        }
        let k = (t_end - t_start) / dt;
        let steps = k.round();
        if (k - steps).abs() > 1e-9 * k.max(1.0) || steps < 1.0 {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("(t_end - t_start) / dt = {k} is not an integer"),
            });
        }
        Ok(Self {
            t_start,
            t_end,
            steps: steps as usize,
        })
    }

    pub fn with_steps(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if !(t_start < t_end) || steps == 0 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "need t_start < t_end and at least one step".into(),
            });
        }
        Ok(Self { t_start, t_end, steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Time of grid point `i`, for `i` in `0..=steps`.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|i| self.time(i))
    }
}

fn rk4_step<const D: usize>(f: &impl Fn(&[f64; D]) -> [f64; D], y: &[f64; D], h: f64) -> [f64; D] {
    let add = |a: &[f64; D], b: &[f64; D], s: f64| -> [f64; D] { std::array::from_fn(|i| a[i] + s * b[i]) };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, h / 2.0));
    let k3 = f(&add(y, &k2, h / 2.0));
    let k4 = f(&add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterministicPath {
    pub grid: TimeGrid,
    pub n: f64,
    pub states: Vec<RealState>,
    /// `int_0^t Ir(u) du` at every grid point.
    pub cumulative_ir_integral: Vec<f64>,
}

impl DeterministicPath {
    pub fn last(&self) -> &RealState {
        self.states.last().expect("paths hold at least the initial state")
    }

    /// Reported infections since time zero, `(Ir + Rr)(t) - (Ir + Rr)(0)`,
    /// the deterministic counterpart of `N1(t)`.
    pub fn cumulative_reported(&self) -> Vec<f64> {
        let s0 = &self.states[0];
        let base = s0.ir + s0.rr;
        self.states.iter().map(|s| s.ir + s.rr - base).collect()
    }

    /// Writes `t,S,Ir,Iu,Rr,Ru,intIr`, keeping every `stride`-th grid point
    /// (the final point is always kept).
    pub fn write_csv<W: Write>(&self, writer: W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "S", "Ir", "Iu", "Rr", "Ru", "intIr"])?;
        let last = self.states.len() - 1;
        for (i, (s, int)) in self.states.iter().zip(&self.cumulative_ir_integral).enumerate() {
            if i % stride != 0 && i != last {
                continue;
            }
            w.write_record(
                [self.grid.time(i), s.s, s.ir, s.iu, s.rr, s.ru, *int]
                    .iter()
                    .map(|x| format!("{x:.16e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_state(state: &RealState, n: f64, time: f64) -> Result<()> {
    let (name, value) = state.min_component();
    if value < -1e-9 * n || value.is_nan() {
        return Err(Error::StepTooLarge {
            compartment: name,
            value,
            time,
        });
    }
    Ok(())
}

/// Integrates the five-compartment system with the running `Ir` integral.
pub fn integrate_full(params: &ModelParams, init: &InitialConditions, grid: &TimeGrid) -> Result<DeterministicPath> {
    let start = initial_real(params, init)?;
    integrate_full_from(params, start, grid)
}

pub fn integrate_full_from(params: &ModelParams, start: RealState, grid: &TimeGrid) -> Result<DeterministicPath> {
    let n = start.total();
    let (beta_r, beta_u, p, gamma) = (params.beta_r(), params.beta_u(), params.p(), params.gamma());
    let field = |y: &[f64; 6]| -> [f64; 6] {
        let incidence = (beta_r * y[1] + beta_u * y[2]) * y[0] / n;
        [
            -incidence,
            p * incidence - gamma * y[1],
            (1.0 - p) * incidence - gamma * y[2],
            gamma * y[1],
            gamma * y[2],
            y[1],
        ]
    };
    let h = grid.dt();
    let mut y = [start.s, start.ir, start.iu, start.rr, start.ru, 0.0];
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut integral = Vec::with_capacity(grid.steps() + 1);
    states.push(start);
    integral.push(0.0);
    for i in 1..=grid.steps() {
        y = rk4_step(&field, &y, h);
        let state = RealState {
            s: y[0],
            ir: y[1],
            iu: y[2],
            rr: y[3],
            ru: y[4],
        };
        check_state(&state, n, grid.time(i))?;
        states.push(state);
        integral.push(y[5]);
    }
    Ok(DeterministicPath {
        grid: *grid,
        n,
        states,
        cumulative_ir_integral: integral,
    })
}

/// `Ir` on the grid together with its running integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportedPath {
    pub grid: TimeGrid,
    pub ir: Vec<f64>,
    pub cumulative_ir_integral: Vec<f64>,
}

/// Coefficients of the reduced equation
/// `dIr/dt = Ir [b (1 - pi) - (b/p) Ir(0)/n] exp(-(b/p)/n int Ir) - gamma Ir`.
#[derive(Debug, Clone, Copy)]
struct Reduced {
    growth: f64,
    depletion: f64,
    gamma: f64,
}

impl Reduced {
    fn new(params: &ModelParams, init: &InitialConditions) -> Self {
        let beta = params.effective_beta();
        let n = init.n_f64();
        let ir0 = n * init.i0;
        let depletion = beta / params.p() / n;
        Self {
            growth: beta * (1.0 - params.pi()) - depletion * ir0,
            depletion,
            gamma: params.gamma(),
        }
    }

    fn slope(&self, ir: f64, integral: f64) -> f64 {
        ir * self.growth * (-self.depletion * integral).exp() - self.gamma * ir
    }
}

pub fn integrate_reduced(params: &ModelParams, init: &InitialConditions, grid: &TimeGrid) -> Result<ReportedPath> {
    initial_real(params, init)?;
    let n = init.n_f64();
    let eq = Reduced::new(params, init);
    let field = |y: &[f64; 2]| -> [f64; 2] { [eq.slope(y[0], y[1]), y[0]] };
    let h = grid.dt();
    let mut y = [n * init.i0, 0.0];
    let mut ir = Vec::with_capacity(grid.steps() + 1);
    let mut integral = Vec::with_capacity(grid.steps() + 1);
    ir.push(y[0]);
    integral.push(0.0);
    for i in 1..=grid.steps() {
        y = rk4_step(&field, &y, h);
        if y[0] < -1e-9 * n || y[0].is_nan() {
            return Err(Error::StepTooLarge {
                compartment: "Ir",
                value: y[0],
                time: grid.time(i),
            });
        }
        ir.push(y[0]);
        integral.push(y[1]);
    }
    Ok(ReportedPath {
        grid: *grid,
        ir,
        cumulative_ir_integral: integral,
    })
}

/// Right-hand side of the reduced equation, exposed for consistency checks.
pub fn reduced_slope(params: &ModelParams, init: &InitialConditions, ir: f64, integral: f64) -> f64 {
    Reduced::new(params, init).slope(ir, integral)
}

/// Rebuilds all compartments from a reported path:
/// `S = [n(1-pi) - Ir(0)/p] exp(-(b/p)/n int Ir)`, `Iu = (1-p)/p Ir`,
/// `Rr = p (n - S) - Ir`, `Ru = (1-p)/p Rr`.
pub fn reconstruct_compartments(
    reported: &ReportedPath,
    params: &ModelParams,
    init: &InitialConditions,
) -> Result<DeterministicPath> {
    let start = initial_real(params, init)?;
    let n = init.n_f64();
    let p = params.p();
    let ratio = (1.0 - p) / p;
    let depletion = params.effective_beta() / p / n;
    let states = reported
        .ir
        .iter()
        .zip(&reported.cumulative_ir_integral)
        .enumerate()
        .map(|(i, (&ir, &int))| {
            if i == 0 {
                return start;
            }
            let s = start.s * (-depletion * int).exp();
            let rr = p * (n - s) - ir;
            RealState {
                s,
                ir,
                iu: ratio * ir,
                rr,
                ru: ratio * rr,
            }
        })
        .collect();
    Ok(DeterministicPath {
        grid: reported.grid,
        n,
        states,
        cumulative_ir_integral: reported.cumulative_ir_integral.clone(),
    })
}

/// Final reported fraction `p (S(0) - S(t_end)) / n` of a full integration,
/// provided `|dIr/dt| < 1e-10 n` at the horizon.
pub fn deterministic_final_reported_fraction(
    params: &ModelParams,
    init: &InitialConditions,
    grid: &TimeGrid,
) -> Result<f64> {
    let path = integrate_full(params, init, grid)?;
    let last = path.last();
    let n = path.n;
    let (beta_r, beta_u, p, gamma) = (params.beta_r(), params.beta_u(), params.p(), params.gamma());
    let slope = p * (beta_r * last.ir + beta_u * last.iu) * last.s / n - gamma * last.ir;
    if slope.abs() >= 1e-10 * n {
        return Err(Error::NotConverged {
            time: grid.t_end(),
            slope: slope.abs(),
        });
    }
    Ok(path.cumulative_reported().last().copied().unwrap_or(0.0) / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (ModelParams, InitialConditions) {
        (ModelParams::reference(), InitialConditions::reference())
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0.3).is_err());
        assert!(TimeGrid::new(1.0, 0.0, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
        let g = TimeGrid::new(0.0, 100.0, 1e-3).unwrap();
        assert_eq!(g.steps(), 100_000);
        assert_eq!(g.time(g.steps()), 100.0);
    }

    #[test]
    fn no_transmission_is_pure_decay() {
        let params = ModelParams::new(0.0, 0.0, 0.4, 0.3, 0.7).unwrap();
        let init = InitialConditions::reference();
        let grid = TimeGrid::new(0.0, 5.0, 1e-3).unwrap();
        let path = integrate_full(&params, &init, &grid).unwrap();
        let s0 = path.states[0].s;
        for (t, s) in grid.times().zip(&path.states) {
            assert_eq!(s.s, s0);
            let exact = 10.0 * (-0.7 * t).exp();
            assert!((s.ir - exact).abs() < 1e-10, "t={t}: {} vs {exact}", s.ir);
        }
    }

    #[test]
    fn reduced_slope_at_zero_matches_full_system() {
        let (params, init) = reference();
        let real = initial_real(&params, &init).unwrap();
        let n = init.n_f64();
        let full = params.p() * (params.beta_r() * real.ir + params.beta_u() * real.iu) * real.s / n
            - params.gamma() * real.ir;
        let beta = params.effective_beta();
        let by_hand = real.ir * (beta * (1.0 - params.pi()) - beta / params.p() * init.i0) - params.gamma() * real.ir;
        let reduced = reduced_slope(&params, &init, real.ir, 0.0);
        assert!((reduced - full).abs() < 1e-12);
        assert!((reduced - by_hand).abs() < 1e-12);
    }

    #[test]
    fn no_susceptibles_means_pure_decay() {
        let i0 = 0.001;
        let p = 0.4;
        let pi = 1.0 - i0 / p - 1e-12;
        let params = ModelParams::from_effective(1.9, p, pi, 1.0).unwrap();
        let init = InitialConditions::new(10_000, i0).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 1e-3).unwrap();
        let path = integrate_reduced(&params, &init, &grid).unwrap();
        for (t, ir) in grid.times().zip(&path.ir) {
            let exact = 10.0 * (-t).exp();
            assert!((ir - exact).abs() < 1e-6 * exact.max(1e-3), "t={t}");
        }
    }

    #[test]
    fn reconstruction_at_zero_reproduces_initial_state() {
        let (params, init) = reference();
        let grid = TimeGrid::new(0.0, 1.0, 1e-2).unwrap();
        let reported = integrate_reduced(&params, &init, &grid).unwrap();
        let path = reconstruct_compartments(&reported, &params, &init).unwrap();
        assert_eq!(path.states[0], initial_real(&params, &init).unwrap());
    }

    #[test]
    fn full_reporting_has_no_unreported_compartments() {
        let params = ModelParams::from_effective(2.0, 1.0, 0.2, 1.0).unwrap();
        let init = InitialConditions::new(1000, 0.01).unwrap();
        let grid = TimeGrid::new(0.0, 20.0, 1e-2).unwrap();
        let reported = integrate_reduced(&params, &init, &grid).unwrap();
        let path = reconstruct_compartments(&reported, &params, &init).unwrap();
        assert!(path.states.iter().all(|s| s.iu == 0.0 && s.ru == 0.0));
    }

    #[test]
    fn full_path_properties() {
        let (params, init) = reference();
        let grid = TimeGrid::new(0.0, 40.0, 1e-2).unwrap();
        let path = integrate_full(&params, &init, &grid).unwrap();
        let n = path.n;
        let ratio = (1.0 - params.p()) / params.p();
        for w in path.states.windows(2) {
            assert!(w[1].s <= w[0].s);
            assert!(w[1].rr >= w[0].rr && w[1].ru >= w[0].ru);
        }
        for s in &path.states {
            assert!((s.total() - n).abs() <= 1e-9 * n);
            assert!((s.iu / s.ir - ratio).abs() <= 1e-9 * ratio);
        }
    }

    #[test]
    fn coarse_step_is_reported() {
        let params = ModelParams::from_effective(40.0, 0.5, 0.0, 30.0).unwrap();
        let init = InitialConditions::new(1000, 0.01).unwrap();
        let grid = TimeGrid::new(0.0, 10.0, 0.5).unwrap();
        assert!(matches!(
            integrate_full(&params, &init, &grid),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn csv_stride_keeps_last_point() {
        let (params, init) = reference();
        let grid = TimeGrid::new(0.0, 1.0, 0.1).unwrap();
        let path = integrate_full(&params, &init, &grid).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,S,Ir,Iu,Rr,Ru,intIr");
        // points 0, 3, 6, 9 and the final point 10
        assert_eq!(lines.len(), 1 + 5);
        assert!(lines[5].starts_with("1.0000000000000000e0,"));
    }
}
