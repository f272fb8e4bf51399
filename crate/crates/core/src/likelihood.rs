//! Approximate log-likelihood of the reported infections.
//!
//! Unreported infections are replaced by `(1-p)/p` times the reported ones
//! and the susceptible fraction by `(1 - pi) - N1/(n p)`, giving
//!
//! ```text
//! l = N1(t) log p + (1-p)/p N1(t) log(1-p)
//!   + 1/p sum_i log(beta/p Ir(t_i-) X_i) - int_0^t beta/p Ir(s) X(s) ds,
//! X(s) = (1 - pi) - N1(s) / (n p),
//! ```
//!
//! where `t_i` are the reported infection times. `Ir` and `N1` are piecewise
//! constant between events, so the survival integral is a finite sum.
//! Additive constants are dropped. Parameters are ordered `(beta*, pi, p)`
//! in gradients and Hessians.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stochastic::{EventKind, EventLog};

/// One inter-event interval with the piecewise-constant `Ir` and `N1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub ir: f64,
    pub n1: f64,
}

/// A reported infection with the state just before it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportedJump {
    pub time: f64,
    pub ir_before: f64,
    pub n1_before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodInput {
    pub n: f64,
    pub horizon: f64,
    pub jumps: Vec<ReportedJump>,
    pub segments: Vec<Segment>,
    pub gamma: f64,
}

/// Survival integrals `int Ir ds` and `int Ir N1/n ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Integrals {
    ir: f64,
    ir_n1bar: f64,
}

impl LikelihoodInput {
    /// Builds the observed data on `[0, horizon]` from an event log; the
    /// horizon defaults to the time of the last event.
    pub fn from_log(log: &EventLog, horizon: Option<f64>, gamma: f64) -> Self {
        let horizon = horizon.unwrap_or_else(|| log.end_time());
        let mut ir = log.initial_state.ir as f64;
        let mut n1 = 0.0;
        let mut last = 0.0;
        let mut jumps = Vec::new();
        let mut segments = Vec::new();
        for e in log.events.iter().take_while(|e| e.time <= horizon) {
            if e.time > last {
                segments.push(Segment {
                    start: last,
                    end: e.time,
                    ir,
                    n1,
                });
            }
            if e.kind == EventKind::ReportedInfection {
                jumps.push(ReportedJump {
                    time: e.time,
                    ir_before: ir,
                    n1_before: n1,
                });
                n1 += 1.0;
            }
            ir = e.state_after.ir as f64;
            last = e.time;
        }
        if horizon > last {
            segments.push(Segment {
                start: last,
                end: horizon,
                ir,
                n1,
            });
        }
        Self {
            n: log.n as f64,
            horizon,
            jumps,
            segments,
            gamma,
        }
    }

    pub fn reported_count(&self) -> f64 {
        self.jumps.len() as f64
    }

    fn integrals(&self) -> Integrals {
        self.segments
            .iter()
            .fold(Integrals { ir: 0.0, ir_n1bar: 0.0 }, |acc, s| {
                let w = (s.end - s.start) * s.ir;
                Integrals {
                    ir: acc.ir + w,
                    ir_n1bar: acc.ir_n1bar + w * s.n1 / self.n,
                }
            })
    }

    /// Splits every segment in two; the likelihood is unchanged.
    pub fn refined(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .flat_map(|s| {
                let mid = 0.5 * (s.start + s.end);
                [Segment { end: mid, ..*s }, Segment { start: mid, ..*s }]
            })
            .collect();
        Self {
            segments,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub beta_star: f64,
    pub p: f64,
    pub pi: f64,
}

impl Point {
    pub fn as_array(&self) -> [f64; 3] {
        [self.beta_star, self.pi, self.p]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self {
            beta_star: x[0],
            pi: x[1],
            p: x[2],
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.beta_star > 0.0 && self.beta_star.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta_star",
                reason: format!("must be > 0, got {}", self.beta_star),
            });
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("must lie in (0, 1), got {}", self.p),
            });
        }
        if !(0.0..1.0).contains(&self.pi) {
            return Err(Error::InvalidParameter {
                name: "pi",
                reason: format!("must lie in [0, 1), got {}", self.pi),
            });
        }
        Ok(())
    }
}

/// Per-jump quantities: `nbar = N1(t_i-)/n`, `X = (1-pi) - nbar/p` and the
/// log intensity `L = log(beta/p Ir(t_i-) X)`.
struct JumpTerms {
    nbar: f64,
    x: f64,
    log_intensity: f64,
}

fn jump_terms(input: &LikelihoodInput, pt: &Point) -> Result<Vec<JumpTerms>> {
    pt.check()?;
    input
        .jumps
        .iter()
        .enumerate()
        .map(|(index, j)| {
            let nbar = j.n1_before / input.n;
            let x = (1.0 - pt.pi) - nbar / pt.p;
            let arg = pt.beta_star / pt.p * j.ir_before * x;
            if !(x > 0.0) || !(arg > 0.0) {
                return Err(Error::LogDomainError {
                    index,
                    value: if x > 0.0 { j.ir_before } else { x },
                });
            }
            Ok(JumpTerms {
                nbar,
                x,
                log_intensity: arg.ln(),
            })
        })
        .collect()
}

pub fn log_likelihood(input: &LikelihoodInput, pt: &Point) -> Result<f64> {
    let terms = jump_terms(input, pt)?;
    let Point { beta_star: b, p, pi } = *pt;
    let n1 = input.reported_count();
    let int = input.integrals();
    let sum_log: f64 = terms.iter().map(|t| t.log_intensity).sum();
    let survival = b / p * ((1.0 - pi) * int.ir - int.ir_n1bar / p);
    Ok(n1 * p.ln() + (1.0 - p) / p * n1 * (1.0 - p).ln() + sum_log / p - survival)
}

/// Partial derivatives `(d/dbeta*, d/dpi, d/dp)`.
pub fn gradient(input: &LikelihoodInput, pt: &Point) -> Result<[f64; 3]> {
    let terms = jump_terms(input, pt)?;
    let Point { beta_star: b, p, pi } = *pt;
    let n1 = input.reported_count();
    let int = input.integrals();
    let inner = (1.0 - pi) * int.ir - int.ir_n1bar / p;

    let d_beta = n1 / (p * b) - inner / p;
    let d_pi = -terms.iter().map(|t| 1.0 / (p * t.x)).sum::<f64>() + b / p * int.ir;
    let sum_log: f64 = terms.iter().map(|t| t.log_intensity).sum();
    let sum_ratio: f64 = terms.iter().map(|t| t.nbar / (p * (1.0 - pi) - t.nbar)).sum();
    let d_p = -n1 * (1.0 - p).ln() / (p * p) - sum_log / (p * p) + sum_ratio / (p * p) - n1 / (p * p)
        + b / (p * p) * ((1.0 - pi) * int.ir - 2.0 / p * int.ir_n1bar);
    Ok([d_beta, d_pi, d_p])
}

/// Second partial derivatives in `(beta*, pi, p)` order, obtained by
/// differentiating the gradient above term by term.
pub fn hessian(input: &LikelihoodInput, pt: &Point) -> Result<[[f64; 3]; 3]> {
    let terms = jump_terms(input, pt)?;
    let Point { beta_star: b, p, pi } = *pt;
    let n1 = input.reported_count();
    let int = input.integrals();
    let (p2, p3, p4) = (p * p, p * p * p, p * p * p * p);

    let bb = -n1 / (p * b * b);
    let bpi = int.ir / p;
    let bp = -n1 / (p2 * b) + (1.0 - pi) * int.ir / p2 - 2.0 * int.ir_n1bar / p3;
    let pipi = -terms.iter().map(|t| 1.0 / (p * t.x * t.x)).sum::<f64>();
    let pip = terms.iter().map(|t| (1.0 - pi) / (p2 * t.x * t.x)).sum::<f64>() - b * int.ir / p2;

    // d/dp of L_i = -1/p + nbar/(p^2 X), and its second derivative
    let sum_log: f64 = terms.iter().map(|t| t.log_intensity).sum();
    let sum_dlog: f64 = terms.iter().map(|t| -1.0 / p + t.nbar / (p2 * t.x)).sum();
    let sum_d2log: f64 = terms
        .iter()
        .map(|t| 1.0 / p2 - 2.0 * t.nbar / (p3 * t.x) - t.nbar * t.nbar / (p4 * t.x * t.x))
        .sum();
    let pp = n1 / (p2 * (1.0 - p)) + 2.0 * n1 * (1.0 - p).ln() / p3 + 2.0 * sum_log / p3 - 2.0 * sum_dlog / p2
        + sum_d2log / p
        - 2.0 * b * (1.0 - pi) * int.ir / p3
        + 6.0 * b * int.ir_n1bar / p4;

    Ok([[bb, bpi, bp], [bpi, pipi, pip], [bp, pip, pp]])
}

/// The second derivatives in the closed forms commonly quoted for this
/// likelihood, kept for comparison with [`hessian`]. Counts inside the
/// surrogate susceptible fraction are read as `N1/n`. The `(pi, p)` and
/// `(p, p)` entries of these closed forms are not derivatives of the
/// log-likelihood and disagree with finite differences.
pub fn hessian_printed(input: &LikelihoodInput, pt: &Point) -> Result<[[f64; 3]; 3]> {
    let terms = jump_terms(input, pt)?;
    let Point { beta_star: b, p, pi } = *pt;
    let n1 = input.reported_count();
    let int = input.integrals();
    let (p2, p3, p4) = (p * p, p * p * p, p * p * p * p);

    let bb = -n1 / (p * b * b);
    let bp = -n1 / (p2 * b) + ((1.0 - pi) * int.ir - 2.0 / p * int.ir_n1bar) / p2;
    let bpi = int.ir / p;
    let pipi = -terms.iter().map(|t| 1.0 / (p * t.x * t.x)).sum::<f64>();
    let pip = terms
        .iter()
        .map(|t| (pi - 1.0) / (p * (pi - 1.0) - t.nbar).powi(2))
        .sum::<f64>()
        - b / p2 * int.ir;
    let ir_at = |i: usize| input.jumps[i].ir_before;
    let mut pp = -n1 / p2 - n1 * (1.0 - 1.0 / (1.0 - p)) / p2 + 2.0 * n1 * (p + (1.0 - p).ln()) / p3;
    pp += terms.iter().map(|t| t.log_intensity).sum::<f64>() / p3;
    pp += terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let ir = ir_at(i);
            (ir * t.nbar * b / p3 - ir * b * t.x / p2) / (ir * b * t.x * p)
        })
        .sum::<f64>();
    pp -= terms
        .iter()
        .map(|t| t.nbar * (3.0 * (1.0 - pi) * p - 2.0 * t.nbar) / ((pi - 1.0) * p + t.nbar).powi(2))
        .sum::<f64>()
        / p3;
    pp += 2.0 / p3 * n1;
    pp -= 2.0 * b * ((1.0 - pi) * p * int.ir + 3.0 * int.ir_n1bar) / p4;
    Ok([[bb, bpi, bp], [bpi, pipi, pip], [bp, pip, pp]])
}

/// Closed-form maximiser in `beta*` for fixed `(p, pi)`:
/// `N1(t) / int Ir(s) X(s) ds`.
pub fn beta_star_mle(input: &LikelihoodInput, p: f64, pi: f64) -> Result<f64> {
    let int = input.integrals();
    let denom = (1.0 - pi) * int.ir - int.ir_n1bar / p;
    let n1 = input.reported_count();
    if n1 == 0.0 {
        return Ok(0.0);
    }
    if !(denom > 0.0) {
        return Err(Error::DegenerateIntegral(denom));
    }
    Ok(n1 / denom)
}

/// Central-difference gradient of [`log_likelihood`] with step
/// `rel_step * |x|` per coordinate.
pub fn fd_gradient(input: &LikelihoodInput, pt: &Point, rel_step: f64) -> Result<[f64; 3]> {
    let x = pt.as_array();
    let mut g = [0.0; 3];
    for k in 0..3 {
        let h = rel_step * x[k].abs().max(1e-3);
        let (mut up, mut down) = (x, x);
        up[k] += h;
        down[k] -= h;
        g[k] = (log_likelihood(input, &Point::from_array(up))? - log_likelihood(input, &Point::from_array(down))?)
            / (2.0 * h);
    }
    Ok(g)
}

/// Central-difference Jacobian of the analytic [`gradient`].
pub fn fd_hessian(input: &LikelihoodInput, pt: &Point, rel_step: f64) -> Result<[[f64; 3]; 3]> {
    let x = pt.as_array();
    let mut h = [[0.0; 3]; 3];
    for k in 0..3 {
        let step = rel_step * x[k].abs().max(1e-3);
        let (mut up, mut down) = (x, x);
        up[k] += step;
        down[k] -= step;
        let gu = gradient(input, &Point::from_array(up))?;
        let gd = gradient(input, &Point::from_array(down))?;
        for j in 0..3 {
            h[j][k] = (gu[j] - gd[j]) / (2.0 * step);
        }
    }
    Ok(h)
}

/// `max |a - b| / |b|` over matching entries.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if *y == 0.0 { x.abs() } else { (x - y).abs() / y.abs() })
        .fold(0.0, f64::max)
}

pub fn flatten(m: &[[f64; 3]; 3]) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

/// Everything `lik-check` reports for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LikelihoodCheck {
    pub point: Point,
    pub loglik: f64,
    pub grad: [f64; 3],
    pub grad_fd: [f64; 3],
    pub hessian: [[f64; 3]; 3],
    pub hessian_fd: [[f64; 3]; 3],
    pub max_rel_err_grad: f64,
    pub max_rel_err_hess: f64,
}

pub fn check_point(input: &LikelihoodInput, pt: &Point, rel_step: f64) -> Result<LikelihoodCheck> {
    let grad = gradient(input, pt)?;
    let grad_fd = fd_gradient(input, pt, rel_step)?;
    let hess = hessian(input, pt)?;
    let hess_fd = fd_hessian(input, pt, rel_step)?;
    Ok(LikelihoodCheck {
        point: *pt,
        loglik: log_likelihood(input, pt)?,
        max_rel_err_grad: max_relative_error(&grad, &grad_fd),
        max_rel_err_hess: max_relative_error(&flatten(&hess), &flatten(&hess_fd)),
        grad,
        grad_fd,
        hessian: hess,
        hessian_fd: hess_fd,
    })
}
