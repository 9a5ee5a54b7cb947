//! Delay differential equation integration.
//!
//! All four model variants share the state layout `(I, G)` (insulin-like,
//! glucose-like) with the delay acting on the insulin-like component only.
//! The integrator advances the state with the classical Runge–Kutta–Fehlberg
//! 4(5) pair under standard proportional step control (fixed-step RK4 and
//! Euler are available for convergence studies); the delayed value at each
//! stage comes from barycentric Lagrange interpolation over a centered
//! stencil of accepted nodes, or from the initial function when the stage
//! time predates the start. The step size is capped at `τ/4`, which keeps
//! every stage's delayed argument strictly inside the stored history.

use crate::error::{Error, Result};
use crate::model::{Equilibrium, ModelConfig};
use std::sync::Arc;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Adaptive Fehlberg 4(5) pair, advanced with the 5th-order solution.
    Rkf45Adaptive,
    /// Classical fixed-step 4th-order Runge–Kutta.
    Rk4Fixed,
    /// Fixed-step explicit Euler.
    EulerFixed,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rkf45Adaptive => "rkf45-adaptive",
            Method::Rk4Fixed => "rk4-fixed",
            Method::EulerFixed => "euler-fixed",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rkf45-adaptive" | "rkf45" => Ok(Method::Rkf45Adaptive),
            "rk4-fixed" | "rk4" => Ok(Method::Rk4Fixed),
            "euler-fixed" | "euler" => Ok(Method::EulerFixed),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected rkf45-adaptive, rk4-fixed, or euler-fixed)"
            ))),
        }
    }
}

/// Initial function for the delayed component on `[−τ, 0]`.
#[derive(Clone)]
pub enum History {
    /// `φ(s) ≡ value`.
    Constant(f64),
    /// `φ(s) = value_at_zero + slope·s` (note `s ≤ 0`).
    Affine { value_at_zero: f64, slope: f64 },
    /// Piecewise-linear through `(times[k], values[k])`; times ascending and
    /// covering `[−τ, 0]`.
    Sampled { times: Vec<f64>, values: Vec<f64> },
    /// Arbitrary callable.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for History {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            History::Constant(v) => write!(f, "Constant({v})"),
            History::Affine {
                value_at_zero,
                slope,
            } => write!(f, "Affine({value_at_zero} + {slope}*s)"),
            History::Sampled { times, .. } => write!(f, "Sampled({} nodes)", times.len()),
            History::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl History {
    /// Value of the initial function at `s ≤ 0`.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            History::Constant(v) => *v,
            History::Affine {
                value_at_zero,
                slope,
            } => value_at_zero + slope * s,
            History::Sampled { times, values } => {
                let n = times.len();
                if s <= times[0] {
                    return values[0];
                }
                if s >= times[n - 1] {
                    return values[n - 1];
                }
                let j = times.partition_point(|t| *t < s);
                let (t0, t1) = (times[j - 1], times[j]);
                let f = if t1 > t0 { (s - t0) / (t1 - t0) } else { 0.0 };
                values[j - 1] + f * (values[j] - values[j - 1])
            }
            History::Custom(f) => f(s),
        }
    }

    /// Check the history is usable on `[−τ, 0]`.
    fn validate(&self, tau: f64) -> Result<()> {
        if let History::Sampled { times, values } = self {
            if times.len() != values.len() || times.len() < 2 {
                return Err(Error::InvalidParameter(
                    "sampled history needs matching times/values with at least 2 nodes".into(),
                ));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter(
                    "sampled history times must be strictly increasing".into(),
                ));
            }
            if times[0] > -tau || *times.last().unwrap() < 0.0 {
                return Err(Error::Domain(format!(
                    "sampled history [{}, {}] does not cover [-{tau}, 0]",
                    times[0],
                    times.last().unwrap()
                )));
            }
        }
        Ok(())
    }
}

/// Initial data: history of the delayed (insulin-like) component on
/// `[−τ, 0]` plus the glucose-like value at `t = 0`.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub history: History,
    pub g0: f64,
}

impl InitialData {
    /// Constant insulin-side history at `i_level`, glucose side at `g0`.
    pub fn constant(i_level: f64, g0: f64) -> Self {
        InitialData {
            history: History::Constant(i_level),
            g0,
        }
    }

    /// Both components seeded at the same value (the sweep convention).
    pub fn diagonal(v: f64) -> Self {
        Self::constant(v, v)
    }

    /// Exactly at a computed equilibrium.
    pub fn at_equilibrium(eq: &Equilibrium) -> Self {
        Self::constant(eq.i_star, eq.g_star)
    }
}

/// Which trajectory component to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Insulin-like (the delayed one); `x` in the reduced variants.
    Insulin,
    /// Glucose-like; `y` in the reduced variants.
    Glucose,
}

/// One adaptive-step decision, for the step log CSV.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    /// Time at the start of the attempted step.
    pub t: f64,
    pub dt: f64,
    /// Scaled error estimate (acceptance means `err ≤ 1`).
    pub err: f64,
    pub accepted: bool,
}

/// Integration output: accepted nodes plus bookkeeping.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub i_values: Vec<f64>,
    pub g_values: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub method: Method,
    /// Polynomial degree used for dense evaluation and history lookups.
    pub interpolation_order: usize,
    /// Lookups that had to fall back to a shorter-than-requested stencil.
    pub reduced_order_lookups: usize,
    pub step_log: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::Insulin => &self.i_values,
            Component::Glucose => &self.g_values,
        }
    }

    /// Interpolated value at any time inside the node span: barycentric over
    /// a centered stencil of `interpolation_order + 1` nodes. Exact at node
    /// times.
    pub fn dense_eval(&self, t: f64, c: Component) -> Result<f64> {
        let n = self.times.len();
        if n == 0 {
            return Err(Error::Interpolation("empty trajectory".into()));
        }
        if t < self.times[0] - 1e-12 || t > self.times[n - 1] + 1e-12 {
            return Err(Error::Interpolation(format!(
                "query t = {t} outside the node span [{}, {}]",
                self.times[0],
                self.times[n - 1]
            )));
        }
        let (lo, hi) = stencil_bounds(&self.times, t, self.interpolation_order + 1);
        barycentric_interpolate(&self.times[lo..hi], &self.component(c)[lo..hi], t)
    }
}

/// Options for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub method: Method,
    /// Step size; required by the fixed-step methods, ignored by adaptive.
    pub dt: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    /// Floor for the adaptive step; failing to meet tolerance above it is a
    /// step-underflow error.
    pub dt_min: f64,
    pub dt_max: f64,
    /// First attempted adaptive step.
    pub dt_init: f64,
    /// Stencil polynomial degree for history lookups and dense evaluation.
    pub interpolation_order: usize,
    pub t_end: f64,
}

impl IntegratorOptions {
    /// Adaptive integration to `t_end` with the battery-default tolerances.
    pub fn adaptive(t_end: f64) -> Self {
        IntegratorOptions {
            method: Method::Rkf45Adaptive,
            dt: None,
            rtol: 1e-8,
            atol: 1e-9,
            dt_min: 1e-6,
            dt_max: f64::INFINITY,
            dt_init: 0.01,
            interpolation_order: 4,
            t_end,
        }
    }

    /// Fixed-step integration (RK4 or Euler) to `t_end`.
    pub fn fixed(method: Method, dt: f64, t_end: f64) -> Self {
        IntegratorOptions {
            method,
            dt: Some(dt),
            ..Self::adaptive(t_end)
        }
    }

    fn validate(&self, tau: f64) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "integration horizon must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::InvalidParameter(
                "need 0 < dt_min <= dt_max".into(),
            ));
        }
        if self.interpolation_order == 0 {
            return Err(Error::InvalidParameter(
                "interpolation order must be at least 1".into(),
            ));
        }
        match self.method {
            Method::Rkf45Adaptive => {}
            Method::Rk4Fixed | Method::EulerFixed => {
                let dt = self.dt.ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "method {} needs an explicit dt",
                        self.method
                    ))
                })?;
                if !(dt > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "fixed step must be positive, got {dt}"
                    )));
                }
                // a fixed step above τ/4 would need history from inside the
                // current step; refuse rather than silently shrink
                if dt > tau / 4.0 {
                    return Err(Error::InvalidParameter(format!(
                        "fixed step {dt} exceeds tau/4 = {}",
                        tau / 4.0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Value of the polynomial through `(times[k], values[k])` at `t`, by the
/// barycentric second-form formula. Exact at nodes.
pub fn barycentric_interpolate(times: &[f64], values: &[f64], t: f64) -> Result<f64> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::Interpolation(
            "barycentric stencil needs matching, non-empty nodes".into(),
        ));
    }
    // weights w_i = 1 / prod_{j != i} (t_i - t_j)
    let n = times.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut p = 1.0;
        for j in 0..n {
            if j != i {
                let d = times[i] - times[j];
                if d == 0.0 {
                    return Err(Error::Interpolation(format!(
                        "duplicate node time {}",
                        times[i]
                    )));
                }
                p *= d;
            }
        }
        let d = t - times[i];
        if d == 0.0 {
            return Ok(values[i]);
        }
        let q = 1.0 / (p * d);
        num += q * values[i];
        den += q;
    }
    Ok(num / den)
}

/// Pick a centered window of up to `size` node indices around `t`.
fn stencil_bounds(times: &[f64], t: f64, size: usize) -> (usize, usize) {
    let n = times.len();
    let j = times.partition_point(|x| *x < t);
    let lo = j
        .saturating_sub((size - 1) / 2)
        .min(n.saturating_sub(size));
    let hi = (lo + size).min(n);
    (lo, hi)
}

/// Delayed-component value at `t`: the initial function for `t ≤ 0`, else
/// interpolation of the stored insulin-side history.
pub fn history_lookup(traj: &Trajectory, init: &InitialData, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(init.history.eval(t));
    }
    let (lo, hi) = stencil_bounds(&traj.times, t, traj.interpolation_order + 1);
    barycentric_interpolate(&traj.times[lo..hi], &traj.i_values[lo..hi], t)
}

/// Fehlberg 4(5) tableau.
const FC: [f64; 6] = [0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5];
const FA: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];
const B4: [f64; 6] = [
    25.0 / 216.0,
    0.0,
    1408.0 / 2565.0,
    2197.0 / 4104.0,
    -0.2,
    0.0,
];

/// Shared mutable state of one integration run.
struct Run<'a> {
    cfg: &'a ModelConfig,
    init: &'a InitialData,
    order: usize,
    times: Vec<f64>,
    i_values: Vec<f64>,
    g_values: Vec<f64>,
    reduced_order_lookups: usize,
}

impl Run<'_> {
    /// Delayed insulin-side value during integration; counts stencil
    /// shortfalls.
    fn lookup(&mut self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(self.init.history.eval(t));
        }
        let size = self.order + 1;
        let (lo, hi) = stencil_bounds(&self.times, t, size);
        if hi - lo < size {
            self.reduced_order_lookups += 1;
        }
        barycentric_interpolate(&self.times[lo..hi], &self.i_values[lo..hi], t)
    }

    fn rhs(&mut self, t_delayed: f64, x: f64, y: f64) -> Result<(f64, f64)> {
        let xd = self.lookup(t_delayed)?;
        self.cfg.rhs(x, y, xd)
    }

    fn push(&mut self, t: f64, x: f64, y: f64) -> Result<()> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        self.times.push(t);
        self.i_values.push(x);
        self.g_values.push(y);
        Ok(())
    }
}

/// Advance the selected scheme from `t = 0` to `t_end`.
pub fn integrate(
    cfg: &ModelConfig,
    init: &InitialData,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    opts.validate(cfg.tau)?;
    init.history.validate(cfg.tau)?;
    let tau = cfg.tau;
    let x0 = init.history.eval(0.0);
    let y0 = init.g0;
    if !(x0.is_finite() && y0.is_finite()) {
        return Err(Error::InvalidParameter(
            "initial data must be finite".into(),
        ));
    }
    let mut run = Run {
        cfg,
        init,
        order: opts.interpolation_order,
        times: Vec::new(),
        i_values: Vec::new(),
        g_values: Vec::new(),
        reduced_order_lookups: 0,
    };
    run.push(0.0, x0, y0)?;
    let mut step_log: Vec<StepRecord> = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let (mut t, mut x, mut y) = (0.0f64, x0, y0);
    let h_cap = tau / 4.0;
    let mut h = match opts.method {
        Method::Rkf45Adaptive => opts.dt_init.min(h_cap).min(opts.dt_max),
        _ => opts.dt.expect("validated"),
    };

    while t < opts.t_end - 1e-12 {
        match opts.method {
            Method::EulerFixed => {
                let h_now = h.min(opts.t_end - t);
                let (dx, dy) = run.rhs(t - tau, x, y)?;
                x += h_now * dx;
                y += h_now * dy;
                t += h_now;
                run.push(t, x, y)?;
                accepted += 1;
            }
            Method::Rk4Fixed => {
                let h_now = h.min(opts.t_end - t);
                let mut k = [(0.0, 0.0); 4];
                for (i, c) in [0.0, 0.5, 0.5, 1.0].iter().enumerate() {
                    let (xi, yi) = match i {
                        0 => (x, y),
                        1 => (x + 0.5 * h_now * k[0].0, y + 0.5 * h_now * k[0].1),
                        2 => (x + 0.5 * h_now * k[1].0, y + 0.5 * h_now * k[1].1),
                        _ => (x + h_now * k[2].0, y + h_now * k[2].1),
                    };
                    k[i] = run.rhs(t + c * h_now - tau, xi, yi)?;
                }
                x += h_now / 6.0 * (k[0].0 + 2.0 * k[1].0 + 2.0 * k[2].0 + k[3].0);
                y += h_now / 6.0 * (k[0].1 + 2.0 * k[1].1 + 2.0 * k[2].1 + k[3].1);
                t += h_now;
                run.push(t, x, y)?;
                accepted += 1;
            }
            Method::Rkf45Adaptive => {
                let h_now = h.min(h_cap).min(opts.dt_max).min(opts.t_end - t);
                if h_now < opts.dt_min {
                    return Err(Error::StepUnderflow {
                        t,
                        dt: h_now,
                        dt_min: opts.dt_min,
                    });
                }
                let mut ks = [(0.0, 0.0); 6];
                for i in 0..6 {
                    let mut xi = x;
                    let mut yi = y;
                    for j in 0..i {
                        xi += h_now * FA[i][j] * ks[j].0;
                        yi += h_now * FA[i][j] * ks[j].1;
                    }
                    ks[i] = run.rhs(t + FC[i] * h_now - tau, xi, yi)?;
                }
                let mut x5 = x;
                let mut y5 = y;
                let mut x4 = x;
                let mut y4 = y;
                for i in 0..6 {
                    x5 += h_now * B5[i] * ks[i].0;
                    y5 += h_now * B5[i] * ks[i].1;
                    x4 += h_now * B4[i] * ks[i].0;
                    y4 += h_now * B4[i] * ks[i].1;
                }
                let ex = (x5 - x4).abs() / (opts.atol + opts.rtol * x.abs().max(x5.abs()));
                let ey = (y5 - y4).abs() / (opts.atol + opts.rtol * y.abs().max(y5.abs()));
                let err = ex.max(ey);
                let ok = err.is_finite() && err <= 1.0;
                step_log.push(StepRecord {
                    t,
                    dt: h_now,
                    err,
                    accepted: ok,
                });
                if ok {
                    t += h_now;
                    x = x5;
                    y = y5;
                    run.push(t, x, y)?;
                    accepted += 1;
                } else {
                    rejected += 1;
                }
                let fac = if err.is_finite() {
                    0.9 * (err + 1e-16).powf(-0.2)
                } else {
                    0.2
                };
                h = h_now * fac.clamp(0.2, 5.0);
            }
        }
    }
    Ok(Trajectory {
        times: run.times,
        i_values: run.i_values,
        g_values: run.g_values,
        accepted_steps: accepted,
        rejected_steps: rejected,
        method: opts.method,
        interpolation_order: opts.interpolation_order,
        reduced_order_lookups: run.reduced_order_lookups,
        step_log,
    })
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergencePoint {
    pub dt: f64,
    pub err_i: f64,
    pub err_g: f64,
}

/// Self-convergence study result: per-step L1 errors against a reference
/// run, plus least-squares fitted orders.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub method: Method,
    pub points: Vec<ConvergencePoint>,
    pub order_i: f64,
    pub order_g: f64,
}

/// Measure self-convergence of a fixed-step method: integrate at each `dt`,
/// compare against an RK4 reference at `dts.last()/2` on a common grid with
/// spacing `dts[0]` (so nested halvings sample exact nodes), and fit the
/// error order by least squares in log-log.
pub fn self_convergence(
    cfg: &ModelConfig,
    init: &InitialData,
    dts: &[f64],
    method: Method,
    t_end: f64,
) -> Result<ConvergenceStudy> {
    if method == Method::Rkf45Adaptive {
        return Err(Error::InvalidParameter(
            "self-convergence is defined for fixed-step methods".into(),
        ));
    }
    if dts.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "need at least 4 step sizes, got {}",
            dts.len()
        )));
    }
    if dts.windows(2).any(|w| w[1] >= w[0]) || dts.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter(
            "step sizes must be positive and strictly decreasing".into(),
        ));
    }
    let reference = integrate(
        cfg,
        init,
        &IntegratorOptions::fixed(Method::Rk4Fixed, dts[dts.len() - 1] / 2.0, t_end),
    )?;
    let grid_step = dts[0];
    let n_grid = (t_end / grid_step).round() as usize;
    let grid: Vec<f64> = (0..=n_grid).map(|k| k as f64 * grid_step).collect();
    let ref_i: Vec<f64> = grid
        .iter()
        .map(|t| reference.dense_eval(*t, Component::Insulin))
        .collect::<Result<_>>()?;
    let ref_g: Vec<f64> = grid
        .iter()
        .map(|t| reference.dense_eval(*t, Component::Glucose))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(dts.len());
    for dt in dts {
        let sol = integrate(cfg, init, &IntegratorOptions::fixed(method, *dt, t_end))?;
        let mut e_i = 0.0;
        let mut e_g = 0.0;
        for (k, tq) in grid.iter().enumerate() {
            e_i += (sol.dense_eval(*tq, Component::Insulin)? - ref_i[k]).abs();
            e_g += (sol.dense_eval(*tq, Component::Glucose)? - ref_g[k]).abs();
        }
        points.push(ConvergencePoint {
            dt: *dt,
            err_i: e_i / grid.len() as f64,
            err_g: e_g / grid.len() as f64,
        });
    }
    let order_i = fit_loglog_slope(&points, |p| p.err_i);
    let order_g = fit_loglog_slope(&points, |p| p.err_g);
    Ok(ConvergenceStudy {
        method,
        points,
        order_i,
        order_g,
    })
}

fn fit_loglog_slope(points: &[ConvergencePoint], pick: impl Fn(&ConvergencePoint) -> f64) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.dt.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| pick(p).max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
