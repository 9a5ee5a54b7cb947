//! Catalogue of scalar nonlinearities used by the model.
//!
//! The glucose-insulin system is built from four monotone scalar functions:
//! insulin production `f1`, insulin-independent glucose uptake `f2`,
//! insulin-dependent uptake factor `f4`, and delayed glucose production `f5`.
//! This module provides the concrete families those roles are drawn from,
//! exact derivatives, declared limits, and a sampling-based validator for the
//! structural hypotheses (H1)-(H5) that the rest of the toolkit relies on.
//!
//! Families:
//! - saturating arctan (`eps * (a + b*atan(u))`) — the standard choice for `f4`;
//! - two odd, strictly decreasing feedback shapes used by the reduced model
//!   variants: a knee shape that is linear up to `pi/2` then saturates through
//!   an arctan tail, and a polynomial-core shape `-b*x^(2n+1)` on `[-1, 1]`
//!   with the same kind of tail;
//! - affine and constant maps for the linear reduced variants;
//! - increasing/decreasing Hill-type saturation for the full model's
//!   physiological-shaped slots (constants are user-supplied, not calibrated);
//! - a shift/recenter wrapper used when translating the full system so its
//!   equilibrium sits at the origin.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

/// Declared monotonicity class of a catalogue entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
    Constant,
}

/// Concrete parameterized family behind a [`FunctionSpec`].
#[derive(Debug, Clone)]
pub enum Family {
    /// `u ↦ eps * (a + b*atan(u))` on all of ℝ; strictly increasing, bounded,
    /// and strictly positive when `a > (pi/2) * b`.
    ArctanSaturating { a: f64, b: f64, eps: f64 },
    /// Odd decreasing knee shape: `-x` on `[0, pi/2]`,
    /// `-pi/2 - a*atan(k*(x - pi/2))` for `x > pi/2`, odd reflection for `x < 0`.
    OddKneeArctan { a: f64, k: f64 },
    /// Odd decreasing polynomial-core shape: `-b*x^(2n+1)` on `[0, 1]`,
    /// `-b - a*atan(k*(x - 1))` for `x > 1`, odd reflection for `x < 0`.
    OddPolyArctan { a: f64, b: f64, k: f64, n: u32 },
    /// `u ↦ slope * u` on ℝ.
    Affine { slope: f64 },
    /// `u ↦ value` on ℝ.
    Constant { value: f64 },
    /// `u ↦ c0 + p * u^h / (q + u^h)` on `[0, ∞)`; increasing for `p > 0`.
    HillIncreasing { p: f64, h: f64, q: f64, c0: f64 },
    /// `u ↦ c0 + p * q / (q + u^h)` on `[0, ∞)`; decreasing for `p > 0`.
    HillDecreasing { p: f64, h: f64, q: f64, c0: f64 },
    /// `x ↦ inner(center + x) - (recenter ? inner(center) : 0)`: translation
    /// of another entry, optionally recentered to vanish at `x = 0`.
    Shifted {
        inner: Arc<FunctionSpec>,
        center: f64,
        recenter: bool,
    },
}

/// One scalar nonlinearity: family, declared monotonicity, and declared
/// boundary values. The limits are derived at construction and kept on the
/// spec so downstream code (map limits, persistence bounds) can use them
/// without re-deriving family internals.
#[derive(Debug, Clone)]
pub struct FunctionSpec {
    pub family: Family,
    pub monotone: Monotone,
    /// Value at the left end of the domain (`u = 0` for one-sided families,
    /// the value at the origin for two-sided ones).
    pub limit_at_zero: f64,
    /// Limit as `u → +∞` (±∞ for unbounded families).
    pub limit_at_infinity: f64,
}

/// Derivative value together with a smoothness flag. At a junction of a
/// piecewise family the value is the one-sided derivative taken from the
/// branch closer to the origin and `smooth` is `false`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub smooth: bool,
}

/// Absolute half-width within which an argument counts as sitting exactly on
/// a branch junction.
const JUNCTION_EPS: f64 = 1e-13;

impl FunctionSpec {
    /// Saturating arctan factor `eps*(a + b*atan(u))`.
    ///
    /// Requires `a > (pi/2)*b`, `b > 0`, `eps > 0` so the function stays
    /// strictly positive on all of ℝ (its infimum is `eps*(a - pi/2*b)`).
    pub fn make_f4_arctan(a: f64, b: f64, eps: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "saturating arctan needs b > 0, got b = {b}"
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "saturating arctan needs eps > 0, got eps = {eps}"
            )));
        }
        if !(a > FRAC_PI_2 * b) {
            return Err(Error::InvalidParameter(format!(
                "saturating arctan needs a > (pi/2)*b to stay positive, got a = {a}, b = {b}"
            )));
        }
        Ok(FunctionSpec {
            family: Family::ArctanSaturating { a, b, eps },
            monotone: Monotone::Increasing,
            limit_at_zero: eps * a,
            limit_at_infinity: eps * (a + FRAC_PI_2 * b),
        })
    }

    /// Odd decreasing knee shape, linear with slope -1 out to `pi/2`, then an
    /// arctan tail of extra depth `a*pi/2`. Requires `a > 0`, `k > 1`.
    pub fn make_fa(a: f64, k: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "knee shape needs a > 0, got a = {a}"
            )));
        }
        if !(k > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "knee shape needs k > 1, got k = {k}"
            )));
        }
        Ok(FunctionSpec {
            family: Family::OddKneeArctan { a, k },
            monotone: Monotone::Decreasing,
            limit_at_zero: 0.0,
            limit_at_infinity: -FRAC_PI_2 - a * FRAC_PI_2,
        })
    }

    /// Odd decreasing polynomial-core shape `-b*x^(2n+1)` on `[-1, 1]` with an
    /// arctan tail. Requires `a > 0`, `b > 0`, `k > 1`, any `n ≥ 0`.
    /// For `n ≥ 1` the slope at the origin is zero, which is what makes the
    /// origin locally attracting in the reduced model built on this shape.
    pub fn make_fb(a: f64, b: f64, k: f64, n: u32) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "polynomial-core shape needs a > 0 and b > 0, got a = {a}, b = {b}"
            )));
        }
        if !(k > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "polynomial-core shape needs k > 1, got k = {k}"
            )));
        }
        Ok(FunctionSpec {
            family: Family::OddPolyArctan { a, b, k, n },
            monotone: Monotone::Decreasing,
            limit_at_zero: 0.0,
            limit_at_infinity: -b - a * FRAC_PI_2,
        })
    }

    /// `u ↦ slope * u`.
    pub fn affine(slope: f64) -> Self {
        let monotone = if slope > 0.0 {
            Monotone::Increasing
        } else if slope < 0.0 {
            Monotone::Decreasing
        } else {
            Monotone::Constant
        };
        FunctionSpec {
            family: Family::Affine { slope },
            monotone,
            limit_at_zero: 0.0,
            limit_at_infinity: slope * f64::INFINITY,
        }
    }

    /// `u ↦ value`.
    pub fn constant(value: f64) -> Self {
        FunctionSpec {
            family: Family::Constant { value },
            monotone: Monotone::Constant,
            limit_at_zero: value,
            limit_at_infinity: value,
        }
    }

    /// Increasing Hill-type saturation `c0 + p*u^h/(q + u^h)` on `[0, ∞)`.
    /// Requires `p > 0`, `h > 0`, `q > 0`, `c0 ≥ 0`.
    pub fn hill_increasing(p: f64, h: f64, q: f64, c0: f64) -> Result<Self> {
        if !(p > 0.0 && h > 0.0 && q > 0.0 && c0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "increasing saturation needs p, h, q > 0 and c0 >= 0, got p = {p}, h = {h}, q = {q}, c0 = {c0}"
            )));
        }
        Ok(FunctionSpec {
            family: Family::HillIncreasing { p, h, q, c0 },
            monotone: Monotone::Increasing,
            limit_at_zero: c0,
            limit_at_infinity: c0 + p,
        })
    }

    /// Decreasing Hill-type saturation `c0 + p*q/(q + u^h)` on `[0, ∞)`.
    /// Requires `p > 0`, `h > 0`, `q > 0`, `c0 ≥ 0`.
    pub fn hill_decreasing(p: f64, h: f64, q: f64, c0: f64) -> Result<Self> {
        if !(p > 0.0 && h > 0.0 && q > 0.0 && c0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decreasing saturation needs p, h, q > 0 and c0 >= 0, got p = {p}, h = {h}, q = {q}, c0 = {c0}"
            )));
        }
        Ok(FunctionSpec {
            family: Family::HillDecreasing { p, h, q, c0 },
            monotone: Monotone::Decreasing,
            limit_at_zero: c0 + p,
            limit_at_infinity: c0,
        })
    }

    /// Translation wrapper `x ↦ inner(center + x) - (recenter ? inner(center) : 0)`.
    /// The declared limits are shifted accordingly; the domain becomes
    /// `[-center, ∞)` when the inner family is one-sided.
    pub fn shifted(inner: FunctionSpec, center: f64, recenter: bool) -> Result<Self> {
        let offset = if recenter { inner.eval(center)? } else { 0.0 };
        let limit_at_zero = inner.eval(center)? - offset;
        let limit_at_infinity = inner.limit_at_infinity - offset;
        let monotone = inner.monotone;
        Ok(FunctionSpec {
            family: Family::Shifted {
                inner: Arc::new(inner),
                center,
                recenter,
            },
            monotone,
            limit_at_zero,
            limit_at_infinity,
        })
    }

    /// True if the family is only defined for nonnegative arguments.
    pub fn one_sided(&self) -> bool {
        match &self.family {
            Family::HillIncreasing { .. } | Family::HillDecreasing { .. } => true,
            Family::Shifted { .. } => false, // domain shifted to [-center, ∞), checked in eval
            _ => false,
        }
    }

    /// Evaluate the function. Domain violations (negative argument for a
    /// one-sided family, or below `-center` for a shifted one-sided family)
    /// are reported as errors rather than extrapolated.
    pub fn eval(&self, u: f64) -> Result<f64> {
        match &self.family {
            Family::ArctanSaturating { a, b, eps } => Ok(eps * (a + b * u.atan())),
            Family::OddKneeArctan { a, k } => {
                let ax = u.abs();
                let v = if ax <= FRAC_PI_2 {
                    -ax
                } else {
                    -FRAC_PI_2 - a * (k * (ax - FRAC_PI_2)).atan()
                };
                Ok(if u >= 0.0 { v } else { -v })
            }
            Family::OddPolyArctan { a, b, k, n } => {
                let ax = u.abs();
                let v = if ax <= 1.0 {
                    -b * ax.powi(2 * *n as i32 + 1)
                } else {
                    -b - a * (k * (ax - 1.0)).atan()
                };
                Ok(if u >= 0.0 { v } else { -v })
            }
            Family::Affine { slope } => Ok(slope * u),
            Family::Constant { value } => Ok(*value),
            Family::HillIncreasing { p, h, q, c0 } => {
                let uh = hill_power(u, *h)?;
                Ok(c0 + p * uh / (q + uh))
            }
            Family::HillDecreasing { p, h, q, c0 } => {
                let uh = hill_power(u, *h)?;
                Ok(c0 + p * q / (q + uh))
            }
            Family::Shifted {
                inner,
                center,
                recenter,
            } => {
                let base = inner.eval(center + u)?;
                if *recenter {
                    Ok(base - inner.eval(*center)?)
                } else {
                    Ok(base)
                }
            }
        }
    }

    /// Analytic derivative of the active branch. Exactly at a junction the
    /// value is the derivative of the branch nearer the origin and the result
    /// is flagged non-smooth.
    pub fn eval_derivative(&self, u: f64) -> Result<Derivative> {
        match &self.family {
            Family::ArctanSaturating { b, eps, .. } => Ok(Derivative {
                value: eps * b / (1.0 + u * u),
                smooth: true,
            }),
            Family::OddKneeArctan { a, k } => {
                let ax = u.abs();
                // Derivative of an odd function is even; work with |u|.
                let at_junction = (ax - FRAC_PI_2).abs() <= JUNCTION_EPS;
                let value = if ax <= FRAC_PI_2 + JUNCTION_EPS && (ax <= FRAC_PI_2 || at_junction) {
                    -1.0
                } else {
                    let d = ax - FRAC_PI_2;
                    -a * k / (1.0 + (k * d) * (k * d))
                };
                Ok(Derivative {
                    value,
                    smooth: !at_junction,
                })
            }
            Family::OddPolyArctan { a, b, k, n } => {
                let ax = u.abs();
                let at_junction = (ax - 1.0).abs() <= JUNCTION_EPS;
                let m = 2 * *n as i32 + 1;
                let value = if ax <= 1.0 + JUNCTION_EPS && (ax <= 1.0 || at_junction) {
                    -b * m as f64 * ax.powi(m - 1)
                } else {
                    let d = ax - 1.0;
                    -a * k / (1.0 + (k * d) * (k * d))
                };
                Ok(Derivative {
                    value,
                    smooth: !at_junction,
                })
            }
            Family::Affine { slope } => Ok(Derivative {
                value: *slope,
                smooth: true,
            }),
            Family::Constant { .. } => Ok(Derivative {
                value: 0.0,
                smooth: true,
            }),
            Family::HillIncreasing { p, h, q, .. } => {
                let (uh, duh) = hill_power_with_derivative(u, *h)?;
                let den = q + uh;
                Ok(Derivative {
                    value: p * q * duh / (den * den),
                    smooth: true,
                })
            }
            Family::HillDecreasing { p, h, q, .. } => {
                let (uh, duh) = hill_power_with_derivative(u, *h)?;
                let den = q + uh;
                Ok(Derivative {
                    value: -p * q * duh / (den * den),
                    smooth: true,
                })
            }
            Family::Shifted { inner, center, .. } => inner.eval_derivative(center + u),
        }
    }
}

fn hill_power(u: f64, h: f64) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::Domain(format!(
            "saturation family is defined for u >= 0, got u = {u}"
        )));
    }
    Ok(u.powf(h))
}

fn hill_power_with_derivative(u: f64, h: f64) -> Result<(f64, f64)> {
    if u < 0.0 {
        return Err(Error::Domain(format!(
            "saturation family is defined for u >= 0, got u = {u}"
        )));
    }
    let uh = u.powf(h);
    let duh = if u == 0.0 {
        // h > 1 gives 0, h == 1 gives 1, h < 1 diverges; report the limit.
        if h > 1.0 {
            0.0
        } else if h == 1.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        h * u.powf(h - 1.0)
    };
    Ok((uh, duh))
}

/// Identifier of one structural hypothesis on the quadruple (f1, f2, f4, f5).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// All four functions are nonnegative with finite derivatives on the grid.
    H1,
    /// f1 strictly positive and increasing, f1(0) > 0, finite positive limit.
    H2,
    /// f2 positive for u > 0 and increasing, f2(0) = 0, finite positive limit.
    H3,
    /// f4 strictly positive and increasing, f4(0) > 0, finite positive limit.
    H4,
    /// f5 strictly positive and decreasing, f5(0) > 0, limit 0 at infinity.
    H5,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H5 => "H5",
        };
        f.write_str(s)
    }
}

/// Outcome of checking one hypothesis; `witness` is the first offending
/// sample point together with what went wrong there.
#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub id: Hypothesis,
    pub pass: bool,
    pub witness: Option<(f64, String)>,
}

/// Result of [`validate_hypotheses`].
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub all_pass: bool,
}

/// Number of probe points in the logarithmic sampling grid.
pub const PROBE_GRID_POINTS: usize = 200;
/// Probe grid endpoints.
pub const PROBE_GRID_RANGE: (f64, f64) = (1e-6, 1e6);
/// Relative tolerance for "sampled value has reached its declared limit"
/// at the far end of the probe grid.
const LIMIT_TOL: f64 = 1e-3;

/// Logarithmic probe grid on `[1e-6, 1e6]` with 200 points, plus the origin.
fn probe_grid() -> Vec<f64> {
    let (lo, hi) = PROBE_GRID_RANGE;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut g = Vec::with_capacity(PROBE_GRID_POINTS + 1);
    g.push(0.0);
    for i in 0..PROBE_GRID_POINTS {
        let t = i as f64 / (PROBE_GRID_POINTS - 1) as f64;
        g.push((llo + t * (lhi - llo)).exp());
    }
    g
}

/// Check the structural hypotheses on the quadruple (f1, f2, f4, f5) by
/// sampling values and derivatives on a logarithmic grid. Failures are data
/// (reported with a witness point), not errors.
pub fn validate_hypotheses(
    f1: &FunctionSpec,
    f2: &FunctionSpec,
    f4: &FunctionSpec,
    f5: &FunctionSpec,
) -> HypothesisReport {
    let grid = probe_grid();
    let mut checks = Vec::with_capacity(5);

    // H1: nonnegative values, finite derivatives, for all four functions.
    let mut h1_witness = None;
    'h1: for (name, f) in [("f1", f1), ("f2", f2), ("f4", f4), ("f5", f5)] {
        for &u in &grid {
            match f.eval(u) {
                Ok(v) if v >= -1e-12 && v.is_finite() => {}
                Ok(v) => {
                    h1_witness = Some((u, format!("{name}({u:.3e}) = {v:.3e} is negative")));
                    break 'h1;
                }
                Err(e) => {
                    h1_witness = Some((u, format!("{name} not evaluable at {u:.3e}: {e}")));
                    break 'h1;
                }
            }
            match f.eval_derivative(u) {
                Ok(d) if d.value.is_finite() => {}
                _ => {
                    h1_witness = Some((u, format!("{name}' not finite at {u:.3e}")));
                    break 'h1;
                }
            }
        }
    }
    checks.push(HypothesisCheck {
        id: Hypothesis::H1,
        pass: h1_witness.is_none(),
        witness: h1_witness,
    });

    // H2/H3/H4: positivity, monotone increase, prescribed value at zero,
    // finite positive limit at infinity.
    for (id, f, zero_positive) in [
        (Hypothesis::H2, f1, true),
        (Hypothesis::H3, f2, false),
        (Hypothesis::H4, f4, true),
    ] {
        let witness = check_increasing_component(f, &grid, zero_positive);
        checks.push(HypothesisCheck {
            id,
            pass: witness.is_none(),
            witness,
        });
    }

    // H5: positive, strictly decreasing, positive at zero, limit zero.
    let mut h5_witness = None;
    match f5.eval(0.0) {
        Ok(v0) if v0 > 0.0 => {}
        Ok(v0) => h5_witness = Some((0.0, format!("f5(0) = {v0:.3e} is not positive"))),
        Err(e) => h5_witness = Some((0.0, format!("f5 not evaluable at 0: {e}"))),
    }
    if h5_witness.is_none() {
        h5_witness = sample_violation(f5, &grid, |u, v, d| {
            if v <= 0.0 {
                Some(format!("f5({u:.3e}) = {v:.3e} is not positive"))
            } else if u > 0.0 && d >= 0.0 {
                Some(format!("f5'({u:.3e}) = {d:.3e} is not decreasing"))
            } else {
                None
            }
        });
    }
    if h5_witness.is_none() {
        let far = f5.eval(PROBE_GRID_RANGE.1).unwrap_or(f64::NAN);
        let scale = f5.eval(0.0).unwrap_or(1.0).abs().max(1e-300);
        if !(far.abs() <= LIMIT_TOL * scale) {
            h5_witness = Some((
                PROBE_GRID_RANGE.1,
                format!("f5 has not decayed to 0 at the far grid end (value {far:.3e})"),
            ));
        }
    }
    checks.push(HypothesisCheck {
        id: Hypothesis::H5,
        pass: h5_witness.is_none(),
        witness: h5_witness,
    });

    let all_pass = checks.iter().all(|c| c.pass);
    HypothesisReport { checks, all_pass }
}

/// Violation scan for the increasing hypotheses (H2/H3/H4): positivity for
/// u > 0, increasing derivative sign, correct value at 0, declared finite
/// positive limit approached at the far grid end.
fn check_increasing_component(
    f: &FunctionSpec,
    grid: &[f64],
    zero_positive: bool,
) -> Option<(f64, String)> {
    match f.eval(0.0) {
        Ok(v0) => {
            if zero_positive && !(v0 > 0.0) {
                return Some((0.0, format!("value at 0 is {v0:.3e}, expected > 0")));
            }
            if !zero_positive && !(v0.abs() <= 1e-12) {
                return Some((0.0, format!("value at 0 is {v0:.3e}, expected 0")));
            }
        }
        Err(e) => return Some((0.0, format!("not evaluable at 0: {e}"))),
    }
    if let Some(w) = sample_violation(f, grid, |u, v, d| {
        if u > 0.0 && !(v > 0.0) {
            Some(format!("value at {u:.3e} is {v:.3e}, expected > 0"))
        } else if u > 0.0 && d <= 0.0 {
            Some(format!("derivative at {u:.3e} is {d:.3e}, expected > 0"))
        } else {
            None
        }
    }) {
        return Some(w);
    }
    let lim = f.limit_at_infinity;
    if !(lim.is_finite() && lim > 0.0) {
        return Some((
            f64::INFINITY,
            format!("declared limit at infinity is {lim:.3e}, expected finite positive"),
        ));
    }
    let far = f.eval(PROBE_GRID_RANGE.1).unwrap_or(f64::NAN);
    if !((far - lim).abs() <= LIMIT_TOL * (1.0 + lim.abs())) {
        return Some((
            PROBE_GRID_RANGE.1,
            format!("value {far:.6e} has not approached declared limit {lim:.6e}"),
        ));
    }
    None
}

fn sample_violation(
    f: &FunctionSpec,
    grid: &[f64],
    mut test: impl FnMut(f64, f64, f64) -> Option<String>,
) -> Option<(f64, String)> {
    for &u in grid {
        let v = match f.eval(u) {
            Ok(v) => v,
            Err(e) => return Some((u, format!("not evaluable at {u:.3e}: {e}"))),
        };
        let d = match f.eval_derivative(u) {
            Ok(d) => d.value,
            Err(e) => return Some((u, format!("derivative not evaluable at {u:.3e}: {e}"))),
        };
        if let Some(msg) = test(u, v, d) {
            return Some((u, msg));
        }
    }
    None
}
