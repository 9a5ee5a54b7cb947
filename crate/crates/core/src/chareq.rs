//! Roots of the quasi-polynomial characteristic equation
//! `(λ + μ₁)(λ + μ₂) + b + a·e^(−τλ) = 0`.
//!
//! The linearized delay system is stable exactly when every root lies in the
//! open left half plane. The spectrum splits into horizontal bands: at most
//! one conjugate pair has imaginary part in `(0, π/τ)` (the *leading pair*,
//! which controls the onset of oscillation), and higher pairs sit in the
//! bands `[2kπ/τ, (2k+1)π/τ]`. This module finds all real roots on a
//! certified window, locates the leading pair by damped Newton iteration,
//! counts band roots by the argument principle, and evaluates the long-delay
//! (`ε = 1/τ → 0`) asymptotics of the leading pair.

use crate::error::{Error, Result};
use crate::model::LinearCoeffs;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Everything the eigenvalue pipeline computes for one set of coefficients.
#[derive(Debug, Clone)]
pub struct EigenReport {
    pub coeffs: LinearCoeffs,
    /// All real roots on the certified window, ascending.
    pub real_roots: Vec<f64>,
    /// Rightmost located root with imaginary part in `(0, π/τ)`; suppressed
    /// when a real root lies further right (the spectrum is then led by a
    /// real eigenvalue, not a pair).
    pub leading_pair: Option<Complex64>,
    /// Whether the located pair's imaginary part lies in `(0, π/τ)`.
    pub band_ok: bool,
    /// All located roots have negative real part.
    pub stable: bool,
    /// Long-delay limits `(α₀_limit, ν′(0))` of [`epsilon_asymptotics`].
    pub epsilon_limit: (f64, f64),
}

/// Left-hand side of the characteristic equation.
pub fn char_value(coeffs: &LinearCoeffs, lambda: Complex64) -> Complex64 {
    (lambda + coeffs.mu1) * (lambda + coeffs.mu2)
        + coeffs.b
        + coeffs.a * (-coeffs.tau * lambda).exp()
}

/// Derivative of [`char_value`] in `λ`.
fn char_derivative(coeffs: &LinearCoeffs, lambda: Complex64) -> Complex64 {
    2.0 * lambda + (coeffs.mu1 + coeffs.mu2)
        - coeffs.a * coeffs.tau * (-coeffs.tau * lambda).exp()
}

/// Real restriction `g(r)`; `+∞` (sign of `a`) when the exponential
/// overflows, which keeps sign scans well defined far to the left.
fn real_restriction(coeffs: &LinearCoeffs, r: f64) -> f64 {
    let quad = (r + coeffs.mu1) * (r + coeffs.mu2) + coeffs.b;
    let expo = coeffs.a * (-coeffs.tau * r).exp();
    let v = quad + expo;
    if v.is_nan() {
        // only possible from ∞ − ∞; the exponential grows faster
        if expo.is_infinite() {
            expo
        } else {
            quad
        }
    } else {
        v
    }
}

/// Window `[−Λ, Λ]` outside which the real restriction provably has no
/// zeros: to the right the quadratic dominates and every term is positive
/// past `max(μ₁, μ₂)`; to the left `a·e^(−τr) > (r+μ₁)(r+μ₂) + b` once
/// `(1/τ)·ln(1 + a/tol)` clears the quadratic's growth, which the
/// `10·max(μ₁+μ₂, 1)` margin guarantees.
pub fn default_real_window(coeffs: &LinearCoeffs, tol: f64) -> (f64, f64) {
    let lam = 10.0 * (coeffs.mu1 + coeffs.mu2).max(1.0)
        + (1.0 + coeffs.a / tol).ln() / coeffs.tau;
    (-lam, lam)
}

/// All real roots on `[lo, hi]`, found by a sign scan over `grid` panels and
/// bisection inside each bracket; ascending, deduplicated.
pub fn find_real_roots(coeffs: &LinearCoeffs, lo: f64, hi: f64, grid: usize) -> Result<Vec<f64>> {
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "real-root window must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if grid < 16 {
        return Err(Error::InvalidParameter(format!(
            "real-root scan needs at least 16 panels, got {grid}"
        )));
    }
    let g = |r: f64| real_restriction(coeffs, r);
    let mut roots = Vec::new();
    let mut prev_r = lo;
    let mut prev_v = g(lo);
    for k in 1..=grid {
        let r = lo + (hi - lo) * k as f64 / grid as f64;
        let v = g(r);
        if prev_v == 0.0 {
            roots.push(prev_r);
        } else if (prev_v < 0.0) != (v < 0.0) {
            let (mut a, mut b, mut fa) = (prev_r, r, prev_v);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = g(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if (fm < 0.0) == (fa < 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
                if b - a <= f64::EPSILON * m.abs().max(1.0) {
                    break;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_r = r;
        prev_v = v;
    }
    roots.dedup_by(|p, q| (*p - *q).abs() <= 1e-9 * (1.0 + p.abs()));
    Ok(roots)
}

/// Damped Newton iteration on `char_value` from one seed. Returns a root
/// with residual `|f| ≤ accept·(1 + |λ|²)`, or `None`.
fn newton_from(coeffs: &LinearCoeffs, seed: Complex64, accept: f64) -> Option<Complex64> {
    let mut lambda = seed;
    let mut f = char_value(coeffs, lambda);
    if !(f.re.is_finite() && f.im.is_finite()) {
        return None;
    }
    for _ in 0..100 {
        if f.norm_sqr().sqrt() <= accept * (1.0 + lambda.norm_sqr()) {
            return Some(lambda);
        }
        let fp = char_derivative(coeffs, lambda);
        if !(fp.re.is_finite() && fp.im.is_finite()) || fp.norm_sqr() == 0.0 {
            return None;
        }
        let mut step = f / fp;
        // halve the step until the residual actually drops
        let mut improved = false;
        for _ in 0..60 {
            let cand = lambda - step;
            let fc = char_value(coeffs, cand);
            if fc.re.is_finite() && fc.im.is_finite() && fc.norm_sqr() < f.norm_sqr() {
                lambda = cand;
                f = fc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved || !lambda.is_finite() || lambda.norm_sqr() > 1e12 {
            return None;
        }
    }
    if f.norm_sqr().sqrt() <= accept * (1.0 + lambda.norm_sqr()) {
        Some(lambda)
    } else {
        None
    }
}

/// Residual acceptance threshold: every published root satisfies
/// `|char_value(λ)| ≤ RESIDUAL_SCALE·(1 + |λ|²)`.
pub const RESIDUAL_SCALE: f64 = 1e-9;

/// Locate the root with imaginary part in the open band `(0, π/τ)` — the
/// pair that controls oscillation onset. Seeded from the long-delay limit
/// `(α₀_limit/τ, ≈π/τ)` and a coarse grid over the band; all converged
/// in-band roots are deduplicated and the rightmost is returned. `Ok(None)`
/// means no seed converged to an in-band root (reported, not an error).
pub fn leading_pair(coeffs: &LinearCoeffs) -> Result<Option<Complex64>> {
    let band_top = PI / coeffs.tau;
    let (alpha0, _) = epsilon_asymptotics(coeffs)?;
    let alpha_seed = if alpha0.is_finite() { alpha0 } else { 0.0 };
    let mut seeds = vec![
        Complex64::new(alpha_seed / coeffs.tau, 0.95 * band_top),
        Complex64::new(alpha_seed, 0.95 * band_top),
    ];
    let span = (coeffs.mu1 + coeffs.mu2 + coeffs.a + coeffs.b.abs() + 2.0)
        .min(200.0 / coeffs.tau);
    for i in 0..9 {
        let re = -span + 2.0 * span * i as f64 / 8.0;
        for frac in [0.3, 0.5, 0.7, 0.95] {
            seeds.push(Complex64::new(re, frac * band_top));
        }
    }
    let mut found: Vec<Complex64> = Vec::new();
    for seed in seeds {
        if let Some(root) = newton_from(coeffs, seed, RESIDUAL_SCALE) {
            // keep strictly inside the band; a conjugate or real hit is a
            // different object
            if root.im > 1e-12 * band_top && root.im < band_top * (1.0 - 1e-12) {
                let dup = found
                    .iter()
                    .any(|r| (r - root).norm() <= 1e-7 * (1.0 + root.norm()));
                if !dup {
                    found.push(root);
                }
            }
        }
    }
    Ok(found.into_iter().max_by(|p, q| p.re.total_cmp(&q.re)))
}

/// Long-delay asymptotics of the leading pair in the rescaled variable
/// `ν = τλ`: as `ε = 1/τ → 0` the pair tends to `α₀ ± iπ` with
/// `α₀ = ln[a/(μ₁μ₂ + b)]`, approaching from below at the printed rate
/// `ν′(0) = −π(μ₁+μ₂)/(μ₁+μ₂+b)` — so `τ·β₀ < π` for every finite delay.
/// A non-positive `μ₁μ₂ + b` has no oscillatory limit; `+∞` is returned.
pub fn epsilon_asymptotics(coeffs: &LinearCoeffs) -> Result<(f64, f64)> {
    if !(coeffs.a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delay-term amplitude must be positive, got a = {}",
            coeffs.a
        )));
    }
    let denom = coeffs.mu1 * coeffs.mu2 + coeffs.b;
    let alpha0 = if denom > 0.0 {
        (coeffs.a / denom).ln()
    } else {
        f64::INFINITY
    };
    let nu_prime0 = -PI * (coeffs.mu1 + coeffs.mu2) / (coeffs.mu1 + coeffs.mu2 + coeffs.b);
    Ok((alpha0, nu_prime0))
}

/// Smallest `r ≥ 0` past which the exponential term certainly dominates the
/// quadratic on the vertical line `Re λ = −r` up to height `β_top`:
/// `ln a + τr ≥ 2·ln(r + μ₁ + μ₂ + β_top + 1) + ln(1 + |b|) + ln 4`.
/// Grows like `(2/τ)·ln r`, so `τ·r` stays far below exponent overflow.
fn certified_left_edge(coeffs: &LinearCoeffs, beta_top: f64) -> f64 {
    let holds = |r: f64| {
        coeffs.a.ln() + coeffs.tau * r
            >= 2.0 * (r + coeffs.mu1 + coeffs.mu2 + beta_top + 1.0).ln()
                + (1.0 + coeffs.b.abs()).ln()
                + 4f64.ln()
    };
    let mut hi = 1.0;
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return hi; // unreachable for sane coefficients
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Number of roots in each horizontal band
/// `Im λ ∈ [2kπ/τ, (2k+1)π/τ]` for `k = 0..=k_max` (conjugates excluded),
/// by the argument principle on a rectangle. The real window is certified
/// analytically: right edge `μ₁+μ₂+2√(a+|b|+1)+1` (the quadratic dominates
/// beyond it), left edge from [`certified_left_edge`] (the exponential
/// dominates beyond it), so no root escapes the contour and the exponential
/// never overflows on it. Requires no real roots (check [`find_real_roots`]
/// first), since the `k = 0` contour runs along the real axis.
pub fn band_root_counts(coeffs: &LinearCoeffs, k_max: usize) -> Result<Vec<usize>> {
    if k_max > 3 {
        return Err(Error::InvalidParameter(format!(
            "band counts are certified for k <= 3 only, got {k_max}"
        )));
    }
    let right = coeffs.mu1 + coeffs.mu2 + 2.0 * (coeffs.a + coeffs.b.abs() + 1.0).sqrt() + 1.0;
    let mut counts = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let beta_lo = 2.0 * k as f64 * PI / coeffs.tau;
        let beta_hi = (2.0 * k as f64 + 1.0) * PI / coeffs.tau;
        let left = -certified_left_edge(coeffs, beta_hi);
        let corners = [
            Complex64::new(left, beta_lo),
            Complex64::new(right, beta_lo),
            Complex64::new(right, beta_hi),
            Complex64::new(left, beta_hi),
        ];
        let mut total = 0.0;
        for e in 0..4 {
            total += edge_phase_change(coeffs, corners[e], corners[(e + 1) % 4])?;
        }
        let winding = total / (2.0 * PI);
        let n = winding.round();
        if (winding - n).abs() > 0.01 || n < 0.0 {
            return Err(Error::NoConvergence(format!(
                "band {k} winding number {winding:.6} did not settle on an integer"
            )));
        }
        counts.push(n as usize);
    }
    Ok(counts)
}

/// Phase change of `char_value` along one straight contour edge, by
/// successive principal-value argument differences. Sampling is doubled
/// until every increment is below 1 radian (phase cannot silently wrap).
fn edge_phase_change(coeffs: &LinearCoeffs, from: Complex64, to: Complex64) -> Result<f64> {
    let mut n = 64usize;
    loop {
        let mut total = 0.0;
        let mut prev = char_value(coeffs, from);
        let mut max_step = 0.0f64;
        let mut degenerate = false;
        for i in 1..=n {
            let z = from + (to - from) * (i as f64 / n as f64);
            let v = char_value(coeffs, z);
            if v.norm_sqr() == 0.0 || !v.re.is_finite() || !v.im.is_finite() {
                degenerate = true;
                break;
            }
            let d = (v / prev).arg();
            max_step = max_step.max(d.abs());
            total += d;
            prev = v;
        }
        if !degenerate && max_step < 1.0 {
            return Ok(total);
        }
        n *= 2;
        if n > (1 << 22) {
            return Err(Error::NoConvergence(
                "contour phase tracking kept wrapping; a root may sit on the contour".into(),
            ));
        }
    }
}

/// Assemble the full report: real roots on the certified window, leading
/// pair (suppressed if a real root lies further right), band membership,
/// stability of everything located, and the long-delay limits.
pub fn eigen_report(coeffs: &LinearCoeffs) -> Result<EigenReport> {
    let (lo, hi) = default_real_window(coeffs, 1e-12);
    let real_roots = find_real_roots(coeffs, lo, hi, 4096)?;
    let strip_root = leading_pair(coeffs)?;
    let rightmost_real = real_roots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let leading = match strip_root {
        Some(root) if root.re >= rightmost_real => Some(root),
        _ => None,
    };
    let band_top = PI / coeffs.tau;
    let band_ok = leading.map_or(false, |r| r.im > 0.0 && r.im < band_top);
    let located_negative = real_roots.iter().all(|r| *r < 0.0)
        && strip_root.map_or(true, |r| r.re < 0.0);
    let epsilon_limit = epsilon_asymptotics(coeffs)?;
    Ok(EigenReport {
        coeffs: coeffs.clone(),
        real_roots,
        leading_pair: leading,
        band_ok,
        stable: located_negative,
        epsilon_limit,
    })
}
