//! The limiting interval map and everything built on it.
//!
//! When the delay dominates all other time scales, the glucose-side dynamics
//! reduce to the one-dimensional map `Φ = F⁻¹∘H`, where `F` is the
//! steady-state outflow and `H` the steady-state inflow at a given glucose
//! level (insulin eliminated through its own quasi-steady state). `Φ` is
//! strictly decreasing, so its orbits can only converge to the fixed point or
//! to a 2-cycle; this module computes the map, the nested squeezing intervals
//! `L₁ ⊇ L₂ ⊇ …`, all 2-cycles with stability tags, a four-way regime
//! classification, long-run persistence bounds for the underlying delay
//! system, and the scalar difference-equation diagnostic with its
//! periodicity criterion.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant, EQUILIBRIUM_TOL};

/// Stability tag of a 2-cycle, from the magnitude of `(Φ²)'` at the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Attracting,
    Repelling,
    /// `|(Φ²)'|` within the indeterminacy band around 1.
    OneSided,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Attracting => "attracting",
            Stability::Repelling => "repelling",
            Stability::OneSided => "one-sided",
        })
    }
}

/// One period-two orbit `{γ, δ}` of the map, with `γ < G* < δ`.
#[derive(Debug, Clone, Copy)]
pub struct TwoCycle {
    pub gamma: f64,
    pub delta: f64,
    /// Central-difference estimate of `(Φ²)'` at `γ`.
    pub multiplier: f64,
    pub stability: Stability,
}

/// Long-run regime of the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Squeezing intervals collapse: globally attracting fixed point.
    A1,
    /// Repelling fixed point with a single, globally attracting 2-cycle.
    A2,
    /// Repelling fixed point with multiple 2-cycles (bistable oscillations).
    A3,
    /// Locally attracting fixed point coexisting with an outer 2-cycle.
    A4,
    Indeterminate,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::A1 => "A1",
            Regime::A2 => "A2",
            Regime::A3 => "A3",
            Regime::A4 => "A4",
            Regime::Indeterminate => "indeterminate",
        })
    }
}

/// Everything the map pipeline computes for one config.
#[derive(Debug, Clone)]
pub struct MapAnalysis {
    /// Supremum of the map: `Φ` at the left end of its domain.
    pub phi0: f64,
    /// Infimum of the map: limit of `Φ` as its argument grows.
    pub phi_inf: f64,
    /// Nested squeezing intervals `L₁, L₂, …` (each `[αₙ, βₙ]`).
    pub intervals: Vec<[f64; 2]>,
    /// Last computed interval `[α*, β*]`.
    pub l_star: [f64; 2],
    pub two_cycles: Vec<TwoCycle>,
    /// Fixed point of the map (= glucose-side equilibrium).
    pub fixed_point: f64,
    /// `Φ'` at the fixed point (analytic where the slots are smooth).
    pub slope_at_fixed_point: f64,
    pub regime: Regime,
    /// Collapse tolerance the regime call was made with.
    pub collapse_tol: f64,
}

/// Long-run confinement box for trajectories of the delay system.
/// Entries are `±∞` when the variant's dissipativity condition fails.
#[derive(Debug, Clone, Copy)]
pub struct PersistenceBounds {
    /// Insulin-side box `[i_min, i_max]`.
    pub i_min: f64,
    pub i_max: f64,
    /// Glucose-side box `[g_min, g_max]`.
    pub g_min: f64,
    pub g_max: f64,
    pub refined: Option<RefinedBounds>,
}

/// Tighter asymptotic bounds from the limiting interval `[α*, β*]`.
#[derive(Debug, Clone, Copy)]
pub struct RefinedBounds {
    pub alpha: f64,
    pub beta: f64,
    /// Insulin-side image `[c*, d*] = τ0·f1([α*, β*])`.
    pub c: f64,
    pub d: f64,
}

/// Verdict of the difference-equation periodicity criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeVerdict {
    Periodic2,
    Stable,
    Undecided,
}

impl std::fmt::Display for DeVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeVerdict::Periodic2 => "periodic2",
            DeVerdict::Stable => "stable",
            DeVerdict::Undecided => "undecided",
        })
    }
}

/// Options for [`analyze_map`].
#[derive(Debug, Clone, Copy)]
pub struct MapOptions {
    /// Maximum number of squeezing iterations.
    pub n_max: usize,
    /// Interval width below which the limiting set counts as a point.
    pub collapse_tol: f64,
    /// Scan resolution for 2-cycle detection.
    pub grid: usize,
    /// Bisection tolerance of the map inversion.
    pub tol: f64,
    /// Half-width of the `|Φ'| ≈ 1` indeterminacy band.
    pub slope_band: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            n_max: 512,
            collapse_tol: 1e-8,
            grid: 2048,
            tol: 1e-12,
            slope_band: 1e-6,
        }
    }
}

/// Steady-state glucose outflow `F` (insulin at quasi-steady state).
pub fn big_f(cfg: &ModelConfig, g: f64) -> Result<f64> {
    cfg.steady_outflow(g)
}

/// Steady-state glucose inflow `H` (external input plus delayed production
/// at quasi-steady insulin).
pub fn big_h(cfg: &ModelConfig, g: f64) -> Result<f64> {
    cfg.steady_inflow(g)
}

/// Left end of the map's domain for each variant.
fn domain_left(cfg: &ModelConfig) -> Option<f64> {
    match cfg.variant {
        Variant::Ms => Some(0.0),
        Variant::Ms0 => Some(-cfg.g_ref),
        Variant::MsS | Variant::MsIn => None, // whole real line
    }
}

/// Solve `F(x) = target` for `x` by bracketing and bisection. `F` is
/// strictly increasing on the variant's domain, so the solution is unique.
fn invert_outflow(cfg: &ModelConfig, target: f64, tol: f64) -> Result<f64> {
    if !target.is_finite() {
        return Err(Error::BracketFailure(format!(
            "cannot invert the outflow at non-finite target {target}"
        )));
    }
    let f_at = |x: f64| big_f(cfg, x);
    // establish lo with F(lo) <= target and hi with F(hi) >= target
    let (mut lo, mut hi);
    if target >= 0.0 {
        lo = 0.0;
        hi = 1.0;
        let mut bracketed = false;
        for _ in 0..200 {
            if f_at(hi)? >= target {
                bracketed = true;
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        if !bracketed {
            return Err(Error::BracketFailure(format!(
                "outflow never reached {target:.6e}; it must be unbounded above"
            )));
        }
    } else {
        hi = 0.0;
        match domain_left(cfg) {
            Some(left) if left >= 0.0 => {
                return Err(Error::BracketFailure(format!(
                    "negative outflow target {target:.6e} is outside the nonnegative domain"
                )));
            }
            Some(left) => {
                lo = left;
                if f_at(lo)? > target {
                    return Err(Error::BracketFailure(format!(
                        "outflow target {target:.6e} is below the domain-edge value {:.6e}",
                        f_at(lo)?
                    )));
                }
            }
            None => {
                lo = -1.0;
                let mut bracketed = false;
                for _ in 0..200 {
                    if f_at(lo)? <= target {
                        bracketed = true;
                        break;
                    }
                    hi = lo;
                    lo *= 2.0;
                }
                if !bracketed {
                    return Err(Error::BracketFailure(format!(
                        "outflow never dropped to {target:.6e}; it must be unbounded below"
                    )));
                }
            }
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let v = f_at(mid)?;
        if (v - target).abs() <= tol * (1.0 + target.abs()) {
            return Ok(mid);
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    let residual = (f_at(mid)? - target).abs();
    if residual <= tol * (1.0 + target.abs()) {
        Ok(mid)
    } else {
        Err(Error::NoConvergence(format!(
            "outflow inversion stalled at residual {residual:.3e} for target {target:.6e}"
        )))
    }
}

/// The limiting map `Φ(g) = F⁻¹(H(g))`.
pub fn phi(cfg: &ModelConfig, g: f64, tol: f64) -> Result<f64> {
    invert_outflow(cfg, big_h(cfg, g)?, tol)
}

/// Orbit `(g0, Φ(g0), …, Φⁿ(g0))` — `n + 1` values.
pub fn iterate_phi(cfg: &ModelConfig, g0: f64, n: usize, tol: f64) -> Result<Vec<f64>> {
    let mut orbit = Vec::with_capacity(n + 1);
    orbit.push(g0);
    let mut g = g0;
    for _ in 0..n {
        g = phi(cfg, g, tol)?;
        orbit.push(g);
    }
    Ok(orbit)
}

/// Values of `H` at the two ends of the map's domain: `(sup H, inf H)`.
/// `H` is strictly decreasing, so these are the images of the left end and
/// of `g → +∞`.
fn inflow_limits(cfg: &ModelConfig) -> Result<(f64, f64)> {
    match cfg.variant {
        Variant::Ms | Variant::Ms0 => {
            let left = domain_left(cfg).expect("one-sided domain");
            let h_sup = big_h(cfg, left)?;
            let i_inf = cfg.tau0 * cfg.f1.limit_at_infinity;
            if !i_inf.is_finite() {
                return Err(Error::Domain(
                    "map limits need a bounded production slot f1".into(),
                ));
            }
            let h_inf = match cfg.variant {
                Variant::Ms => cfg.g_in + cfg.f5.eval(i_inf)?,
                _ => cfg.f5.eval(i_inf)?,
            };
            Ok((h_sup, h_inf))
        }
        Variant::MsS | Variant::MsIn => {
            // Odd decreasing feedback: sup at the left end is -lim_{+∞}.
            let f_lim = cfg.f5.limit_at_infinity;
            if !f_lim.is_finite() {
                return Err(Error::Domain(
                    "map limits need a bounded feedback slot".into(),
                ));
            }
            Ok((-f_lim, f_lim))
        }
    }
}

/// The map's extreme values `(Φ₀, Φ_∞) = (sup Φ, inf Φ)`.
pub fn phi_limits(cfg: &ModelConfig, tol: f64) -> Result<(f64, f64)> {
    let (h_sup, h_inf) = inflow_limits(cfg)?;
    let phi0 = invert_outflow(cfg, h_sup, tol)?;
    let phi_inf = invert_outflow(cfg, h_inf, tol)?;
    Ok((phi0, phi_inf))
}

/// Nested squeezing intervals: `L₁ = [Φ_∞, Φ₀]`, `Lₙ₊₁ = Φ(Lₙ)` by endpoint
/// mapping (valid because `Φ` is decreasing: `Φ([a,b]) = [Φ(b), Φ(a)]`).
/// Stops on collapse below `collapse_tol`, on a width plateau (a 2-cycle has
/// been reached), or at `n_max`.
pub fn imbedded_intervals(
    cfg: &ModelConfig,
    n_max: usize,
    collapse_tol: f64,
    tol: f64,
) -> Result<Vec<[f64; 2]>> {
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 squeezing iterations, got {n_max}"
        )));
    }
    let (phi0, phi_inf) = phi_limits(cfg, tol)?;
    let mut intervals = vec![[phi_inf, phi0]];
    let (mut a, mut b) = (phi_inf, phi0);
    for _ in 1..n_max {
        let width = b - a;
        if width <= collapse_tol {
            break;
        }
        let (mut a2, mut b2) = (phi(cfg, b, tol)?, phi(cfg, a, tol)?);
        // Monotonicity guarantees nesting; clamp the bisection jitter so the
        // published intervals nest exactly.
        a2 = a2.max(a);
        b2 = b2.min(b);
        intervals.push([a2, b2]);
        let new_width = b2 - a2;
        if new_width >= width * (1.0 - 1e-12) {
            break; // plateau: the squeeze has reached a cycle
        }
        a = a2;
        b = b2;
    }
    Ok(intervals)
}

/// Analytic slope of `Φ` at a point: `H'(g) / F'(Φ(g))`, which at the fixed
/// point reduces to `H'(G*)/F'(G*)`. Falls back to a central difference of
/// the computed map when a slot junction blocks the analytic derivative.
fn map_slope_at_fixed_point(cfg: &ModelConfig, g_star: f64, tol: f64) -> Result<f64> {
    match (outflow_derivative(cfg, g_star), inflow_derivative(cfg, g_star)) {
        (Ok(fp), Ok(hp)) if fp > 0.0 => Ok(hp / fp),
        _ => {
            let h = 1e-6 * g_star.abs().max(1.0);
            Ok((phi(cfg, g_star + h, tol)? - phi(cfg, g_star - h, tol)?) / (2.0 * h))
        }
    }
}

/// `F'(g)`; errors at slot junctions (caller falls back to differences).
fn outflow_derivative(cfg: &ModelConfig, g: f64) -> Result<f64> {
    let smooth = |d: crate::functions::Derivative| -> Result<f64> {
        if d.smooth {
            Ok(d.value)
        } else {
            Err(Error::NonSmooth {
                u: g,
                context: "outflow derivative across a branch junction".into(),
            })
        }
    };
    match cfg.variant {
        Variant::Ms | Variant::Ms0 => {
            let i = cfg.tau0 * cfg.f1.eval(g)?;
            let f1p = smooth(cfg.f1.eval_derivative(g)?)?;
            let f2p = smooth(cfg.f2.eval_derivative(g)?)?;
            let f4v = cfg.f4.eval(i)?;
            let f4p = smooth(cfg.f4.eval_derivative(i)?)?;
            let g_abs = cfg.g_ref + g;
            Ok(f2p + cfg.q * (f4v + g_abs * f4p * cfg.tau0 * f1p))
        }
        Variant::MsS => Ok(cfg.extras.a2 + cfg.extras.a4 * cfg.tau0 * cfg.extras.a1),
        Variant::MsIn => {
            let gain = cfg.tau0 * cfg.extras.a1;
            let x = gain * g;
            let f4v = cfg.f4.eval(x)?;
            let f4p = smooth(cfg.f4.eval_derivative(x)?)?;
            Ok(cfg.extras.a2
                + f4v
                + g * f4p * gain
                + cfg.extras.delta * cfg.extras.b * gain / (1.0 + x * x))
        }
    }
}

/// `H'(g)`; errors at slot junctions.
fn inflow_derivative(cfg: &ModelConfig, g: f64) -> Result<f64> {
    let x = cfg.tau0 * cfg.f1.eval(g)?;
    let f1p = cfg.f1.eval_derivative(g)?;
    let f5p = cfg.f5.eval_derivative(x)?;
    if !(f1p.smooth && f5p.smooth) {
        return Err(Error::NonSmooth {
            u: g,
            context: "inflow derivative across a branch junction".into(),
        });
    }
    Ok(f5p.value * cfg.tau0 * f1p.value)
}

/// Locate all 2-cycles by sign-scanning `Φ²(x) − x` over `[Φ_∞, Φ₀]` and
/// bisecting each bracket; the fixed point itself is excluded by distance.
/// Cycles are returned as `(γ, δ)` with `γ < G* < δ`, sorted by `γ`.
pub fn find_two_cycles(cfg: &ModelConfig, grid: usize, tol: f64) -> Result<Vec<TwoCycle>> {
    if grid < 100 {
        return Err(Error::InvalidParameter(format!(
            "2-cycle scan needs at least 100 grid points, got {grid}"
        )));
    }
    let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL)?;
    let (phi0, phi_inf) = phi_limits(cfg, tol)?;
    let span = phi0 - phi_inf;
    if span <= 0.0 {
        return Ok(Vec::new());
    }
    let phi2 = |x: f64| -> Result<f64> { phi(cfg, phi(cfg, x, tol)?, tol) };
    let exclusion = (1e-6 * span).max(1e-7);
    let mut cycles: Vec<TwoCycle> = Vec::new();

    let mut prev_x = phi_inf;
    let mut prev_v = phi2(prev_x)? - prev_x;
    for k in 1..=grid {
        let x = phi_inf + span * k as f64 / grid as f64;
        let v = phi2(x)? - x;
        if prev_v == 0.0 || (prev_v < 0.0) != (v < 0.0) {
            // bisect the bracket
            let (mut a, mut b, mut fa) = (prev_x, x, prev_v);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = phi2(m)? - m;
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
                if b - a <= tol.max(f64::EPSILON * m.abs()) {
                    break;
                }
            }
            let root = 0.5 * (a + b);
            if (root - eq.g_star).abs() > exclusion {
                let partner = phi(cfg, root, tol)?;
                let (gamma, delta) = if root < partner {
                    (root, partner)
                } else {
                    (partner, root)
                };
                let duplicate = cycles
                    .iter()
                    .any(|c| (c.gamma - gamma).abs() <= exclusion && (c.delta - delta).abs() <= exclusion);
                let straddles = gamma < eq.g_star && eq.g_star < delta;
                if !duplicate && straddles {
                    let h = 1e-6;
                    let multiplier = (phi2(gamma + h)? - phi2(gamma - h)?) / (2.0 * h);
                    let stability = if (multiplier.abs() - 1.0).abs() <= 10.0 * tol.max(1e-9) {
                        Stability::OneSided
                    } else if multiplier.abs() < 1.0 {
                        Stability::Attracting
                    } else {
                        Stability::Repelling
                    };
                    cycles.push(TwoCycle {
                        gamma,
                        delta,
                        multiplier,
                        stability,
                    });
                }
            }
        }
        prev_x = x;
        prev_v = v;
    }
    cycles.sort_by(|p, q| p.gamma.total_cmp(&q.gamma));
    Ok(cycles)
}

/// Regime call on a populated analysis. `A1` requires an actually collapsed
/// limiting interval; `A2` a lone attracting 2-cycle (verified by iterating
/// `Φ²` from both sides) inside the limiting interval with a repelling fixed
/// point; `A3` several cycles over a repelling fixed point; `A4` an outer
/// cycle around a locally attracting fixed point. Slopes within the
/// indeterminacy band of 1 are never classified.
pub fn classify_regime(analysis: &MapAnalysis, cfg: &ModelConfig, tol: f64) -> Regime {
    let width = analysis.l_star[1] - analysis.l_star[0];
    if width <= analysis.collapse_tol {
        return Regime::A1;
    }
    let s = analysis.slope_at_fixed_point.abs();
    if (s - 1.0).abs() <= 1e-6 {
        return Regime::Indeterminate;
    }
    let cycles = &analysis.two_cycles;
    if s > 1.0 {
        if cycles.len() == 1 {
            let c = &cycles[0];
            let inside = c.gamma >= analysis.l_star[0] - 1e-9 && c.delta <= analysis.l_star[1] + 1e-9;
            if inside
                && c.stability == Stability::Attracting
                && cycle_attracts_from_both_sides(cfg, c, analysis, tol)
            {
                return Regime::A2;
            }
        }
        if cycles.len() >= 2 {
            return Regime::A3;
        }
        return Regime::Indeterminate;
    }
    // |Φ'(G*)| < 1: locally attracting fixed point
    if !cycles.is_empty() {
        return Regime::A4;
    }
    Regime::Indeterminate
}

/// Iterate `Φ²` from just inside and just outside `γ` and require both
/// orbits to approach the cycle.
fn cycle_attracts_from_both_sides(
    cfg: &ModelConfig,
    cycle: &TwoCycle,
    analysis: &MapAnalysis,
    tol: f64,
) -> bool {
    let span = analysis.phi0 - analysis.phi_inf;
    let d = 0.02 * span;
    let accept = (1e-6 * span).max(1e-8);
    for seed in [cycle.gamma - d, cycle.gamma + d] {
        let mut x = seed.clamp(analysis.phi_inf, analysis.phi0);
        let mut ok = false;
        for _ in 0..500 {
            x = match phi(cfg, x, tol).and_then(|y| phi(cfg, y, tol)) {
                Ok(v) => v,
                Err(_) => return false,
            };
            if (x - cycle.gamma).abs() <= accept {
                ok = true;
                break;
            }
        }
        if !ok {
            return false;
        }
    }
    true
}

/// Run the whole map pipeline for one config.
pub fn analyze_map(cfg: &ModelConfig, opts: &MapOptions) -> Result<MapAnalysis> {
    let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL)?;
    let intervals = imbedded_intervals(cfg, opts.n_max, opts.collapse_tol, opts.tol)?;
    let first = intervals[0];
    let l_star = *intervals.last().expect("at least L1");
    let slope = map_slope_at_fixed_point(cfg, eq.g_star, opts.tol)?;
    let collapsed = l_star[1] - l_star[0] <= opts.collapse_tol;
    let two_cycles = if collapsed {
        Vec::new()
    } else {
        find_two_cycles(cfg, opts.grid, opts.tol)?
    };
    let mut analysis = MapAnalysis {
        phi0: first[1],
        phi_inf: first[0],
        intervals,
        l_star,
        two_cycles,
        fixed_point: eq.g_star,
        slope_at_fixed_point: slope,
        regime: Regime::Indeterminate,
        collapse_tol: opts.collapse_tol,
    };
    analysis.regime = classify_regime(&analysis, cfg, opts.tol);
    Ok(analysis)
}

/// Long-run confinement bounds for the delay system. The glucose-side box is
/// variant-specific:
/// - full/translated: the map range `[Φ_∞, Φ₀]` (pathwise valid via the
///   monotone squeezing argument);
/// - linear reduction: the dissipativity bound `|y| ≤ sup|F| / (a2 − a4·τ0·a1)`
///   when the clearance dominates the instantaneous coupling, else unbounded;
/// - saturating reduction: the fixed point of the dissipativity iteration
///   `Y ← (|δ|·B·atan(τ0·a1·Y) + |F(τ0·a1·Y)|) / (a2 + inf f4)`.
/// The insulin-side box is the production image of the glucose-side box.
pub fn persistence_bounds(cfg: &ModelConfig) -> Result<PersistenceBounds> {
    let tol = 1e-12;
    let (g_min, g_max) = match cfg.variant {
        Variant::Ms | Variant::Ms0 => {
            let (phi0, phi_inf) = phi_limits(cfg, tol)?;
            (phi_inf, phi0)
        }
        Variant::MsS => {
            let f_sup = cfg.f5.limit_at_infinity.abs();
            let margin = cfg.extras.a2 - cfg.extras.a4 * cfg.tau0 * cfg.extras.a1;
            if margin > 0.0 {
                let y = f_sup / margin;
                (-y, y)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
        }
        Variant::MsIn => {
            let f_sup = cfg.f5.limit_at_infinity.abs();
            let leak = cfg.extras.delta.abs() * cfg.extras.b;
            let d_inf = uptake_infimum(cfg)?;
            let denom = cfg.extras.a2 + d_inf;
            let gain = cfg.tau0 * cfg.extras.a1;
            let mut y = (leak * std::f64::consts::FRAC_PI_2 + f_sup) / denom;
            for _ in 0..200 {
                let x = gain * y;
                let next = (leak * x.atan() + cfg.f5.eval(x)?.abs()) / denom;
                if (next - y).abs() <= 1e-12 * y.max(1.0) {
                    y = next;
                    break;
                }
                y = next;
            }
            (-y, y)
        }
    };
    let (i_min, i_max) = match cfg.variant {
        Variant::Ms | Variant::Ms0 => {
            let left = domain_left(cfg).expect("one-sided domain");
            (
                cfg.tau0 * cfg.f1.eval(left)?,
                cfg.tau0 * cfg.f1.limit_at_infinity,
            )
        }
        Variant::MsS | Variant::MsIn => {
            let gain = cfg.tau0 * cfg.extras.a1;
            (gain * g_min, gain * g_max)
        }
    };
    let refined = if g_min.is_finite() && g_max.is_finite() {
        let opts = MapOptions::default();
        let intervals = imbedded_intervals(cfg, opts.n_max, opts.collapse_tol, opts.tol)?;
        let l = *intervals.last().expect("at least L1");
        Some(RefinedBounds {
            alpha: l[0],
            beta: l[1],
            c: cfg.tau0 * cfg.f1.eval(l[0])?,
            d: cfg.tau0 * cfg.f1.eval(l[1])?,
        })
    } else {
        None
    };
    Ok(PersistenceBounds {
        i_min,
        i_max,
        g_min,
        g_max,
        refined,
    })
}

/// Infimum of the uptake factor over the whole line; exact for the
/// saturating-arctan family, sampled far out otherwise.
fn uptake_infimum(cfg: &ModelConfig) -> Result<f64> {
    use crate::functions::Family;
    match &cfg.f4.family {
        Family::ArctanSaturating { a, b, eps } => {
            Ok(eps * (a - std::f64::consts::FRAC_PI_2 * b))
        }
        _ => Ok(cfg.f4.eval(-1e12)?.max(0.0)),
    }
}

/// Iterate the scalar difference equation: at each step the next glucose
/// value solves the implicit steady-flow balance
/// `F(G(s)) = H(G(s−1))` by bisection — the same inversion the map uses, so
/// the orbit coincides with [`iterate_phi`].
pub fn iterate_difference_equation(
    cfg: &ModelConfig,
    g0: f64,
    steps: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    iterate_phi(cfg, g0, steps, tol)
}

/// Tail periodicity criterion with threshold `eps`: compare the last entries
/// two apart and one apart.
pub fn classify_de_solution(orbit: &[f64], eps: f64) -> Result<DeVerdict> {
    if orbit.len() < 64 {
        return Err(Error::InvalidParameter(format!(
            "periodicity criterion needs an orbit of length >= 64, got {}",
            orbit.len()
        )));
    }
    let n = orbit.len();
    let d2 = (orbit[n - 1] - orbit[n - 3]).abs();
    let d1 = (orbit[n - 2] - orbit[n - 3]).abs();
    Ok(if d2 < eps && d1 > eps {
        DeVerdict::Periodic2
    } else if d2 < eps && d1 < eps {
        DeVerdict::Stable
    } else {
        DeVerdict::Undecided
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::FunctionSpec;

    fn canonical() -> ModelConfig {
        ModelConfig::full(
            FunctionSpec::hill_increasing(2.0, 2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_increasing(3.0, 1.0, 1.0, 0.0).unwrap(),
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_decreasing(4.0, 1.0, 1.0, 0.0).unwrap(),
            1.0,
            1.0,
            1.0,
            2.0,
        )
        .unwrap()
    }

    fn msin_steep_knee() -> ModelConfig {
        ModelConfig::reduced_saturating(
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.1).unwrap(),
            FunctionSpec::make_fa(1.1, 5.7).unwrap(),
            1.0 / 24.0,
            48.0,
            2.78,
            -0.55,
            1.0,
            5.0,
        )
        .unwrap()
    }

    fn msin_flat_core() -> ModelConfig {
        ModelConfig::reduced_saturating(
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.1).unwrap(),
            FunctionSpec::make_fb(1.0, 1.0, 10.0, 1).unwrap(),
            0.125,
            16.0,
            1.8,
            0.1,
            1.0,
            5.0,
        )
        .unwrap()
    }

    fn mss_knee(tau: f64) -> ModelConfig {
        ModelConfig::reduced_linear(
            FunctionSpec::make_fa(1.0, 10.0).unwrap(),
            0.5,
            2.0,
            0.6,
            0.2,
            tau,
        )
        .unwrap()
    }

    const TOL: f64 = 1e-12;

    #[test]
    fn outflow_at_zero_and_hand_value() {
        let cfg = canonical();
        assert_eq!(big_f(&cfg, 0.0).unwrap(), 0.0);
        // f2(1) + f4(tau0*f1(1)) = 1.5 + 0.5*(2 + atan 1.5)
        let expect = 1.5 + 0.5 * (2.0 + 1.5f64.atan());
        assert!((big_f(&cfg, 1.0).unwrap() - expect).abs() < 1e-15);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..100 {
            let v = big_f(&cfg, 0.1 * k as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn inflow_limits_and_monotonicity() {
        let cfg = canonical();
        // H(0) = 1 + f5(0.5) = 1 + 4/1.5
        assert!((big_h(&cfg, 0.0).unwrap() - (1.0 + 4.0 / 1.5)).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let v = big_h(&cfg, 0.1 * k as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let (h_sup, h_inf) = inflow_limits(&cfg).unwrap();
        assert!((h_sup - (1.0 + 4.0 / 1.5)).abs() < 1e-15);
        assert!((h_inf - (1.0 + 4.0 / 3.5)).abs() < 1e-12);
    }

    #[test]
    fn map_fixes_equilibrium_and_decreases() {
        let cfg = canonical();
        let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let img = phi(&cfg, eq.g_star, TOL).unwrap();
        assert!((img - eq.g_star).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let v = phi(&cfg, 0.1 * k as f64, TOL).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn canonical_map_limits_and_squeeze() {
        let cfg = canonical();
        let (phi0, phi_inf) = phi_limits(&cfg, TOL).unwrap();
        assert!((phi0 - 1.2938470008803051).abs() < 1e-9);
        assert!((phi_inf - 0.665264434706387).abs() < 1e-9);
        let ivals = imbedded_intervals(&cfg, 512, 1e-8, TOL).unwrap();
        assert!((ivals[1][0] - 0.7832571218045814).abs() < 1e-8);
        assert!((ivals[1][1] - 0.958979804115188).abs() < 1e-8);
        assert!((ivals[2][0] - 0.8515584315418891).abs() < 1e-8);
        assert!((ivals[2][1] - 0.9087120597878311).abs() < 1e-8);
        for w in ivals.windows(2) {
            assert!(w[1][0] >= w[0][0] && w[1][1] <= w[0][1], "nesting violated");
            assert!(w[1][1] - w[1][0] <= w[0][1] - w[0][0], "width must shrink");
        }
        let last = ivals.last().unwrap();
        assert!(last[1] - last[0] <= 1e-8, "limiting set must collapse");
    }

    #[test]
    fn canonical_regime_is_a1() {
        let cfg = canonical();
        let analysis = analyze_map(&cfg, &MapOptions::default()).unwrap();
        assert_eq!(analysis.regime, Regime::A1);
        assert!(analysis.two_cycles.is_empty());
        assert!((analysis.slope_at_fixed_point - (-0.3207699193252911)).abs() < 1e-9);
        assert!((analysis.fixed_point - 0.876144693020692).abs() < 1e-9);
    }

    #[test]
    fn canonical_orbit_converges_to_fixed_point() {
        let cfg = canonical();
        let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let orbit = iterate_phi(&cfg, 1.2, 200, TOL).unwrap();
        assert_eq!(orbit.len(), 201);
        assert!((orbit.last().unwrap() - eq.g_star).abs() < 1e-6);
        // even/odd subsequences monotone (decreasing map => increasing square)
        for k in (0..orbit.len() - 4).step_by(2) {
            let d0 = orbit[k + 2] - orbit[k];
            let d1 = orbit[k + 4] - orbit[k + 2];
            assert!(d0 * d1 >= -1e-12, "alternate subsequence must be monotone");
        }
    }

    #[test]
    fn translated_map_is_conjugate() {
        let full = canonical();
        let eq = full.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let shifted = full.translate_to_zero().unwrap();
        for g in [0.2, 0.7, 1.0, 1.4] {
            let a = phi(&full, g, TOL).unwrap();
            let b = phi(&shifted, g - eq.g_star, TOL).unwrap();
            assert!((a - (b + eq.g_star)).abs() < 1e-9, "conjugation at g = {g}");
        }
        let (p0, pi) = phi_limits(&shifted, TOL).unwrap();
        assert!((p0 - (1.2938470008803051 - eq.g_star)).abs() < 1e-8);
        assert!((pi - (0.665264434706387 - eq.g_star)).abs() < 1e-8);
    }

    #[test]
    fn steep_knee_reduction_has_three_cycles_regime_a3() {
        let cfg = msin_steep_knee();
        let analysis = analyze_map(&cfg, &MapOptions::default()).unwrap();
        assert!((analysis.phi0 - 1.276651738550754).abs() < 1e-9);
        assert!((analysis.phi_inf - (-1.3903106764255426)).abs() < 1e-9);
        // analytic: H'(0)/F'(0) = (-1 * 2) / (2.78 + 0.2 - 0.55 * 2)
        assert!((analysis.slope_at_fixed_point - (-2.0 / 1.88)).abs() < 1e-12);
        assert_eq!(analysis.two_cycles.len(), 3);
        let outer = &analysis.two_cycles[0];
        let middle = &analysis.two_cycles[1];
        let inner = &analysis.two_cycles[2];
        assert!((outer.gamma - (-1.3080898103789877)).abs() < 1e-9);
        assert!((outer.delta - 1.215293202502835).abs() < 1e-9);
        assert_eq!(outer.stability, Stability::Attracting);
        assert!((middle.gamma - (-0.8137767859384439)).abs() < 1e-9);
        assert_eq!(middle.stability, Stability::Repelling);
        assert!((inner.gamma - (-0.3240930212045896)).abs() < 1e-9);
        assert!((inner.delta - 0.3154271056723701).abs() < 1e-9);
        assert_eq!(inner.stability, Stability::Attracting);
        assert!((inner.multiplier - 0.8292222446470987).abs() < 1e-3);
        assert_eq!(analysis.regime, Regime::A3);
        // interlacing: alpha* < gamma_inner < G* < delta_inner < beta*
        assert!(analysis.l_star[0] < inner.gamma && inner.delta < analysis.l_star[1]);
    }

    #[test]
    fn flat_core_reduction_is_regime_a4() {
        let cfg = msin_flat_core();
        let analysis = analyze_map(&cfg, &MapOptions::default()).unwrap();
        assert!((analysis.phi0 - 1.159729867081296).abs() < 1e-9);
        assert!((analysis.phi_inf - (-1.3036889041804898)).abs() < 1e-9);
        assert!(analysis.slope_at_fixed_point.abs() < 1e-9, "flat core slope");
        assert_eq!(analysis.two_cycles.len(), 2);
        assert_eq!(analysis.two_cycles[0].stability, Stability::Attracting);
        assert!((analysis.two_cycles[0].gamma - (-1.2613770557027237)).abs() < 1e-9);
        assert!((analysis.two_cycles[0].delta - 1.1297126668932833).abs() < 1e-9);
        assert_eq!(analysis.two_cycles[1].stability, Stability::Repelling);
        assert!((analysis.two_cycles[1].gamma - (-0.5062093073424876)).abs() < 1e-9);
        assert_eq!(analysis.regime, Regime::A4);
    }

    #[test]
    fn linear_reduction_single_cycle_regime_a2() {
        let cfg = mss_knee(40.0);
        let analysis = analyze_map(&cfg, &MapOptions::default()).unwrap();
        assert!((analysis.phi0 - std::f64::consts::PI / 0.8).abs() < 1e-9);
        assert!((analysis.slope_at_fixed_point - (-1.25)).abs() < 1e-12);
        assert_eq!(analysis.two_cycles.len(), 1);
        let c = &analysis.two_cycles[0];
        assert!((c.gamma - (-3.872722590551348)).abs() < 1e-9);
        assert!((c.delta - 3.872722590551348).abs() < 1e-9);
        assert_eq!(c.stability, Stability::Attracting);
        assert!(c.multiplier.abs() < 1e-2);
        assert_eq!(analysis.regime, Regime::A2);
        // the squeeze homes in on the cycle
        assert!((analysis.l_star[0] - c.gamma).abs() < 1e-6);
        assert!((analysis.l_star[1] - c.delta).abs() < 1e-6);
    }

    #[test]
    fn cycle_residuals_within_tolerance() {
        for cfg in [msin_steep_knee(), msin_flat_core(), mss_knee(40.0)] {
            let cycles = find_two_cycles(&cfg, 2048, TOL).unwrap();
            assert!(!cycles.is_empty());
            for c in &cycles {
                let img_gamma = phi(&cfg, c.gamma, TOL).unwrap();
                let img_delta = phi(&cfg, c.delta, TOL).unwrap();
                assert!((img_gamma - c.delta).abs() <= 1e-9, "gamma -> delta");
                assert!((img_delta - c.gamma).abs() <= 1e-9, "delta -> gamma");
            }
        }
    }

    #[test]
    fn persistence_full_variant() {
        let cfg = canonical();
        let b = persistence_bounds(&cfg).unwrap();
        assert!((b.i_min - 0.5).abs() < 1e-15);
        assert!((b.i_max - 2.5).abs() < 1e-12);
        assert!((b.g_min - 0.665264434706387).abs() < 1e-9);
        assert!((b.g_max - 1.2938470008803051).abs() < 1e-9);
        let r = b.refined.unwrap();
        // collapsed interval: refined bounds pinch onto the equilibrium
        assert!((r.alpha - 0.876144693020692).abs() < 1e-6);
        assert!((r.beta - r.alpha).abs() < 1e-6);
        assert!((r.c - 1.3685411881540306).abs() < 1e-6);
        assert!(r.alpha >= b.g_min && r.beta <= b.g_max);
        assert!(r.c >= b.i_min && r.d <= b.i_max);
    }

    #[test]
    fn persistence_linear_reduction() {
        let b = persistence_bounds(&mss_knee(40.0)).unwrap();
        assert!((b.g_max - std::f64::consts::PI / 0.4).abs() < 1e-12);
        assert_eq!(b.g_min, -b.g_max);
        assert_eq!(b.i_max, b.g_max); // tau0*a1 = 1
        let r = b.refined.unwrap();
        assert!(r.alpha >= b.g_min && r.beta <= b.g_max);

        // clearance weaker than the coupling: no finite bound
        let loose = ModelConfig::reduced_linear(
            FunctionSpec::make_fa(1.0, 10.0).unwrap(),
            0.5,
            2.0,
            0.1,
            0.2,
            5.0,
        )
        .unwrap();
        let lb = persistence_bounds(&loose).unwrap();
        assert!(lb.g_max.is_infinite() && lb.refined.is_none());
    }

    #[test]
    fn persistence_saturating_reduction() {
        let b = persistence_bounds(&msin_steep_knee()).unwrap();
        assert!((b.g_max - 1.3445779948367402).abs() < 1e-9);
        assert!((b.i_max - 2.6891559896734805).abs() < 1e-9);
        let bf = persistence_bounds(&msin_flat_core()).unwrap();
        assert!((bf.g_max - 1.432920989671404).abs() < 1e-9);
        assert!((bf.i_max - 2.865841979342808).abs() < 1e-9);
        // refined (outer-cycle) bounds nest inside coarse
        let r = bf.refined.unwrap();
        assert!(r.alpha >= bf.g_min && r.beta <= bf.g_max);
    }

    #[test]
    fn difference_equation_matches_map_iteration() {
        let cfg = msin_steep_knee();
        let a = iterate_phi(&cfg, 0.9, 80, TOL).unwrap();
        let b = iterate_difference_equation(&cfg, 0.9, 80, TOL).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 2.0 * TOL);
        }
    }

    #[test]
    fn de_verdicts() {
        let constant = vec![0.5; 64];
        assert_eq!(classify_de_solution(&constant, 1e-3).unwrap(), DeVerdict::Stable);
        let alternating: Vec<f64> = (0..64).map(|k| if k % 2 == 0 { 0.25 } else { 0.75 }).collect();
        assert_eq!(
            classify_de_solution(&alternating, 1e-3).unwrap(),
            DeVerdict::Periodic2
        );
        let drifting: Vec<f64> = (0..64).map(|k| 0.01 * k as f64).collect();
        assert_eq!(
            classify_de_solution(&drifting, 1e-3).unwrap(),
            DeVerdict::Undecided
        );
        assert!(classify_de_solution(&[0.0; 10], 1e-3).is_err());

        // real orbits: attracting-cycle config alternates, collapsing config stills
        let periodic = iterate_difference_equation(&mss_knee(40.0), 2.0, 200, TOL).unwrap();
        assert_eq!(classify_de_solution(&periodic, 1e-3).unwrap(), DeVerdict::Periodic2);
        let stable = iterate_difference_equation(&canonical(), 1.2, 200, TOL).unwrap();
        assert_eq!(classify_de_solution(&stable, 1e-3).unwrap(), DeVerdict::Stable);
    }
}
