//! Model assembly: the full two-component delay system, its zero-translated
//! form, and the two scalar-feedback reductions; equilibrium location,
//! translation, linearization coefficients, and right-hand-side evaluation.
//!
//! State convention throughout: the first component is the insulin-like
//! variable (the one whose past value feeds back), the second is the
//! glucose-like variable. For the full variant these are absolute
//! concentrations (I, G); for the translated/reduced variants they are
//! deviations (x, y) from the equilibrium, which sits at the origin.

use crate::error::{Error, Result};
use crate::functions::{validate_hypotheses, Derivative, FunctionSpec};

/// Which of the four systems a [`ModelConfig`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Full physiological system in absolute coordinates ("MS"):
    /// `I' = f1(G) - I/τ0`, `G' = G_in - f2(G) - q·G·f4(I) + f5(I(t-τ))`.
    Ms,
    /// The same system translated so the equilibrium is the origin ("MS-0").
    Ms0,
    /// Scalar-feedback reduction with linear losses ("MS-s"):
    /// `x' = -x/τ0 + a1·y`, `y' = -a2·y - a4·x + F(x(t-τ))`.
    MsS,
    /// Reduction keeping the saturating uptake factor and an arctan leak
    /// ("MS-in"): `x' = -x/τ0 + a1·y`,
    /// `y' = -a2·y - f4(x)·y - δ·B·atan(x) + F5(x(t-τ))`.
    MsIn,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Ms => "MS",
            Variant::Ms0 => "MS-0",
            Variant::MsS => "MS-s",
            Variant::MsIn => "MS-in",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MS" | "ms" => Ok(Variant::Ms),
            "MS-0" | "MS0" | "ms-0" | "ms0" => Ok(Variant::Ms0),
            "MS-s" | "MSs" | "ms-s" | "mss" => Ok(Variant::MsS),
            "MS-in" | "MSin" | "ms-in" | "msin" => Ok(Variant::MsIn),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected MS, MS-0, MS-s, or MS-in)"
            ))),
        }
    }
}

/// Constants of the reduced variants. Unused entries are zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReducedConstants {
    /// Glucose-to-insulin production gain (`a1` in MS-s/MS-in).
    pub a1: f64,
    /// Linear glucose clearance rate (`a2`).
    pub a2: f64,
    /// Linear insulin-dependent uptake gain (`a4`, MS-s only).
    pub a4: f64,
    /// Strength of the arctan leak term (`δ`, MS-in only; either sign).
    pub delta: f64,
    /// Amplitude of the arctan leak (`B`, MS-in only).
    pub b: f64,
}

/// One fully specified system instance. Immutable after construction; all
/// operations are pure, so configs can be shared freely across sweep workers.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Insulin production from glucose (slot `f1`; for reduced variants the
    /// affine quasi-steady gain `a1·y` lives here so generic code can map
    /// glucose-side intervals to insulin-side intervals).
    pub f1: FunctionSpec,
    /// Insulin-independent glucose uptake (slot `f2`).
    pub f2: FunctionSpec,
    /// Insulin-dependent uptake factor (slot `f4`).
    pub f4: FunctionSpec,
    /// Delayed feedback: glucose production from past insulin (slot `f5`).
    pub f5: FunctionSpec,
    /// Inverse insulin degradation rate; the delayed component decays as
    /// `-u/τ0`.
    pub tau0: f64,
    /// External glucose input (full variant only; cancels out of the
    /// translated system).
    pub g_in: f64,
    /// Utilisation coefficient multiplying `G·f4(I)` (full/translated).
    pub q: f64,
    /// Feedback delay.
    pub tau: f64,
    pub extras: ReducedConstants,
    /// Absolute glucose level the translated variant is anchored at
    /// (equilibrium of the parent full system); zero for all other variants.
    pub g_ref: f64,
}

/// Steady state of a config in its own coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Equilibrium {
    /// Glucose-side equilibrium (G* for the full variant, 0 for the rest).
    pub g_star: f64,
    /// Insulin-side equilibrium; always `τ0·f1(g_star)`.
    pub i_star: f64,
    /// Absolute value of the steady-state balance equation at `g_star`.
    pub residual: f64,
}

/// Coefficients of the linearized system about the equilibrium. The
/// characteristic equation is `(λ+mu1)(λ+mu2) + b + a·e^(-τλ) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct LinearCoeffs {
    pub mu1: f64,
    pub mu2: f64,
    /// Instantaneous cross-coupling gain. Nonnegative for the full and
    /// translated variants; the MS-in leak makes it `a1·δ·B`, either sign.
    pub b: f64,
    /// Delayed feedback gain `-f1'·f5'` (or `-a1·F'(0)` for reductions).
    pub a: f64,
    pub tau: f64,
}

/// Default bisection tolerance (in G) for equilibrium location.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

impl ModelConfig {
    /// Full system. Validates positivity of the rate constants and checks
    /// the structural hypotheses on the four slots.
    #[allow(clippy::too_many_arguments)]
    pub fn full(
        f1: FunctionSpec,
        f2: FunctionSpec,
        f4: FunctionSpec,
        f5: FunctionSpec,
        tau0: f64,
        g_in: f64,
        q: f64,
        tau: f64,
    ) -> Result<Self> {
        if !(tau0 > 0.0 && q > 0.0 && tau > 0.0 && g_in >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "full variant needs tau0, q, tau > 0 and g_in >= 0, got tau0 = {tau0}, g_in = {g_in}, q = {q}, tau = {tau}"
            )));
        }
        let report = validate_hypotheses(&f1, &f2, &f4, &f5);
        if !report.all_pass {
            let failing: Vec<String> = report
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| match &c.witness {
                    Some((u, msg)) => format!("{} (at u = {u:.3e}: {msg})", c.id),
                    None => c.id.to_string(),
                })
                .collect();
            return Err(Error::InvalidParameter(format!(
                "nonlinearity slots violate the structural hypotheses: {}",
                failing.join("; ")
            )));
        }
        Ok(ModelConfig {
            variant: Variant::Ms,
            f1,
            f2,
            f4,
            f5,
            tau0,
            g_in,
            q,
            tau,
            extras: ReducedConstants::default(),
            g_ref: 0.0,
        })
    }

    /// Linear-loss reduction ("MS-s"). `feedback` is the odd decreasing
    /// delayed-production shape; the `f1`/`f2` slots are auto-filled with the
    /// matching affine gains so generic interval helpers work unchanged.
    pub fn reduced_linear(
        feedback: FunctionSpec,
        tau0: f64,
        a1: f64,
        a2: f64,
        a4: f64,
        tau: f64,
    ) -> Result<Self> {
        if !(tau0 > 0.0 && a1 > 0.0 && a2 > 0.0 && a4 >= 0.0 && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "linear reduction needs tau0, a1, a2, tau > 0 and a4 >= 0, got tau0 = {tau0}, a1 = {a1}, a2 = {a2}, a4 = {a4}, tau = {tau}"
            )));
        }
        check_feedback_vanishes_at_origin(&feedback)?;
        Ok(ModelConfig {
            variant: Variant::MsS,
            f1: FunctionSpec::affine(a1),
            f2: FunctionSpec::affine(a2),
            f4: FunctionSpec::constant(0.0),
            f5: feedback,
            tau0,
            g_in: 0.0,
            q: 0.0,
            tau,
            extras: ReducedConstants {
                a1,
                a2,
                a4,
                ..Default::default()
            },
            g_ref: 0.0,
        })
    }

    /// Saturating-uptake reduction ("MS-in") with arctan leak `δ·B·atan(x)`.
    #[allow(clippy::too_many_arguments)]
    pub fn reduced_saturating(
        f4: FunctionSpec,
        feedback: FunctionSpec,
        tau0: f64,
        a1: f64,
        a2: f64,
        delta: f64,
        b: f64,
        tau: f64,
    ) -> Result<Self> {
        if !(tau0 > 0.0 && a1 > 0.0 && a2 > 0.0 && b >= 0.0 && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "saturating reduction needs tau0, a1, a2, tau > 0 and B >= 0, got tau0 = {tau0}, a1 = {a1}, a2 = {a2}, B = {b}, tau = {tau}"
            )));
        }
        check_feedback_vanishes_at_origin(&feedback)?;
        if !(f4.eval(0.0)? > 0.0) {
            return Err(Error::InvalidParameter(
                "saturating reduction needs an uptake factor with f4(0) > 0".into(),
            ));
        }
        Ok(ModelConfig {
            variant: Variant::MsIn,
            f1: FunctionSpec::affine(a1),
            f2: FunctionSpec::affine(a2),
            f4,
            f5: feedback,
            tau0,
            g_in: 0.0,
            q: 0.0,
            tau,
            extras: ReducedConstants {
                a1,
                a2,
                delta,
                b,
                ..Default::default()
            },
            g_ref: 0.0,
        })
    }

    /// Steady-state glucose-side outflow at glucose level `g`, with the
    /// insulin side eliminated through its own steady state `I = τ0·f1(g)`.
    /// This is the `F` of the limiting-map decomposition `Φ = F⁻¹∘H`.
    pub fn steady_outflow(&self, g: f64) -> Result<f64> {
        match self.variant {
            Variant::Ms => {
                let i = self.tau0 * self.f1.eval(g)?;
                Ok(self.f2.eval(g)? + self.q * g * self.f4.eval(i)?)
            }
            Variant::Ms0 => {
                let x = self.tau0 * self.f1.eval(g)?;
                Ok(self.f2.eval(g)?
                    + self.q * ((self.g_ref + g) * self.f4.eval(x)? - self.g_ref * self.f4.eval(0.0)?))
            }
            Variant::MsS => Ok((self.extras.a2 + self.extras.a4 * self.tau0 * self.extras.a1) * g),
            Variant::MsIn => {
                let x = self.tau0 * self.extras.a1 * g;
                Ok(self.extras.a2 * g
                    + self.f4.eval(x)? * g
                    + self.extras.delta * self.extras.b * x.atan())
            }
        }
    }

    /// Steady-state glucose-side inflow at glucose level `g` (the `H` of the
    /// limiting-map decomposition): external input plus delayed production
    /// evaluated at the quasi-steady insulin level.
    pub fn steady_inflow(&self, g: f64) -> Result<f64> {
        match self.variant {
            Variant::Ms => {
                let i = self.tau0 * self.f1.eval(g)?;
                Ok(self.g_in + self.f5.eval(i)?)
            }
            Variant::Ms0 | Variant::MsS | Variant::MsIn => {
                let x = self.tau0 * self.f1.eval(g)?;
                self.f5.eval(x)
            }
        }
    }

    /// Signed steady-state balance `outflow(g) - inflow(g)`; strictly
    /// increasing in `g`, so its unique zero is the equilibrium.
    pub fn equilibrium_residual(&self, g: f64) -> Result<f64> {
        Ok(self.steady_outflow(g)? - self.steady_inflow(g)?)
    }

    /// Locate the equilibrium. Full variant: bracket by doubling from [0, 1]
    /// (the residual at 0 is `-g_in - f5(τ0·f1(0)) < 0`), then bisect until
    /// the balance residual is within `tol`. Translated/reduced variants: the
    /// origin by construction, verified.
    pub fn solve_equilibrium(&self, tol: f64) -> Result<Equilibrium> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "equilibrium tolerance must be positive, got {tol}"
            )));
        }
        match self.variant {
            Variant::Ms => {
                let mut lo = 0.0f64;
                let mut hi = 1.0f64;
                let mut found = false;
                for _ in 0..60 {
                    if self.equilibrium_residual(hi)? > 0.0 {
                        found = true;
                        break;
                    }
                    lo = hi;
                    hi *= 2.0;
                }
                if !found {
                    return Err(Error::BracketFailure(format!(
                        "steady-state balance stayed negative out to g = {hi:.3e}; outflow is not unbounded (structural hypotheses violated)"
                    )));
                }
                let mut mid = 0.5 * (lo + hi);
                for _ in 0..200 {
                    mid = 0.5 * (lo + hi);
                    let r = self.equilibrium_residual(mid)?;
                    if r < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * mid.max(1.0) {
                        break;
                    }
                }
                let residual = self.equilibrium_residual(mid)?.abs();
                if residual > tol {
                    return Err(Error::NoConvergence(format!(
                        "equilibrium bisection stalled with residual {residual:.3e} > {tol:.3e}"
                    )));
                }
                Ok(Equilibrium {
                    g_star: mid,
                    i_star: self.tau0 * self.f1.eval(mid)?,
                    residual,
                })
            }
            Variant::Ms0 | Variant::MsS | Variant::MsIn => {
                let residual = self.equilibrium_residual(0.0)?.abs();
                if residual > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "origin is not a steady state of this {} instance (balance residual {residual:.3e}); the feedback slot must vanish at 0",
                        self.variant
                    )));
                }
                Ok(Equilibrium {
                    g_star: 0.0,
                    i_star: 0.0,
                    residual,
                })
            }
        }
    }

    /// Translate the full system so the equilibrium sits at the origin.
    /// Production/uptake slots are recentered to vanish at 0; the uptake
    /// factor is shifted without recentering (its equilibrium value enters
    /// the translated right-hand side).
    pub fn translate_to_zero(&self) -> Result<ModelConfig> {
        if self.variant != Variant::Ms {
            return Err(Error::InvalidParameter(format!(
                "only the full variant can be translated, got {}",
                self.variant
            )));
        }
        let eq = self.solve_equilibrium(EQUILIBRIUM_TOL)?;
        Ok(ModelConfig {
            variant: Variant::Ms0,
            f1: FunctionSpec::shifted(self.f1.clone(), eq.g_star, true)?,
            f2: FunctionSpec::shifted(self.f2.clone(), eq.g_star, true)?,
            f4: FunctionSpec::shifted(self.f4.clone(), eq.i_star, false)?,
            f5: FunctionSpec::shifted(self.f5.clone(), eq.i_star, true)?,
            tau0: self.tau0,
            g_in: self.g_in,
            q: self.q,
            tau: self.tau,
            extras: self.extras,
            g_ref: eq.g_star,
        })
    }

    /// Coefficients of the linearization about the given equilibrium.
    /// Refuses to differentiate across a branch junction of a piecewise slot
    /// rather than silently picking a side; move the parameters so the
    /// equilibrium clears the junction.
    pub fn linearize(&self, eq: &Equilibrium) -> Result<LinearCoeffs> {
        let mu1 = 1.0 / self.tau0;
        let (mu2, b, a) = match self.variant {
            Variant::Ms | Variant::Ms0 => {
                let f1p = smooth_derivative(&self.f1, eq.g_star, "f1 at the equilibrium")?;
                let f2p = smooth_derivative(&self.f2, eq.g_star, "f2 at the equilibrium")?;
                let f4v = self.f4.eval(eq.i_star)?;
                let f4p = smooth_derivative(&self.f4, eq.i_star, "f4 at the equilibrium")?;
                let f5p = smooth_derivative(&self.f5, eq.i_star, "f5 at the equilibrium")?;
                let g_abs = self.g_ref + eq.g_star;
                let mu2 = f2p + self.q * f4v;
                let b = self.q * g_abs * f1p * f4p;
                let a = -f1p * f5p;
                if !(mu2 > 0.0 && b >= 0.0 && a > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "linearization signs violate the structural hypotheses: mu2 = {mu2:.3e}, b = {b:.3e}, a = {a:.3e}"
                    )));
                }
                (mu2, b, a)
            }
            Variant::MsS => {
                let fp = smooth_derivative(&self.f5, 0.0, "feedback slope at the origin")?;
                (
                    self.extras.a2,
                    self.extras.a1 * self.extras.a4,
                    -self.extras.a1 * fp,
                )
            }
            Variant::MsIn => {
                let fp = smooth_derivative(&self.f5, 0.0, "feedback slope at the origin")?;
                (
                    self.extras.a2 + self.f4.eval(0.0)?,
                    self.extras.a1 * self.extras.delta * self.extras.b,
                    -self.extras.a1 * fp,
                )
            }
        };
        Ok(LinearCoeffs {
            mu1,
            mu2,
            b,
            a,
            tau: self.tau,
        })
    }

    /// Right-hand side: time derivative of (insulin-side, glucose-side)
    /// given the current state and the delayed insulin-side value.
    pub fn rhs(&self, i: f64, g: f64, i_delayed: f64) -> Result<(f64, f64)> {
        match self.variant {
            Variant::Ms => Ok((
                self.f1.eval(g)? - i / self.tau0,
                self.g_in - self.f2.eval(g)? - self.q * g * self.f4.eval(i)?
                    + self.f5.eval(i_delayed)?,
            )),
            Variant::Ms0 => Ok((
                self.f1.eval(g)? - i / self.tau0,
                -self.f2.eval(g)?
                    - self.q * ((self.g_ref + g) * self.f4.eval(i)? - self.g_ref * self.f4.eval(0.0)?)
                    + self.f5.eval(i_delayed)?,
            )),
            Variant::MsS => Ok((
                -i / self.tau0 + self.extras.a1 * g,
                -self.extras.a2 * g - self.extras.a4 * i + self.f5.eval(i_delayed)?,
            )),
            Variant::MsIn => Ok((
                -i / self.tau0 + self.extras.a1 * g,
                -self.extras.a2 * g - self.f4.eval(i)? * g
                    - self.extras.delta * self.extras.b * i.atan()
                    + self.f5.eval(i_delayed)?,
            )),
        }
    }
}

fn check_feedback_vanishes_at_origin(feedback: &FunctionSpec) -> Result<()> {
    let v0 = feedback.eval(0.0)?;
    if v0.abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "reduced variants need a feedback slot vanishing at the origin, got F(0) = {v0:.3e}"
        )));
    }
    Ok(())
}

fn smooth_derivative(f: &FunctionSpec, u: f64, context: &str) -> Result<f64> {
    let Derivative { value, smooth } = f.eval_derivative(u)?;
    if !smooth {
        return Err(Error::NonSmooth {
            u,
            context: context.to_string(),
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn canonical(tau: f64) -> ModelConfig {
        ModelConfig::full(
            FunctionSpec::hill_increasing(2.0, 2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_increasing(3.0, 1.0, 1.0, 0.0).unwrap(),
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_decreasing(4.0, 1.0, 1.0, 0.0).unwrap(),
            1.0,
            1.0,
            1.0,
            tau,
        )
        .unwrap()
    }

    fn reduced_linear_knee(tau: f64) -> ModelConfig {
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

    #[test]
    fn canonical_equilibrium_location() {
        let cfg = canonical(2.0);
        let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        assert!((eq.g_star - 0.876144693020692).abs() < 1e-9);
        assert!((eq.i_star - 1.3685411881540306).abs() < 1e-9);
        assert!(eq.residual <= EQUILIBRIUM_TOL);
    }

    #[test]
    fn residual_negative_at_zero_and_increasing() {
        let cfg = canonical(2.0);
        assert!(cfg.equilibrium_residual(0.0).unwrap() < 0.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..60 {
            let g = 0.05 * k as f64;
            let r = cfg.equilibrium_residual(g).unwrap();
            assert!(r > prev, "balance must increase at g = {g}");
            prev = r;
        }
    }

    #[test]
    fn raising_input_raises_equilibrium() {
        let base = canonical(2.0);
        let mut richer = base.clone();
        richer.g_in = 1.5;
        let g_lo = base.solve_equilibrium(1e-10).unwrap().g_star;
        let g_hi = richer.solve_equilibrium(1e-10).unwrap().g_star;
        assert!(g_hi > g_lo + 1e-3);
    }

    #[test]
    fn canonical_linearization_coefficients() {
        let cfg = canonical(2.0);
        let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let lin = cfg.linearize(&eq).unwrap();
        assert_eq!(lin.mu1, 1.0);
        assert!((lin.mu2 - 2.3221717409083125).abs() < 1e-8);
        assert!((lin.b - 0.1710322106670033).abs() < 1e-8);
        assert!((lin.a - 0.799744830408311).abs() < 1e-8);
        assert_eq!(lin.tau, 2.0);
    }

    #[test]
    fn canonical_rhs_probe_point() {
        let cfg = canonical(2.0);
        let (di, dg) = cfg.rhs(1.0, 2.0, 0.8).unwrap();
        assert!((di - 1.1).abs() < 1e-15);
        assert!((dg - (-1.563175941175226)).abs() < 1e-12);
    }

    #[test]
    fn rhs_vanishes_at_equilibrium() {
        for cfg in [canonical(2.0), reduced_linear_knee(5.0)] {
            let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
            let (di, dg) = cfg.rhs(eq.i_star, eq.g_star, eq.i_star).unwrap();
            assert!(di.abs() < 1e-12 && dg.abs() < 1e-12, "{}", cfg.variant);
        }
    }

    #[test]
    fn translated_equilibrium_is_origin() {
        let cfg = canonical(2.0).translate_to_zero().unwrap();
        assert_eq!(cfg.variant, Variant::Ms0);
        let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        assert_eq!(eq.g_star, 0.0);
        assert!(eq.residual < 1e-12);
        let (di, dg) = cfg.rhs(0.0, 0.0, 0.0).unwrap();
        assert!(di.abs() < 1e-12 && dg.abs() < 1e-12);
    }

    #[test]
    fn translation_conjugates_rhs() {
        let full = canonical(2.0);
        let eq = full.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let shifted = full.translate_to_zero().unwrap();
        for (x, y, xd) in [(0.1, -0.2, 0.05), (-0.3, 0.4, -0.1), (0.25, 0.25, 0.25)] {
            let (a1, a2) = shifted.rhs(x, y, xd).unwrap();
            let (b1, b2) = full.rhs(eq.i_star + x, eq.g_star + y, eq.i_star + xd).unwrap();
            assert!((a1 - b1).abs() < 1e-12, "insulin side at ({x},{y})");
            assert!((a2 - b2).abs() < 1e-12, "glucose side at ({x},{y})");
        }
    }

    #[test]
    fn translated_uptake_slot_keeps_restoring_sign() {
        let cfg = canonical(2.0).translate_to_zero().unwrap();
        for y in [-0.5, 0.5] {
            let v = cfg.f2.eval(y).unwrap();
            assert!(y * v > 0.0, "translated f2 must restore toward 0 at y = {y}");
        }
    }

    #[test]
    fn translation_linearization_matches_full() {
        let full = canonical(2.0);
        let eq_full = full.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let lin_full = full.linearize(&eq_full).unwrap();
        let shifted = full.translate_to_zero().unwrap();
        let eq0 = shifted.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let lin0 = shifted.linearize(&eq0).unwrap();
        assert!((lin_full.mu2 - lin0.mu2).abs() < 1e-9);
        assert!((lin_full.b - lin0.b).abs() < 1e-9);
        assert!((lin_full.a - lin0.a).abs() < 1e-9);
    }

    #[test]
    fn reduced_linear_hand_coefficients() {
        let cfg = reduced_linear_knee(5.0);
        let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let lin = cfg.linearize(&eq).unwrap();
        assert_eq!(lin.mu1, 2.0);
        assert_eq!(lin.mu2, 0.6);
        assert!((lin.b - 0.4).abs() < 1e-15);
        assert!((lin.a - 2.0).abs() < 1e-15);
    }

    #[test]
    fn reduced_saturating_hand_coefficients() {
        // Steep-knee instance: a = a1 (unit feedback slope), b = a1·δ·B < 0.
        let cfg = ModelConfig::reduced_saturating(
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.1).unwrap(),
            FunctionSpec::make_fa(1.1, 5.7).unwrap(),
            1.0 / 24.0,
            48.0,
            2.78,
            -0.55,
            1.0,
            5.0,
        )
        .unwrap();
        let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let lin = cfg.linearize(&eq).unwrap();
        assert_eq!(lin.mu1, 24.0);
        assert!((lin.mu2 - 2.98).abs() < 1e-12);
        assert!((lin.b - (-26.4)).abs() < 1e-12);
        assert!((lin.a - 48.0).abs() < 1e-12);

        // Flat-core instance: zero feedback slope at the origin gives a = 0.
        let flat = ModelConfig::reduced_saturating(
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.1).unwrap(),
            FunctionSpec::make_fb(1.0, 1.0, 10.0, 1).unwrap(),
            0.125,
            16.0,
            1.8,
            0.1,
            1.0,
            5.0,
        )
        .unwrap();
        let eqf = flat.solve_equilibrium(EQUILIBRIUM_TOL).unwrap();
        let linf = flat.linearize(&eqf).unwrap();
        assert!((linf.mu2 - 2.0).abs() < 1e-12);
        assert!((linf.b - 1.6).abs() < 1e-12);
        assert_eq!(linf.a, 0.0);
    }

    #[test]
    fn linearize_refuses_junction_equilibrium() {
        // Shift a knee feedback so its branch junction lands exactly at the
        // origin, where the reduction's linearization differentiates.
        let inner = FunctionSpec::make_fa(1.0, 10.0).unwrap();
        let at_junction = FunctionSpec::shifted(inner, FRAC_PI_2, true).unwrap();
        let cfg = ModelConfig {
            variant: Variant::MsS,
            f1: FunctionSpec::affine(1.0),
            f2: FunctionSpec::affine(1.0),
            f4: FunctionSpec::constant(0.0),
            f5: at_junction,
            tau0: 1.0,
            g_in: 0.0,
            q: 0.0,
            tau: 5.0,
            extras: ReducedConstants {
                a1: 1.0,
                a2: 1.0,
                a4: 0.0,
                ..Default::default()
            },
            g_ref: 0.0,
        };
        let eq = Equilibrium {
            g_star: 0.0,
            i_star: 0.0,
            residual: 0.0,
        };
        assert!(matches!(
            cfg.linearize(&eq),
            Err(Error::NonSmooth { .. })
        ));
    }

    #[test]
    fn full_constructor_rejects_hypothesis_violations() {
        // increasing f5 violates the decreasing-feedback hypothesis
        let err = ModelConfig::full(
            FunctionSpec::hill_increasing(2.0, 2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_increasing(3.0, 1.0, 1.0, 0.0).unwrap(),
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_increasing(4.0, 1.0, 1.0, 0.1).unwrap(),
            1.0,
            1.0,
            1.0,
            2.0,
        );
        assert!(matches!(err, Err(Error::InvalidParameter(msg)) if msg.contains("H5")));
    }

    #[test]
    fn variant_labels_round_trip() {
        for v in [Variant::Ms, Variant::Ms0, Variant::MsS, Variant::MsIn] {
            let s = v.to_string();
            assert_eq!(s.parse::<Variant>().unwrap(), v);
        }
        assert!("MS-x".parse::<Variant>().is_err());
    }
}
