//! TOML configuration loading.
//!
//! A config file describes one model (variant, rate constants, and the
//! nonlinearity in each slot) plus optional `[simulate]` and `[sweep]`
//! defaults that front-ends can use to seed their options. Parsing is
//! strict: unknown keys, missing parameters, and sections that do not
//! belong to the declared variant are all hard errors, so a typo cannot
//! silently fall back to a default.
//!
//! ```toml
//! [model]
//! variant = "reduced-linear"   # or "full", "reduced-saturating"
//! tau = 10.0
//! tau0 = 0.5
//! a1 = 2.0
//! a2 = 0.6
//! a4 = 0.2
//!
//! [feedback]
//! kind = "odd-knee-arctan"     # the delayed production shape
//! a = 1.0
//! k = 10.0
//! ```
//!
//! Function tables accept these kinds: `hill-increasing` / `hill-decreasing`
//! (`p`, `h`, `q`, `c0`), `arctan-saturating` (`a`, `b`, `eps`),
//! `odd-knee-arctan` (`a`, `k`), `odd-poly-arctan` (`a`, `b`, `k`, `n`),
//! `affine` (`slope`), and `constant` (`value`).

use crate::ddesim::{IntegratorOptions, Method};
use crate::error::{Error, Result};
use crate::functions::FunctionSpec;
use crate::model::ModelConfig;
use serde::Deserialize;
use std::path::Path;

/// Defaults for a single integration, as read from `[simulate]`.
#[derive(Debug, Clone)]
pub struct SimulateDefaults {
    pub t_end: f64,
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Fixed step for the non-adaptive methods.
    pub dt: Option<f64>,
    pub dt_min: f64,
    pub dt_init: f64,
    /// Constant initial data `(insulin, glucose)`; front-ends fall back to
    /// their own seeding when absent.
    pub ic: Option<(f64, f64)>,
}

impl Default for SimulateDefaults {
    fn default() -> Self {
        let base = IntegratorOptions::adaptive(200.0);
        Self {
            t_end: base.t_end,
            method: base.method,
            rtol: base.rtol,
            atol: base.atol,
            dt: None,
            dt_min: base.dt_min,
            dt_init: base.dt_init,
            ic: None,
        }
    }
}

impl SimulateDefaults {
    /// Materialize integrator options from these defaults.
    pub fn integrator_options(&self) -> IntegratorOptions {
        let mut opts = match self.method {
            Method::Rkf45Adaptive => IntegratorOptions::adaptive(self.t_end),
            m => IntegratorOptions::fixed(m, self.dt.unwrap_or(0.0), self.t_end),
        };
        opts.rtol = self.rtol;
        opts.atol = self.atol;
        opts.dt_min = self.dt_min;
        opts.dt_init = self.dt_init;
        opts
    }
}

/// Defaults for sweeps and censuses, as read from `[sweep]`.
#[derive(Debug, Clone)]
pub struct SweepDefaults {
    /// Constant initial levels for an initial-condition sweep.
    pub values: Vec<f64>,
    /// Delays for a delay sweep.
    pub taus: Vec<f64>,
    /// Horizon per unit delay for delay-sweep runs.
    pub t_end_per_tau: f64,
    /// Constant initial level shared by all delay-sweep runs.
    pub tau_seed: f64,
    /// Seeds for a multistability census.
    pub seeds: Vec<f64>,
    /// Relative matching tolerance when grouping census outcomes.
    pub match_tol: f64,
}

impl Default for SweepDefaults {
    fn default() -> Self {
        Self {
            values: Vec::new(),
            taus: Vec::new(),
            t_end_per_tau: 100.0,
            tau_seed: 1.0,
            seeds: Vec::new(),
            match_tol: 0.05,
        }
    }
}

/// A fully validated configuration file.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub model: ModelConfig,
    pub simulate: SimulateDefaults,
    pub sweep: SweepDefaults,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileToml {
    model: ModelToml,
    f1: Option<toml::Table>,
    f2: Option<toml::Table>,
    f4: Option<toml::Table>,
    f5: Option<toml::Table>,
    feedback: Option<toml::Table>,
    simulate: Option<SimulateToml>,
    sweep: Option<SweepToml>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelToml {
    variant: String,
    tau: f64,
    tau0: f64,
    g_in: Option<f64>,
    q: Option<f64>,
    a1: Option<f64>,
    a2: Option<f64>,
    a4: Option<f64>,
    delta: Option<f64>,
    b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateToml {
    t_end: Option<f64>,
    method: Option<String>,
    rtol: Option<f64>,
    atol: Option<f64>,
    dt: Option<f64>,
    dt_min: Option<f64>,
    dt_init: Option<f64>,
    ic: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepToml {
    values: Option<Vec<f64>>,
    taus: Option<Vec<f64>>,
    t_end_per_tau: Option<f64>,
    tau_seed: Option<f64>,
    seeds: Option<Vec<f64>>,
    match_tol: Option<f64>,
}

fn config_err(section: &str, detail: impl std::fmt::Display) -> Error {
    Error::Config(format!("[{section}]: {detail}"))
}

/// Build one nonlinearity from its TOML table, strictly.
fn function_from_table(slot: &str, mut table: toml::Table) -> Result<FunctionSpec> {
    let kind = match table.remove("kind") {
        Some(toml::Value::String(s)) => s,
        Some(other) => {
            return Err(config_err(
                slot,
                format!("`kind` must be a string, got {other}"),
            ))
        }
        None => return Err(config_err(slot, "missing `kind`")),
    };
    let value = toml::Value::Table(table);
    macro_rules! params {
        ($ty:ty) => {
            value
                .try_into::<$ty>()
                .map_err(|e| config_err(slot, format!("{kind}: {e}")))?
        };
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Hill {
        p: f64,
        h: f64,
        q: f64,
        c0: f64,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct ArctanSat {
        a: f64,
        b: f64,
        eps: f64,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Knee {
        a: f64,
        k: f64,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct PolyCore {
        a: f64,
        b: f64,
        k: f64,
        n: u32,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Affine {
        slope: f64,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Constant {
        value: f64,
    }

    match kind.as_str() {
        "hill-increasing" => {
            let p = params!(Hill);
            FunctionSpec::hill_increasing(p.p, p.h, p.q, p.c0)
        }
        "hill-decreasing" => {
            let p = params!(Hill);
            FunctionSpec::hill_decreasing(p.p, p.h, p.q, p.c0)
        }
        "arctan-saturating" => {
            let p = params!(ArctanSat);
            FunctionSpec::make_f4_arctan(p.a, p.b, p.eps)
        }
        "odd-knee-arctan" => {
            let p = params!(Knee);
            FunctionSpec::make_fa(p.a, p.k)
        }
        "odd-poly-arctan" => {
            let p = params!(PolyCore);
            FunctionSpec::make_fb(p.a, p.b, p.k, p.n)
        }
        "affine" => Ok(FunctionSpec::affine(params!(Affine).slope)),
        "constant" => Ok(FunctionSpec::constant(params!(Constant).value)),
        other => Err(config_err(
            slot,
            format!(
                "unknown kind `{other}` (expected hill-increasing, hill-decreasing, \
                 arctan-saturating, odd-knee-arctan, odd-poly-arctan, affine, or constant)"
            ),
        )),
    }
}

fn require<T>(section: &str, key: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| config_err(section, format!("missing `{key}` for this variant")))
}

fn forbid<T>(section: &str, key: &str, variant: &str, v: &Option<T>) -> Result<()> {
    if v.is_some() {
        return Err(config_err(
            section,
            format!("`{key}` does not apply to the {variant} variant"),
        ));
    }
    Ok(())
}

fn build_model(file: FileToml) -> Result<(ModelConfig, Option<SimulateToml>, Option<SweepToml>)> {
    let m = &file.model;
    let model = match m.variant.as_str() {
        "full" => {
            for (key, opt) in [
                ("a1", &m.a1),
                ("a2", &m.a2),
                ("a4", &m.a4),
                ("delta", &m.delta),
                ("b", &m.b),
            ] {
                forbid("model", key, "full", opt)?;
            }
            if file.feedback.is_some() {
                return Err(config_err(
                    "feedback",
                    "the full variant takes its delayed production in [f5]",
                ));
            }
            let f1 = function_from_table("f1", require("f1", "table", file.f1)?)?;
            let f2 = function_from_table("f2", require("f2", "table", file.f2)?)?;
            let f4 = function_from_table("f4", require("f4", "table", file.f4)?)?;
            let f5 = function_from_table("f5", require("f5", "table", file.f5)?)?;
            ModelConfig::full(
                f1,
                f2,
                f4,
                f5,
                m.tau0,
                require("model", "g_in", m.g_in)?,
                require("model", "q", m.q)?,
                m.tau,
            )?
        }
        "reduced-linear" => {
            for (key, opt) in [
                ("g_in", &m.g_in),
                ("q", &m.q),
                ("delta", &m.delta),
                ("b", &m.b),
            ] {
                forbid("model", key, "reduced-linear", opt)?;
            }
            for (name, table) in [
                ("f1", &file.f1),
                ("f2", &file.f2),
                ("f4", &file.f4),
                ("f5", &file.f5),
            ] {
                forbid(name, "table", "reduced-linear", table)?;
            }
            let feedback =
                function_from_table("feedback", require("feedback", "table", file.feedback)?)?;
            ModelConfig::reduced_linear(
                feedback,
                m.tau0,
                require("model", "a1", m.a1)?,
                require("model", "a2", m.a2)?,
                require("model", "a4", m.a4)?,
                m.tau,
            )?
        }
        "reduced-saturating" => {
            for (key, opt) in [("g_in", &m.g_in), ("q", &m.q), ("a4", &m.a4)] {
                forbid("model", key, "reduced-saturating", opt)?;
            }
            for (name, table) in [("f1", &file.f1), ("f2", &file.f2), ("f5", &file.f5)] {
                forbid(name, "table", "reduced-saturating", table)?;
            }
            let f4 = function_from_table("f4", require("f4", "table", file.f4)?)?;
            let feedback =
                function_from_table("feedback", require("feedback", "table", file.feedback)?)?;
            ModelConfig::reduced_saturating(
                f4,
                feedback,
                m.tau0,
                require("model", "a1", m.a1)?,
                require("model", "a2", m.a2)?,
                require("model", "delta", m.delta)?,
                require("model", "b", m.b)?,
                m.tau,
            )?
        }
        other => {
            return Err(config_err(
                "model",
                format!(
                    "unknown variant `{other}` (expected full, reduced-linear, \
                     or reduced-saturating)"
                ),
            ))
        }
    };
    Ok((model, file.simulate, file.sweep))
}

fn build_simulate(s: Option<SimulateToml>) -> Result<SimulateDefaults> {
    let mut out = SimulateDefaults::default();
    let Some(s) = s else { return Ok(out) };
    if let Some(t) = s.t_end {
        out.t_end = t;
    }
    if let Some(m) = s.method {
        out.method = m
            .parse()
            .map_err(|e: Error| config_err("simulate", e.to_string()))?;
    }
    if let Some(v) = s.rtol {
        out.rtol = v;
    }
    if let Some(v) = s.atol {
        out.atol = v;
    }
    out.dt = s.dt;
    if let Some(v) = s.dt_min {
        out.dt_min = v;
    }
    if let Some(v) = s.dt_init {
        out.dt_init = v;
    }
    out.ic = s.ic.map(|[i, g]| (i, g));
    if out.method != Method::Rkf45Adaptive && out.dt.is_none() {
        return Err(config_err(
            "simulate",
            format!("method {} needs an explicit `dt`", out.method),
        ));
    }
    Ok(out)
}

fn build_sweep(s: Option<SweepToml>) -> Result<SweepDefaults> {
    let mut out = SweepDefaults::default();
    let Some(s) = s else { return Ok(out) };
    if let Some(v) = s.values {
        out.values = v;
    }
    if let Some(v) = s.taus {
        out.taus = v;
    }
    if let Some(v) = s.t_end_per_tau {
        if !(v > 0.0) {
            return Err(config_err("sweep", "t_end_per_tau must be positive"));
        }
        out.t_end_per_tau = v;
    }
    if let Some(v) = s.tau_seed {
        out.tau_seed = v;
    }
    if let Some(v) = s.seeds {
        out.seeds = v;
    }
    if let Some(v) = s.match_tol {
        if !(v > 0.0) {
            return Err(config_err("sweep", "match_tol must be positive"));
        }
        out.match_tol = v;
    }
    Ok(out)
}

/// Parse a configuration from TOML text.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let file: FileToml =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let (model, simulate, sweep) = build_model(file)?;
    Ok(LoadedConfig {
        model,
        simulate: build_simulate(simulate)?,
        sweep: build_sweep(sweep)?,
    })
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;

    const FULL: &str = r#"
        [model]
        variant = "full"
        tau = 2.0
        tau0 = 1.0
        g_in = 1.0
        q = 1.0

        [f1]
        kind = "hill-increasing"
        p = 2.0
        h = 2.0
        q = 1.0
        c0 = 0.5

        [f2]
        kind = "hill-increasing"
        p = 3.0
        h = 1.0
        q = 1.0
        c0 = 0.0

        [f4]
        kind = "arctan-saturating"
        a = 2.0
        b = 1.0
        eps = 0.5

        [f5]
        kind = "hill-decreasing"
        p = 4.0
        h = 1.0
        q = 1.0
        c0 = 0.0
    "#;

    const REDUCED_LINEAR: &str = r#"
        [model]
        variant = "reduced-linear"
        tau = 10.0
        tau0 = 0.5
        a1 = 2.0
        a2 = 0.6
        a4 = 0.2

        [feedback]
        kind = "odd-knee-arctan"
        a = 1.0
        k = 10.0
    "#;

    const REDUCED_SATURATING: &str = r#"
        [model]
        variant = "reduced-saturating"
        tau = 5.0
        tau0 = 0.041666666666666664
        a1 = 48.0
        a2 = 2.78
        delta = -0.55
        b = 1.0

        [f4]
        kind = "arctan-saturating"
        a = 2.0
        b = 1.0
        eps = 0.1

        [feedback]
        kind = "odd-knee-arctan"
        a = 1.1
        k = 5.7
    "#;

    #[test]
    fn full_variant_round_trips_through_toml() {
        let loaded = parse_config(FULL).unwrap();
        assert_eq!(loaded.model.variant, Variant::Ms);
        assert_eq!(loaded.model.tau, 2.0);
        let eq = loaded.model.solve_equilibrium(1e-12).unwrap();
        // same equilibrium as the directly constructed model
        let direct = ModelConfig::full(
            FunctionSpec::hill_increasing(2.0, 2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_increasing(3.0, 1.0, 1.0, 0.0).unwrap(),
            FunctionSpec::make_f4_arctan(2.0, 1.0, 0.5).unwrap(),
            FunctionSpec::hill_decreasing(4.0, 1.0, 1.0, 0.0).unwrap(),
            1.0,
            1.0,
            1.0,
            2.0,
        )
        .unwrap();
        let eq2 = direct.solve_equilibrium(1e-12).unwrap();
        assert_eq!(eq.g_star, eq2.g_star);
        assert_eq!(eq.i_star, eq2.i_star);
        // defaults apply when the sections are absent
        assert_eq!(loaded.simulate.t_end, 200.0);
        assert_eq!(loaded.simulate.method, Method::Rkf45Adaptive);
        assert_eq!(loaded.simulate.rtol, 1e-8);
        assert!(loaded.sweep.values.is_empty());
        assert_eq!(loaded.sweep.match_tol, 0.05);
    }

    #[test]
    fn reduced_linear_fills_the_affine_slots() {
        let loaded = parse_config(REDUCED_LINEAR).unwrap();
        let m = &loaded.model;
        assert_eq!(m.variant, Variant::MsS);
        assert_eq!(m.extras.a1, 2.0);
        assert_eq!(m.extras.a2, 0.6);
        assert_eq!(m.extras.a4, 0.2);
        assert_eq!(m.f1.eval(3.0).unwrap(), 6.0);
        assert_eq!(m.f2.eval(3.0).unwrap(), 0.6 * 3.0);
    }

    #[test]
    fn reduced_saturating_matches_direct_construction() {
        let loaded = parse_config(REDUCED_SATURATING).unwrap();
        let direct = ModelConfig::reduced_saturating(
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
        assert_eq!(loaded.model.variant, Variant::MsIn);
        let a = loaded.model.rhs(0.4, -0.3, 0.25).unwrap();
        let b = direct.rhs(0.4, -0.3, 0.25).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulate_and_sweep_sections_override_defaults() {
        let text = format!(
            "{REDUCED_LINEAR}
            [simulate]
            t_end = 800.0
            method = \"rk4\"
            dt = 0.05
            rtol = 1e-10
            ic = [1.0, 1.0]

            [sweep]
            values = [0.5, 1.0]
            taus = [10.0, 20.0]
            t_end_per_tau = 80.0
            tau_seed = 1.5
            seeds = [0.3, 0.7]
            match_tol = 0.02
        "
        );
        let loaded = parse_config(&text).unwrap();
        assert_eq!(loaded.simulate.t_end, 800.0);
        assert_eq!(loaded.simulate.method, Method::Rk4Fixed);
        assert_eq!(loaded.simulate.dt, Some(0.05));
        assert_eq!(loaded.simulate.rtol, 1e-10);
        assert_eq!(loaded.simulate.ic, Some((1.0, 1.0)));
        let opts = loaded.simulate.integrator_options();
        assert_eq!(opts.method, Method::Rk4Fixed);
        assert_eq!(opts.dt, Some(0.05));
        assert_eq!(opts.t_end, 800.0);
        assert_eq!(loaded.sweep.values, vec![0.5, 1.0]);
        assert_eq!(loaded.sweep.taus, vec![10.0, 20.0]);
        assert_eq!(loaded.sweep.t_end_per_tau, 80.0);
        assert_eq!(loaded.sweep.tau_seed, 1.5);
        assert_eq!(loaded.sweep.seeds, vec![0.3, 0.7]);
        assert_eq!(loaded.sweep.match_tol, 0.02);
    }

    #[test]
    fn strictness_rejects_typos_and_misplaced_keys() {
        // unknown top-level key
        assert!(parse_config(&format!("{REDUCED_LINEAR}\n[extra]\nx = 1\n")).is_err());
        // unknown model key
        assert!(parse_config(&REDUCED_LINEAR.replace("tau0 = 0.5", "tau00 = 0.5")).is_err());
        // unknown function parameter
        assert!(parse_config(&REDUCED_LINEAR.replace("k = 10.0", "k = 10.0\nzz = 1")).is_err());
        // unknown function kind
        assert!(parse_config(&REDUCED_LINEAR.replace("odd-knee-arctan", "mystery")).is_err());
        // key from another variant
        assert!(parse_config(&REDUCED_LINEAR.replace("a4 = 0.2", "a4 = 0.2\nq = 1.0")).is_err());
        // missing required section
        assert!(parse_config(REDUCED_LINEAR.split("[feedback]").next().unwrap()).is_err());
        // fixed-step method without a step
        let bad = format!("{REDUCED_LINEAR}\n[simulate]\nmethod = \"euler\"\n");
        assert!(parse_config(&bad).is_err());
        // bad method label
        let bad = format!("{REDUCED_LINEAR}\n[simulate]\nmethod = \"rk9\"\n");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn constructor_validation_still_applies() {
        // a1 must be positive for the reduced-linear constructor
        let bad = REDUCED_LINEAR.replace("a1 = 2.0", "a1 = -2.0");
        let err = parse_config(&bad).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "{err}");
    }

    #[test]
    fn loads_from_a_file_and_reports_missing_paths() {
        let dir = std::env::temp_dir().join("gidm-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.cfg");
        std::fs::write(&path, REDUCED_SATURATING).unwrap();
        let loaded = load_config(&path).unwrap();
        assert_eq!(loaded.model.variant, Variant::MsIn);
        let missing = dir.join("does-not-exist.cfg");
        assert!(matches!(load_config(&missing), Err(Error::Config(_))));
    }
}
