//! Trajectory measurement and survey orchestration.
//!
//! This module turns raw integrator output into the quantities the rest of
//! the toolkit reasons about: zero crossings of each component around its
//! equilibrium level, period and amplitude estimates for the settled part of
//! a run, a converges/periodic/undecided verdict, initial-condition and
//! delay sweeps, a multistability census over many seeds, and a consistency
//! check of the census against the limiting-map classification.
//!
//! Period estimation is deliberately redundant: the primary estimate comes
//! from averaging alternate zero-crossing gaps, and it is cross-checked
//! against an autocorrelation peak of the resampled tail. The two must agree
//! before a run is called periodic; disagreement downgrades the verdict to
//! undecided rather than guessing.

use crate::ddesim::{integrate, InitialData, IntegratorOptions, Trajectory};
use crate::error::{Error, Result};
use crate::intervalmap::{analyze_map, MapOptions, Regime};
use crate::model::{ModelConfig, EQUILIBRIUM_TOL};
use rayon::prelude::*;

/// Tuning knobs for trajectory measurement.
#[derive(Debug, Clone)]
pub struct MeasureOptions {
    /// Trailing fraction of the run used for all measurements (the leading
    /// `1 - tail_fraction` is discarded as transient).
    pub tail_fraction: f64,
    /// A run counts as converged when the distance to equilibrium stays
    /// below this over the last fifth of the run.
    pub conv_tol: f64,
    /// Maximum relative disagreement between the zero-gap period and the
    /// autocorrelation period before the verdict degrades to undecided.
    pub period_agree_tol: f64,
    /// Minimum number of zero crossings required for a period estimate.
    pub min_zeros: usize,
    /// Uniform resampling resolution of the autocorrelation estimate.
    pub autocorr_samples: usize,
    /// Normalized autocorrelation a peak must exceed to count as a period.
    pub autocorr_threshold: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            tail_fraction: 0.5,
            conv_tol: 1e-4,
            period_agree_tol: 0.01,
            min_zeros: 5,
            autocorr_samples: 4096,
            autocorr_threshold: 0.2,
        }
    }
}

impl MeasureOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail fraction must lie in (0, 1), got {}",
                self.tail_fraction
            )));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "convergence tolerance must be positive, got {}",
                self.conv_tol
            )));
        }
        if !(self.period_agree_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period agreement tolerance must be positive, got {}",
                self.period_agree_tol
            )));
        }
        if self.min_zeros < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least 3 zeros for a period, got min_zeros = {}",
                self.min_zeros
            )));
        }
        if self.autocorr_samples < 16 {
            return Err(Error::InvalidParameter(format!(
                "autocorrelation needs at least 16 samples, got {}",
                self.autocorr_samples
            )));
        }
        Ok(())
    }
}

/// Outcome of a single measured run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The tail stays within `conv_tol` of the equilibrium.
    Converges,
    /// Zero-gap and autocorrelation periods exist and agree.
    Periodic,
    /// Neither criterion held (still transient, or the estimates disagree).
    Undecided,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Converges => "converges",
            Verdict::Periodic => "periodic",
            Verdict::Undecided => "undecided",
        };
        f.write_str(s)
    }
}

/// Everything measured on the tail of one trajectory.
#[derive(Debug, Clone)]
pub struct OscillationReport {
    /// Crossings of the insulin-side component through its equilibrium.
    pub zeros_i: Vec<f64>,
    /// Crossings of the glucose-side component through its equilibrium.
    pub zeros_g: Vec<f64>,
    /// True when every consecutive insulin zero gap exceeds the delay.
    pub slow_i: bool,
    /// True when every consecutive glucose zero gap exceeds the delay.
    pub slow_g: bool,
    /// True when the merged zero sequences strictly alternate components.
    pub interlaced: bool,
    /// Mean alternate-gap period of the glucose zeros, when enough exist.
    pub period: Option<f64>,
    /// Independent autocorrelation period of the glucose tail.
    pub autocorr_period: Option<f64>,
    /// `2·tau / period`, the delay-to-period ratio.
    pub ratio: Option<f64>,
    /// Half the glucose tail range.
    pub amplitude_g: f64,
    /// Half the insulin tail range.
    pub amplitude_i: f64,
    /// Glucose tail extremes.
    pub g_min: f64,
    pub g_max: f64,
    /// Supremum distance to equilibrium over the last fifth of the run.
    pub tail_distance: f64,
    pub verdict: Verdict,
}

/// Locate level crossings of a sampled signal by a linear sign scan.
///
/// A crossing is reported for every node pair whose values straddle `level`
/// with the right node at or past `t_from`; the crossing time is refined
/// linearly inside the pair. Pairs whose left value sits exactly on the
/// level are skipped so a node on the level is not double counted.
pub fn find_zeros(times: &[f64], values: &[f64], level: f64, t_from: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    for i in 1..times.len() {
        if times[i] < t_from {
            continue;
        }
        let a = values[i - 1] - level;
        let b = values[i] - level;
        if a == 0.0 {
            continue;
        }
        if a * b < 0.0 {
            let f = a / (a - b);
            zeros.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    zeros
}

/// True when the two sorted crossing sequences strictly alternate.
pub fn interlaced(zeros_a: &[f64], zeros_b: &[f64]) -> bool {
    if zeros_a.is_empty() || zeros_b.is_empty() {
        return false;
    }
    let mut merged: Vec<(f64, u8)> = zeros_a
        .iter()
        .map(|t| (*t, 0u8))
        .chain(zeros_b.iter().map(|t| (*t, 1u8)))
        .collect();
    merged.sort_by(|x, y| x.0.total_cmp(&y.0));
    merged.windows(2).all(|w| w[0].1 != w[1].1)
}

/// Linear resample of `(times, values)` onto `n` uniform points in `[t0, t1]`.
fn resample(times: &[f64], values: &[f64], t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut j = 0usize;
    for i in 0..n {
        let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
        while j + 1 < times.len() && times[j + 1] < t {
            j += 1;
        }
        if j + 1 >= times.len() {
            out.push(*values.last().unwrap());
            continue;
        }
        let f = if times[j + 1] > times[j] {
            (t - times[j]) / (times[j + 1] - times[j])
        } else {
            0.0
        };
        out.push(values[j] + f * (values[j + 1] - values[j]));
    }
    out
}

/// Period estimate from the first qualifying autocorrelation peak.
///
/// The tail (`t >= t_from`) is resampled onto `n` uniform points, the mean is
/// removed, and a strided autocorrelation is scanned for the first local
/// maximum after the first sign change that exceeds `threshold`; the peak lag
/// is refined with a parabolic fit. Returns `None` for flat signals or when
/// no qualifying peak exists.
pub fn autocorr_period(
    times: &[f64],
    values: &[f64],
    t_from: f64,
    n: usize,
    threshold: f64,
) -> Option<f64> {
    let first = times.iter().position(|t| *t >= t_from)?;
    let t0 = times[first];
    let t1 = *times.last()?;
    if !(t1 > t0) || n < 16 {
        return None;
    }
    let mut g = resample(times, values, t0, t1, n);
    let mean = g.iter().sum::<f64>() / n as f64;
    for v in &mut g {
        *v -= mean;
    }
    let dt = (t1 - t0) / (n - 1) as f64;
    if g.iter().map(|v| v * v).sum::<f64>() == 0.0 {
        return None;
    }
    let strided = |k: usize| -> f64 {
        let count = (n - k).div_ceil(4);
        let mut s = 0.0;
        let mut i = 0;
        while i < n - k {
            s += g[i] * g[i + k];
            i += 4;
        }
        s / count.max(1) as f64
    };
    let r0 = strided(0);
    if r0 == 0.0 {
        return None;
    }
    let rs: Vec<f64> = (1..n / 2).map(|k| strided(k) / r0).collect();
    let mut crossed = false;
    for k in 1..rs.len().saturating_sub(1) {
        if !crossed && rs[k] < 0.0 {
            crossed = true;
        }
        if crossed && rs[k] > rs[k - 1] && rs[k] >= rs[k + 1] && rs[k] > threshold {
            let (y0, y1, y2) = (rs[k - 1], rs[k], rs[k + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let d = if denom != 0.0 {
                (y0 - y2) / (2.0 * denom)
            } else {
                0.0
            };
            return Some(((k + 1) as f64 + d) * dt);
        }
    }
    None
}

/// Measure the tail of a trajectory and classify its long-run behaviour.
pub fn oscillation_report(
    cfg: &ModelConfig,
    traj: &Trajectory,
    opts: &MeasureOptions,
) -> Result<OscillationReport> {
    opts.validate()?;
    if traj.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "trajectory with {} nodes is too short to measure",
            traj.len()
        )));
    }
    let eq = cfg.solve_equilibrium(EQUILIBRIUM_TOL)?;
    let t_last = *traj.times.last().unwrap();
    let t_from = t_last * (1.0 - opts.tail_fraction);

    let tail: Vec<(f64, f64, f64)> = traj
        .times
        .iter()
        .zip(traj.i_values.iter().zip(&traj.g_values))
        .filter(|(t, _)| **t >= t_from)
        .map(|(t, (i, g))| (*t, *i, *g))
        .collect();
    if tail.len() < 2 {
        return Err(Error::InvalidParameter(
            "tail window holds fewer than two nodes; extend the run".into(),
        ));
    }
    let g_min = tail.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let g_max = tail.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let i_min = tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let i_max = tail.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    let zeros_i = find_zeros(&traj.times, &traj.i_values, eq.i_star, t_from);
    let zeros_g = find_zeros(&traj.times, &traj.g_values, eq.g_star, t_from);

    let period = if zeros_g.len() >= opts.min_zeros {
        let gaps2: Vec<f64> = zeros_g.windows(3).map(|w| w[2] - w[0]).collect();
        Some(gaps2.iter().sum::<f64>() / gaps2.len() as f64)
    } else {
        None
    };
    let autocorr = autocorr_period(
        &traj.times,
        &traj.g_values,
        t_from,
        opts.autocorr_samples,
        opts.autocorr_threshold,
    );

    let tail_distance = traj
        .times
        .iter()
        .zip(traj.i_values.iter().zip(&traj.g_values))
        .filter(|(t, _)| **t >= 0.8 * t_last)
        .map(|(_, (i, g))| (i - eq.i_star).abs().max((g - eq.g_star).abs()))
        .fold(0.0f64, f64::max);

    let verdict = if tail_distance < opts.conv_tol {
        Verdict::Converges
    } else {
        match (period, autocorr) {
            (Some(p), Some(ac)) if (p - ac).abs() <= opts.period_agree_tol * p => {
                Verdict::Periodic
            }
            _ => Verdict::Undecided,
        }
    };

    Ok(OscillationReport {
        slow_i: zeros_i.windows(2).all(|w| w[1] - w[0] > cfg.tau),
        slow_g: zeros_g.windows(2).all(|w| w[1] - w[0] > cfg.tau),
        interlaced: interlaced(&zeros_i, &zeros_g),
        ratio: period.map(|p| 2.0 * cfg.tau / p),
        amplitude_g: 0.5 * (g_max - g_min),
        amplitude_i: 0.5 * (i_max - i_min),
        zeros_i,
        zeros_g,
        period,
        autocorr_period: autocorr,
        g_min,
        g_max,
        tail_distance,
        verdict,
    })
}

/// One measured point of an initial-condition sweep.
#[derive(Debug, Clone)]
pub struct IcPoint {
    /// The constant initial level fed to both components.
    pub value: f64,
    /// Glucose-side amplitude; `None` when the run failed.
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    pub verdict: Verdict,
}

/// Integrate one run per seed value with constant equal-component history.
///
/// Failures (domain escapes, step underflow, blow-up) do not abort the
/// sweep; the affected point is reported as undecided with no amplitude.
pub fn ic_sweep(
    cfg: &ModelConfig,
    values: &[f64],
    base: &IntegratorOptions,
    meas: &MeasureOptions,
) -> Vec<IcPoint> {
    values
        .par_iter()
        .map(|v| {
            let run = integrate(cfg, &InitialData::diagonal(*v), base)
                .and_then(|traj| oscillation_report(cfg, &traj, meas));
            match run {
                Ok(rep) => IcPoint {
                    value: *v,
                    amplitude: Some(rep.amplitude_g),
                    period: rep.period,
                    verdict: rep.verdict,
                },
                Err(_) => IcPoint {
                    value: *v,
                    amplitude: None,
                    period: None,
                    verdict: Verdict::Undecided,
                },
            }
        })
        .collect()
}

/// One measured point of a delay sweep.
#[derive(Debug, Clone)]
pub struct TauPoint {
    pub tau: f64,
    pub period: Option<f64>,
    /// `2·tau / period`.
    pub ratio: Option<f64>,
    pub slow_i: bool,
    pub slow_g: bool,
    pub interlaced: bool,
    pub verdict: Verdict,
}

/// Re-run the same configuration across delays, measuring each run.
///
/// `points` pairs each delay with the horizon to integrate to (longer delays
/// need proportionally longer runs to settle). The seed is a constant
/// equal-component history, as in [`ic_sweep`].
pub fn tau_sweep(
    cfg: &ModelConfig,
    seed: f64,
    points: &[(f64, f64)],
    base: &IntegratorOptions,
    meas: &MeasureOptions,
) -> Vec<TauPoint> {
    points
        .par_iter()
        .map(|(tau, t_end)| {
            let mut c = cfg.clone();
            c.tau = *tau;
            let mut opts = base.clone();
            opts.t_end = *t_end;
            let run = integrate(&c, &InitialData::diagonal(seed), &opts)
                .and_then(|traj| oscillation_report(&c, &traj, meas));
            match run {
                Ok(rep) => TauPoint {
                    tau: *tau,
                    period: rep.period,
                    ratio: rep.ratio,
                    slow_i: rep.slow_i,
                    slow_g: rep.slow_g,
                    interlaced: rep.interlaced,
                    verdict: rep.verdict,
                },
                Err(_) => TauPoint {
                    tau: *tau,
                    period: None,
                    ratio: None,
                    slow_i: false,
                    slow_g: false,
                    interlaced: false,
                    verdict: Verdict::Undecided,
                },
            }
        })
        .collect()
}

/// A group of seeds whose runs settled onto the same periodic state.
#[derive(Debug, Clone)]
pub struct CensusCluster {
    /// Running mean of the member amplitudes.
    pub amplitude: f64,
    /// Running mean of the member periods.
    pub period: f64,
    /// Widest glucose extremes seen across the members.
    pub g_min: f64,
    pub g_max: f64,
    pub members: Vec<f64>,
}

impl CensusCluster {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// Outcome of running many seeds and grouping the settled states.
#[derive(Debug, Clone)]
pub struct Census {
    /// Distinct periodic states, in order of first appearance.
    pub clusters: Vec<CensusCluster>,
    /// Seeds whose runs converged to the equilibrium.
    pub equilibrium_seeds: Vec<f64>,
    /// Seeds whose runs failed or resisted classification.
    pub undecided_seeds: Vec<f64>,
}

impl Census {
    /// Total seeds examined.
    pub fn total(&self) -> usize {
        self.clusters.iter().map(CensusCluster::count).sum::<usize>()
            + self.equilibrium_seeds.len()
            + self.undecided_seeds.len()
    }
}

/// Run one trajectory per seed and group the outcomes into clusters.
///
/// Periodic runs join an existing cluster when both amplitude and period
/// match within `match_tol` (relative, floored at 1); converging runs pool
/// into the equilibrium group, everything else is kept as undecided. Runs
/// execute in parallel; clustering is a deterministic sequential pass in
/// seed order.
pub fn multistability_census(
    cfg: &ModelConfig,
    seeds: &[f64],
    base: &IntegratorOptions,
    meas: &MeasureOptions,
    match_tol: f64,
) -> Census {
    let reports: Vec<(f64, Option<OscillationReport>)> = seeds
        .par_iter()
        .map(|s| {
            let rep = integrate(cfg, &InitialData::diagonal(*s), base)
                .and_then(|traj| oscillation_report(cfg, &traj, meas))
                .ok();
            (*s, rep)
        })
        .collect();

    let mut census = Census {
        clusters: Vec::new(),
        equilibrium_seeds: Vec::new(),
        undecided_seeds: Vec::new(),
    };
    for (seed, rep) in reports {
        let Some(rep) = rep else {
            census.undecided_seeds.push(seed);
            continue;
        };
        match rep.verdict {
            Verdict::Converges => census.equilibrium_seeds.push(seed),
            Verdict::Undecided => census.undecided_seeds.push(seed),
            Verdict::Periodic => {
                let amp = rep.amplitude_g;
                let per = rep.period.expect("periodic verdict implies a period");
                let slot = census.clusters.iter_mut().find(|c| {
                    (c.amplitude - amp).abs() <= match_tol * c.amplitude.abs().max(1.0)
                        && (c.period - per).abs() <= match_tol * c.period.abs().max(1.0)
                });
                match slot {
                    Some(c) => {
                        let n = c.members.len() as f64;
                        c.amplitude = (c.amplitude * n + amp) / (n + 1.0);
                        c.period = (c.period * n + per) / (n + 1.0);
                        c.g_min = c.g_min.min(rep.g_min);
                        c.g_max = c.g_max.max(rep.g_max);
                        c.members.push(seed);
                    }
                    None => census.clusters.push(CensusCluster {
                        amplitude: amp,
                        period: per,
                        g_min: rep.g_min,
                        g_max: rep.g_max,
                        members: vec![seed],
                    }),
                }
            }
        }
    }
    census
}

/// How the limiting-map classification compares with a simulation census.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub regime: Regime,
    /// Number of distinct periodic clusters the census found.
    pub periodic_clusters: usize,
    /// Whether any seed converged to the equilibrium.
    pub equilibrium_seen: bool,
    /// Whether the census outcome matches what the regime predicts.
    pub agree: bool,
    /// Whether every periodic cluster's glucose extremes stay inside the
    /// limiting interval (within `slack`); `None` without periodic clusters.
    pub range_within_limit: Option<bool>,
}

/// Cross-check a simulation census against the limiting-map regime.
///
/// Predictions: a collapsed map means every seed converges; a unique
/// attracting 2-cycle means one periodic cluster and no converging seeds; a
/// multistable map means at least two periodic clusters; an attracting
/// equilibrium coexisting with cycles means at least one periodic cluster
/// (converging seeds allowed). An indeterminate regime predicts nothing and
/// never disagrees. Periodic glucose ranges are also checked against the
/// limiting interval, widened by `slack` on both sides.
pub fn map_dde_consistency(
    cfg: &ModelConfig,
    map_opts: &MapOptions,
    census: &Census,
    slack: f64,
) -> Result<ConsistencyReport> {
    let analysis = analyze_map(cfg, map_opts)?;
    let n_periodic = census.clusters.len();
    let has_equilibrium = !census.equilibrium_seeds.is_empty();
    let agree = match analysis.regime {
        Regime::A1 => n_periodic == 0 && has_equilibrium,
        Regime::A2 => n_periodic == 1 && !has_equilibrium,
        Regime::A3 => n_periodic >= 2,
        Regime::A4 => n_periodic >= 1,
        Regime::Indeterminate => true,
    };
    let range_within_limit = if n_periodic == 0 {
        None
    } else {
        let lo = analysis.l_star[0] - slack;
        let hi = analysis.l_star[1] + slack;
        Some(
            census
                .clusters
                .iter()
                .all(|c| c.g_min >= lo && c.g_max <= hi),
        )
    };
    Ok(ConsistencyReport {
        regime: analysis.regime,
        periodic_clusters: n_periodic,
        equilibrium_seen: has_equilibrium,
        agree,
        range_within_limit,
    })
}
