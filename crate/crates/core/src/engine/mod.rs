//! Distance sweeps, cutoff search and oracle audits driven by a [`SweepConfig`].

pub mod config;
pub mod table;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub use config::{Scenario, SweepConfig, PRESETS};

use crate::channel::LinkParams;
use crate::coherent::{self, CoherentPassiveParams, CoherentRateBreakdown};
use crate::error::{Error, Result};
use crate::math::find_zero_crossing;
use crate::oracle::{Polarization, SpsQuantities};
use crate::sps::{self, SourceDistribution, SpsKernel, SpsOutput, SpsPassiveParams, SpsRateBreakdown};

/// Fraction of pulses kept by the one-laser variant of the coherent source.
pub const ONE_LASER_DUTY: f64 = 0.5;

/// Resolution of [`cutoff`] in km.
pub const CUTOFF_RESOLUTION: f64 = 0.01;

/// Source settings reported with a rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Settings {
    /// Mean photon number and acceptance margin of a coherent source; the
    /// margin is zero for the active source.
    Coherent { mu: f64, omega: f64 },
    /// Tap transmittance of the passive single-photon transmitter.
    Tap { t: f64 },
    /// Attenuator of the active single-photon source.
    Attenuator { tau: f64 },
}

impl Settings {
    pub fn names(&self) -> &'static [&'static str] {
        match self {
            Settings::Coherent { .. } => &["mu", "omega"],
            Settings::Tap { .. } => &["t"],
            Settings::Attenuator { .. } => &["tau"],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match *self {
            Settings::Coherent { mu, omega } => vec![mu, omega],
            Settings::Tap { t } => vec![t],
            Settings::Attenuator { tau } => vec![tau],
        }
    }
}

/// Rate and its ingredients at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub distance_km: f64,
    pub rate: f64,
    pub settings: Settings,
    pub p_acc: f64,
    pub gain: f64,
    pub qber: f64,
    pub p_multi: f64,
    pub e1: f64,
    /// Unclamped bound; not written to CSV.
    pub objective: f64,
}

impl RatePoint {
    fn coherent(d: f64, mu: f64, omega: f64, b: &CoherentRateBreakdown) -> Self {
        Self {
            distance_km: d,
            rate: b.rate,
            settings: Settings::Coherent { mu, omega },
            p_acc: b.p_acc,
            gain: b.gain,
            qber: b.qber,
            p_multi: b.p_multi,
            e1: b.e1,
            objective: b.objective,
        }
    }

    fn sps(d: f64, settings: Settings, b: &SpsRateBreakdown) -> Self {
        Self {
            distance_km: d,
            rate: b.rate,
            settings,
            p_acc: b.p_acc,
            gain: b.gain,
            qber: b.qber,
            p_multi: b.p_multi,
            e1: b.e1,
            objective: b.objective,
        }
    }
}

/// Per-run state that is independent of distance.
pub struct Evaluator {
    config: SweepConfig,
    dist: Option<SourceDistribution>,
    kernel: Option<SpsKernel>,
}

impl Evaluator {
    pub fn new(config: &SweepConfig) -> Result<Self> {
        config.validate()?;
        let (dist, kernel) = if config.scenario.is_coherent() {
            (None, None)
        } else {
            let dist = config.sps.distribution()?;
            let kernel = (config.scenario == Scenario::SpsPassive)
                .then(|| SpsKernel::new(dist.nmax(), config.sps.eta_a, config.sps.eps_a));
            (Some(dist), kernel)
        };
        Ok(Self {
            config: config.clone(),
            dist,
            kernel,
        })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.config
    }

    fn link(&self, d: f64) -> LinkParams {
        self.config.link.at(d)
    }

    /// Rate at distance `d`, optimized if the configuration asks for it.
    pub fn point(&self, d: f64) -> Result<RatePoint> {
        let c = &self.config;
        let link = self.link(d);
        link.validate()?;
        match c.scenario {
            Scenario::CoherentPassive | Scenario::CoherentOneLaser => {
                let mut p = if c.optimize {
                    let o = coherent::optimize(d, &link)?;
                    RatePoint::coherent(d, o.mu, o.omega, &o.breakdown)
                } else {
                    let params = CoherentPassiveParams::new(c.coherent.mu, c.coherent.omega)?;
                    RatePoint::coherent(d, params.mu, params.omega, &coherent::key_rate(&params, &link)?)
                };
                if c.scenario == Scenario::CoherentOneLaser {
                    p.rate *= ONE_LASER_DUTY;
                    p.objective *= ONE_LASER_DUTY;
                }
                Ok(p)
            }
            Scenario::CoherentActive => {
                if c.optimize {
                    let o = coherent::optimize_active(d, &link)?;
                    Ok(RatePoint::coherent(d, o.mu, 0.0, &o.breakdown))
                } else {
                    let b = coherent::active_wcp_rate(c.coherent.mu, &link)?;
                    Ok(RatePoint::coherent(d, c.coherent.mu, 0.0, &b))
                }
            }
            Scenario::SpsPassive => {
                let dist = self.dist.as_ref().expect("sps scenario");
                let kernel = self.kernel.as_ref().expect("passive scenario");
                if c.optimize {
                    let o = sps::optimize_t_with(kernel, d, dist, c.sps.eta_a, c.sps.eps_a, &link)?;
                    Ok(RatePoint::sps(d, Settings::Tap { t: o.setting }, &o.breakdown))
                } else {
                    let params = SpsPassiveParams::new(c.sps.t, dist.clone(), c.sps.eta_a, c.sps.eps_a)?;
                    let b = SpsOutput::with_kernel(kernel, &params).key_rate(&link);
                    Ok(RatePoint::sps(d, Settings::Tap { t: c.sps.t }, &b))
                }
            }
            Scenario::SpsActive => {
                let dist = self.dist.as_ref().expect("sps scenario");
                if c.optimize {
                    let o = sps::optimize_tau(d, dist, &link)?;
                    Ok(RatePoint::sps(d, Settings::Attenuator { tau: o.setting }, &o.breakdown))
                } else {
                    let b = sps::active_sps_rate(dist, c.sps.tau, &link)?;
                    Ok(RatePoint::sps(d, Settings::Attenuator { tau: c.sps.tau }, &b))
                }
            }
        }
    }
}

/// Evaluates the configured scenario on every grid distance, in order.
pub fn sweep(config: &SweepConfig) -> Result<Vec<RatePoint>> {
    let eval = Evaluator::new(config)?;
    let grid = config.distance.points();
    #[cfg(feature = "parallel")]
    let points = grid.par_iter().map(|&d| eval.point(d)).collect();
    #[cfg(not(feature = "parallel"))]
    let points = grid.iter().map(|&d| eval.point(d)).collect();
    points
}

/// Rate and settings at a single distance.
pub fn optimize_at(config: &SweepConfig, d: f64) -> Result<RatePoint> {
    Evaluator::new(config)?.point(d)
}

/// First distance at which the active single-photon baseline prefers an
/// attenuated source (`tau < 1`), or `None` if it never does while the rate
/// is positive. The grid locates the change; bisection refines it to
/// [`CUTOFF_RESOLUTION`].
pub fn attenuation_onset(config: &SweepConfig) -> Result<Option<f64>> {
    if config.scenario != Scenario::SpsActive {
        return Err(config::config_error(
            "scenario",
            format!("attenuation onset needs `sps-active`, not `{}`", config.scenario),
        ));
    }
    let eval = Evaluator::new(config)?;
    let full = |p: &RatePoint| matches!(p.settings, Settings::Attenuator { tau } if tau >= 1.0);
    let mut prev: Option<f64> = None;
    for d in config.distance.points() {
        let p = eval.point(d)?;
        if p.rate <= 0.0 {
            return Ok(None);
        }
        if !full(&p) {
            let Some(low) = prev else { return Ok(Some(d)) };
            let mut failure = None;
            let found = find_zero_crossing(
                |x| match eval.point(x) {
                    Ok(p) if full(&p) => 1.0,
                    Ok(_) => -1.0,
                    Err(e) => {
                        failure.get_or_insert(e);
                        -1.0
                    }
                },
                low,
                d,
                CUTOFF_RESOLUTION,
            )?;
            return match failure {
                Some(e) => Err(e),
                None => Ok(Some(found)),
            };
        }
        prev = Some(d);
    }
    Ok(None)
}

/// Largest distance with a positive rate, to [`CUTOFF_RESOLUTION`].
///
/// The search starts at the grid's `start`; the upper end doubles from
/// 100 km until the rate vanishes. Returns `start` when the rate is not
/// positive there.
pub fn cutoff(config: &SweepConfig) -> Result<f64> {
    let eval = Evaluator::new(config)?;
    let positive = |d: f64| -> Result<f64> { Ok(eval.point(d)?.rate) };
    let low = config.distance.start;
    if positive(low)? <= 0.0 {
        return Ok(low);
    }
    let mut high = low + 100.0;
    while positive(high)? > 0.0 {
        high = low + 2.0 * (high - low);
        if high > 1e5 {
            return Err(Error::Bracket { low, high });
        }
    }
    let mut failure = None;
    let found = find_zero_crossing(
        |d| match eval.point(d) {
            Ok(p) => p.rate,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        low,
        high,
        CUTOFF_RESOLUTION,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(found),
    }
}

/// One grid cell of an oracle audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditCell {
    pub probs: Vec<f64>,
    pub t: f64,
    pub eta_a: f64,
    pub eps_a: f64,
    pub eta_sys: f64,
    pub eps_b: f64,
    /// `|closed - oracle|` for `N, Q, E, p_multi`, or the failure.
    pub outcome: std::result::Result<[f64; 4], String>,
}

impl AuditCell {
    pub fn max_deviation(&self) -> f64 {
        match &self.outcome {
            Ok(d) => d.iter().fold(0.0, |m, &x| m.max(x)),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Deviations between closed-form and simulated quantities over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub threshold: f64,
    pub cells: Vec<AuditCell>,
}

impl AuditReport {
    pub fn max_deviation(&self) -> f64 {
        self.cells.iter().fold(0.0, |m, c| m.max(c.max_deviation()))
    }

    pub fn passed(&self) -> bool {
        !self.cells.is_empty() && self.max_deviation() <= self.threshold
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditCell> {
        self.cells
            .iter()
            .filter(move |c| !(c.max_deviation() <= self.threshold))
    }
}

/// Closed-form quantities for one cell; replaceable to test the audit itself.
pub type ClosedForm = dyn Fn(&SpsPassiveParams, &LinkParams) -> Result<SpsQuantities> + Sync;

/// Audits the closed-form sums against the Fock-space simulation.
///
/// The silent monitor cycles through the four polarizations from one cell
/// to the next, so every choice is exercised.
pub fn audit_oracle(config: &SweepConfig) -> Result<AuditReport> {
    audit_oracle_with(config, &SpsQuantities::closed_form)
}

pub fn audit_oracle_with(config: &SweepConfig, closed_form: &ClosedForm) -> Result<AuditReport> {
    config.validate()?;
    let a = &config.audit;
    let mut cells = Vec::with_capacity(a.cell_count());
    for probs in &a.distributions {
        if probs.len() > 4 {
            return Err(config::config_error(
                "audit.distributions",
                "the oracle supports at most three photons per source".into(),
            ));
        }
        for &t in &a.t {
            for &eta_a in &a.eta_a {
                for &eps_a in &a.eps_a {
                    for &eta_sys in &a.eta_sys {
                        for &eps_b in &a.eps_b {
                            cells.push(AuditCell {
                                probs: probs.clone(),
                                t,
                                eta_a,
                                eps_a,
                                eta_sys,
                                eps_b,
                                outcome: Err(String::new()),
                            });
                        }
                    }
                }
            }
        }
    }
    let link_base = config.link.at(0.0);
    let run = |(i, cell): (usize, &AuditCell)| -> std::result::Result<[f64; 4], String> {
        let dist = SourceDistribution::new(cell.probs.clone()).map_err(|e| e.to_string())?;
        let params = SpsPassiveParams::new(cell.t, dist, cell.eta_a, cell.eps_a).map_err(|e| e.to_string())?;
        let link = LinkParams {
            alpha: 0.0,
            distance: 0.0,
            eta_bob: cell.eta_sys,
            epsilon_bob: cell.eps_b,
            ..link_base
        };
        let silent = Polarization::ALL[i % 4];
        let closed = closed_form(&params, &link).map_err(|e| format!("closed form: {e}"))?;
        let sim = SpsQuantities::simulated(&params, &link, silent).map_err(|e| format!("oracle: {e}"))?;
        Ok([
            (closed.normalization - sim.normalization).abs(),
            (closed.gain - sim.gain).abs(),
            (closed.qber - sim.qber).abs(),
            (closed.p_multi - sim.p_multi).abs(),
        ])
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = cells.par_iter().enumerate().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = cells.iter().enumerate().map(run).collect();
    for (cell, outcome) in cells.iter_mut().zip(outcomes) {
        cell.outcome = outcome;
    }
    Ok(AuditReport {
        threshold: a.threshold,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(preset: &str, stop: f64) -> SweepConfig {
        let mut c = SweepConfig::preset(preset).unwrap();
        c.distance.stop = stop;
        c.distance.step = 10.0;
        c
    }

    #[test]
    fn sweep_is_ordered_and_non_negative() {
        let pts = sweep(&small("coherent-passive", 80.0)).unwrap();
        assert_eq!(pts.len(), 9);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(p.distance_km, 10.0 * i as f64);
            assert!(p.rate >= 0.0);
        }
        assert!(pts.windows(2).all(|w| w[1].rate <= w[0].rate));
        assert_eq!(pts.last().unwrap().rate, 0.0);
    }

    #[test]
    fn empty_grid_gives_no_points() {
        let mut c = small("defaults", 80.0);
        c.distance.start = 10.0;
        c.distance.stop = 5.0;
        assert!(sweep(&c).unwrap().is_empty());
    }

    #[test]
    fn one_laser_halves_the_rate() {
        let two = sweep(&small("coherent-passive", 70.0)).unwrap();
        let one = sweep(&small("coherent-one-laser", 70.0)).unwrap();
        for (a, b) in two.iter().zip(&one) {
            assert_eq!(b.rate, 0.5 * a.rate);
        }
    }

    #[test]
    fn fixed_settings_are_reported() {
        let mut c = small("near-ideal-eta0.5", 20.0);
        c.optimize = false;
        c.sps.t = 0.2;
        let pts = sweep(&c).unwrap();
        assert!(pts.iter().all(|p| p.settings == Settings::Tap { t: 0.2 }));
    }

    #[test]
    fn cutoff_of_an_opaque_channel_is_at_the_start() {
        let mut c = SweepConfig::preset("coherent-active").unwrap();
        c.link.alpha = 1e6;
        assert!(cutoff(&c).unwrap() <= CUTOFF_RESOLUTION);
        c.link.eta_bob = 0.0;
        assert_eq!(cutoff(&c).unwrap(), 0.0);
    }

    #[test]
    fn audit_flags_a_corrupted_closed_form() {
        let mut c = SweepConfig::default();
        c.audit.distributions = vec![vec![0.1, 0.8, 0.1]];
        c.audit.t = vec![0.3];
        c.audit.eta_a = vec![0.7];
        c.audit.eps_a = vec![1e-3];
        c.audit.eta_sys = vec![0.05];
        c.audit.eps_b = vec![1e-4];
        let good = audit_oracle(&c).unwrap();
        assert!(good.passed(), "{:?}", good);
        let corrupted = |p: &SpsPassiveParams, l: &LinkParams| {
            SpsQuantities::closed_form(p, l).map(|mut q| {
                q.gain *= 1.0 + 1e-6;
                q
            })
        };
        let bad = audit_oracle_with(&c, &corrupted).unwrap();
        assert!(!bad.passed());
        assert!(bad.max_deviation() > 0.0);
        assert_eq!(bad.failures().count(), 1);
    }
}
