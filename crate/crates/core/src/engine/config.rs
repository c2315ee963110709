//! Run configuration: TOML files layered over named presets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::channel::LinkParams;
use crate::error::{Error, Result};
use crate::sps::{SourceDistribution, SpsPassiveParams};

/// Which transmitter, and which rate model, a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Two strong coherent pulses with passive polarization selection.
    CoherentPassive,
    /// Weak coherent pulses with an actively modulated polarization.
    CoherentActive,
    /// The passive coherent source fed by one laser, using every other pulse.
    CoherentOneLaser,
    /// Four practical single-photon sources with passive selection.
    SpsPassive,
    /// One practical single-photon source, attenuated, with active modulation.
    SpsActive,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::CoherentPassive,
        Scenario::CoherentActive,
        Scenario::CoherentOneLaser,
        Scenario::SpsPassive,
        Scenario::SpsActive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CoherentPassive => "coherent-passive",
            Scenario::CoherentActive => "coherent-active",
            Scenario::CoherentOneLaser => "coherent-one-laser",
            Scenario::SpsPassive => "sps-passive",
            Scenario::SpsActive => "sps-active",
        }
    }

    pub fn is_coherent(self) -> bool {
        matches!(
            self,
            Scenario::CoherentPassive | Scenario::CoherentActive | Scenario::CoherentOneLaser
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| config_error("scenario", format!("unknown scenario `{s}`")))
    }
}

/// Channel and receiver constants; the distance comes from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub alpha: f64,
    pub eta_bob: f64,
    pub epsilon_bob: f64,
    pub q_efficiency: f64,
    pub f_ec: f64,
}

impl LinkSection {
    pub fn at(&self, distance: f64) -> LinkParams {
        LinkParams {
            alpha: self.alpha,
            distance,
            eta_bob: self.eta_bob,
            epsilon_bob: self.epsilon_bob,
            q_efficiency: self.q_efficiency,
            f_ec: self.f_ec,
        }
    }
}

/// Distances `start, start + step, ...` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DistanceGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.stop < self.start {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// Fixed operating point of the coherent sources, used when not optimizing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherentSection {
    pub mu: f64,
    pub omega: f64,
}

/// Single-photon source and Alice's detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpsSection {
    /// Photon-number distribution `p_0, p_1, ...`.
    pub probs: Vec<f64>,
    pub eta_a: f64,
    pub eps_a: f64,
    /// Tap transmittance, used when not optimizing.
    pub t: f64,
    /// Attenuator transmittance of the active source, used when not optimizing.
    pub tau: f64,
}

impl SpsSection {
    pub fn distribution(&self) -> Result<SourceDistribution> {
        SourceDistribution::new(self.probs.clone()).map_err(|e| config_error("sps.probs", e.to_string()))
    }

    pub fn passive_params(&self, t: f64) -> Result<SpsPassiveParams> {
        SpsPassiveParams::new(t, self.distribution()?, self.eta_a, self.eps_a)
    }
}

/// Parameter grid of the oracle audit. Every combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    pub threshold: f64,
    pub distributions: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub eta_a: Vec<f64>,
    pub eps_a: Vec<f64>,
    pub eta_sys: Vec<f64>,
    pub eps_b: Vec<f64>,
}

impl AuditSection {
    pub fn cell_count(&self) -> usize {
        self.distributions.len()
            * self.t.len()
            * self.eta_a.len()
            * self.eps_a.len()
            * self.eta_sys.len()
            * self.eps_b.len()
    }
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: Scenario,
    /// Optimize the source settings at every distance.
    pub optimize: bool,
    pub link: LinkSection,
    pub distance: DistanceGrid,
    pub coherent: CoherentSection,
    pub sps: SpsSection,
    pub audit: AuditSection,
}

pub const PRESETS: [&str; 16] = [
    "defaults",
    "coherent-passive",
    "coherent-active",
    "coherent-one-laser",
    "ideal-eta1",
    "ideal-eta0.5",
    "ideal-eta0.1",
    "ideal-active",
    "near-ideal-eta1",
    "near-ideal-eta0.5",
    "near-ideal-eta0.1",
    "near-ideal-active",
    "lossy-eta1",
    "lossy-eta0.5",
    "lossy-eta0.1",
    "lossy-active",
];

/// Photon-number distribution `p_0, p_1, p_2` of a bright, clean single-photon source.
pub const NEAR_IDEAL_SOURCE: [f64; 3] = [0.0099, 0.9882, 0.0019];
/// A source with a large vacuum fraction and more two-photon emission.
pub const LOSSY_SOURCE: [f64; 3] = [0.2, 0.785, 0.015];

impl Default for SweepConfig {
    /// Coherent passive source on the reference link, 0 to 80 km.
    fn default() -> Self {
        let link = LinkParams::default();
        Self {
            scenario: Scenario::CoherentPassive,
            optimize: true,
            link: LinkSection {
                alpha: link.alpha,
                eta_bob: link.eta_bob,
                epsilon_bob: link.epsilon_bob,
                q_efficiency: link.q_efficiency,
                f_ec: link.f_ec,
            },
            distance: DistanceGrid {
                start: 0.0,
                stop: 80.0,
                step: 1.0,
            },
            coherent: CoherentSection {
                mu: 0.084,
                omega: 0.365,
            },
            sps: SpsSection {
                probs: vec![0.0, 1.0],
                eta_a: 1.0,
                eps_a: 1e-6,
                t: 0.3,
                tau: 1.0,
            },
            audit: AuditSection {
                threshold: 1e-9,
                distributions: vec![NEAR_IDEAL_SOURCE.to_vec(), LOSSY_SOURCE.to_vec()],
                t: vec![0.15, 0.4, 0.75],
                eta_a: vec![1.0, 0.5, 0.1],
                eps_a: vec![0.0, 1e-3],
                eta_sys: vec![0.1, 1e-3, 1e-5],
                eps_b: vec![1e-6, 1e-2],
            },
        }
    }
}

impl SweepConfig {
    /// A named preset.
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Self::default();
        let sps = |c: &mut Self, probs: &[f64], stop: f64| {
            c.sps.probs = probs.to_vec();
            c.distance.stop = stop;
        };
        match name {
            "defaults" | "coherent-passive" => {}
            "coherent-active" => c.scenario = Scenario::CoherentActive,
            "coherent-one-laser" => c.scenario = Scenario::CoherentOneLaser,
            _ => {
                let (family, variant) = name.rsplit_once('-').ok_or_else(|| unknown_preset(name))?;
                match family {
                    "ideal" => sps(&mut c, &[0.0, 1.0], 220.0),
                    "near-ideal" => sps(&mut c, &NEAR_IDEAL_SOURCE, 160.0),
                    "lossy" => sps(&mut c, &LOSSY_SOURCE, 120.0),
                    _ => return Err(unknown_preset(name)),
                }
                match variant {
                    "active" => c.scenario = Scenario::SpsActive,
                    "eta1" | "eta0.5" | "eta0.1" => {
                        c.scenario = Scenario::SpsPassive;
                        c.sps.eta_a = variant[3..].parse().expect("literal");
                    }
                    _ => return Err(unknown_preset(name)),
                }
            }
        }
        Ok(c)
    }

    /// `preset` (or the defaults) overlaid with the keys given in `text`.
    pub fn from_toml_over(preset: Option<&str>, text: Option<&str>) -> Result<Self> {
        let base = Self::preset(preset.unwrap_or("defaults"))?;
        let Some(text) = text else {
            base.validate()?;
            return Ok(base);
        };
        let overlay: Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_error("toml", e.message().to_string()))?;
        let mut merged = Value::try_from(&base).map_err(|e| config_error("toml", e.to_string()))?;
        merge(&mut merged, Value::Table(overlay));
        let config: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| config_error("toml", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads the file at `path` and layers it over `preset`.
    pub fn load(preset: Option<&str>, path: Option<&Path>) -> Result<Self> {
        let text = path
            .map(|p| std::fs::read_to_string(p).map_err(|e| config_error("config", format!("{}: {e}", p.display()))))
            .transpose()?;
        Self::from_toml_over(preset, text.as_deref())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Field-level checks; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let within = |field: &str, e: Error| config_error(field, e.to_string());
        self.link.at(0.0).validate().map_err(|e| within("link", e))?;
        let g = &self.distance;
        if !(g.step > 0.0 && g.step.is_finite()) {
            return Err(config_error(
                "distance.step",
                format!("must be positive, got {}", g.step),
            ));
        }
        if !(g.start >= 0.0 && g.start.is_finite()) {
            return Err(config_error(
                "distance.start",
                format!("must be non-negative, got {}", g.start),
            ));
        }
        if !g.stop.is_finite() {
            return Err(config_error("distance.stop", "must be finite".into()));
        }
        if self.scenario.is_coherent() && !self.optimize {
            crate::coherent::CoherentPassiveParams::new(self.coherent.mu, self.coherent.omega)
                .map_err(|e| within("coherent", e))?;
        }
        if !self.scenario.is_coherent() {
            let dist = self.sps.distribution()?;
            SpsPassiveParams::new(self.sps.t, dist, self.sps.eta_a, self.sps.eps_a).map_err(|e| within("sps", e))?;
            if !(self.sps.tau > 0.0 && self.sps.tau <= 1.0) {
                return Err(config_error(
                    "sps.tau",
                    format!("must lie in (0, 1], got {}", self.sps.tau),
                ));
            }
        }
        let a = &self.audit;
        if !(a.threshold > 0.0) {
            return Err(config_error("audit.threshold", "must be positive".into()));
        }
        for probs in &a.distributions {
            SourceDistribution::new(probs.clone()).map_err(|e| within("audit.distributions", e))?;
        }
        for (field, values) in [
            ("audit.t", &a.t),
            ("audit.eta_a", &a.eta_a),
            ("audit.eps_a", &a.eps_a),
            ("audit.eta_sys", &a.eta_sys),
            ("audit.eps_b", &a.eps_b),
        ] {
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(config_error(field, format!("{v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub(crate) fn config_error(field: &str, message: String) -> Error {
    Error::Config {
        field: field.to_string(),
        message,
    }
}

fn unknown_preset(name: &str) -> Error {
    config_error(
        "preset",
        format!("unknown preset `{name}`; available: {}", PRESETS.join(", ")),
    )
}
