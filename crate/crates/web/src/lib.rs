//! Browser demo bindings.
//!
//! Every export returns a JSON string. The plain functions are usable from
//! native code; the `#[wasm_bindgen]` wrappers turn errors into JS errors.

use std::f64::consts::FRAC_PI_4;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use passive_bb84::coherent::{self, CoherentPassiveParams};
use passive_bb84::engine::{self, Scenario, SweepConfig};
use passive_bb84::sps::{photon_stats, SourceDistribution};

/// Samples of the angle-resolved error rate shown by the explorer.
const THETA_SAMPLES: usize = 64;

#[derive(Serialize)]
pub struct Curve {
    pub label: String,
    pub cutoff_km: f64,
    pub distance_km: Vec<f64>,
    pub rate: Vec<f64>,
    /// Setting names, e.g. `["mu", "omega"]`, and one column per name.
    pub setting_names: Vec<&'static str>,
    pub settings: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Curves {
    curves: Vec<Curve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g2: Option<f64>,
}

#[derive(Serialize)]
struct QberProfile {
    theta: Vec<f64>,
    qber: Vec<f64>,
    average: f64,
    p_acc: f64,
    rate: f64,
}

fn curve(label: &str, config: &SweepConfig) -> Result<Curve, String> {
    let points = engine::sweep(config).map_err(|e| e.to_string())?;
    let cutoff_km = engine::cutoff(config).map_err(|e| e.to_string())?;
    let setting_names = points.first().map_or(vec![], |p| p.settings.names().to_vec());
    let mut settings = vec![Vec::with_capacity(points.len()); setting_names.len()];
    for p in &points {
        for (column, v) in settings.iter_mut().zip(p.settings.values()) {
            column.push(v);
        }
    }
    Ok(Curve {
        label: label.to_string(),
        cutoff_km,
        distance_km: points.iter().map(|p| p.distance_km).collect(),
        rate: points.iter().map(|p| p.rate).collect(),
        setting_names,
        settings,
    })
}

fn base(alpha: f64, eta_bob: f64, epsilon_bob: f64, stop_km: f64, step_km: f64) -> SweepConfig {
    let mut c = SweepConfig::default();
    c.link.alpha = alpha;
    c.link.eta_bob = eta_bob;
    c.link.epsilon_bob = epsilon_bob;
    c.distance.start = 0.0;
    c.distance.stop = stop_km;
    c.distance.step = step_km;
    c
}

fn to_json(value: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Optimized passive, active and one-laser coherent curves.
pub fn coherent_curves_json(alpha: f64, eta_bob: f64, epsilon_bob: f64, stop_km: f64) -> Result<String, String> {
    let mut curves = Vec::new();
    for (label, scenario) in [
        ("passive", Scenario::CoherentPassive),
        ("active", Scenario::CoherentActive),
        ("passive, one laser", Scenario::CoherentOneLaser),
    ] {
        let mut c = base(alpha, eta_bob, epsilon_bob, stop_km, 1.0);
        c.scenario = scenario;
        curves.push(curve(label, &c)?);
    }
    to_json(&Curves {
        curves,
        n_bar: None,
        g2: None,
    })
}

/// Passive curve for the heralding efficiency `eta_a` and the active
/// baseline, for a source emitting at most two photons.
pub fn sps_curves_json(p0: f64, p1: f64, p2: f64, eta_a: f64, eps_a: f64, stop_km: f64) -> Result<String, String> {
    let probs = vec![p0, p1, p2];
    let stats = SourceDistribution::new(probs.clone())
        .and_then(|d| photon_stats(&d))
        .map_err(|e| e.to_string())?;
    let mut curves = Vec::new();
    for (label, scenario) in [("passive", Scenario::SpsPassive), ("active", Scenario::SpsActive)] {
        let mut c = base(0.2, 0.1, 1e-6, stop_km, 2.0);
        c.scenario = scenario;
        c.sps.probs = probs.clone();
        c.sps.eta_a = eta_a;
        c.sps.eps_a = eps_a;
        curves.push(curve(label, &c)?);
    }
    to_json(&Curves {
        curves,
        n_bar: Some(stats.n_bar),
        g2: Some(stats.g2),
    })
}

/// Error rate against the polarization angle over the accepted interval,
/// its average, the acceptance probability and the resulting rate.
pub fn qber_profile_json(mu: f64, omega: f64, distance_km: f64) -> Result<String, String> {
    let link = SweepConfig::default().link.at(distance_km);
    let params = CoherentPassiveParams::new(mu, omega).map_err(|e| e.to_string())?;
    let span = FRAC_PI_4 - omega;
    let theta: Vec<f64> = (0..THETA_SAMPLES)
        .map(|i| span * i as f64 / (THETA_SAMPLES - 1) as f64)
        .collect();
    let qber = theta
        .iter()
        .map(|&t| coherent::qber_theta(t, mu, &link))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let b = coherent::key_rate(&params, &link).map_err(|e| e.to_string())?;
    to_json(&QberProfile {
        theta,
        qber,
        average: b.qber,
        p_acc: b.p_acc,
        rate: b.rate,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coherent_curves(alpha: f64, eta_bob: f64, epsilon_bob: f64, stop_km: f64) -> Result<String, JsError> {
    js(coherent_curves_json(alpha, eta_bob, epsilon_bob, stop_km))
}

#[wasm_bindgen]
pub fn sps_curves(p0: f64, p1: f64, p2: f64, eta_a: f64, eps_a: f64, stop_km: f64) -> Result<String, JsError> {
    js(sps_curves_json(p0, p1, p2, eta_a, eps_a, stop_km))
}

#[wasm_bindgen]
pub fn qber_profile(mu: f64, omega: f64, distance_km: f64) -> Result<String, JsError> {
    js(qber_profile_json(mu, omega, distance_km))
}
