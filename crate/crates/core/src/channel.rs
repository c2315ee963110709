//! Lossy channel and threshold-detector models.
//!
//! Bob runs an active BB84 receiver: a polarization analyser with two
//! threshold detectors behind a basis switch. The channel is a beamsplitter
//! of transmittance `10^(-alpha d / 10)`, and Bob's optical losses and
//! detector efficiency are folded into `eta_bob`. The only background is
//! detector dark counts.

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_unit, Error, Result};

/// Channel, receiver and post-processing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Loss coefficient in dB/km.
    pub alpha: f64,
    /// Channel length in km.
    pub distance: f64,
    /// Overall transmittance of Bob's apparatus, detector efficiency included.
    pub eta_bob: f64,
    /// Dark-count probability per detector and gate.
    pub epsilon_bob: f64,
    /// Protocol efficiency (1/2 for standard BB84).
    pub q_efficiency: f64,
    /// Error-correction inefficiency `f(E)`.
    pub f_ec: f64,
}

impl LinkParams {
    pub fn new(
        alpha: f64,
        distance: f64,
        eta_bob: f64,
        epsilon_bob: f64,
        q_efficiency: f64,
        f_ec: f64,
    ) -> Result<Self> {
        let link = Self {
            alpha,
            distance,
            eta_bob,
            epsilon_bob,
            q_efficiency,
            f_ec,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("alpha", self.alpha)?;
        check_non_negative("distance", self.distance)?;
        check_unit("eta_bob", self.eta_bob)?;
        check_unit("epsilon_bob", self.epsilon_bob)?;
        if !(self.q_efficiency > 0.0 && self.q_efficiency <= 1.0) {
            return Err(Error::Domain {
                name: "q_efficiency",
                value: self.q_efficiency,
                domain: "(0, 1]",
            });
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::Domain {
                name: "f_ec",
                value: self.f_ec,
                domain: "[1, inf)",
            });
        }
        Ok(())
    }

    /// Same link at another distance.
    pub fn at_distance(&self, distance: f64) -> Self {
        Self { distance, ..*self }
    }

    pub fn eta_sys(&self) -> f64 {
        eta_sys(self)
    }
}

impl Default for LinkParams {
    /// The reference link: 0.2 dB/km, `eta_B = 0.1`, `eps_B = 1e-6`,
    /// `q = 1/2`, `f(E) = 1.22`, at zero distance.
    fn default() -> Self {
        Self {
            alpha: 0.2,
            distance: 0.0,
            eta_bob: 0.1,
            epsilon_bob: 1e-6,
            q_efficiency: 0.5,
            f_ec: 1.22,
        }
    }
}

/// Threshold detector: efficiency and dark-count probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub eta_det: f64,
    pub epsilon_dark: f64,
}

impl DetectorParams {
    pub fn new(eta_det: f64, epsilon_dark: f64) -> Result<Self> {
        check_unit("eta_det", eta_det)?;
        check_unit("epsilon_dark", epsilon_dark)?;
        Ok(Self { eta_det, epsilon_dark })
    }
}

/// `10^(-alpha d / 10)`.
pub fn eta_channel(alpha: f64, distance: f64) -> f64 {
    10f64.powf(-alpha * distance / 10.0)
}

pub fn eta_sys(link: &LinkParams) -> f64 {
    eta_channel(link.alpha, link.distance) * link.eta_bob
}

/// Probability that a threshold detector stays silent on an `n`-photon input.
pub fn threshold_no_click(n: usize, det: &DetectorParams) -> f64 {
    (1.0 - det.epsilon_dark) * (1.0 - det.eta_det).powi(n as i32)
}

/// Diagonal response of Bob's receiver to the Fock input `|n, m>` in the
/// measured basis (`n` photons in the mode the bit value 0 maps to).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobResponse {
    /// Neither detector clicks.
    pub vacuum: f64,
    /// Only the bit-0 detector clicks.
    pub zero: f64,
    /// Only the bit-1 detector clicks.
    pub one: f64,
    /// Both detectors click.
    pub double: f64,
}

impl BobResponse {
    /// Probability of recording a wrong bit when the matched mode carries the
    /// bit value 0 and double clicks are assigned at random.
    pub fn error_weight(&self) -> f64 {
        self.one + 0.5 * self.double
    }

    pub fn click(&self) -> f64 {
        1.0 - self.vacuum
    }
}

/// POVM response of Bob's two detectors to `|n, m>` after a channel of
/// overall transmittance `eta_sys`, with dark-count probability `eps_b` each.
///
/// The noiseless layer has both detectors fire independently with
/// probabilities `1 - (1-eta)^n` and `1 - (1-eta)^m`; dark counts are then
/// added independently per detector. The double-click element is the
/// complement of the other three.
pub fn bob_povm_coefficients(n: usize, m: usize, eta_sys: f64, eps_b: f64) -> BobResponse {
    let miss_n = (1.0 - eta_sys).powi(n as i32);
    let miss_m = (1.0 - eta_sys).powi(m as i32);
    let f_vac = miss_n * miss_m;
    let f_zero = (1.0 - miss_n) * miss_m;
    let f_one = (1.0 - miss_m) * miss_n;

    let vacuum = (1.0 - eps_b * (2.0 - eps_b)) * f_vac;
    let zero = (1.0 - eps_b) * eps_b * f_vac + (1.0 - eps_b) * f_zero;
    let one = (1.0 - eps_b) * eps_b * f_vac + (1.0 - eps_b) * f_one;
    let double = (1.0 - (vacuum + zero + one)).max(0.0);
    BobResponse {
        vacuum,
        zero,
        one,
        double,
    }
}

/// `1 - (1-eta)^n` without cancellation for small `eta`.
pub fn detection_probability(n: usize, eta: f64) -> f64 {
    if n == 0 || eta <= 0.0 {
        0.0
    } else if eta >= 1.0 {
        1.0
    } else {
        -(n as f64 * (-eta).ln_1p()).exp_m1()
    }
}

/// Gain from the noiseless click trace `1 - Tr(F_vac rho)`:
/// `Q = 1 - (1-eps_B)^2 (1 - f_click)`, arranged to keep precision when
/// both terms are small.
pub fn gain_from_clicks(f_click: f64, eps_b: f64) -> f64 {
    eps_b * (2.0 - eps_b) + (1.0 - eps_b).powi(2) * f_click
}

/// Error rate among clicks from the noiseless traces
/// `f_0 = Tr(F_0 rho)`, `f_1 = Tr(F_1 rho)`, `f_dc = Tr(F_dc rho)` and the gain.
///
/// `E = [eps(eps-1) f_0 + (2 + eps(eps-3)) f_1 + (1 + eps(eps-2)) f_dc + eps(2-eps)] / 2Q`.
pub fn qber_from_traces(f_zero: f64, f_one: f64, f_double: f64, gain: f64, eps_b: f64) -> Result<f64> {
    if gain <= 0.0 {
        return Err(Error::DivisionByZero("gain is zero"));
    }
    let e = eps_b;
    let numerator =
        e * (e - 1.0) * f_zero + (2.0 + e * (e - 3.0)) * f_one + (1.0 + e * (e - 2.0)) * f_double + e * (2.0 - e);
    Ok(numerator / (2.0 * gain))
}
