//! Independent Fock-space simulation of the passive transmitters.
//!
//! The closed-form sums in [`crate::sps`] are checked against a direct
//! propagation of the source states through the optical network, with Bob's
//! click statistics taken from [`crate::channel::bob_povm_coefficients`].

pub mod fock;
pub mod network;

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::Matrix2;
use num_complex::Complex64;

pub use fock::{DensityOperator, FockSpace, Outcome};
pub use network::{simulate_passive, Element, NetworkSpec, PassiveLayout, Polarization, SimulatedOutput};

use crate::channel::{bob_povm_coefficients, eta_sys, LinkParams};
use crate::error::{check_unit, Error, Result};
use crate::math::{integrate, QuadratureSpec};
use crate::sps::{SpsOutput, SpsPassiveParams};

/// The four quantities that enter the key rate of the passive SPS source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsQuantities {
    pub normalization: f64,
    pub gain: f64,
    pub qber: f64,
    pub p_multi: f64,
}

impl SpsQuantities {
    /// Evaluated from the closed-form sums.
    pub fn closed_form(params: &SpsPassiveParams, link: &LinkParams) -> Result<Self> {
        let out = SpsOutput::new(params);
        Ok(Self {
            normalization: out.normalization(),
            gain: out.gain(link)?,
            qber: out.qber(link)?,
            p_multi: out.p_multi()?,
        })
    }

    /// Evaluated by simulating the transmitter with `silent` as the dark
    /// monitor and applying Bob's receiver POVM to the emitted state.
    pub fn simulated(params: &SpsPassiveParams, link: &LinkParams, silent: Polarization) -> Result<Self> {
        let out = simulate_passive(params, silent)?;
        let state = out
            .state
            .ok_or(Error::DivisionByZero("no accepted detection pattern (N = 0)"))?;
        let eta = eta_sys(link);
        let cap = state.space().cap() as u8;
        let (mut gain, mut wrong) = (0.0, 0.0);
        for a in 0..=cap {
            for b in 0..=cap - a {
                let p = state.population(&[a, b]);
                let bob = bob_povm_coefficients(a as usize, b as usize, eta, link.epsilon_bob);
                gain += p * bob.click();
                wrong += p * bob.error_weight();
            }
        }
        if gain <= 0.0 {
            return Err(Error::DivisionByZero("gain is zero"));
        }
        let few = state.population(&[0, 0]) + state.population(&[0, 1]) + state.population(&[1, 0]);
        Ok(Self {
            normalization: out.probability,
            gain,
            qber: wrong / gain,
            p_multi: (1.0 - few).max(0.0),
        })
    }

    /// Largest absolute difference over the four fields.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        [
            self.normalization - other.normalization,
            self.gain - other.gain,
            self.qber - other.qber,
            self.p_multi - other.p_multi,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// `|1_theta><1_theta|` in the diagonal basis `(+45, -45)`.
fn single_photon_projector(theta: f64) -> Matrix2<Complex64> {
    let c = Complex64::from_polar(0.5, theta);
    let d = Complex64::new(0.5, 0.0);
    Matrix2::new(d, c.conj(), c, d)
}

fn integrate_projector(a: f64, b: f64, spec: &QuadratureSpec) -> Result<Matrix2<Complex64>> {
    // Entry (1, 0) is e^{i theta} / 2; the diagonal is constant.
    let re = integrate(|th| 0.5 * th.cos(), a, b, spec)?;
    let im = integrate(|th| 0.5 * th.sin(), a, b, spec)?;
    let diag = Complex64::new(0.5 * (b - a), 0.0);
    let off = Complex64::new(re, im);
    Ok(Matrix2::new(diag, off.conj(), off, diag))
}

/// Checks that single photons accepted in the rectilinear regions and in the
/// circular regions give the same mixture once averaged over the key bit,
/// namely `(pi - 4 Omega)/4` times the identity.
///
/// Returns the largest entry-wise deviation of either average from that
/// target. The rectilinear region around `theta = 0` wraps through `2 pi`
/// and is integrated as `[-(pi/4 - Omega), pi/4 - Omega]`.
pub fn check_basis_independence(omega: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_unit("omega / (pi/4)", omega / FRAC_PI_4)?;
    let half = FRAC_PI_4 - omega;
    let region = |centre: f64| integrate_projector(centre - half, centre + half, spec);
    let rectilinear = (region(0.0)? + region(PI)?) * Complex64::new(0.5, 0.0);
    let circular = (region(PI / 2.0)? + region(3.0 * PI / 2.0)?) * Complex64::new(0.5, 0.0);
    let target = Matrix2::<Complex64>::identity() * Complex64::new((PI - 4.0 * omega) / 4.0, 0.0);
    let deviation = |m: Matrix2<Complex64>| (m - target).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    Ok(deviation(rectilinear).max(deviation(circular)))
}

/// Sanity helper: `|1_theta>` expressed in the diagonal basis is normalized
/// for every angle.
pub fn single_photon_trace(theta: f64) -> f64 {
    single_photon_projector(theta).trace().re
}
