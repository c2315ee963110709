//! Passive BB84 transmitter driven by two phase-randomized strong coherent
//! pulses.
//!
//! Interfering orthogonally polarized pulses at a PBS yields a polarization
//! angle `theta` that is uniform on the circle. Alice measures it on a
//! strong tap and keeps pulses whose angle falls within `pi/4 - omega` of one
//! of the four BB84 angles. The weak arm carries a Poissonian mixture of
//! `|n_theta>` states with mean `mu = upsilon t`, and only `mu` enters the
//! rate.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::channel::{eta_sys, qber_from_traces, LinkParams};
use crate::error::{check_non_negative, Error, Result};
use crate::math::{integrate, minimize_1d, minimize_2d, Box2, QuadratureSpec, DEFAULT_SEEDS};
use crate::rate::gllp_rate;

/// Mean photon number of the post-selected output and the acceptance margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentPassiveParams {
    pub mu: f64,
    pub omega: f64,
}

impl CoherentPassiveParams {
    pub fn new(mu: f64, omega: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Domain {
                name: "mu",
                value: mu,
                domain: "(0, inf)",
            });
        }
        check_omega(omega)?;
        Ok(Self { mu, omega })
    }

    /// Parameters from the source intensity `upsilon` and tap transmittance `t`.
    pub fn from_source(upsilon: f64, tap_transmittance: f64, omega: f64) -> Result<Self> {
        Self::new(upsilon * tap_transmittance, omega)
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if (0.0..=FRAC_PI_4).contains(&omega) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "omega",
            value: omega,
            domain: "[0, pi/4]",
        })
    }
}

/// Everything that enters the GLLP bound for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentRateBreakdown {
    pub p_acc: f64,
    pub gain: f64,
    pub qber: f64,
    pub p_multi: f64,
    pub e1: f64,
    pub rate: f64,
    /// Unclamped bound, for optimizers.
    pub objective: f64,
}

/// `1 - 4 omega / pi`.
pub fn acceptance_probability(omega: f64) -> Result<f64> {
    check_omega(omega)?;
    Ok((1.0 - 4.0 * omega / PI).max(0.0))
}

/// `Q = 1 - (1 - eps_B)^2 exp(-mu eta_sys)`, the same for every angle and basis.
pub fn gain(mu: f64, link: &LinkParams) -> f64 {
    let eps = link.epsilon_bob;
    // 1 - exp(2 ln(1 - eps) - mu eta) without cancellation at small arguments.
    -(2.0 * (-eps).ln_1p() - mu * eta_sys(link)).exp_m1()
}

/// Error rate of the state `rho_out,theta` measured in the horizontal basis.
pub fn qber_theta(theta: f64, mu: f64, link: &LinkParams) -> Result<f64> {
    qber_theta_with(theta, mu, eta_sys(link), link.epsilon_bob, gain(mu, link))
}

fn qber_theta_with(theta: f64, mu: f64, eta: f64, eps: f64, gain: f64) -> Result<f64> {
    let x = eta * mu;
    let c = theta.cos();
    let matched = 0.5 * x * (1.0 + c);
    let crossed = 0.5 * x * (1.0 - c);
    let decay = (-x).exp();
    let f_zero = decay * matched.exp_m1();
    let f_one = decay * crossed.exp_m1();
    let f_double = (-matched).exp_m1() * (-crossed).exp_m1();
    qber_from_traces(f_zero, f_one, f_double, gain, eps)
}

/// Average error rate over the accepted horizontal interval
/// `[-(pi/4 - omega), pi/4 - omega]`.
///
/// `E_theta` is even in `theta`, so the integral runs over the right half
/// only. At `omega = pi/4` the interval collapses onto `theta = 0`.
pub fn qber_average(params: &CoherentPassiveParams, link: &LinkParams) -> Result<f64> {
    qber_average_with(params, link, &QuadratureSpec::default())
}

pub fn qber_average_with(params: &CoherentPassiveParams, link: &LinkParams, spec: &QuadratureSpec) -> Result<f64> {
    check_omega(params.omega)?;
    let eta = eta_sys(link);
    let eps = link.epsilon_bob;
    let q = gain(params.mu, link);
    if q <= 0.0 {
        return Err(Error::DivisionByZero("gain is zero"));
    }
    let half_width = FRAC_PI_4 - params.omega;
    if half_width <= 0.0 {
        return qber_theta_with(0.0, params.mu, eta, eps, q);
    }
    let integrand = |theta: f64| qber_theta_with(theta, params.mu, eta, eps, q).expect("gain checked above");
    Ok(integrate(integrand, 0.0, half_width, spec)? / half_width)
}

/// Poissonian multiphoton probability `1 - e^(-mu)(1 + mu)`.
pub fn p_multi_poisson(mu: f64) -> f64 {
    // -expm1(-mu) - mu e^(-mu) keeps precision for small mu.
    (-(-mu).exp_m1() - mu * (-mu).exp()).max(0.0)
}

pub fn key_rate(params: &CoherentPassiveParams, link: &LinkParams) -> Result<CoherentRateBreakdown> {
    let p_acc = acceptance_probability(params.omega)?;
    let q = gain(params.mu, link);
    let p_multi = p_multi_poisson(params.mu);
    let qber = if q > 0.0 { qber_average(params, link)? } else { 0.0 };
    let terms = gllp_rate(link.q_efficiency, p_acc, q, qber, p_multi, link.f_ec);
    Ok(CoherentRateBreakdown {
        p_acc,
        gain: q,
        qber,
        p_multi,
        e1: terms.e1,
        rate: terms.rate,
        objective: terms.objective,
    })
}

/// Active weak-coherent-pulse baseline: the perfectly aligned signal
/// (`theta = 0`) with every pulse accepted.
pub fn active_wcp_rate(mu: f64, link: &LinkParams) -> Result<CoherentRateBreakdown> {
    check_non_negative("mu", mu)?;
    let q = gain(mu, link);
    let p_multi = p_multi_poisson(mu);
    let qber = if q > 0.0 { qber_theta(0.0, mu, link)? } else { 0.0 };
    let terms = gllp_rate(link.q_efficiency, 1.0, q, qber, p_multi, link.f_ec);
    Ok(CoherentRateBreakdown {
        p_acc: 1.0,
        gain: q,
        qber,
        p_multi,
        e1: terms.e1,
        rate: terms.rate,
        objective: terms.objective,
    })
}

/// Search range for `log10(mu)`; the box `mu in (0, 1]` is explored on a
/// logarithmic axis since optimal intensities span several decades.
pub const LOG10_MU_RANGE: (f64, f64) = (-5.0, 0.0);

/// Optimal operating point at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentOptimum {
    pub mu: f64,
    pub omega: f64,
    pub breakdown: CoherentRateBreakdown,
}

impl CoherentOptimum {
    pub fn rate(&self) -> f64 {
        self.breakdown.rate
    }
}

/// Maximize the passive rate over `(mu, omega)` at distance `d`.
///
/// When no positive rate exists the sentinel `mu = 0, omega = pi/4` (nothing
/// accepted) is returned with a zero rate; its `objective` still carries the
/// best unclamped value found, which the cutoff search uses.
pub fn optimize(d: f64, link: &LinkParams) -> Result<CoherentOptimum> {
    check_non_negative("distance", d)?;
    let link = link.at_distance(d);
    let bounds = Box2::new(LOG10_MU_RANGE, (0.0, FRAC_PI_4))?;
    let objective = |log_mu: f64, omega: f64| -> f64 {
        let params = CoherentPassiveParams {
            mu: 10f64.powf(log_mu),
            omega,
        };
        key_rate(&params, &link).map_or(f64::INFINITY, |b| -b.objective)
    };
    let best = minimize_2d(objective, &bounds, DEFAULT_SEEDS);
    let params = CoherentPassiveParams {
        mu: 10f64.powf(best.x),
        omega: best.y,
    };
    let breakdown = key_rate(&params, &link)?;
    if breakdown.rate > 0.0 {
        Ok(CoherentOptimum {
            mu: params.mu,
            omega: params.omega,
            breakdown,
        })
    } else {
        Ok(sentinel(breakdown.objective))
    }
}

/// Maximize the active baseline over `mu` at distance `d`.
pub fn optimize_active(d: f64, link: &LinkParams) -> Result<CoherentOptimum> {
    check_non_negative("distance", d)?;
    let link = link.at_distance(d);
    let objective =
        |log_mu: f64| -> f64 { active_wcp_rate(10f64.powf(log_mu), &link).map_or(f64::INFINITY, |b| -b.objective) };
    let best = minimize_1d(objective, LOG10_MU_RANGE.0, LOG10_MU_RANGE.1, 200);
    let mu = 10f64.powf(best.x);
    let breakdown = active_wcp_rate(mu, &link)?;
    if breakdown.rate > 0.0 {
        Ok(CoherentOptimum {
            mu,
            omega: 0.0,
            breakdown,
        })
    } else {
        Ok(sentinel(breakdown.objective))
    }
}

fn sentinel(objective: f64) -> CoherentOptimum {
    CoherentOptimum {
        mu: 0.0,
        omega: FRAC_PI_4,
        breakdown: CoherentRateBreakdown {
            p_acc: 0.0,
            gain: 0.0,
            qber: 0.0,
            p_multi: 0.0,
            e1: 0.0,
            rate: 0.0,
            objective: objective.min(0.0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn noiseless() -> LinkParams {
        LinkParams {
            epsilon_bob: 0.0,
            ..LinkParams::default()
        }
    }

    fn with_eta(eta: f64, eps: f64) -> LinkParams {
        LinkParams {
            eta_bob: eta,
            epsilon_bob: eps,
            distance: 0.0,
            ..LinkParams::default()
        }
    }

    #[test]
    fn acceptance_reference_values() {
        assert_eq!(acceptance_probability(0.0).unwrap(), 1.0);
        assert_eq!(acceptance_probability(FRAC_PI_4).unwrap(), 0.0);
        assert_abs_diff_eq!(acceptance_probability(PI / 8.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(acceptance_probability(-0.01).is_err());
        assert!(acceptance_probability(0.8).is_err());
    }

    #[test]
    fn gain_reference_values() {
        assert_eq!(gain(0.0, &noiseless()), 0.0);
        let eps = 1e-6;
        assert_abs_diff_eq!(gain(0.3, &with_eta(0.0, eps)), eps * (2.0 - eps), epsilon = 1e-20);
        // mpmath: 1 - (1 - 1e-6)^2 exp(-0.0084)
        assert_abs_diff_eq!(
            gain(0.084, &with_eta(0.1, eps)),
            8.366_801_846_272_834e-3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn qber_at_special_angles() {
        let link = noiseless();
        assert_abs_diff_eq!(qber_theta(0.0, 0.1, &link).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(qber_theta(FRAC_PI_2, 0.1, &link).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(qber_theta(PI, 0.1, &link).unwrap(), 1.0, epsilon = 1e-12);
        // Conjugate basis stays at one half with dark counts too.
        let noisy = with_eta(0.1, 1e-3);
        assert_abs_diff_eq!(qber_theta(FRAC_PI_2, 0.2, &noisy).unwrap(), 0.5, epsilon = 1e-12);
        assert!(qber_theta(0.0, 0.0, &noiseless()).is_err());
    }

    #[test]
    fn qber_matches_direct_povm_evaluation() {
        use crate::channel::bob_povm_coefficients;
        // Poisson mixture of |n_theta>: Fock populations in the H/V basis are
        // a product of Poissons with means mu cos^2(theta/2), mu sin^2(theta/2).
        let (mu, theta) = (0.4f64, 0.6f64);
        let link = with_eta(0.3, 1e-3);
        let mh = mu * (theta / 2.0).cos().powi(2);
        let mv = mu * (theta / 2.0).sin().powi(2);
        let poisson = |m: f64, k: usize| (-m).exp() * m.powi(k as i32) / crate::math::factorial(k);
        let (mut err, mut click) = (0.0, 0.0);
        for n in 0..30 {
            for m in 0..30 {
                let p = poisson(mh, n) * poisson(mv, m);
                let r = bob_povm_coefficients(n, m, eta_sys(&link), link.epsilon_bob);
                err += p * r.error_weight();
                click += p * r.click();
            }
        }
        assert_abs_diff_eq!(gain(mu, &link), click, epsilon = 1e-14);
        assert_abs_diff_eq!(qber_theta(theta, mu, &link).unwrap(), err / click, epsilon = 1e-12);
    }

    #[test]
    fn average_matches_dense_midpoint_rule() {
        let params = CoherentPassiveParams::new(0.084, 0.365).unwrap();
        let link = LinkParams::default();
        let a = FRAC_PI_4 - params.omega;
        let n = 1_000_000;
        let h = 2.0 * a / n as f64;
        let sum: f64 = (0..n)
            .map(|i| qber_theta(-a + (i as f64 + 0.5) * h, params.mu, &link).unwrap())
            .sum();
        let midpoint = sum * h / (2.0 * a);
        assert_abs_diff_eq!(qber_average(&params, &link).unwrap(), midpoint, epsilon = 1e-8);
    }

    #[test]
    fn average_limits() {
        let link = LinkParams::default();
        let closed = CoherentPassiveParams::new(0.05, FRAC_PI_4).unwrap();
        let aligned = qber_theta(0.0, 0.05, &link).unwrap();
        assert_abs_diff_eq!(qber_average(&closed, &link).unwrap(), aligned, epsilon = 1e-15);
        let nearly = CoherentPassiveParams::new(0.05, FRAC_PI_4 - 1e-9).unwrap();
        assert_abs_diff_eq!(qber_average(&nearly, &link).unwrap(), aligned, epsilon = 1e-12);

        let link = noiseless();
        for omega in [0.0, 0.2, 0.5, 0.7] {
            let p = CoherentPassiveParams::new(0.1, omega).unwrap();
            let edge = qber_theta(FRAC_PI_4 - omega, 0.1, &link).unwrap();
            assert!(qber_average(&p, &link).unwrap() < edge);
        }
    }

    #[test]
    fn multiphoton_reference_values() {
        assert_eq!(p_multi_poisson(0.0), 0.0);
        assert_abs_diff_eq!(p_multi_poisson(0.1), 4.678_840_160_444_469e-3, epsilon = 1e-17);
        let mu = 1e-4;
        assert_abs_diff_eq!(p_multi_poisson(mu) / (mu * mu / 2.0), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn rate_collapses_in_degenerate_regimes() {
        let link = LinkParams::default().at_distance(150.0);
        let b = key_rate(&CoherentPassiveParams::new(0.5, 0.3).unwrap(), &link).unwrap();
        assert!(b.p_multi >= b.gain);
        assert_eq!(b.rate, 0.0);
        let b = key_rate(
            &CoherentPassiveParams::new(0.05, FRAC_PI_4).unwrap(),
            &LinkParams::default(),
        )
        .unwrap();
        assert_eq!(b.p_acc, 0.0);
        assert_eq!(b.rate, 0.0);
    }

    #[test]
    fn noiseless_active_rate() {
        let link = noiseless();
        let mu = 0.1;
        let b = active_wcp_rate(mu, &link).unwrap();
        let q = 1.0 - (-mu * eta_sys(&link)).exp();
        assert_eq!(b.qber, 0.0);
        assert_abs_diff_eq!(b.gain, q, epsilon = 1e-16);
        assert_abs_diff_eq!(b.rate, 0.5 * (q - p_multi_poisson(mu)), epsilon = 1e-16);
    }

    #[test]
    fn optimum_at_zero_distance_is_positive() {
        let opt = optimize(0.0, &LinkParams::default()).unwrap();
        assert!(opt.rate() > 0.0);
        assert!(opt.mu > 0.0 && opt.mu <= 1.0);
        assert!((0.0..=FRAC_PI_4).contains(&opt.omega));
    }

    #[test]
    fn nothing_survives_500_km() {
        let opt = optimize(500.0, &LinkParams::default()).unwrap();
        assert_eq!(opt.rate(), 0.0);
        assert_eq!((opt.mu, opt.omega), (0.0, FRAC_PI_4));
        assert_eq!(optimize_active(500.0, &LinkParams::default()).unwrap().rate(), 0.0);
    }

    #[test]
    fn only_mu_enters() {
        let link = LinkParams::default().at_distance(20.0);
        let a = CoherentPassiveParams::from_source(1e8, 3e-10, 0.4).unwrap();
        let b = CoherentPassiveParams::from_source(2e8, 1.5e-10, 0.4).unwrap();
        assert_abs_diff_eq!(a.mu, b.mu, epsilon = 1e-18);
        let (ra, rb) = (key_rate(&a, &link).unwrap(), key_rate(&b, &link).unwrap());
        assert_abs_diff_eq!(ra.rate, rb.rate, epsilon = 1e-18);
        assert_abs_diff_eq!(ra.gain, rb.gain, epsilon = 1e-18);
    }

    proptest! {
        #[test]
        fn qber_is_even(theta in -PI..PI, mu in 1e-3f64..2.0, eps in 0.0f64..1e-3) {
            let link = with_eta(0.1, eps);
            let a = qber_theta(theta, mu, &link).unwrap();
            let b = qber_theta(-theta, mu, &link).unwrap();
            prop_assert!((a - b).abs() <= 1e-14);
        }

        #[test]
        fn noiseless_qber_increases_with_angle(t1 in 0.0f64..PI, t2 in 0.0f64..PI, mu in 1e-3f64..2.0) {
            let link = noiseless();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(qber_theta(lo, mu, &link).unwrap() <= qber_theta(hi, mu, &link).unwrap() + 1e-15);
        }

        #[test]
        fn noiseless_average_decreases_with_omega(o1 in 0.0f64..FRAC_PI_4, o2 in 0.0f64..FRAC_PI_4, mu in 1e-3f64..1.0) {
            let link = noiseless();
            let (lo, hi) = if o1 <= o2 { (o1, o2) } else { (o2, o1) };
            let e_lo = qber_average(&CoherentPassiveParams::new(mu, lo).unwrap(), &link).unwrap();
            let e_hi = qber_average(&CoherentPassiveParams::new(mu, hi).unwrap(), &link).unwrap();
            prop_assert!(e_hi <= e_lo + 1e-10);
        }

        #[test]
        fn passive_never_beats_active(mu in 1e-4f64..1.0, omega in 0.0f64..FRAC_PI_4, d in 0.0f64..100.0) {
            let link = LinkParams::default().at_distance(d);
            let passive = key_rate(&CoherentPassiveParams::new(mu, omega).unwrap(), &link).unwrap();
            let active = active_wcp_rate(mu, &link).unwrap();
            prop_assert!(passive.rate <= active.rate);
        }
    }
}
