//! GLLP lower bound on the secret key rate, shared by every source model.

use crate::math::binary_entropy;

/// Inputs and outputs of one evaluation of the GLLP bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GllpTerms {
    /// Post-selected rate `R` in bits per pulse, clamped at zero.
    pub rate: f64,
    /// Upper bound on the single-photon error rate, `E / (1 - p_multi / Q)`.
    /// Infinite when `p_multi >= Q`.
    pub e1: f64,
    /// Continuous unclamped value used by the optimizers. Equal to `rate`
    /// whenever that is positive.
    pub objective: f64,
}

/// `q p_acc {(Q - p_multi)[1 - H(E1)] - Q f H(E)}`, clamped at zero.
///
/// When the bound collapses (`p_multi >= Q` or `E1 >= 1/2`) the rate is zero
/// and `objective` keeps decreasing away from the feasible region so that
/// local searches can find their way back.
pub fn gllp_rate(q: f64, p_acc: f64, gain: f64, qber: f64, p_multi: f64, f_ec: f64) -> GllpTerms {
    if !(gain > 0.0) {
        return GllpTerms {
            rate: 0.0,
            e1: f64::INFINITY,
            objective: -q * p_acc * p_multi,
        };
    }
    let leak = gain * f_ec * binary_entropy(qber.clamp(0.0, 0.5)).unwrap_or(1.0);
    let single = gain - p_multi;
    let (e1, privacy) = if single > 0.0 {
        let e1 = qber / (1.0 - p_multi / gain);
        let h = binary_entropy(e1.clamp(0.0, 0.5)).unwrap_or(1.0);
        (e1, single * (1.0 - h))
    } else {
        (f64::INFINITY, single)
    };
    let objective = q * p_acc * (privacy - leak);
    let rate = if objective > 0.0 && e1 < 0.5 { objective } else { 0.0 };
    GllpTerms { rate, e1, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_single_photons() {
        let t = gllp_rate(0.5, 1.0, 0.01, 0.0, 0.0, 1.22);
        assert_eq!(t.rate, 0.005);
        assert_eq!(t.e1, 0.0);
    }

    #[test]
    fn collapses_when_multiphotons_dominate() {
        let t = gllp_rate(0.5, 1.0, 1e-3, 0.01, 2e-3, 1.22);
        assert_eq!(t.rate, 0.0);
        assert!(t.objective < 0.0);
        assert!(t.e1.is_infinite());
    }

    #[test]
    fn zero_acceptance_gives_zero_rate() {
        assert_eq!(gllp_rate(0.5, 0.0, 1e-2, 0.01, 1e-4, 1.22).rate, 0.0);
    }

    #[test]
    fn rate_decreases_with_error() {
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let e = i as f64 * 0.01;
            let r = gllp_rate(0.5, 0.7, 1e-2, e, 1e-3, 1.22).rate;
            assert!(r <= last);
            last = r;
        }
    }
}
