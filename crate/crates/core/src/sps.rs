//! Passive BB84 transmitter built from four practical single-photon sources.
//!
//! Each source (H, V, L, R) passes a tap beamsplitter of transmittance `t`
//! whose reflected arm feeds a monitor detector. The H/V and L/R pairs merge
//! on polarization combiners and the two beams meet on a balanced
//! beamsplitter; one port leaves for the channel and the other feeds the
//! veto detector `D`. A pulse is accepted when exactly three monitors click
//! and `D` stays silent; the silent monitor `j` names the emitted state.
//!
//! Photon-number sums are truncated at the support of the source
//! distribution, which is exact because every coefficient vanishes beyond it.

use crate::channel::{detection_probability, eta_sys, gain_from_clicks, qber_from_traces, LinkParams};
use crate::error::{check_unit, Error, Result};
use crate::math::{binomial, f_comb, factorial, minimize_1d};
use crate::rate::gllp_rate;

/// Photon-number distribution `p_0, ..., p_nmax` of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDistribution {
    probs: Vec<f64>,
}

impl SourceDistribution {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain {
                name: "probs",
                value: 0.0,
                domain: "non-empty list",
            });
        }
        for &p in &probs {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Domain {
                    name: "p_n",
                    value: p,
                    domain: "[0, 1]",
                });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Domain {
                name: "sum p_n",
                value: total,
                domain: "1",
            });
        }
        Ok(Self { probs })
    }

    /// Perfect on-demand source, `p_1 = 1`.
    pub fn ideal() -> Self {
        Self { probs: vec![0.0, 1.0] }
    }

    pub fn vacuum() -> Self {
        Self { probs: vec![1.0] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn nmax(&self) -> usize {
        self.probs.len() - 1
    }

    /// `p_n`, zero beyond the support.
    pub fn p(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Distribution after a lossy element of transmittance `tau`.
    pub fn attenuated(&self, tau: f64) -> Self {
        let probs = (0..=self.nmax())
            .map(|n| {
                (n..=self.nmax())
                    .map(|k| self.probs[k] * binomial(k, n) * tau.powi(n as i32) * (1.0 - tau).powi((k - n) as i32))
                    .sum()
            })
            .collect();
        Self { probs }
    }
}

/// Tap transmittance, source statistics and Alice's detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpsPassiveParams {
    pub t: f64,
    pub dist: SourceDistribution,
    /// Efficiency of Alice's five threshold detectors.
    pub eta_a: f64,
    /// Dark-count probability of Alice's detectors.
    pub eps_a: f64,
}

impl SpsPassiveParams {
    pub fn new(t: f64, dist: SourceDistribution, eta_a: f64, eps_a: f64) -> Result<Self> {
        check_unit("t", t)?;
        check_unit("eta_a", eta_a)?;
        check_unit("eps_a", eps_a)?;
        Ok(Self { t, dist, eta_a, eps_a })
    }
}

/// Weight for `n` photons transmitted by a source whose monitor stays silent.
pub fn u_coeff(n: usize, params: &SpsPassiveParams) -> f64 {
    let dist = &params.dist;
    if n > dist.nmax() {
        return 0.0;
    }
    let leak = (1.0 - params.eta_a) * (1.0 - params.t);
    let sum: f64 = (n..=dist.nmax())
        .map(|k| dist.p(k) * binomial(k, k - n) * leak.powi((k - n) as i32))
        .sum();
    (1.0 - params.eps_a) * params.t.powi(n as i32) * sum
}

/// Weight for `n` photons transmitted by a source whose monitor clicks.
pub fn q_coeff(n: usize, params: &SpsPassiveParams) -> f64 {
    let dist = &params.dist;
    if n > dist.nmax() {
        return 0.0;
    }
    let sum: f64 = (n..=dist.nmax())
        .map(|k| {
            let reflected = (k - n) as i32;
            let click = 1.0 - (1.0 - params.eps_a) * (1.0 - params.eta_a).powi(reflected);
            dist.p(k) * binomial(k, k - n) * (1.0 - params.t).powi(reflected) * click
        })
        .sum();
    params.t.powi(n as i32) * sum
}

/// One `(w, r, s)` term of the diagonal of `sigma_j^{n,m,k,l}` with the
/// `(1 - eps_A)` factor left out. `w` of the `k + l` cross-basis photons land
/// in the matched polarization; `r` and `s` photons of each polarization
/// exit towards `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SigmaTerm {
    matched: usize,
    orthogonal: usize,
    weight: f64,
}

fn g_factor(n: usize, m: usize, k: usize, l: usize, w: usize, r: usize, s: usize) -> f64 {
    let fw = f_comb(w, k, l);
    let fr = f_comb(r, w, n);
    let fs = f_comb(s, k + l - w, m);
    (fw * fw * fr * fr * fs * fs) as f64
}

fn h_factor(n: usize, m: usize, k: usize, l: usize, w: usize, r: usize, s: usize) -> f64 {
    factorial(r) * factorial(s) * factorial(w + n - r) * factorial(k + l + m - w - s)
}

fn sigma_terms(n: usize, m: usize, k: usize, l: usize, eta_det: f64) -> Vec<SigmaTerm> {
    let prefactor = 0.5f64.powi((n + m) as i32) * 0.25f64.powi((k + l) as i32)
        / (factorial(n) * factorial(m) * factorial(k) * factorial(l));
    let mut terms = Vec::new();
    for w in 0..=k + l {
        for r in 0..=w + n {
            for s in 0..=k + l + m - w {
                let g = g_factor(n, m, k, l, w, r, s);
                if g == 0.0 {
                    continue;
                }
                let weight = prefactor * (1.0 - eta_det).powi((r + s) as i32) * g * h_factor(n, m, k, l, w, r, s);
                terms.push(SigmaTerm {
                    matched: w + n - r,
                    orthogonal: k + l + m - w - s,
                    weight,
                });
            }
        }
    }
    terms
}

/// `Tr(sigma_j^{n,m,k,l})`: probability that `D` stays silent given `n`
/// photons from source `j`, `m` from its orthogonal partner and `k`, `l`
/// from the conjugate-basis pair.
pub fn sigma_trace(n: usize, m: usize, k: usize, l: usize, eta_det: f64, eps_a: f64) -> f64 {
    (1.0 - eps_a) * sigma_terms(n, m, k, l, eta_det).iter().map(|t| t.weight).sum::<f64>()
}

/// Diagonal output distributions of every `(n, m, k, l)` cell, for fixed
/// detector parameters. Independent of `t`, the source statistics and the link.
#[derive(Debug, Clone)]
pub struct SpsKernel {
    nmax: usize,
    eta_det: f64,
    eps_a: f64,
    /// Indexed by cell; each entry is `(matched, orthogonal, weight)` with
    /// the `(1 - eps_A)` factor applied.
    cells: Vec<Vec<(usize, usize, f64)>>,
}

impl SpsKernel {
    pub fn new(nmax: usize, eta_det: f64, eps_a: f64) -> Self {
        let side = nmax + 1;
        let out_side = 4 * nmax + 1;
        let mut cells = Vec::with_capacity(side.pow(4));
        for n in 0..side {
            for m in 0..side {
                for k in 0..side {
                    for l in 0..side {
                        let mut dense = vec![0.0; out_side * out_side];
                        for term in sigma_terms(n, m, k, l, eta_det) {
                            dense[term.matched * out_side + term.orthogonal] += term.weight;
                        }
                        let entries = dense
                            .iter()
                            .enumerate()
                            .filter(|(_, &w)| w != 0.0)
                            .map(|(i, &w)| (i / out_side, i % out_side, (1.0 - eps_a) * w))
                            .collect();
                        cells.push(entries);
                    }
                }
            }
        }
        Self {
            nmax,
            eta_det,
            eps_a,
            cells,
        }
    }

    pub fn for_params(params: &SpsPassiveParams) -> Self {
        Self::new(params.dist.nmax(), params.eta_a, params.eps_a)
    }

    fn matches(&self, params: &SpsPassiveParams) -> bool {
        self.nmax >= params.dist.nmax() && self.eta_det == params.eta_a && self.eps_a == params.eps_a
    }
}

/// Unnormalized conditional output of one silent-monitor pattern:
/// `N rho_out,j` on its diagonal, in the basis of the silent monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpsOutput {
    normalization: f64,
    side: usize,
    /// `weights[a * side + b]` for `a` matched and `b` orthogonal photons.
    weights: Vec<f64>,
}

impl SpsOutput {
    pub fn new(params: &SpsPassiveParams) -> Self {
        Self::with_kernel(&SpsKernel::for_params(params), params)
    }

    /// Evaluate with a precomputed kernel; falls back to a fresh one if the
    /// kernel was built for different detectors.
    pub fn with_kernel(kernel: &SpsKernel, params: &SpsPassiveParams) -> Self {
        if !kernel.matches(params) {
            return Self::new(params);
        }
        let side_in = kernel.nmax + 1;
        let u: Vec<f64> = (0..side_in).map(|n| u_coeff(n, params)).collect();
        let q: Vec<f64> = (0..side_in).map(|n| q_coeff(n, params)).collect();
        let side = 4 * kernel.nmax + 1;
        let mut weights = vec![0.0; side * side];
        for (index, entries) in kernel.cells.iter().enumerate() {
            let l = index % side_in;
            let k = (index / side_in) % side_in;
            let m = (index / side_in.pow(2)) % side_in;
            let n = index / side_in.pow(3);
            let cell = u[n] * q[m] * q[k] * q[l];
            if cell == 0.0 {
                continue;
            }
            for &(a, b, w) in entries {
                weights[a * side + b] += cell * w;
            }
        }
        let normalization = weights.iter().sum();
        Self {
            normalization,
            side,
            weights,
        }
    }

    /// Probability `N` of one particular accepted pattern.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn acceptance_probability(&self) -> f64 {
        4.0 * self.normalization
    }

    /// `<a, b| rho_out,j |a, b>` in the silent monitor's basis.
    pub fn population(&self, matched: usize, orthogonal: usize) -> f64 {
        if matched >= self.side || orthogonal >= self.side || self.normalization <= 0.0 {
            return 0.0;
        }
        self.weights[matched * self.side + orthogonal] / self.normalization
    }

    fn accepted(&self) -> Result<()> {
        if self.normalization > 0.0 {
            Ok(())
        } else {
            Err(Error::DivisionByZero("no accepted detection pattern (N = 0)"))
        }
    }

    /// Normalized trace of `f(a, b)` against the output diagonal.
    fn expect(&self, f: impl Fn(i32, i32) -> f64) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.side {
            for b in 0..self.side {
                let w = self.weights[a * self.side + b];
                if w != 0.0 {
                    acc += w * f(a as i32, b as i32);
                }
            }
        }
        acc / self.normalization
    }

    pub fn gain(&self, link: &LinkParams) -> Result<f64> {
        self.accepted()?;
        let eta = eta_sys(link);
        let f_click = self.expect(|a, b| detection_probability((a + b) as usize, eta));
        Ok(gain_from_clicks(f_click, link.epsilon_bob))
    }

    pub fn qber(&self, link: &LinkParams) -> Result<f64> {
        let q = self.gain(link)?;
        let eta = eta_sys(link);
        let miss = 1.0 - eta;
        let hit = |k: i32| detection_probability(k as usize, eta);
        let f_zero = self.expect(|a, b| hit(a) * miss.powi(b));
        let f_one = self.expect(|a, b| miss.powi(a) * hit(b));
        let f_double = self.expect(|a, b| hit(a) * hit(b));
        qber_from_traces(f_zero, f_one, f_double, q, link.epsilon_bob)
    }

    /// `1 - p_00 - p_01 - p_10`.
    pub fn p_multi(&self) -> Result<f64> {
        self.accepted()?;
        let few = self.population(0, 0) + self.population(0, 1) + self.population(1, 0);
        Ok((1.0 - few).max(0.0))
    }

    pub fn key_rate(&self, link: &LinkParams) -> SpsRateBreakdown {
        if self.accepted().is_err() {
            return SpsRateBreakdown::empty(self.normalization);
        }
        let gain = self.gain(link).expect("accepted");
        let qber = self.qber(link).unwrap_or(0.0);
        let p_multi = self.p_multi().expect("accepted");
        let p_acc = self.acceptance_probability();
        let terms = gllp_rate(link.q_efficiency, p_acc, gain, qber, p_multi, link.f_ec);
        SpsRateBreakdown {
            normalization: self.normalization,
            p_acc,
            gain,
            qber,
            p_multi,
            e1: terms.e1,
            rate: terms.rate,
            objective: terms.objective,
        }
    }
}

/// Everything that enters the GLLP bound for the SPS transmitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsRateBreakdown {
    pub normalization: f64,
    pub p_acc: f64,
    pub gain: f64,
    pub qber: f64,
    pub p_multi: f64,
    pub e1: f64,
    pub rate: f64,
    pub objective: f64,
}

impl SpsRateBreakdown {
    fn empty(normalization: f64) -> Self {
        Self {
            normalization,
            p_acc: 4.0 * normalization,
            gain: 0.0,
            qber: 0.0,
            p_multi: 0.0,
            e1: 0.0,
            rate: 0.0,
            objective: 0.0,
        }
    }
}

pub fn normalization(params: &SpsPassiveParams) -> f64 {
    SpsOutput::new(params).normalization()
}

/// `p_acc = 4N`: one accepted pattern per silent monitor.
pub fn acceptance_probability(params: &SpsPassiveParams) -> f64 {
    4.0 * normalization(params)
}

pub fn sps_gain(params: &SpsPassiveParams, link: &LinkParams) -> Result<f64> {
    SpsOutput::new(params).gain(link)
}

pub fn sps_qber(params: &SpsPassiveParams, link: &LinkParams) -> Result<f64> {
    SpsOutput::new(params).qber(link)
}

pub fn sps_p_multi(params: &SpsPassiveParams) -> Result<f64> {
    SpsOutput::new(params).p_multi()
}

pub fn sps_key_rate(params: &SpsPassiveParams, link: &LinkParams) -> SpsRateBreakdown {
    SpsOutput::new(params).key_rate(link)
}

/// Optimal tap transmittance (or attenuator setting) at one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsOptimum {
    /// `t` for the passive source, `tau` for the active baseline.
    pub setting: f64,
    pub breakdown: SpsRateBreakdown,
}

const SETTING_SEEDS: usize = 101;

/// Maximize the passive rate over `t` at distance `d`.
pub fn optimize_t(d: f64, dist: &SourceDistribution, eta_a: f64, eps_a: f64, link: &LinkParams) -> Result<SpsOptimum> {
    let kernel = SpsKernel::new(dist.nmax(), eta_a, eps_a);
    optimize_t_with(&kernel, d, dist, eta_a, eps_a, link)
}

/// [`optimize_t`] with a kernel shared across distances.
pub fn optimize_t_with(
    kernel: &SpsKernel,
    d: f64,
    dist: &SourceDistribution,
    eta_a: f64,
    eps_a: f64,
    link: &LinkParams,
) -> Result<SpsOptimum> {
    let link = link.at_distance(d);
    link.validate()?;
    let base = SpsPassiveParams::new(0.5, dist.clone(), eta_a, eps_a)?;
    let evaluate = |t: f64| {
        let params = SpsPassiveParams { t, ..base.clone() };
        SpsOutput::with_kernel(kernel, &params).key_rate(&link)
    };
    let best = minimize_1d(|t| -evaluate(t).objective, 0.0, 1.0, SETTING_SEEDS);
    let breakdown = evaluate(best.x);
    Ok(if breakdown.rate > 0.0 {
        SpsOptimum {
            setting: best.x,
            breakdown,
        }
    } else {
        SpsOptimum::none(breakdown.objective)
    })
}

impl SpsOptimum {
    /// Zero-rate sentinel carrying the best unclamped objective found.
    fn none(objective: f64) -> Self {
        let mut breakdown = SpsRateBreakdown::empty(0.0);
        breakdown.objective = objective.min(0.0);
        Self {
            setting: 0.0,
            breakdown,
        }
    }

    pub fn rate(&self) -> f64 {
        self.breakdown.rate
    }
}

/// Mean photon number and normalized second-order correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonStats {
    pub n_bar: f64,
    pub g2: f64,
}

pub fn photon_stats(dist: &SourceDistribution) -> Result<PhotonStats> {
    let n_bar: f64 = dist.probs().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    if n_bar <= 0.0 {
        return Err(Error::DivisionByZero("g2 is undefined for an empty source"));
    }
    let pairs: f64 = dist
        .probs()
        .iter()
        .enumerate()
        .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
        .sum();
    Ok(PhotonStats {
        n_bar,
        g2: pairs / (n_bar * n_bar),
    })
}

/// Active baseline: the source attenuated by `tau`, a deterministic
/// polarization, every pulse accepted and only dark counts producing errors.
pub fn active_sps_rate(dist: &SourceDistribution, tau: f64, link: &LinkParams) -> Result<SpsRateBreakdown> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain {
            name: "tau",
            value: tau,
            domain: "(0, 1]",
        });
    }
    let out = dist.attenuated(tau);
    let eta = eta_sys(link);
    let eps = link.epsilon_bob;
    let f_click: f64 = out
        .probs()
        .iter()
        .enumerate()
        .map(|(n, p)| p * detection_probability(n, eta))
        .sum();
    let gain = gain_from_clicks(f_click, eps);
    let qber = if gain > 0.0 {
        qber_from_traces(f_click, 0.0, 0.0, gain, eps)?
    } else {
        0.0
    };
    let p_multi: f64 = out.probs().iter().skip(2).sum();
    let terms = gllp_rate(link.q_efficiency, 1.0, gain, qber, p_multi, link.f_ec);
    Ok(SpsRateBreakdown {
        normalization: 0.25,
        p_acc: 1.0,
        gain,
        qber,
        p_multi,
        e1: terms.e1,
        rate: terms.rate,
        objective: terms.objective,
    })
}

/// Maximize the active baseline over the attenuator `tau` at distance `d`.
pub fn optimize_tau(d: f64, dist: &SourceDistribution, link: &LinkParams) -> Result<SpsOptimum> {
    let link = link.at_distance(d);
    link.validate()?;
    let lowest = 1e-6;
    let evaluate = |tau: f64| active_sps_rate(dist, tau.max(lowest), &link);
    let best = minimize_1d(
        |tau| evaluate(tau).map_or(f64::INFINITY, |b| -b.objective),
        lowest,
        1.0,
        SETTING_SEEDS,
    );
    // Prefer the unattenuated source when it is as good as the refined point.
    let full = evaluate(1.0)?;
    let (tau, breakdown) = if full.objective >= -best.value {
        (1.0, full)
    } else {
        (best.x, evaluate(best.x)?)
    };
    Ok(if breakdown.rate > 0.0 {
        SpsOptimum {
            setting: tau,
            breakdown,
        }
    } else {
        SpsOptimum::none(breakdown.objective)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn near_ideal() -> SourceDistribution {
        SourceDistribution::new(vec![0.0099, 0.9882, 0.0019]).unwrap()
    }

    fn lossy() -> SourceDistribution {
        SourceDistribution::new(vec![0.2, 0.785, 0.015]).unwrap()
    }

    fn ideal(t: f64) -> SpsPassiveParams {
        SpsPassiveParams::new(t, SourceDistribution::ideal(), 1.0, 0.0).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(SourceDistribution::new(vec![]).is_err());
        assert!(SourceDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(SourceDistribution::new(vec![-0.1, 1.1]).is_err());
        assert_eq!(near_ideal().nmax(), 2);
        let att = lossy().attenuated(0.5);
        assert_abs_diff_eq!(att.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(att.p(2), 0.015 * 0.25, epsilon = 1e-16);
    }

    #[test]
    fn transmission_weights_reference_values() {
        let vac = SpsPassiveParams::new(0.3, SourceDistribution::vacuum(), 0.5, 1e-6).unwrap();
        assert_abs_diff_eq!(u_coeff(0, &vac), 1.0 - 1e-6, epsilon = 1e-16);
        assert_eq!(u_coeff(1, &vac), 0.0);
        assert_abs_diff_eq!(q_coeff(0, &vac), 1e-6, epsilon = 1e-16);
        assert_eq!(q_coeff(1, &vac), 0.0);

        let p = ideal(0.3);
        assert_eq!(u_coeff(0, &p), 0.0);
        assert_abs_diff_eq!(u_coeff(1, &p), 0.3, epsilon = 1e-16);
        assert_abs_diff_eq!(q_coeff(0, &p), 0.7, epsilon = 1e-16);
        assert_eq!(q_coeff(1, &p), 0.0);

        let reflect = SpsPassiveParams::new(0.0, lossy(), 0.4, 1e-3).unwrap();
        let expected: f64 = (0..3).map(|k| lossy().p(k) * 0.6f64.powi(k as i32)).sum::<f64>() * (1.0 - 1e-3);
        assert_abs_diff_eq!(u_coeff(0, &reflect), expected, epsilon = 1e-15);
        assert_eq!(u_coeff(1, &reflect), 0.0);
        assert_eq!(u_coeff(2, &reflect), 0.0);
    }

    #[test]
    fn sigma_trace_reference_cells() {
        assert_abs_diff_eq!(sigma_trace(0, 0, 0, 0, 0.4, 1e-3), 1.0 - 1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma_trace(1, 0, 0, 0, 1.0, 0.0), 0.5, epsilon = 1e-15);
        // Lossless D: the trace is the full cell probability.
        for (n, m, k, l) in [(1, 1, 0, 0), (0, 0, 1, 1), (2, 1, 2, 0), (1, 2, 1, 2)] {
            assert_abs_diff_eq!(sigma_trace(n, m, k, l, 0.0, 0.0), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ideal_normalization_and_acceptance() {
        for t in [0.1, 0.25, 0.6] {
            let n = normalization(&ideal(t));
            assert_abs_diff_eq!(n, t * (1.0 - t).powi(3) / 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(
                acceptance_probability(&ideal(t)),
                2.0 * t * (1.0 - t).powi(3),
                epsilon = 1e-15
            );
        }
        let vac = SpsPassiveParams::new(0.3, SourceDistribution::vacuum(), 0.5, 0.0).unwrap();
        assert_eq!(normalization(&vac), 0.0);
        assert_eq!(acceptance_probability(&vac), 0.0);
    }

    #[test]
    fn acceptance_falls_with_vacuum_weight() {
        let mut last = f64::INFINITY;
        for p0 in [0.0, 0.1, 0.3, 0.6] {
            let dist = SourceDistribution::new(vec![p0, 0.99 - p0, 0.01]).unwrap();
            let p = SpsPassiveParams::new(0.3, dist, 0.7, 1e-6).unwrap();
            let acc = acceptance_probability(&p);
            assert!(acc < last);
            last = acc;
        }
    }

    #[test]
    fn ideal_source_observables() {
        let link = LinkParams {
            epsilon_bob: 0.0,
            ..LinkParams::default().at_distance(20.0)
        };
        let p = ideal(0.3);
        assert_abs_diff_eq!(sps_gain(&p, &link).unwrap(), eta_sys(&link), epsilon = 1e-15);
        assert_abs_diff_eq!(sps_qber(&p, &link).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sps_p_multi(&p).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dark_counts_only() {
        let link = LinkParams {
            eta_bob: 0.0,
            ..LinkParams::default()
        };
        let p = SpsPassiveParams::new(0.3, near_ideal(), 0.5, 1e-6).unwrap();
        let eps = link.epsilon_bob;
        assert_abs_diff_eq!(sps_gain(&p, &link).unwrap(), eps * (2.0 - eps), epsilon = 1e-20);
        assert_abs_diff_eq!(sps_qber(&p, &link).unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn vacuum_sources_have_no_rate() {
        let vac = SpsPassiveParams::new(0.3, SourceDistribution::vacuum(), 0.5, 0.0).unwrap();
        let link = LinkParams::default();
        assert!(sps_gain(&vac, &link).is_err());
        assert!(sps_qber(&vac, &link).is_err());
        assert_eq!(sps_key_rate(&vac, &link).rate, 0.0);
    }

    #[test]
    fn two_photon_component_adds_intrinsic_error() {
        let link = LinkParams {
            epsilon_bob: 0.0,
            ..LinkParams::default()
        };
        let p = SpsPassiveParams::new(0.3, lossy(), 0.5, 1e-6).unwrap();
        assert!(sps_qber(&p, &link).unwrap() > 0.0);
        assert!(sps_p_multi(&p).unwrap() > 0.0);
    }

    #[test]
    fn photon_statistics() {
        let s = photon_stats(&near_ideal()).unwrap();
        assert_abs_diff_eq!(s.n_bar, 0.992, epsilon = 5e-5);
        assert_abs_diff_eq!(s.g2, 0.0039, epsilon = 5e-5);
        let s = photon_stats(&lossy()).unwrap();
        assert_abs_diff_eq!(s.n_bar, 0.815, epsilon = 5e-4);
        assert_abs_diff_eq!(s.g2, 0.0452, epsilon = 5e-4);
        let s = photon_stats(&SourceDistribution::ideal()).unwrap();
        assert_eq!((s.n_bar, s.g2), (1.0, 0.0));
        assert!(photon_stats(&SourceDistribution::vacuum()).is_err());
    }

    #[test]
    fn ideal_optimum_is_interior() {
        let opt = optimize_t(0.0, &SourceDistribution::ideal(), 1.0, 1e-6, &LinkParams::default()).unwrap();
        assert!(opt.rate() > 0.0);
        assert!(opt.setting > 0.05 && opt.setting < 0.95, "t* = {}", opt.setting);
        let far = optimize_t(400.0, &SourceDistribution::ideal(), 1.0, 1e-6, &LinkParams::default()).unwrap();
        assert_eq!(far.rate(), 0.0);
    }

    #[test]
    fn active_baseline_checks() {
        assert!(active_sps_rate(&SourceDistribution::ideal(), 0.0, &LinkParams::default()).is_err());
        let link = LinkParams {
            epsilon_bob: 0.0,
            ..LinkParams::default().at_distance(10.0)
        };
        let b = active_sps_rate(&SourceDistribution::ideal(), 1.0, &link).unwrap();
        assert_abs_diff_eq!(b.gain, eta_sys(&link), epsilon = 1e-16);
        assert_eq!(b.qber, 0.0);
        assert_eq!(b.p_multi, 0.0);
        assert_abs_diff_eq!(b.rate, 0.5 * eta_sys(&link), epsilon = 1e-16);
    }

    proptest! {
        #[test]
        fn transmission_weights_sum_to_one(
            t in 0.0f64..=1.0, eta in 0.0f64..=1.0, eps in 0.0f64..=1.0,
            a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0,
        ) {
            let total = a + b + c + 1e-3;
            let dist = SourceDistribution::new(vec![a / total, b / total, (c + 1e-3) / total]).unwrap();
            let p = SpsPassiveParams::new(t, dist, eta, eps).unwrap();
            let sum: f64 = (0..=2).map(|n| u_coeff(n, &p) + q_coeff(n, &p)).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn rate_bounded_by_sifted_throughput(
            t in 0.01f64..0.99, eta in 0.05f64..=1.0, d in 0.0f64..200.0, p0 in 0.0f64..0.3, p2 in 0.0f64..0.05,
        ) {
            let dist = SourceDistribution::new(vec![p0, 1.0 - p0 - p2, p2]).unwrap();
            let p = SpsPassiveParams::new(t, dist, eta, 1e-6).unwrap();
            let link = LinkParams::default().at_distance(d);
            let b = sps_key_rate(&p, &link);
            prop_assert!(b.rate <= link.q_efficiency * b.p_acc * b.gain + 1e-18);
            prop_assert!((b.p_acc - 4.0 * b.normalization).abs() <= 1e-15);
        }
    }
}
