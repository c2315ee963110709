//! Linear-optics networks as data, and the four-source passive transmitter.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::fock::{beamsplitter_matrix, DensityOperator, Outcome};
use crate::channel::DetectorParams;
use crate::error::{check_unit, Error, Result};
use crate::sps::SpsPassiveParams;

/// One optical element. Mode indices refer to the modes present when the
/// element is reached: a [`Element::Threshold`] removes the modes it measures
/// and the survivors are renumbered in order.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    BeamSplitter {
        a: usize,
        b: usize,
        transmittance: f64,
    },
    LinearOptics {
        modes: Vec<usize>,
        matrix: DMatrix<Complex64>,
    },
    Threshold {
        modes: Vec<usize>,
        detector: DetectorParams,
        outcome: Outcome,
    },
}

/// Ordered list of elements acting on `input_modes` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_modes: usize,
    pub elements: Vec<Element>,
}

impl NetworkSpec {
    /// Checks mode references and parameters; returns the number of modes
    /// left at the output.
    pub fn validate(&self) -> Result<usize> {
        let mut modes = self.input_modes;
        let in_range = |m: usize, modes: usize| {
            if m < modes {
                Ok(())
            } else {
                Err(Error::Mode(format!("mode {m} out of range ({modes} present)")))
            }
        };
        for element in &self.elements {
            match element {
                Element::BeamSplitter { a, b, transmittance } => {
                    in_range(*a, modes)?;
                    in_range(*b, modes)?;
                    if a == b {
                        return Err(Error::Mode(format!("beamsplitter on mode {a} twice")));
                    }
                    check_unit("transmittance", *transmittance)?;
                }
                Element::LinearOptics { modes: on, matrix } => {
                    for &m in on {
                        in_range(m, modes)?;
                    }
                    if matrix.nrows() != on.len() || matrix.ncols() != on.len() {
                        return Err(Error::Mode("transformation size does not match its modes".into()));
                    }
                }
                Element::Threshold {
                    modes: on, detector, ..
                } => {
                    for &m in on {
                        in_range(m, modes)?;
                    }
                    check_unit("eta_det", detector.eta_det)?;
                    check_unit("epsilon_dark", detector.epsilon_dark)?;
                    modes -= on.len();
                }
            }
        }
        Ok(modes)
    }

    /// Propagates `rho` through the network. The result is unnormalized; its
    /// trace is the probability of the recorded detector outcomes.
    pub fn run(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.space().modes() != self.input_modes {
            return Err(Error::Mode(format!(
                "network expects {} modes, state has {}",
                self.input_modes,
                rho.space().modes()
            )));
        }
        self.validate()?;
        // Runs of passive elements are fused into one mode transformation,
        // so a sparse input is expanded in the Fock basis only once per run.
        let mut state = rho.clone();
        let mut pending: Option<DMatrix<Complex64>> = None;
        for element in &self.elements {
            let n = state.space().modes();
            let embedded = match element {
                Element::BeamSplitter { a, b, transmittance } => {
                    Some(embed(n, &[*a, *b], &beamsplitter_matrix(*transmittance)))
                }
                Element::LinearOptics { modes, matrix } => Some(embed(n, modes, matrix)),
                Element::Threshold { .. } => None,
            };
            match (embedded, element) {
                (Some(u), _) => {
                    pending = Some(match pending.take() {
                        Some(acc) => u * acc,
                        None => u,
                    });
                }
                (
                    None,
                    Element::Threshold {
                        modes,
                        detector,
                        outcome,
                    },
                ) => {
                    if let Some(u) = pending.take() {
                        state = state.apply_linear_optics(&(0..n).collect::<Vec<_>>(), &u)?;
                    }
                    state = state.measure_threshold(modes, detector, *outcome)?.0;
                }
                (None, _) => unreachable!("only thresholds have no mode matrix"),
            }
        }
        if let Some(u) = pending {
            let n = state.space().modes();
            state = state.apply_linear_optics(&(0..n).collect::<Vec<_>>(), &u)?;
        }
        Ok(state)
    }
}

/// `u` acting on `modes` of an `n`-mode system, identity elsewhere.
fn embed(n: usize, modes: &[usize], u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut full = DMatrix::identity(n, n);
    for (i, &mi) in modes.iter().enumerate() {
        for (k, &mk) in modes.iter().enumerate() {
            full[(mk, mi)] = u[(k, i)];
        }
    }
    full
}

/// The four BB84 polarizations, in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
    L,
    R,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [Polarization::H, Polarization::V, Polarization::L, Polarization::R];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The orthogonal state of the same basis.
    pub fn partner(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
            Polarization::L => Polarization::R,
            Polarization::R => Polarization::L,
        }
    }

    /// Coefficients of `b_j^dag` on `(a_{+45}^dag, a_{-45}^dag)`.
    pub fn diagonal_coefficients(self) -> [Complex64; 2] {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let phase = match self {
            Polarization::H => Complex64::new(1.0, 0.0),
            Polarization::V => Complex64::new(-1.0, 0.0),
            Polarization::L => Complex64::new(0.0, 1.0),
            Polarization::R => Complex64::new(0.0, -1.0),
        };
        [s, s * phase]
    }
}

/// Maps a basis pair `(first, second)` onto the diagonal modes `(+45, -45)`.
fn to_diagonal(first: Polarization, second: Polarization) -> DMatrix<Complex64> {
    let [a, b] = first.diagonal_coefficients();
    let [c, d] = second.diagonal_coefficients();
    DMatrix::from_row_slice(2, 2, &[a, c, b, d])
}

/// Re-expresses the diagonal modes in the `(matched, orthogonal)` pair; the
/// inverse of [`to_diagonal`], which is unitary.
fn from_diagonal(matched: Polarization) -> DMatrix<Complex64> {
    to_diagonal(matched, matched.partner()).adjoint()
}

/// The passive transmitter with four sources.
///
/// Each source passes a tap beamsplitter of transmittance `t` whose reflected
/// arm feeds a monitor detector. The H and V paths form one beam, L and R the
/// other; both are written in the diagonal polarization basis and merged on
/// a balanced beamsplitter. One output port is the signal, the other feeds
/// the veto detector D. An accepted pulse has the `silent` monitor and D
/// dark and the other three monitors clicking. The signal is finally written
/// in the `(silent, partner)` polarization pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveLayout {
    pub silent: Polarization,
    /// Tap and monitor, one per source in [`Polarization::ALL`] order; two
    /// modes in (signal, monitor), one mode out.
    pub taps: Vec<NetworkSpec>,
    /// Combining stage on the four signal modes; two modes out.
    pub combiner: NetworkSpec,
}

impl PassiveLayout {
    pub fn new(t: f64, detector: DetectorParams, silent: Polarization) -> Result<Self> {
        let taps = Polarization::ALL
            .iter()
            .map(|&p| NetworkSpec {
                input_modes: 2,
                elements: vec![
                    Element::BeamSplitter {
                        a: 0,
                        b: 1,
                        transmittance: t,
                    },
                    Element::Threshold {
                        modes: vec![1],
                        detector,
                        outcome: if p == silent { Outcome::NoClick } else { Outcome::Click },
                    },
                ],
            })
            .collect();
        use Polarization::*;
        let combiner = NetworkSpec {
            input_modes: 4,
            elements: vec![
                // Modes become (+45_A, -45_A, +45_B, -45_B).
                Element::LinearOptics {
                    modes: vec![0, 1],
                    matrix: to_diagonal(H, V),
                },
                Element::LinearOptics {
                    modes: vec![2, 3],
                    matrix: to_diagonal(L, R),
                },
                // Balanced merge per polarization; modes 2, 3 become the D port.
                Element::LinearOptics {
                    modes: vec![0, 2],
                    matrix: beamsplitter_matrix(0.5),
                },
                Element::LinearOptics {
                    modes: vec![1, 3],
                    matrix: beamsplitter_matrix(0.5),
                },
                Element::Threshold {
                    modes: vec![2, 3],
                    detector,
                    outcome: Outcome::NoClick,
                },
                Element::LinearOptics {
                    modes: vec![0, 1],
                    matrix: from_diagonal(silent),
                },
            ],
        };
        let layout = Self { silent, taps, combiner };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.len() != 4 {
            return Err(Error::Mode(format!("expected four taps, got {}", self.taps.len())));
        }
        for tap in &self.taps {
            if tap.input_modes != 2 || tap.validate()? != 1 {
                return Err(Error::Mode("each tap maps (signal, monitor) to one mode".into()));
            }
        }
        if self.combiner.input_modes != 4 || self.combiner.validate()? != 2 {
            return Err(Error::Mode("combiner maps four modes to two".into()));
        }
        Ok(())
    }
}

/// Output of the transmitter for one accepted detection pattern.
#[derive(Debug, Clone)]
pub struct SimulatedOutput {
    /// Normalized two-mode state in the `(silent, partner)` pair; `None` when
    /// the pattern never occurs.
    pub state: Option<DensityOperator>,
    /// Probability of the pattern.
    pub probability: f64,
    /// Unnormalized conditional state.
    pub unnormalized: DensityOperator,
}

/// Simulates the four-source transmitter in a truncated Fock space and
/// returns the state emitted when `silent` is the dark monitor.
pub fn simulate_passive(params: &SpsPassiveParams, silent: Polarization) -> Result<SimulatedOutput> {
    let detector = DetectorParams::new(params.eta_a, params.eps_a)?;
    let layout = PassiveLayout::new(params.t, detector, silent)?;
    simulate_layout(&layout, params.dist.probs())
}

/// Runs `layout` with every source emitting the number mixture `probs`.
pub fn simulate_layout(layout: &PassiveLayout, probs: &[f64]) -> Result<SimulatedOutput> {
    let nmax = probs.len().saturating_sub(1);
    let mut joint: Option<DensityOperator> = None;
    for tap in &layout.taps {
        let source = DensityOperator::number_mixture(probs, nmax)?.adjoin_vacuum(1)?;
        let arm = tap.run(&source)?;
        joint = Some(match joint {
            None => arm,
            Some(acc) => acc.tensor(&arm)?,
        });
    }
    let signals = joint.expect("four taps");
    let unnormalized = layout.combiner.run(&signals)?;
    let probability = unnormalized.trace();
    let state = if probability > 0.0 {
        Some(unnormalized.normalized()?)
    } else {
        None
    };
    Ok(SimulatedOutput {
        state,
        probability,
        unnormalized,
    })
}
