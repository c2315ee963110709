//! Truncated multimode Fock space and density operators on it.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::DetectorParams;
use crate::error::{check_unit, Error, Result};
use crate::math::factorial;

/// Occupation-number basis of `modes` bosonic modes holding at most `cap`
/// photons in total.
#[derive(Debug, PartialEq, Eq)]
pub struct FockSpace {
    modes: usize,
    cap: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl FockSpace {
    pub fn new(modes: usize, cap: usize) -> Result<Arc<Self>> {
        if cap > u8::MAX as usize {
            return Err(Error::Truncation { cap });
        }
        let mut states = Vec::new();
        let mut current = vec![0u8; modes];
        enumerate(&mut current, 0, cap, &mut states);
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Arc::new(Self {
            modes,
            cap,
            states,
            index,
        }))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

// Lexicographic enumeration, vacuum first.
fn enumerate(current: &mut Vec<u8>, mode: usize, left: usize, out: &mut Vec<Vec<u8>>) {
    if mode == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=left {
        current[mode] = n as u8;
        enumerate(current, mode + 1, left - n, out);
    }
    current[mode] = 0;
}

/// Click or silence of a threshold detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Click,
    NoClick,
}

impl Outcome {
    /// POVM weight for `photons` photons impinging on the detector.
    pub fn weight(self, photons: usize, det: &DetectorParams) -> f64 {
        let silent = (1.0 - det.epsilon_dark) * (1.0 - det.eta_det).powi(photons as i32);
        match self {
            Outcome::NoClick => silent,
            Outcome::Click => 1.0 - silent,
        }
    }
}

/// Possibly unnormalized density operator on a [`FockSpace`].
#[derive(Debug, Clone)]
pub struct DensityOperator {
    space: Arc<FockSpace>,
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn vacuum(space: Arc<FockSpace>) -> Self {
        let dim = space.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { space, matrix }
    }

    pub fn from_matrix(space: Arc<FockSpace>, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::Mode(format!(
                "matrix is {}x{}, space has dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Single-mode mixture `sum_n p_n |n><n|`.
    pub fn number_mixture(probs: &[f64], cap: usize) -> Result<Self> {
        if probs.len() > cap + 1 && probs[cap + 1..].iter().any(|&p| p != 0.0) {
            return Err(Error::Truncation { cap });
        }
        let space = FockSpace::new(1, cap)?;
        let dim = space.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        for (n, &p) in probs.iter().enumerate().take(cap + 1) {
            matrix[(n, n)] = Complex64::new(p, 0.0);
        }
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `<occupation| rho |occupation>`, zero outside the truncated space.
    pub fn population(&self, occupation: &[u8]) -> f64 {
        self.space.index_of(occupation).map_or(0.0, |i| self.matrix[(i, i)].re)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            matrix: self.matrix.scale(factor),
        }
    }

    /// Unit-trace copy; errors on a zero operator.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::DivisionByZero("density operator has zero trace"));
        }
        Ok(self.scaled(1.0 / tr))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (&self.matrix - self.matrix.adjoint()).camax() <= tol
    }

    /// Smallest eigenvalue above `-tol` (Hermitian part).
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let hermitian = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        hermitian.symmetric_eigenvalues().iter().all(|&ev| ev >= -tol)
    }

    /// `rho (x) other`; the modes of `other` follow those of `self`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = FockSpace::new(
            self.space.modes() + other.space.modes(),
            self.space.cap() + other.space.cap(),
        )?;
        let dim = space.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        let left = nonzero_entries(&self.matrix);
        let right = nonzero_entries(&other.matrix);
        let join = |i: usize, j: usize| -> usize {
            let mut occ = self.space.state(i).to_vec();
            occ.extend_from_slice(other.space.state(j));
            space.index_of(&occ).expect("joint cap covers both factors")
        };
        for &(r1, c1, v1) in &left {
            for &(r2, c2, v2) in &right {
                matrix[(join(r1, r2), join(c1, c2))] += v1 * v2;
            }
        }
        Ok(Self { space, matrix })
    }

    /// Append `count` modes in the vacuum state.
    pub fn adjoin_vacuum(&self, count: usize) -> Result<Self> {
        let space = FockSpace::new(self.space.modes() + count, self.space.cap())?;
        let dim = space.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        let embed: Vec<usize> = (0..self.space.dim())
            .map(|i| {
                let mut occ = self.space.state(i).to_vec();
                occ.resize(space.modes(), 0);
                space.index_of(&occ).expect("vacuum modes add no photons")
            })
            .collect();
        for (r, c, v) in nonzero_entries(&self.matrix) {
            matrix[(embed[r], embed[c])] = v;
        }
        Ok(Self { space, matrix })
    }

    /// Passive linear optics on `modes`: each creation operator transforms as
    /// `a_i^dag -> sum_k u[(k, i)] a_k^dag`, with `i, k` indexing `modes`.
    ///
    /// Any such map conserves photon number, so the truncated space maps into
    /// itself; `u` is not required to be unitary.
    pub fn apply_linear_optics(&self, modes: &[usize], u: &DMatrix<Complex64>) -> Result<Self> {
        check_modes(modes, self.space.modes())?;
        if u.nrows() != modes.len() || u.ncols() != modes.len() {
            return Err(Error::Mode(format!(
                "transformation is {}x{} for {} modes",
                u.nrows(),
                u.ncols(),
                modes.len()
            )));
        }
        let space = &self.space;
        let active = active_indices(&self.matrix);
        // Column `c` of the restricted transfer matrix is the image of basis state active[c].
        let mut images: Vec<Vec<(usize, Complex64)>> = Vec::with_capacity(active.len());
        for &i in &active {
            images.push(transform_state(space, space.state(i), modes, u)?);
        }
        let dim = space.dim();
        let k = active.len();
        let mut w = DMatrix::<Complex64>::zeros(dim, k);
        for (c, image) in images.iter().enumerate() {
            for &(row, amp) in image {
                w[(row, c)] += amp;
            }
        }
        let restricted = DMatrix::from_fn(k, k, |r, c| self.matrix[(active[r], active[c])]);
        let matrix = &w * restricted * w.adjoint();
        Ok(Self {
            space: Arc::clone(space),
            matrix,
        })
    }

    /// Beamsplitter between two modes: amplitude `sqrt(t)` stays in each
    /// mode, `sqrt(1-t)` crosses over (with a sign on the return path).
    pub fn apply_beamsplitter(&self, mode_a: usize, mode_b: usize, transmittance: f64) -> Result<Self> {
        check_unit("transmittance", transmittance)?;
        if mode_a == mode_b {
            return Err(Error::Mode(format!(
                "beamsplitter needs two distinct modes, got {mode_a} twice"
            )));
        }
        Self::apply_linear_optics(self, &[mode_a, mode_b], &beamsplitter_matrix(transmittance))
    }

    /// Threshold detection of the photons in `modes` (one detector seeing all
    /// of them). The measured modes are traced out; the returned operator is
    /// left unnormalized and its trace is the outcome probability.
    pub fn measure_threshold(&self, modes: &[usize], det: &DetectorParams, outcome: Outcome) -> Result<(Self, f64)> {
        check_modes(modes, self.space.modes())?;
        let kept: Vec<usize> = (0..self.space.modes()).filter(|m| !modes.contains(m)).collect();
        let space = FockSpace::new(kept.len(), self.space.cap())?;
        let dim = space.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        let split = |i: usize| -> (usize, Vec<u8>, usize) {
            let occ = self.space.state(i);
            let rest: Vec<u8> = kept.iter().map(|&m| occ[m]).collect();
            let measured: Vec<u8> = modes.iter().map(|&m| occ[m]).collect();
            let photons = measured.iter().map(|&n| n as usize).sum();
            (
                space.index_of(&rest).expect("fewer photons than before"),
                measured,
                photons,
            )
        };
        let parts: Vec<_> = (0..self.space.dim()).map(split).collect();
        for (r, c, v) in nonzero_entries(&self.matrix) {
            let (rr, ref mr, photons) = parts[r];
            let (cc, ref mc, _) = parts[c];
            // The POVM is diagonal in the measured modes.
            if mr == mc {
                matrix[(rr, cc)] += v * outcome.weight(photons, det);
            }
        }
        let state = Self { space, matrix };
        let probability = state.trace();
        Ok((state, probability))
    }
}

/// `[[sqrt t, -sqrt(1-t)], [sqrt(1-t), sqrt t]]` in the `a_i^dag -> sum_k u_ki a_k^dag` convention.
pub fn beamsplitter_matrix(t: f64) -> DMatrix<Complex64> {
    let tr = Complex64::new(t.sqrt(), 0.0);
    let rf = Complex64::new((1.0 - t).sqrt(), 0.0);
    DMatrix::from_row_slice(2, 2, &[tr, -rf, rf, tr])
}

fn check_modes(modes: &[usize], available: usize) -> Result<()> {
    for (i, &m) in modes.iter().enumerate() {
        if m >= available {
            return Err(Error::Mode(format!("mode {m} out of range (space has {available})")));
        }
        if modes[..i].contains(&m) {
            return Err(Error::Mode(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}

fn nonzero_entries(m: &DMatrix<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v.re != 0.0 || v.im != 0.0 {
                out.push((r, c, v));
            }
        }
    }
    out
}

fn active_indices(m: &DMatrix<Complex64>) -> Vec<usize> {
    (0..m.nrows())
        .filter(|&i| {
            (0..m.ncols()).any(|j| {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                a.re != 0.0 || a.im != 0.0 || b.re != 0.0 || b.im != 0.0
            })
        })
        .collect()
}

/// Image of a basis state under the mode transformation, as sparse amplitudes.
fn transform_state(
    space: &FockSpace,
    occupation: &[u8],
    modes: &[usize],
    u: &DMatrix<Complex64>,
) -> Result<Vec<(usize, Complex64)>> {
    // Polynomial in the creation operators of `modes`, keyed by exponents.
    let mut poly: HashMap<Vec<u8>, Complex64> = HashMap::new();
    poly.insert(vec![0; modes.len()], Complex64::new(1.0, 0.0));
    let mut norm = 1.0;
    for (i, &m) in modes.iter().enumerate() {
        let n = occupation[m] as usize;
        norm /= factorial(n).sqrt();
        for _ in 0..n {
            let mut next: HashMap<Vec<u8>, Complex64> = HashMap::with_capacity(poly.len() * modes.len());
            for (exps, coeff) in &poly {
                for k in 0..modes.len() {
                    let amp = u[(k, i)];
                    if amp.re == 0.0 && amp.im == 0.0 {
                        continue;
                    }
                    let mut e = exps.clone();
                    e[k] += 1;
                    *next.entry(e).or_insert(Complex64::new(0.0, 0.0)) += coeff * amp;
                }
            }
            poly = next;
        }
    }
    let mut image = Vec::with_capacity(poly.len());
    let mut keys: Vec<_> = poly.into_iter().collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    for (exps, coeff) in keys {
        if coeff.re == 0.0 && coeff.im == 0.0 {
            continue;
        }
        let mut occ = occupation.to_vec();
        let mut weight = norm;
        for (k, &m) in modes.iter().enumerate() {
            occ[m] = exps[k];
            weight *= factorial(exps[k] as usize).sqrt();
        }
        let index = space.index_of(&occ).ok_or(Error::Truncation { cap: space.cap() })?;
        image.push((index, coeff * weight));
    }
    Ok(image)
}
