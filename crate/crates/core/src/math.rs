//! Numerical primitives shared by the rate models: binary entropy, exact
//! binomials, adaptive quadrature, grid-seeded local minimization and
//! bisection on a sign change.

use std::sync::LazyLock;

use crate::error::{Error, Result};

/// Binary Shannon entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(entropy_term(x) + entropy_term(1.0 - x))
}

fn entropy_term(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Exact binomial coefficients `C(n, k)` for `n <= max_n`, built by Pascal's rule.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    max_n: usize,
    rows: Vec<Vec<u64>>,
}

impl BinomialTable {
    /// Largest supported row. `C(64, 32)` still fits in a `u64`.
    pub const DEFAULT_MAX_N: usize = 64;

    pub fn new(max_n: usize) -> Self {
        assert!(max_n <= 66, "binomial rows above 66 overflow u64");
        let mut rows: Vec<Vec<u64>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1u64; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        Self { max_n, rows }
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// `C(n, k)`, zero when `k > n`. Panics if `n` exceeds the table.
    pub fn get(&self, n: usize, k: usize) -> u64 {
        assert!(
            n <= self.max_n,
            "C({n}, {k}) is beyond the table (max_n = {})",
            self.max_n
        );
        if k > n {
            0
        } else {
            self.rows[n][k]
        }
    }
}

static BINOMIALS: LazyLock<BinomialTable> = LazyLock::new(|| BinomialTable::new(BinomialTable::DEFAULT_MAX_N));

/// Shared exact binomial table up to `n = 64`.
pub fn binomials() -> &'static BinomialTable {
    &BINOMIALS
}

/// `C(n, k)` as a float, from the shared exact table.
pub fn binomial(n: usize, k: usize) -> f64 {
    binomials().get(n, k) as f64
}

/// `n!` as a float. Exact for the photon numbers used here (`n <= 20`).
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Signed interference coefficient
/// `sum_{s=max(0,x-z)}^{min(x,y)} C(y,s) C(z,x-s) (-1)^(z-x+s)`.
///
/// This is the coefficient of `a^x b^(y+z-x)` in `(a+b)^y (a-b)^z`, i.e. the
/// amplitude bookkeeping of a balanced beamsplitter. Requires `y + z <= 64`.
pub fn f_comb(x: usize, y: usize, z: usize) -> i128 {
    let table = binomials();
    let lo = x.saturating_sub(z);
    let hi = x.min(y);
    let mut acc: i128 = 0;
    for s in lo..=hi {
        let term = table.get(y, s) as i128 * table.get(z, x - s) as i128;
        // (-1)^(z - x + s) has the parity of z + x + s.
        if (z + x + s).is_multiple_of(2) {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Tolerance and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(absolute_tolerance: f64, max_subdivisions: usize) -> Result<Self> {
        if !(absolute_tolerance > 0.0) {
            return Err(Error::Domain {
                name: "absolute_tolerance",
                value: absolute_tolerance,
                domain: "(0, inf)",
            });
        }
        if max_subdivisions == 0 {
            return Err(Error::Domain {
                name: "max_subdivisions",
                value: 0.0,
                domain: "[1, inf)",
            });
        }
        Ok(Self {
            absolute_tolerance,
            max_subdivisions,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            absolute_tolerance: 1e-10,
            max_subdivisions: 200,
        }
    }
}

// Gauss-Kronrod 7/15 nodes on [-1, 1], positive half, ending at the centre.
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for (i, (&x, &w)) in KRONROD_NODES.iter().zip(&KRONROD_WEIGHTS).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += w * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate drops below `spec.absolute_tolerance`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::Domain {
            name: "b - a",
            value: b - a,
            domain: "[0, inf)",
        });
    }
    if a == b {
        return Ok(0.0);
    }
    let mut panels = vec![gauss_kronrod(&f, a, b)];
    let mut subdivisions = 0;
    loop {
        let total_error: f64 = panels.iter().map(|p| p.error).sum();
        if !total_error.is_finite() {
            return Err(Error::NonConvergence {
                subdivisions,
                estimate: total_error,
            });
        }
        if total_error <= spec.absolute_tolerance {
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                subdivisions,
                estimate: total_error,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.error.total_cmp(&q.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let panel = panels.swap_remove(worst);
        let mid = 0.5 * (panel.a + panel.b);
        panels.push(gauss_kronrod(&f, panel.a, mid));
        panels.push(gauss_kronrod(&f, mid, panel.b));
        subdivisions += 1;
    }
}

/// Axis-aligned search rectangle for [`minimize_2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2 {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Box2 {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        if !(x.0 < x.1) || !(y.0 < y.1) {
            return Err(Error::Domain {
                name: "box",
                value: f64::NAN,
                domain: "non-degenerate rectangle",
            });
        }
        Ok(Self { x, y })
    }

    fn point(&self, u: f64, v: f64) -> (f64, f64) {
        (
            self.x.0 + (self.x.1 - self.x.0) * u,
            self.y.0 + (self.y.1 - self.y.0) * v,
        )
    }
}

/// Result of a local minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum2 {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Simplex termination size, in the unit-square coordinates of the box.
pub const SIMPLEX_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_SEEDS: usize = 50;
const MAX_SIMPLEX_ITERATIONS: usize = 5_000;

/// Grid scan over `seeds x seeds` points (box corners included) followed by a
/// Nelder-Mead refinement from the best grid point, confined to the box.
///
/// Ties on the grid go to the lowest index (x outer, y inner). The refined
/// point only replaces the grid optimum when strictly better.
pub fn minimize_2d<F: Fn(f64, f64) -> f64>(f: F, bounds: &Box2, seeds: usize) -> Minimum2 {
    let seeds = seeds.max(2);
    let step = 1.0 / (seeds - 1) as f64;
    let eval = |u: f64, v: f64| {
        let (x, y) = bounds.point(u, v);
        let value = f(x, y);
        if value.is_nan() {
            f64::INFINITY
        } else {
            value
        }
    };

    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..seeds {
        for j in 0..seeds {
            let (u, v) = (i as f64 * step, j as f64 * step);
            let value = eval(u, v);
            if value < best.2 {
                best = (u, v, value);
            }
        }
    }
    if !best.2.is_finite() {
        let (x, y) = bounds.point(0.0, 0.0);
        return Minimum2 { x, y, value: f(x, y) };
    }

    let refined = nelder_mead(&eval, (best.0, best.1, best.2), step);
    let (u, v, value) = if refined.2 < best.2 { refined } else { best };
    let (x, y) = bounds.point(u, v);
    Minimum2 { x, y, value }
}

fn nelder_mead<F: Fn(f64, f64) -> f64>(f: &F, start: (f64, f64, f64), step: f64) -> (f64, f64, f64) {
    let clamp = |p: [f64; 2]| [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)];
    let offset = |d: f64, base: f64| if base + d <= 1.0 { base + d } else { base - d };
    let p0 = [start.0, start.1];
    let p1 = [offset(step, start.0), start.1];
    let p2 = [start.0, offset(step, start.1)];
    let mut simplex = [(p0, start.2), (p1, f(p1[0], p1[1])), (p2, f(p2[0], p2[1]))];

    for _ in 0..MAX_SIMPLEX_ITERATIONS {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| (p[0] - simplex[0].0[0]).abs().max((p[1] - simplex[0].0[1]).abs()))
            .fold(0.0, f64::max);
        if size < SIMPLEX_TOLERANCE {
            break;
        }

        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let along = |t: f64| {
            clamp([
                centroid[0] + t * (simplex[2].0[0] - centroid[0]),
                centroid[1] + t * (simplex[2].0[1] - centroid[1]),
            ])
        };

        let reflected = along(-1.0);
        let fr = f(reflected[0], reflected[1]);
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(expanded[0], expanded[1]);
            simplex[2] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[2].1 { along(-0.5) } else { along(0.5) };
            let fc = f(contracted[0], contracted[1]);
            if fc < simplex[2].1.min(fr) {
                simplex[2] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for vertex in simplex.iter_mut().skip(1) {
                    let p = [
                        best[0] + 0.5 * (vertex.0[0] - best[0]),
                        best[1] + 0.5 * (vertex.0[1] - best[1]),
                    ];
                    *vertex = (p, f(p[0], p[1]));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    (simplex[0].0[0], simplex[0].0[1], simplex[0].1)
}

/// Result of a scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum1 {
    pub x: f64,
    pub value: f64,
}

/// Grid scan over `seeds` points of `[lo, hi]` followed by golden-section
/// refinement inside the neighbouring grid cells of the best point.
pub fn minimize_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, seeds: usize) -> Minimum1 {
    let seeds = seeds.max(3);
    let step = (hi - lo) / (seeds - 1) as f64;
    let eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = (0usize, f64::INFINITY);
    for i in 0..seeds {
        let v = eval(lo + i as f64 * step);
        if v < best.1 {
            best = (i, v);
        }
    }
    let grid_x = lo + best.0 as f64 * step;
    if !best.1.is_finite() {
        return Minimum1 {
            x: grid_x,
            value: f(grid_x),
        };
    }

    let mut a = (grid_x - step).max(lo);
    let mut b = (grid_x + step).min(hi);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    while (b - a) > SIMPLEX_TOLERANCE * (hi - lo) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = eval(d);
        }
    }
    let (x, value) = if fc < fd { (c, fc) } else { (d, fd) };
    if value < best.1 {
        Minimum1 { x, value }
    } else {
        Minimum1 {
            x: grid_x,
            value: best.1,
        }
    }
}

/// Bisection for the last distance at which `f` is positive.
///
/// Requires `f(d_low) > 0` and `f(d_high) <= 0`; returns the positive end of
/// the final bracket, which is within `tol` of the sign change.
pub fn find_zero_crossing<F: FnMut(f64) -> f64>(mut f: F, d_low: f64, d_high: f64, tol: f64) -> Result<f64> {
    if !(d_low < d_high) || !(f(d_low) > 0.0) || f(d_high) > 0.0 {
        return Err(Error::Bracket {
            low: d_low,
            high: d_high,
        });
    }
    let (mut lo, mut hi) = (d_low, d_high);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn entropy_reference_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        // 30-digit mpmath evaluation.
        assert_abs_diff_eq!(binary_entropy(0.11).unwrap(), 0.499_915_958_164_528, epsilon = 1e-12);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.0001).is_err());
    }

    #[test]
    fn pascal_triangle_edges() {
        let t = BinomialTable::new(64);
        for n in 0..=64 {
            assert_eq!(t.get(n, 0), 1);
            assert_eq!(t.get(n, n), 1);
        }
        assert_eq!(t.get(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(t.get(5, 7), 0);
    }

    fn f_comb_brute(x: usize, y: usize, z: usize) -> i128 {
        // Expand (a+b)^y (a-b)^z term by term and read off the a^x coefficient.
        let mut acc = 0i128;
        for i in 0..=y {
            for j in 0..=z {
                if i + j != x {
                    continue;
                }
                let c = binomials().get(y, i) as i128 * binomials().get(z, j) as i128;
                let sign = if (z - j).is_multiple_of(2) { 1 } else { -1 };
                acc += sign * c;
            }
        }
        acc
    }

    #[test]
    fn f_comb_reference_values() {
        for y in 0..5 {
            for z in 0..5 {
                let expected = if z % 2 == 0 { 1 } else { -1 };
                assert_eq!(f_comb(0, y, z), expected);
            }
        }
        assert_eq!(f_comb(1, 0, 1), 1);
        assert_eq!(f_comb(2, 2, 2), -2);
        // x beyond y + z gives the empty sum.
        assert_eq!(f_comb(5, 1, 1), 0);
    }

    #[test]
    fn f_comb_matches_expansion() {
        for x in 0..=8 {
            for y in 0..=8 {
                for z in 0..=8 {
                    assert_eq!(f_comb(x, y, z), f_comb_brute(x, y, z), "({x},{y},{z})");
                }
            }
        }
    }

    #[test]
    fn quadrature_reference_integrals() {
        let spec = QuadratureSpec::default();
        assert_abs_diff_eq!(integrate(|_| 1.0, 0.0, PI, &spec).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate(f64::cos, 0.0, PI / 2.0, &spec).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(integrate(f64::cos, 1.0, 1.0, &spec).unwrap(), 0.0);
        assert!(integrate(f64::cos, 1.0, 0.0, &spec).is_err());
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        let spec = QuadratureSpec::new(1e-14, 2).unwrap();
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
        assert!(QuadratureSpec::new(0.0, 10).is_err());
        assert!(QuadratureSpec::new(1e-8, 0).is_err());
    }

    #[test]
    fn quadratic_bowl() {
        let b = Box2::new((0.0, 1.0), (0.0, 1.0)).unwrap();
        let m = minimize_2d(|x, y| (x - 0.3).powi(2) + (y - 0.7).powi(2), &b, DEFAULT_SEEDS);
        assert_abs_diff_eq!(m.x, 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(m.y, 0.7, epsilon = 1e-6);
    }

    #[test]
    fn flat_function_returns_first_grid_point() {
        let b = Box2::new((-2.0, 3.0), (1.0, 4.0)).unwrap();
        let m = minimize_2d(|_, _| 7.0, &b, 10);
        assert_eq!((m.x, m.y, m.value), (-2.0, 1.0, 7.0));
        assert!(Box2::new((1.0, 1.0), (0.0, 1.0)).is_err());
    }

    #[test]
    fn scalar_minimum() {
        let m = minimize_1d(|x| (x - 0.123).powi(2), 0.0, 1.0, 20);
        assert_abs_diff_eq!(m.x, 0.123, epsilon = 1e-7);
        let flat = minimize_1d(|_| 1.0, 0.0, 1.0, 20);
        assert_eq!(flat.x, 0.0);
    }

    #[test]
    fn bisection_reference() {
        let d = find_zero_crossing(|d| 1.0 - d / 100.0, 0.0, 200.0, 0.01).unwrap();
        assert!((d - 100.0).abs() <= 0.01 && d < 100.0);
        assert!(matches!(
            find_zero_crossing(|_| -1.0, 0.0, 200.0, 0.01),
            Err(Error::Bracket { .. })
        ));
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric(x in 0.0f64..=1.0) {
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn quadrature_is_additive(a in -2.0f64..0.0, c in 0.0f64..2.0, k in 0.5f64..4.0) {
            let spec = QuadratureSpec::default();
            let g = |x: f64| (k * x).sin() * (-x * x).exp();
            let whole = integrate(g, a, c, &spec).unwrap();
            let split = integrate(g, a, 0.0, &spec).unwrap() + integrate(g, 0.0, c, &spec).unwrap();
            prop_assert!((whole - split).abs() <= 2.0 * spec.absolute_tolerance);
        }

        #[test]
        fn refinement_never_worse_than_grid(cx in 0.0f64..1.0, cy in 0.0f64..1.0, s in 3usize..12) {
            let b = Box2::new((0.0, 1.0), (0.0, 1.0)).unwrap();
            let f = |x: f64, y: f64| ((x - cx) * 3.0).sin().powi(2) + (y - cy).abs();
            let m = minimize_2d(f, &b, s);
            let step = 1.0 / (s - 1) as f64;
            let grid_best = (0..s)
                .flat_map(|i| (0..s).map(move |j| (i as f64 * step, j as f64 * step)))
                .map(|(x, y)| f(x, y))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(m.value <= grid_best);
        }
    }
}
