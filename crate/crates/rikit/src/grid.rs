//! Grid construction on (0,1) and the step-function carrier shared by all
//! other modules.
//!
//! A [`Grid`] is a strictly increasing sequence of breakpoints in (0,1] with
//! an implicit left endpoint 0; cell `i` is the half-open interval
//! `[left(i), breakpoint(i))`, so step functions are right-continuous at 0
//! and left-closed at their jumps (the convention under which nonincreasing
//! rearrangements attain their supremum at the left endpoint of each cell).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridScheme {
    GeometricToward0,
    GeometricTowardBothEnds,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    breakpoints: Vec<f64>,
    scheme: GridScheme,
}

/// Compensated (Kahan) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl Grid {
    /// Number of cells.
    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Right endpoint of cell `i`.
    pub fn right(&self, i: usize) -> f64 {
        self.breakpoints[i]
    }

    /// Left endpoint of cell `i` (0 for the first cell).
    pub fn left(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.breakpoints[i - 1]
        }
    }

    /// Positive representative of cell `i`, used wherever a weight must be
    /// evaluated at a point of the cell. Equal to the left endpoint except
    /// for the first cell, whose left endpoint is 0.
    pub fn rep(&self, i: usize) -> f64 {
        if i == 0 {
            self.breakpoints[0] / 2.0
        } else {
            self.breakpoints[i - 1]
        }
    }

    pub fn width(&self, i: usize) -> f64 {
        self.right(i) - self.left(i)
    }

    /// Index of the cell containing `x` (cells are `[left, right)`; inputs
    /// at or beyond 1 map to the last cell).
    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.breakpoints.len();
        let i = self.breakpoints.partition_point(|&b| b <= x);
        i.min(n - 1)
    }

    /// Grid on (0,1) from a raw breakpoint list (must be strictly increasing
    /// and end at 1). Used by the rearrangement, which produces its own
    /// natural breakpoints.
    pub fn from_breakpoints(breakpoints: Vec<f64>, scheme: GridScheme) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidArgument("empty breakpoint list".into()));
        }
        if *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument("last breakpoint must be 1".into()));
        }
        let mut prev = 0.0;
        for &b in &breakpoints {
            if !(b > prev) {
                return Err(Error::InvalidArgument(
                    "breakpoints must be strictly increasing in (0,1]".into(),
                ));
            }
            prev = b;
        }
        Ok(Self { breakpoints, scheme })
    }
}

/// Solves for the common ratio `q > 1` of a geometric cell-width sequence
/// `w_i = w0 * q^i` with `sum = total`.
fn geometric_ratio(w0: f64, n: usize, total: f64) -> f64 {
    let sum = |q: f64| -> f64 {
        // w0 (q^n - 1)/(q - 1)
        w0 * ((q.powi(n as i32) - 1.0) / (q - 1.0))
    };
    let mut lo = 1.0 + 1e-15;
    let mut hi = 1.0 + 1e-12;
    while sum(hi) < total {
        hi = 1.0 + (hi - 1.0) * 2.0;
        if hi > 1e3 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn geometric_toward_0_breakpoints(size: usize, min_cell: f64) -> Vec<f64> {
    let q = geometric_ratio(min_cell, size, 1.0);
    let mut bps = Vec::with_capacity(size);
    let mut acc = KahanSum::new();
    let mut w = min_cell;
    for i in 0..size {
        acc.add(w);
        bps.push(acc.value());
        w *= q;
        let _ = i;
    }
    // Absorb the residual rounding into the last breakpoint.
    *bps.last_mut().unwrap() = 1.0;
    bps
}

/// Builds a grid of `size` cells on (0,1).
///
/// * `geometric-toward-0`: cell widths form a geometric sequence, first
///   breakpoint at `min_cell`.
/// * `geometric-toward-both-ends`: half the cells refine toward 0, the other
///   half mirror toward 1; the first breakpoint is `min_cell` and the last
///   cell has width `min_cell`.
/// * `uniform`: equal cells.
pub fn make_grid(size: usize, scheme: GridScheme, min_cell: f64) -> Result<Arc<Grid>> {
    if size < 8 {
        return Err(Error::InvalidArgument(format!("grid size {size} < 8")));
    }
    if !(min_cell > 0.0 && min_cell < 1.0 / size as f64) {
        return Err(Error::InvalidArgument(format!(
            "min_cell {min_cell} must lie in (0, 1/size)"
        )));
    }
    let breakpoints = match scheme {
        GridScheme::Uniform => (1..=size).map(|i| i as f64 / size as f64).collect(),
        GridScheme::GeometricToward0 => geometric_toward_0_breakpoints(size, min_cell),
        GridScheme::GeometricTowardBothEnds => {
            let nl = size / 2;
            let nr = size - nl;
            // Each half is a geometric-toward-0 grid scaled into (0, 1/2].
            let left = geometric_toward_0_breakpoints(nl, 2.0 * min_cell);
            let right = geometric_toward_0_breakpoints(nr, 2.0 * min_cell);
            let mut bps: Vec<f64> = left.iter().map(|b| b / 2.0).collect();
            for &b in right.iter().rev().skip(1) {
                bps.push(1.0 - b / 2.0);
            }
            bps.push(1.0);
            bps
        }
    };
    Ok(Arc::new(Grid::from_breakpoints(breakpoints, scheme)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneFlag {
    Unknown,
    Nonincreasing,
}

/// Piecewise-constant function on (0,1): one value per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
    monotone: MonotoneFlag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
}

impl StepFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite step value".into()));
        }
        Ok(Self {
            grid,
            values,
            monotone: MonotoneFlag::Unknown,
        })
    }

    pub fn with_monotone_flag(mut self, flag: MonotoneFlag) -> Self {
        if flag == MonotoneFlag::Nonincreasing {
            debug_assert!(self.is_nonincreasing());
        }
        self.monotone = flag;
        self
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        Self::new(grid, vec![c; n])
            .expect("constant step function")
            .with_monotone_flag(MonotoneFlag::Nonincreasing)
    }

    /// Characteristic function of (0,a) with `a` snapped to the nearest
    /// breakpoint; returns the function together with the snapped measure.
    pub fn indicator(grid: Arc<Grid>, a: f64) -> (Self, f64) {
        let bps = grid.breakpoints();
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, &b) in bps.iter().enumerate() {
            let d = (b - a).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let snapped = bps[best];
        let values = (0..grid.len())
            .map(|i| if i <= best { 1.0 } else { 0.0 })
            .collect();
        let f = Self::new(grid, values)
            .expect("indicator step function")
            .with_monotone_flag(MonotoneFlag::Nonincreasing);
        (f, snapped)
    }

    /// Samples `f` at the positive representative of each cell.
    pub fn from_samples(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.rep(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn monotone_flag(&self) -> MonotoneFlag {
        self.monotone
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at `x` under the `[left, right)` cell convention; `x = 0` gives
    /// the right-limit at 0 and `x >= 1` the last cell's value.
    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.grid.cell_of(x)]
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
            monotone: MonotoneFlag::Unknown,
        }
    }

    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Exact integral of a step function over `[a, b]` (sum of value x overlap).
pub fn integrate(f: &StepFunction, a: f64, b: f64) -> Result<QuadratureResult> {
    if a > b {
        return Err(Error::InvalidArgument(format!(
            "integration bounds reversed: a = {a} > b = {b}"
        )));
    }
    let grid = f.grid();
    let mut acc = KahanSum::new();
    for i in 0..grid.len() {
        let lo = grid.left(i).max(a);
        let hi = grid.right(i).min(b);
        if hi > lo {
            acc.add(f.values()[i] * (hi - lo));
        }
    }
    Ok(QuadratureResult {
        value: acc.value(),
        abs_error_estimate: 0.0,
    })
}

/// Integral of the product of two step functions over (0,1), evaluated on
/// the merged breakpoint set.
pub fn integrate_product(f: &StepFunction, g: &StepFunction) -> f64 {
    let mut acc = KahanSum::new();
    let fb = f.grid().breakpoints();
    let gb = g.grid().breakpoints();
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0.0;
    while i < fb.len() && j < gb.len() {
        let next = fb[i].min(gb[j]);
        if next > prev {
            acc.add(f.values()[i] * g.values()[j] * (next - prev));
        }
        if fb[i] <= next {
            i += 1;
        }
        if gb[j] <= next {
            j += 1;
        }
        prev = next;
    }
    acc.value()
}

/// Step function `t -> f(phi(t))` sampled per cell. The composition argument
/// is taken at cell left endpoints (0 for the first cell, meaning the
/// right-limit of `f` at 0). The nonincreasing flag propagates only when `f`
/// is nonincreasing and `phi` nondecreasing.
pub fn compose_with_monotone(
    f: &StepFunction,
    phi: impl Fn(f64) -> f64,
    phi_nondecreasing: bool,
) -> Result<StepFunction> {
    let grid = Arc::clone(f.grid());
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = phi(grid.left(i));
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::DomainError(format!(
                "phi({}) = {x} lies outside [0,1]",
                grid.left(i)
            )));
        }
        values.push(f.eval(x));
    }
    let out = StepFunction::new(grid, values)?;
    if phi_nondecreasing && f.monotone_flag() == MonotoneFlag::Nonincreasing {
        Ok(out.with_monotone_flag(MonotoneFlag::Nonincreasing))
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_grid_breakpoints() {
        let g = make_grid(8, GridScheme::Uniform, 1e-3).unwrap();
        let expect: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();
        assert_eq!(g.breakpoints(), expect.as_slice());
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = make_grid(16, GridScheme::GeometricToward0, 1e-8).unwrap();
        assert_relative_eq!(g.breakpoints()[0], 1e-8, max_relative = 1e-12);
        assert_eq!(*g.breakpoints().last().unwrap(), 1.0);
    }

    #[test]
    fn geometric_widths_have_constant_ratio() {
        // Oracle: direct ratio computation over all cells.
        let g = make_grid(1024, GridScheme::GeometricToward0, 1e-12).unwrap();
        let ratios: Vec<f64> = (1..g.len()).map(|i| g.width(i) / g.width(i - 1)).collect();
        let r0 = ratios[0];
        for r in ratios {
            assert_relative_eq!(r, r0, max_relative = 1e-6);
        }
    }

    #[test]
    fn both_ends_grid_resolves_both_endpoints() {
        let g = make_grid(64, GridScheme::GeometricTowardBothEnds, 1e-9).unwrap();
        assert_relative_eq!(g.breakpoints()[0], 1e-9, max_relative = 1e-9);
        assert_eq!(*g.breakpoints().last().unwrap(), 1.0);
        let last = g.len() - 1;
        assert_relative_eq!(g.width(last), 1e-9, max_relative = 1e-6);
        for w in g.breakpoints().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn make_grid_rejects_bad_arguments() {
        assert!(make_grid(4, GridScheme::Uniform, 1e-3).is_err());
        assert!(make_grid(16, GridScheme::Uniform, 0.5).is_err());
    }

    #[test]
    fn integrate_constant_and_indicator() {
        let g = make_grid(16, GridScheme::Uniform, 1e-3).unwrap();
        let one = StepFunction::constant(Arc::clone(&g), 1.0);
        assert_relative_eq!(integrate(&one, 0.0, 1.0).unwrap().value, 1.0);
        let (chi, a) = StepFunction::indicator(Arc::clone(&g), 0.5);
        assert_eq!(a, 0.5);
        assert_relative_eq!(integrate(&chi, 0.0, 1.0).unwrap().value, 0.5);
    }

    #[test]
    fn integrate_sampled_identity() {
        // Oracle: closed-form antiderivative of t on (0,1) is 1/2.
        let g = make_grid(1024, GridScheme::GeometricToward0, 1e-6).unwrap();
        let f = StepFunction::from_samples(g, |t| t).unwrap();
        // Left-endpoint sampling biases the Riemann sum low by about half
        // the mean cell width.
        let v = integrate(&f, 0.0, 1.0).unwrap().value;
        assert!(v < 0.5 && (v - 0.5).abs() < 5e-3, "got {v}");
    }

    #[test]
    fn integrate_rejects_reversed_bounds() {
        let g = make_grid(8, GridScheme::Uniform, 1e-3).unwrap();
        let one = StepFunction::constant(g, 1.0);
        assert!(integrate(&one, 0.7, 0.3).is_err());
    }

    #[test]
    fn compose_identity_preserves_values() {
        let g = make_grid(32, GridScheme::GeometricToward0, 1e-6).unwrap();
        let f = StepFunction::from_samples(g, |t| (1.0 - t) * (1.0 - t)).unwrap();
        let h = compose_with_monotone(&f, |t| t, true).unwrap();
        assert_eq!(f.values(), h.values());
    }

    #[test]
    fn compose_indicator_shift() {
        // chi_(0,1/4) composed with t/2 equals chi_(0,1/2) at representatives.
        let g = make_grid(64, GridScheme::Uniform, 1e-3).unwrap();
        let (chi, _) = StepFunction::indicator(Arc::clone(&g), 0.25);
        let h = compose_with_monotone(&chi, |t| t / 2.0, true).unwrap();
        let (expect, _) = StepFunction::indicator(g, 0.5);
        assert_eq!(h.values(), expect.values());
    }

    #[test]
    fn compose_propagates_monotone_flag() {
        let g = make_grid(32, GridScheme::Uniform, 1e-3).unwrap();
        let f = StepFunction::from_samples(Arc::clone(&g), |t| 1.0 - t)
            .unwrap()
            .with_monotone_flag(MonotoneFlag::Nonincreasing);
        let h = compose_with_monotone(&f, |t| t * t, true).unwrap();
        assert_eq!(h.monotone_flag(), MonotoneFlag::Nonincreasing);
        assert!(h.is_nonincreasing());
    }

    #[test]
    fn compose_rejects_out_of_range_phi() {
        let g = make_grid(8, GridScheme::Uniform, 1e-3).unwrap();
        let f = StepFunction::constant(g, 1.0);
        assert!(compose_with_monotone(&f, |t| t + 0.9, true).is_err());
    }

    #[test]
    fn integrate_additive_over_adjacent_intervals() {
        let g = make_grid(128, GridScheme::GeometricToward0, 1e-6).unwrap();
        let f = StepFunction::from_samples(g, |t| (8.0 * t).sin().abs()).unwrap();
        let whole = integrate(&f, 0.05, 0.9).unwrap().value;
        let parts =
            integrate(&f, 0.05, 0.3).unwrap().value + integrate(&f, 0.3, 0.9).unwrap().value;
        assert_relative_eq!(whole, parts, max_relative = 1e-13);
    }

    #[test]
    fn integrate_product_matches_plain_integral() {
        let g = make_grid(16, GridScheme::Uniform, 1e-3).unwrap();
        let f = StepFunction::from_samples(Arc::clone(&g), |t| t).unwrap();
        let one = StepFunction::constant(g, 1.0);
        assert_relative_eq!(
            integrate_product(&f, &one),
            integrate(&f, 0.0, 1.0).unwrap().value,
            max_relative = 1e-14
        );
    }
}
