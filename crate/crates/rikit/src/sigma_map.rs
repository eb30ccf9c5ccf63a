//! The change-of-variables map `sigma` defined by
//! `t^p = (1/C) int_0^{sigma(t)^p} (b1/b2)^p`, its inverse, and the
//! diagnostics tied to it.
//!
//! The cumulative weight `W(u) = int_0^u (b1/b2)^p` is tabulated on a
//! geometric grid with closed-form per-cell increments (compensated
//! summation for the running total); evaluations between nodes refine the
//! bracketing cell with the closed-form antiderivative, so the defining
//! identity holds to machine precision rather than interpolation order.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid, GridScheme, KahanSum};
use crate::karamata::{in_class_bp, PoweredWeight, RatioRange, SlowlyVaryingSpec};

#[derive(Debug, Clone)]
pub struct SigmaMap {
    p: f64,
    b1: SlowlyVaryingSpec,
    b2: SlowlyVaryingSpec,
    ratio_pow: PoweredWeight, // (b1/b2)^p
    grid: Arc<Grid>,
    w: Vec<f64>, // W at grid breakpoints
    c: f64,      // W(1), the normalizer
    residual: f64,
}

/// Builds the map on an internally chosen geometric grid of `resolution`
/// cells refined toward 0.
pub fn build_sigma(
    b1: &SlowlyVaryingSpec,
    b2: &SlowlyVaryingSpec,
    p: f64,
    resolution: usize,
) -> Result<SigmaMap> {
    let min_cell = 1e-10f64.min(0.1 / resolution as f64);
    let grid = make_grid(resolution, GridScheme::GeometricToward0, min_cell)?;
    build_sigma_on_grid(b1, b2, p, grid)
}

/// Builds the map with its cumulative-weight table on the given grid.
pub fn build_sigma_on_grid(
    b1: &SlowlyVaryingSpec,
    b2: &SlowlyVaryingSpec,
    p: f64,
    grid: Arc<Grid>,
) -> Result<SigmaMap> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p = {p} must be in (0, inf)")));
    }
    let ratio = SlowlyVaryingSpec::ratio(b1, b2)?;
    let ratio_pow = ratio.powered(p);
    let mut acc = KahanSum::new();
    let mut w = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let inc = ratio_pow.integral(grid.left(i), grid.right(i));
        if !inc.is_finite() || inc < 0.0 {
            return Err(Error::NonIntegrableWeight(format!(
                "cell ({}, {}) contributes {inc}",
                grid.left(i),
                grid.right(i)
            )));
        }
        acc.add(inc);
        w.push(acc.value());
    }
    let c = *w.last().unwrap();
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::NonIntegrableWeight(format!("W(1) = {c}")));
    }
    let mut map = SigmaMap {
        p,
        b1: b1.clone(),
        b2: b2.clone(),
        ratio_pow,
        grid,
        w,
        c,
        residual: 0.0,
    };
    let mut residual = 0.0f64;
    for &t in map.grid.breakpoints() {
        let tp = t.powf(p);
        let u = map.invert_w(map.c * tp);
        let r = (tp - map.w_exact(u) / map.c).abs() / tp;
        residual = residual.max(r);
    }
    map.residual = residual;
    Ok(map)
}

impl SigmaMap {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn b1(&self) -> &SlowlyVaryingSpec {
        &self.b1
    }

    pub fn b2(&self) -> &SlowlyVaryingSpec {
        &self.b2
    }

    /// The normalizing constant `C = int_0^1 (b1/b2)^p`.
    pub fn normalizer(&self) -> f64 {
        self.c
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Max over the table of `|t^p - (1/C) W(sigma(t)^p)| / t^p`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn ensure_resolution(&self, tolerance: f64) -> Result<()> {
        if self.residual > tolerance {
            Err(Error::ResolutionTooCoarse {
                residual: self.residual,
                tolerance,
            })
        } else {
            Ok(())
        }
    }

    /// Exact cumulative weight: table node plus a closed-form remainder
    /// over the partial cell.
    fn w_exact(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.c;
        }
        let j = self.grid.cell_of(u);
        let base = if j == 0 { 0.0 } else { self.w[j - 1] };
        base + self.ratio_pow.integral(self.grid.left(j), u)
    }

    /// Monotone inversion of `W`: bracket on the table, then Newton with
    /// bisection safeguarding inside the cell using the exact antiderivative.
    fn invert_w(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        if target >= self.c {
            return 1.0;
        }
        let j = self.w.partition_point(|&wj| wj <= target);
        let j = j.min(self.grid.len() - 1);
        let cell_left = self.grid.left(j);
        let base = if j == 0 { 0.0 } else { self.w[j - 1] };
        let mut lo = cell_left;
        let mut hi = self.grid.right(j);
        let span = self.w[j] - base;
        let mut u = if span > 0.0 {
            lo + (hi - lo) * (target - base) / span
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..60 {
            let g = base + self.ratio_pow.integral(cell_left, u) - target;
            if g > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let rho = self.ratio_pow.eval(u.max(1e-300));
            let mut next = if rho > 0.0 && rho.is_finite() {
                u - g / rho
            } else {
                0.5 * (lo + hi)
            };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= 1e-16 * u.abs() {
                u = next;
                break;
            }
            u = next;
        }
        u
    }

    /// `sigma(t)`, clamped to [0,1] with `sigma(0) = 0`, `sigma(1) = 1`.
    pub fn sigma(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        self.invert_w(self.c * t.powf(self.p)).powf(1.0 / self.p)
    }

    /// `sigma^{-1}(y) = (W(y^p)/C)^{1/p}`, explicit (no inversion).
    pub fn sigma_inv(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        (self.w_exact(y.powf(self.p)) / self.c).powf(1.0 / self.p)
    }

    /// `sigma(s^{1/p})^p = W^{-1}(C s)`, the composition appearing in the
    /// operator kernels.
    pub fn forward_composed(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        self.invert_w(self.c * s)
    }

    /// `sigma^{-1}(t^{1/p})^p = W(t)/C`, explicit.
    pub fn inverse_composed(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        self.w_exact(t) / self.c
    }

    /// Writes the table as CSV (`t,sigma,sigma_inv,residual`) preceded by a
    /// provenance comment line.
    pub fn write_csv(&self, out: &mut dyn std::io::Write, provenance: &str) -> Result<()> {
        writeln!(out, "# {provenance}")?;
        writeln!(out, "t,sigma,sigma_inv,residual")?;
        for &t in self.grid.breakpoints() {
            let tp = t.powf(self.p);
            let u = self.invert_w(self.c * tp);
            let r = (tp - self.w_exact(u) / self.c).abs() / tp;
            writeln!(
                out,
                "{t:.17e},{:.17e},{:.17e},{r:.3e}",
                u.powf(1.0 / self.p),
                self.sigma_inv(t)
            )?;
        }
        Ok(())
    }
}

/// Min/max over the grid of `sigma^{-1}(t) / (t b1(t^p) b2(t^p)^{-1})`;
/// slow variation makes this range bounded.
pub fn sigma_inverse_asymptotic_check(m: &SigmaMap) -> RatioRange {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &t in m.grid.breakpoints() {
        if t >= 1.0 {
            continue;
        }
        let tp = t.powf(m.p);
        let denom = t * m.b1.eval_unchecked(tp) / m.b2.eval_unchecked(tp);
        let r = m.sigma_inv(t) / denom;
        min = min.min(r);
        max = max.max(r);
    }
    RatioRange { min, max }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominationReport {
    /// `t <= sigma^{-1}(t^{1/p})^p` at every grid point.
    pub holds_everywhere: bool,
    /// Strict inequality at every interior grid point.
    pub strict_interior: bool,
    /// Whether strictness was expected (b1/b2 strictly decreasing).
    pub strictness_expected: bool,
    pub max_violation: f64,
    pub points: usize,
}

/// Pointwise check of `t <= sigma^{-1}(t^{1/p})^p`; requires `b1/b2`
/// nonincreasing.
pub fn sigma_domination_check(m: &SigmaMap) -> Result<DominationReport> {
    let ratio = SlowlyVaryingSpec::ratio(&m.b1, &m.b2)?;
    let mono = ratio.monotonicity();
    if !mono.is_nonincreasing() {
        return Err(Error::PreconditionViolation(format!(
            "b1/b2 must be nonincreasing, classified {mono:?}"
        )));
    }
    let strictness_expected = mono == crate::karamata::Monotonicity::Nonincreasing;
    let mut holds = true;
    let mut strict = true;
    let mut max_violation = 0.0f64;
    let mut points = 0usize;
    for &t in m.grid.breakpoints() {
        if t >= 1.0 {
            continue;
        }
        let v = m.inverse_composed(t);
        points += 1;
        if t > v + 1e-12 * t {
            holds = false;
            max_violation = max_violation.max(t - v);
        }
        if v <= t * (1.0 + 1e-12) {
            strict = false;
        }
    }
    Ok(DominationReport {
        holds_everywhere: holds,
        strict_interior: strict,
        strictness_expected,
        max_violation,
        points,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RemarkCReport {
    /// `b1(t) / b1(sigma^{-1}(t^{1/p})^p)` over the grid.
    pub via_inverse: RatioRange,
    /// `b1(t) / b1(sigma(t^{1/p})^p)` over the grid.
    pub via_forward: RatioRange,
}

/// Both self-similarity ratios of `b1` under the map; requires the pair to
/// pass the class-membership check.
pub fn bp_remark_c_check(m: &SigmaMap) -> Result<RemarkCReport> {
    let report = in_class_bp(&m.b1, &m.b2, m.p)?;
    if !report.verdict {
        return Err(Error::PreconditionViolation(
            "weight pair failed class membership".into(),
        ));
    }
    let mut ranges = [RatioRange {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    }; 2];
    for &t in m.grid.breakpoints() {
        if t >= 1.0 {
            continue;
        }
        let b1t = m.b1.eval_unchecked(t);
        for (k, arg) in [m.inverse_composed(t), m.forward_composed(t)]
            .into_iter()
            .enumerate()
        {
            if arg > 0.0 && arg < 1.0 {
                let r = b1t / m.b1.eval_unchecked(arg);
                ranges[k].min = ranges[k].min.min(r);
                ranges[k].max = ranges[k].max.max(r);
            }
        }
    }
    Ok(RemarkCReport {
        via_inverse: ranges[0],
        via_forward: ranges[1],
    })
}

/// Ungated diagnostic: finite differences of `sigma^{-1}(t^{1/p})^p`
/// against `(b1/b2)^p / C` (the identity makes the ratio 1 up to the
/// difference quotient's truncation error).
pub fn sigma_derivative_diagnostic(m: &SigmaMap) -> RatioRange {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let bps = m.grid.breakpoints();
    for i in 1..bps.len().saturating_sub(1) {
        let (a, b) = (bps[i - 1], bps[i + 1]);
        let fd = (m.inverse_composed(b) - m.inverse_composed(a)) / (b - a);
        let mid = bps[i];
        let expect = m.ratio_pow.eval(mid) / m.c;
        if expect > 0.0 {
            let r = fd / expect;
            min = min.min(r);
            max = max.max(r);
        }
    }
    RatioRange { min, max }
}
