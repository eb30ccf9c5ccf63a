//! Nonincreasing rearrangement of step functions and the two classical
//! comparison principles built on it.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{integrate_product, Grid, KahanSum, MonotoneFlag, StepFunction};

/// Nonincreasing rearrangement of `|f|`.
///
/// When the values are already nonnegative and nonincreasing the input is
/// returned unchanged (same grid, flag set); otherwise the rearrangement
/// lives on its natural grid, whose breakpoints are the cumulative sorted
/// cell widths — this keeps it exactly equimeasurable with `|f|`.
pub fn rearrangement(f: &StepFunction) -> StepFunction {
    if f.values().iter().all(|&v| v >= 0.0) && f.is_nonincreasing() {
        return f.clone().with_monotone_flag(MonotoneFlag::Nonincreasing);
    }
    let grid = f.grid();
    let mut cells: Vec<(f64, f64)> = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v.abs(), grid.width(i)))
        .collect();
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut breakpoints = Vec::with_capacity(cells.len());
    let mut values = Vec::with_capacity(cells.len());
    let mut acc = KahanSum::new();
    for &(v, w) in &cells {
        acc.add(w);
        breakpoints.push(acc.value());
        values.push(v);
    }
    *breakpoints.last_mut().unwrap() = 1.0;
    let natural = Arc::new(
        Grid::from_breakpoints(dedup_breakpoints(breakpoints, &mut values), grid.scheme())
            .expect("natural rearrangement grid"),
    );
    StepFunction::new(natural, values)
        .expect("rearranged step function")
        .with_monotone_flag(MonotoneFlag::Nonincreasing)
}

/// Collapses breakpoints that collide after rounding (keeping the earlier,
/// larger value, which preserves the nonincreasing order).
fn dedup_breakpoints(bps: Vec<f64>, values: &mut Vec<f64>) -> Vec<f64> {
    let mut out_b = Vec::with_capacity(bps.len());
    let mut out_v = Vec::with_capacity(bps.len());
    let mut prev = 0.0f64;
    for (b, v) in bps.into_iter().zip(values.iter().copied()) {
        if b > prev {
            out_b.push(b);
            out_v.push(v);
            prev = b;
        }
    }
    *values = out_v;
    out_b
}

/// Running average `t -> (1/t) int_0^t f*`, sampled at the representative
/// of each cell of the rearrangement's grid.
pub fn maximal_rearrangement(f: &StepFunction) -> StepFunction {
    let star = rearrangement(f);
    let grid = Arc::clone(star.grid());
    let mut prefix = Vec::with_capacity(grid.len()); // int_0^{right(i)} f*
    let mut acc = KahanSum::new();
    for i in 0..grid.len() {
        acc.add(star.values()[i] * grid.width(i));
        prefix.push(acc.value());
    }
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let t = grid.rep(i);
            let integral = if i == 0 {
                star.values()[0] * t
            } else {
                prefix[i - 1]
            };
            integral / t
        })
        .collect();
    StepFunction::new(grid, values)
        .expect("maximal rearrangement")
        .with_monotone_flag(MonotoneFlag::Nonincreasing)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HardyLemmaReport {
    /// Prefix integrals of `f*` never exceed those of `g*`.
    pub premise_holds: bool,
    pub max_premise_violation: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub conclusion_holds: bool,
}

/// If `int_0^t f* <= int_0^t g*` for all `t`, then `int f* h <= int g* h`
/// for every nonnegative nonincreasing `h`. Checks the premise on the merged
/// breakpoint set and reports both sides of the conclusion.
pub fn hardy_lemma_check(
    f: &StepFunction,
    g: &StepFunction,
    h: &StepFunction,
) -> Result<HardyLemmaReport> {
    if !h.is_nonincreasing() || h.values().iter().any(|&v| v < 0.0) {
        return Err(Error::PreconditionViolation(
            "test function must be nonnegative and nonincreasing".into(),
        ));
    }
    let fs = rearrangement(f);
    let gs = rearrangement(g);
    let mut points: Vec<f64> = fs
        .grid()
        .breakpoints()
        .iter()
        .chain(gs.grid().breakpoints())
        .copied()
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    let mut max_violation = 0.0f64;
    let mut pf = PrefixWalker::new(&fs);
    let mut pg = PrefixWalker::new(&gs);
    for &t in &points {
        let vf = pf.prefix(t);
        let vg = pg.prefix(t);
        max_violation = max_violation.max(vf - vg);
    }
    let scale = pf.total().abs().max(pg.total().abs()).max(1e-300);
    let premise_holds = max_violation <= 1e-12 * scale;
    let lhs = integrate_product(&fs, h);
    let rhs = integrate_product(&gs, h);
    let conclusion_holds = lhs <= rhs + 1e-12 * rhs.abs().max(1e-300);
    Ok(HardyLemmaReport {
        premise_holds,
        max_premise_violation: max_violation,
        lhs,
        rhs,
        conclusion_holds,
    })
}

/// Incremental prefix integral of a step function at increasing query points.
struct PrefixWalker<'a> {
    f: &'a StepFunction,
    i: usize,
    acc: KahanSum,
    last: f64,
}

impl<'a> PrefixWalker<'a> {
    fn new(f: &'a StepFunction) -> Self {
        Self {
            f,
            i: 0,
            acc: KahanSum::new(),
            last: 0.0,
        }
    }

    fn prefix(&mut self, t: f64) -> f64 {
        debug_assert!(t >= self.last);
        let grid = self.f.grid();
        while self.i < grid.len() && grid.right(self.i) <= t {
            self.acc.add(self.f.values()[self.i] * (grid.right(self.i) - self.last));
            self.last = grid.right(self.i);
            self.i += 1;
        }
        let mut v = self.acc.value();
        if self.i < grid.len() && t > self.last {
            v += self.f.values()[self.i] * (t - self.last);
            self.acc.add(self.f.values()[self.i] * (t - self.last));
            self.last = t;
        }
        v
    }

    fn total(&mut self) -> f64 {
        self.prefix(1.0)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HlpReport {
    /// `int |f g|`.
    pub lhs: f64,
    /// `int f* g*`.
    pub rhs: f64,
    pub holds: bool,
}

/// Hardy-Littlewood inequality: `int |f g| <= int f* g*`.
pub fn hlp_check(f: &StepFunction, g: &StepFunction) -> HlpReport {
    let lhs = integrate_product(&f.map(f64::abs), &g.map(f64::abs));
    let rhs = integrate_product(&rearrangement(f), &rearrangement(g));
    HlpReport {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12 * rhs.abs().max(1e-300),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, make_grid, GridScheme};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform_step(values: Vec<f64>) -> StepFunction {
        let g = make_grid(values.len().max(8), GridScheme::Uniform, 1e-6).unwrap();
        let n = g.len();
        let mut v = values;
        v.resize(n, 0.0);
        StepFunction::new(g, v).unwrap()
    }

    /// Lebesgue measure of the superlevel set `{|f| > lambda}`.
    fn dist(f: &StepFunction, lambda: f64) -> f64 {
        let g = f.grid();
        (0..g.len())
            .map(|i| {
                if f.values()[i].abs() > lambda {
                    g.width(i)
                } else {
                    0.0
                }
            })
            .sum()
    }

    #[test]
    fn constant_is_fixed_point() {
        let g = make_grid(16, GridScheme::Uniform, 1e-3).unwrap();
        let one = StepFunction::constant(g, 1.0);
        let star = rearrangement(&one);
        assert_eq!(star.values(), one.values());
        let starstar = maximal_rearrangement(&one);
        for &v in starstar.values() {
            assert_relative_eq!(v, 1.0);
        }
    }

    #[test]
    fn two_level_example() {
        // f = 3 on (1/2, 1), 1 on (0, 1/2) => f* = 3 on (0,1/2), 1 after.
        let mut vals = vec![1.0; 8];
        for v in vals.iter_mut().skip(4) {
            *v = 3.0;
        }
        let f = uniform_step(vals);
        let star = rearrangement(&f);
        assert!(star.is_nonincreasing());
        assert_relative_eq!(star.eval(0.25), 3.0);
        assert_relative_eq!(star.eval(0.75), 1.0);
        // f**(3/4) = (1/t)(3/2 + (t - 1/2)) at t = 3/4 => 7/6... computed at
        // the cell representative (left endpoint), oracle evaluated there.
        let mm = maximal_rearrangement(&f);
        let t = mm.grid().rep(mm.grid().cell_of(0.75));
        let oracle = (1.5 + (t - 0.5)) / t;
        assert_relative_eq!(mm.eval(0.75), oracle, max_relative = 1e-13);
    }

    #[test]
    fn indicator_rearranges_to_front() {
        // chi on scattered cells with total measure 1/4.
        let mut vals = vec![0.0; 16];
        vals[3] = 1.0;
        vals[7] = 1.0;
        vals[11] = 1.0;
        vals[15] = 1.0;
        let f = uniform_step(vals);
        let star = rearrangement(&f);
        assert_relative_eq!(star.eval(0.1), 1.0);
        assert_relative_eq!(star.eval(0.3), 0.0);
        assert_relative_eq!(dist(&star, 0.5), 0.25, max_relative = 1e-13);
    }

    #[test]
    fn negative_values_use_absolute_value() {
        let f = uniform_step(vec![-2.0, 1.0, -3.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let star = rearrangement(&f);
        assert!(star.is_nonincreasing());
        assert_relative_eq!(star.values()[0], 3.0);
        assert_relative_eq!(
            integrate(&star, 0.0, 1.0).unwrap().value,
            integrate(&f.map(f64::abs), 0.0, 1.0).unwrap().value,
            max_relative = 1e-13
        );
    }

    #[test]
    fn hardy_lemma_on_ordered_pair() {
        let g = make_grid(64, GridScheme::Uniform, 1e-4).unwrap();
        let f = StepFunction::from_samples(Arc::clone(&g), |t| 1.0 - t).unwrap();
        let big = StepFunction::from_samples(Arc::clone(&g), |t| 2.0 * (1.0 - t)).unwrap();
        let h = StepFunction::from_samples(Arc::clone(&g), |t| (1.0 - t).powi(2)).unwrap();
        let r = hardy_lemma_check(&f, &big, &h).unwrap();
        assert!(r.premise_holds);
        assert!(r.conclusion_holds);
    }

    #[test]
    fn hardy_lemma_rejects_increasing_test_function() {
        let g = make_grid(8, GridScheme::Uniform, 1e-3).unwrap();
        let f = StepFunction::constant(Arc::clone(&g), 1.0);
        let h = StepFunction::from_samples(g, |t| t).unwrap();
        assert!(hardy_lemma_check(&f, &f, &h).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rearrangement_is_equimeasurable(
            values in proptest::collection::vec(-5.0f64..5.0, 8..40),
            lambda in 0.0f64..5.0,
        ) {
            let f = uniform_step(values);
            let star = rearrangement(&f);
            prop_assert!((dist(&f, lambda) - dist(&star, lambda)).abs() < 1e-12);
        }

        #[test]
        fn rearrangement_preserves_l1(
            values in proptest::collection::vec(-5.0f64..5.0, 8..40),
        ) {
            let f = uniform_step(values);
            let star = rearrangement(&f);
            let a = integrate(&f.map(f64::abs), 0.0, 1.0).unwrap().value;
            let b = integrate(&star, 0.0, 1.0).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn rearrangement_is_nonincreasing_and_idempotent(
            values in proptest::collection::vec(-5.0f64..5.0, 8..40),
        ) {
            let f = uniform_step(values);
            let star = rearrangement(&f);
            prop_assert!(star.is_nonincreasing());
            let star2 = rearrangement(&star);
            prop_assert_eq!(star.values(), star2.values());
        }

        #[test]
        fn maximal_dominates_rearrangement(
            values in proptest::collection::vec(-5.0f64..5.0, 8..40),
        ) {
            let f = uniform_step(values);
            let star = rearrangement(&f);
            let mm = maximal_rearrangement(&f);
            prop_assert!(mm.is_nonincreasing());
            for i in 0..star.len() {
                prop_assert!(mm.values()[i] >= star.values()[i] - 1e-12);
            }
        }

        #[test]
        fn hlp_holds_for_random_pairs(
            fv in proptest::collection::vec(-5.0f64..5.0, 16),
            gv in proptest::collection::vec(-5.0f64..5.0, 16),
        ) {
            let f = uniform_step(fv);
            let g = uniform_step(gv);
            let r = hlp_check(&f, &g);
            prop_assert!(r.holds, "lhs {} > rhs {}", r.lhs, r.rhs);
        }

        #[test]
        fn hardy_lemma_holds_when_premise_holds(
            fv in proptest::collection::vec(0.0f64..5.0, 16),
            gv in proptest::collection::vec(0.0f64..5.0, 16),
            hv in proptest::collection::vec(0.0f64..3.0, 16),
        ) {
            let f = uniform_step(fv);
            let g = uniform_step(gv);
            let mut h_sorted = hv;
            h_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let h = uniform_step(h_sorted);
            let r = hardy_lemma_check(&f, &g, &h).unwrap();
            if r.premise_holds {
                prop_assert!(r.conclusion_holds, "{r:?}");
            }
        }
    }
}
