//! The three Hardy-type operators built from a measure-change map — a
//! composition operator `U`, a suffix-supremum operator `T`, and a tail
//! integral `S` — plus an empirical boundedness checker for black-box
//! operators against the change-of-variables inequality that `U`
//! satisfies with constant one.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{KahanSum, MonotoneFlag, StepFunction};
use crate::karamata::{in_class_bp, SlowlyVaryingSpec};
use crate::rearrange::rearrangement;
use crate::sigma_map::SigmaMap;

/// `U f (t) = f*(sigma^{-1}(t^{1/p})^p) b2(t)^{-1}` on the map grid: the
/// composition is sampled at cell left endpoints (so the first cell sees
/// `f*(0+) = ||f||_inf`), the weight at representatives. Nonincreasing
/// whenever `b2` is nondecreasing.
pub fn op_u(f: &StepFunction, m: &SigmaMap) -> StepFunction {
    let star = rearrangement(f);
    let grid = m.grid();
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            star.eval(m.inverse_composed(grid.left(i))) / m.b2().eval_unchecked(grid.rep(i))
        })
        .collect();
    let flag = if m.b2().monotonicity().is_nondecreasing() {
        MonotoneFlag::Nonincreasing
    } else {
        MonotoneFlag::Unknown
    };
    StepFunction::with_monotone_flag(StepFunction::new(Arc::clone(grid), values).expect("finite values on the map grid"), flag)
}

/// `T f (t) = sup_{t <= s < 1} f*(sigma(s^{1/p})^p) / b1(sigma(s^{1/p})^p)^p`
/// with the supremum over grid representatives; nonincreasing by
/// construction (suffix maximum).
pub fn op_t(f: &StepFunction, m: &SigmaMap) -> StepFunction {
    let star = rearrangement(f);
    let grid = m.grid();
    let n = grid.len();
    let b1p = m.b1().powered(m.p());
    let mut values = vec![0.0f64; n];
    let mut running = f64::NEG_INFINITY;
    for i in (0..n).rev() {
        let x = m.forward_composed(grid.rep(i));
        running = running.max(star.eval(x) / b1p.eval(x));
        values[i] = running;
    }
    StepFunction::with_monotone_flag(
        StepFunction::new(Arc::clone(grid), values).expect("finite values on the map grid"),
        MonotoneFlag::Nonincreasing,
    )
}

/// `S f (t) = (int_t^1 |f(s)|^p / (s b1(s)^p) ds)^{1/p}` on the input's
/// grid, evaluated at representatives via closed-form per-cell
/// antiderivatives; nonincreasing.
pub fn op_s(f: &StepFunction, b1: &SlowlyVaryingSpec, p: f64) -> StepFunction {
    let w = b1.powered(-p); // b1^{-p}, integrated against ds/s
    let grid = f.grid();
    let n = grid.len();
    let mut values = vec![0.0f64; n];
    let mut acc = KahanSum::new();
    for i in (0..n).rev() {
        // Full cells strictly above i have already been accumulated; the
        // own-cell contribution starts at the representative so that the
        // value at the first cell stays finite even when the integral
        // diverges at 0.
        let own = f.values()[i].abs().powf(p) * w.log_integral(grid.rep(i), grid.right(i));
        values[i] = (acc.value() + own).powf(1.0 / p);
        let full = f.values()[i].abs().powf(p) * w.log_integral(grid.left(i).max(0.0), grid.right(i));
        if full.is_finite() {
            acc.add(full);
        } else {
            acc.add(own);
        }
    }
    StepFunction::with_monotone_flag(
        StepFunction::new(Arc::clone(grid), values).expect("finite values on the map grid"),
        MonotoneFlag::Nonincreasing,
    )
}

/// A labelled black-box operator on step functions.
pub struct OperatorHandle {
    label: String,
    map: Box<dyn Fn(&StepFunction) -> StepFunction + Send + Sync>,
}

impl OperatorHandle {
    pub fn new(
        label: impl Into<String>,
        map: impl Fn(&StepFunction) -> StepFunction + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            map: Box::new(map),
        }
    }

    pub fn u(m: Arc<SigmaMap>) -> Self {
        Self::new("U", move |f| op_u(f, &m))
    }

    pub fn t(m: Arc<SigmaMap>) -> Self {
        Self::new("T", move |f| op_t(f, &m))
    }

    /// `S` applied after rearrangement, as the boundedness statements use it.
    pub fn s_of_star(b1: SlowlyVaryingSpec, p: f64) -> Self {
        Self::new("S*", move |f| op_s(&rearrangement(f), &b1, p))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply(&self, f: &StepFunction) -> StepFunction {
        (self.map)(f)
    }
}

/// A dictionary entry for sweeps: a step function with a display label.
#[derive(Clone)]
pub struct NamedFunction {
    pub label: String,
    pub f: StepFunction,
}

impl NamedFunction {
    pub fn new(label: impl Into<String>, f: StepFunction) -> Self {
        Self {
            label: label.into(),
            f,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolutionEntry {
    pub n: usize,
    pub constant: f64,
}

/// Empirical best constant for an inequality family, with the witness of
/// where it was attained and per-resolution stability data.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantReport {
    pub constant: f64,
    pub argmax_function_label: String,
    pub argmax_t: f64,
    pub resolutions: Vec<ResolutionEntry>,
}

/// Best constant over the dictionary and the grid for
/// `int_0^t [(op f)*(s) b1(s)]^p ds <= c int_0^t [f*(sigma^{-1}(s^{1/p})^p) b1(s) b2(s)^{-1}]^p ds`.
///
/// Both sides sample their non-`b1` factor at grid representatives and
/// integrate `b1^p` in closed form per cell, so an operator that equals
/// the right-hand integrand pointwise (such as `U`) scores exactly 1.
/// A 0/0 ratio counts as 0.
pub fn gaussibility_check(
    op: &OperatorHandle,
    m: &SigmaMap,
    dictionary: &[NamedFunction],
) -> Result<ConstantReport> {
    let bp = in_class_bp(m.b1(), m.b2(), m.p())?;
    if !bp.verdict {
        return Err(Error::PreconditionViolation(format!(
            "weight pair rejected by the class-membership check (inconclusive: {})",
            bp.inconclusive
        )));
    }
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let grid = m.grid();
    let n = grid.len();
    let p = m.p();
    let b1p = m.b1().powered(p);
    let w1: Vec<f64> = (0..n)
        .map(|i| b1p.integral(grid.left(i), grid.right(i)))
        .collect();
    let mut best = 0.0f64;
    let mut arg_label = dictionary[0].label.clone();
    let mut arg_t = 0.0f64;
    for entry in dictionary {
        let star_f = rearrangement(&entry.f);
        let g = op.apply(&entry.f);
        let star_g = rearrangement(&g);
        let mut lhs = KahanSum::new();
        let mut rhs = KahanSum::new();
        for i in 0..n {
            let r = grid.rep(i);
            let gv = star_g.eval(r);
            let fv = star_f.eval(m.inverse_composed(grid.left(i))) / m.b2().eval_unchecked(r);
            lhs.add(gv.powf(p) * w1[i]);
            rhs.add(fv.powf(p) * w1[i]);
            let ratio = if lhs.value() == 0.0 {
                0.0
            } else {
                lhs.value() / rhs.value()
            };
            if ratio > best {
                best = ratio;
                arg_label = entry.label.clone();
                arg_t = grid.right(i);
            }
        }
    }
    Ok(ConstantReport {
        constant: best,
        argmax_function_label: arg_label,
        argmax_t: arg_t,
        resolutions: vec![ResolutionEntry {
            n,
            constant: best,
        }],
    })
}

/// Largest observed ratio in the one-step recursion bound
/// `T f(t) <= c [ f*(sigma(t^{1/p})^p)/b1(sigma(t^{1/p})^p)^p + T f(sigma^{-1}(t^{1/p})^p) ]`
/// over grid representatives.
pub fn t_recursion_ratio(f: &StepFunction, m: &SigmaMap) -> f64 {
    let star = rearrangement(f);
    let tf = op_t(f, m);
    let grid = m.grid();
    let b1p = m.b1().powered(m.p());
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        let r = grid.rep(i);
        let lhs = tf.eval(r);
        let x = m.forward_composed(r);
        let rhs = star.eval(x) / b1p.eval(x) + tf.eval(m.inverse_composed(r).min(1.0 - 1e-15));
        if lhs > 0.0 && rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridScheme};
    use crate::karamata::ell;
    use crate::sigma_map::build_sigma;
    use crate::spaces::{norm, SpaceSpec};
    use approx::assert_relative_eq;

    fn gaussian(res: usize) -> SigmaMap {
        build_sigma(
            &SlowlyVaryingSpec::ell_pow(0.5),
            &SlowlyVaryingSpec::ell_pow(-0.5),
            1.0,
            res,
        )
        .unwrap()
    }

    fn identity_map(res: usize) -> SigmaMap {
        let one = SlowlyVaryingSpec::one();
        build_sigma(&one, &one, 1.0, res).unwrap()
    }

    fn small_dictionary(m: &SigmaMap) -> Vec<NamedFunction> {
        let g = Arc::clone(m.grid());
        vec![
            NamedFunction::new("one", StepFunction::constant(Arc::clone(&g), 1.0)),
            NamedFunction::new(
                "chi-0.1",
                StepFunction::indicator(Arc::clone(&g), 0.1).0,
            ),
            NamedFunction::new(
                "pow-0.3",
                StepFunction::from_samples(g, |t| t.powf(-0.3)).unwrap(),
            ),
        ]
    }

    #[test]
    fn u_unit_weights_is_rearrangement() {
        let m = identity_map(256);
        // Nonincreasing input: its rearrangement is itself on the same
        // grid, so U with unit weights must reproduce it cell by cell
        // (up to the composition landing one cell over at a breakpoint).
        let f = StepFunction::from_samples(Arc::clone(m.grid()), |t| 1.0 / (1.0 + t)).unwrap();
        let u = op_u(&f, &m);
        assert_eq!(u.values()[0], f.values()[0]);
        for i in 1..m.grid().len() {
            assert_relative_eq!(u.values()[i], f.values()[i], max_relative = 1e-6);
        }
    }

    #[test]
    fn u_constant_input_gaussian() {
        let m = gaussian(256);
        let f = StepFunction::constant(Arc::clone(m.grid()), 2.5);
        let u = op_u(&f, &m);
        for i in (0..m.grid().len()).step_by(17) {
            let r = m.grid().rep(i);
            assert_relative_eq!(u.values()[i], 2.5 * ell(r).sqrt(), max_relative = 1e-12);
        }
        assert!(u.is_nonincreasing());
    }

    #[test]
    fn u_indicator_support_cut_at_forward_composition() {
        let m = gaussian(512);
        let (chi, a) = StepFunction::indicator(Arc::clone(m.grid()), 0.2);
        let u = op_u(&chi, &m);
        // U chi_(0,a) is supported where sigma^{-1}(t) < a, i.e. t below
        // sigma(a); the support edge must land within one cell of it.
        let edge = m.forward_composed(a);
        let grid = m.grid();
        let last_pos = (0..grid.len()).rev().find(|&i| u.values()[i] > 0.0).unwrap();
        assert!(grid.left(last_pos) <= edge && edge <= grid.right(last_pos + 1).min(1.0));
    }

    #[test]
    fn t_unit_weights_is_rearrangement() {
        let m = identity_map(256);
        // Nonincreasing input: the suffix sup of f* along an identity
        // change of variables is f* itself at every representative.
        let f = StepFunction::from_samples(Arc::clone(m.grid()), |t| (2.0 - t).sqrt()).unwrap();
        let t = op_t(&f, &m);
        // Each composed sample sits on a cell boundary and may resolve to
        // either side, so the suffix sup lies between f at the cell and f
        // one cell to the left.
        for i in 0..m.grid().len() {
            let v = t.values()[i];
            let lo = f.values()[i];
            let hi = f.values()[i.saturating_sub(1)];
            assert!(lo - 1e-12 <= v && v <= hi + 1e-12, "cell {i}: {v} not in [{lo}, {hi}]");
        }
    }

    #[test]
    fn t_constant_input_factors_out() {
        let m = gaussian(256);
        let c = 3.0;
        let f = StepFunction::constant(Arc::clone(m.grid()), c);
        let t = op_t(&f, &m);
        // f* = c and 1/b1(sigma(s)) grows toward s = 1, so the suffix sup
        // sits at the last representative for every t.
        let grid = m.grid();
        let last = m.forward_composed(grid.rep(grid.len() - 1));
        let expect = c / ell(last).sqrt();
        for i in (0..grid.len()).step_by(31) {
            assert_relative_eq!(t.values()[i], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn t_matches_naive_double_loop() {
        let m = gaussian(64);
        let grid = m.grid();
        let f = StepFunction::from_samples(Arc::clone(grid), |s| 1.0 / (0.2 + s)).unwrap();
        let fast = op_t(&f, &m);
        let star = rearrangement(&f);
        let b1p = m.b1().powered(m.p());
        for i in 0..grid.len() {
            let mut naive = f64::NEG_INFINITY;
            for j in i..grid.len() {
                let x = m.forward_composed(grid.rep(j));
                naive = naive.max(star.eval(x) / b1p.eval(x));
            }
            assert_eq!(fast.values()[i], naive);
        }
    }

    #[test]
    fn s_zero_and_log_examples() {
        let g = make_grid(256, GridScheme::GeometricToward0, 1e-8).unwrap();
        let one = SlowlyVaryingSpec::one();
        let zero = StepFunction::constant(Arc::clone(&g), 0.0);
        assert!(op_s(&zero, &one, 1.0).values().iter().all(|&v| v == 0.0));
        let unit = StepFunction::constant(Arc::clone(&g), 1.0);
        let s = op_s(&unit, &one, 1.0);
        for i in (0..g.len()).step_by(13) {
            assert_relative_eq!(s.values()[i], -g.rep(i).ln(), max_relative = 1e-12);
        }
    }

    #[test]
    fn s_gaussian_closed_form() {
        let g = make_grid(512, GridScheme::GeometricToward0, 1e-10).unwrap();
        let b1 = SlowlyVaryingSpec::ell_pow(0.5);
        let unit = StepFunction::constant(Arc::clone(&g), 1.0);
        let s = op_s(&unit, &b1, 1.0);
        // Oracle: antiderivative of 1/(s (1 - log s)^{1/2}) is
        // -2 (1 - log s)^{1/2}, so the tail integral is 2(ell(t)^{1/2} - 1).
        for i in (0..g.len()).step_by(29) {
            let r = g.rep(i);
            assert_relative_eq!(
                s.values()[i],
                2.0 * (ell(r).sqrt() - 1.0),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn builtins_preserve_monotonicity() {
        let m = gaussian(128);
        let star = rearrangement(
            &StepFunction::from_samples(Arc::clone(m.grid()), |t| (30.0 * t).sin().abs() + 0.1)
                .unwrap(),
        );
        for out in [
            op_u(&star, &m),
            op_t(&star, &m),
            op_s(&star, m.b1(), m.p()),
        ] {
            let v = out.values();
            assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn u_gaussibility_constant_is_one() {
        let m = Arc::new(gaussian(512));
        let dict = small_dictionary(&m);
        let report = gaussibility_check(&OperatorHandle::u(Arc::clone(&m)), &m, &dict).unwrap();
        assert!(
            (report.constant - 1.0).abs() < 1e-12,
            "constant = {}",
            report.constant
        );
    }

    #[test]
    fn u_endpoint_isometry() {
        let m = gaussian(512);
        let linf = SpaceSpec::lebesgue(f64::INFINITY);
        let weighted = SpaceSpec::karamata(f64::INFINITY, m.b2());
        for entry in small_dictionary(&m) {
            let lhs = norm(&weighted, &op_u(&entry.f, &m)).unwrap();
            let rhs = norm(&linf, &entry.f).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaled_operator_scales_constant() {
        let m = Arc::new(gaussian(256));
        let dict = small_dictionary(&m);
        let base = OperatorHandle::u(Arc::clone(&m));
        let k = 5.0;
        let m2 = Arc::clone(&m);
        let scaled = OperatorHandle::new("5U", move |f| op_u(f, &m2).map(|v| k * v));
        let c0 = gaussibility_check(&base, &m, &dict).unwrap().constant;
        let c1 = gaussibility_check(&scaled, &m, &dict).unwrap().constant;
        assert_relative_eq!(c1, k * c0, max_relative = 1e-10);
    }

    #[test]
    fn gaussibility_rejects_unit_weights() {
        let m = identity_map(128);
        let dict = small_dictionary(&m);
        let err = gaussibility_check(
            &OperatorHandle::u(Arc::new(m.clone())),
            &m,
            &dict,
        )
        .unwrap_err();
        assert!(matches!(err, Error::PreconditionViolation(_)));
    }

    #[test]
    fn s_after_rearrangement_is_gaussible_on_dictionary() {
        let m = Arc::new(gaussian(512));
        let dict = small_dictionary(&m);
        let op = OperatorHandle::s_of_star(m.b1().clone(), m.p());
        let report = gaussibility_check(&op, &m, &dict).unwrap();
        assert!(report.constant.is_finite() && report.constant > 0.0);
        // Refinement stability against a finer map.
        let m2 = Arc::new(gaussian(1024));
        let dict2 = small_dictionary(&m2);
        let report2 = gaussibility_check(&op, &m2, &dict2).unwrap();
        let drift = (report2.constant - report.constant).abs() / report.constant;
        assert!(drift < 0.05, "drift {drift}: {} vs {}", report.constant, report2.constant);
    }

    #[test]
    fn t_recursion_bound_is_controlled() {
        let m = gaussian(256);
        for entry in small_dictionary(&m) {
            let c = t_recursion_ratio(&entry.f, &m);
            assert!(c.is_finite() && c <= 1.5, "c = {c}");
        }
    }
}
