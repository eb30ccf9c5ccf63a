//! Rearrangement-invariant (quasi-)norms: Lebesgue, weighted
//! Orlicz-Karamata, powered spaces, and associate norms (closed-form for
//! the Lebesgue family, dictionary lower bound otherwise).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate_product, Grid, KahanSum, StepFunction};
use crate::karamata::{Monotonicity, SlowlyVaryingSpec, SvExpr};
use crate::rearrange::rearrangement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceSpec {
    /// `L^p`; `p` may be infinite (constructed in code, not via JSON).
    Lebesgue(f64),
    /// `||b f*||_{L^p}` with a slowly varying weight `b`.
    Karamata { p: f64, b: SvExpr },
    /// `||f|| = || |f|^exponent ||_base^{1/exponent}`.
    Power {
        base: Box<SpaceSpec>,
        exponent: f64,
    },
    /// The associate (dual-type) norm of a Banach base.
    Associate(Box<SpaceSpec>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BanachFlag {
    Banach,
    Quasi,
    Unknown,
}

impl SpaceSpec {
    pub fn lebesgue(p: f64) -> Self {
        SpaceSpec::Lebesgue(p)
    }

    pub fn karamata(p: f64, b: &SlowlyVaryingSpec) -> Self {
        SpaceSpec::Karamata {
            p,
            b: b.expr().clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpaceSpec::Lebesgue(p) => {
                if !(*p > 0.0) {
                    return Err(Error::UnsupportedSpace(format!("Lebesgue p = {p}")));
                }
            }
            SpaceSpec::Karamata { p, b } => {
                let spec = SlowlyVaryingSpec::new(b.clone())?;
                if !(*p > 0.0) {
                    return Err(Error::UnsupportedSpace(format!("Karamata p = {p}")));
                }
                if p.is_infinite() {
                    // p = inf requires a bounded weight.
                    let bounded = match spec.poly() {
                        Some(poly) => poly.terms().iter().all(|&(_, g)| g <= 0.0),
                        None => (0..64).all(|k| {
                            spec.eval_unchecked(10f64.powf(-12.0 * (k as f64 + 1.0) / 64.0))
                                .is_finite()
                        }),
                    };
                    if !bounded {
                        return Err(Error::UnsupportedSpace(
                            "Karamata with p = inf needs a bounded weight".into(),
                        ));
                    }
                }
            }
            SpaceSpec::Power { base, exponent } => {
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::UnsupportedSpace(format!(
                        "Power exponent = {exponent}"
                    )));
                }
                base.validate()?;
            }
            SpaceSpec::Associate(base) => {
                base.validate()?;
                if base.banach_flag() != BanachFlag::Banach {
                    return Err(Error::UnsupportedAssociate(
                        "associate requires a Banach base".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Normalizes powers over the Lebesgue/Karamata families:
    /// `Power(Lebesgue(q), e) = Lebesgue(q e)` and
    /// `Power(Karamata(q, b), e) = Karamata(q e, b^{1/e})`.
    pub fn reduced(&self) -> SpaceSpec {
        match self {
            SpaceSpec::Power { base, exponent } => match base.reduced() {
                SpaceSpec::Lebesgue(q) => SpaceSpec::Lebesgue(q * exponent),
                SpaceSpec::Karamata { p: q, b } => SpaceSpec::Karamata {
                    p: q * exponent,
                    b: SvExpr::Pow {
                        base: Box::new(b),
                        exp: 1.0 / exponent,
                    },
                },
                other => SpaceSpec::Power {
                    base: Box::new(other),
                    exponent: *exponent,
                },
            },
            SpaceSpec::Associate(base) => match base.reduced() {
                // Closed-form Lebesgue duality for q in [1, inf].
                SpaceSpec::Lebesgue(q) if q >= 1.0 => {
                    SpaceSpec::Lebesgue(conjugate_exponent(q))
                }
                other => SpaceSpec::Associate(Box::new(other)),
            },
            other => other.clone(),
        }
    }

    pub fn banach_flag(&self) -> BanachFlag {
        match self.reduced() {
            SpaceSpec::Lebesgue(p) => {
                if p >= 1.0 {
                    BanachFlag::Banach
                } else {
                    BanachFlag::Quasi
                }
            }
            SpaceSpec::Karamata { p, b } => {
                // Equivalent to a Banach norm iff p in (1, inf], or p = 1
                // with the weight (equivalent to) nonincreasing.
                let mono = SlowlyVaryingSpec::new(b)
                    .map(|s| s.monotonicity())
                    .unwrap_or(Monotonicity::Unknown);
                if p > 1.0 {
                    BanachFlag::Banach
                } else if p < 1.0 {
                    BanachFlag::Quasi
                } else if mono.is_nonincreasing() {
                    BanachFlag::Banach
                } else {
                    BanachFlag::Unknown
                }
            }
            SpaceSpec::Associate(_) => BanachFlag::Banach,
            SpaceSpec::Power { .. } => BanachFlag::Unknown,
        }
    }

    /// Structural p-convexity: the 1/p-powered functional must land in the
    /// Banach-equivalent part of the family.
    pub fn is_p_convex(&self, p: f64) -> bool {
        match self.reduced() {
            SpaceSpec::Lebesgue(q) => q >= p,
            SpaceSpec::Karamata { p: q, b } => {
                if q < p {
                    return false;
                }
                if q > p {
                    return true;
                }
                // q = p: the powered space is L^{1, b^p}; Banach-equivalent
                // only for a (nonincreasing-equivalent) weight.
                SlowlyVaryingSpec::new(b)
                    .map(|s| s.monotonicity().is_nonincreasing())
                    .unwrap_or(false)
            }
            _ => false,
        }
    }
}

fn conjugate_exponent(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// `(sum |v_i|^p w_i)^{1/p}` over the cells of `f`, or the max for p = inf.
fn lebesgue_norm(f: &StepFunction, p: f64) -> f64 {
    if p.is_infinite() {
        return f.abs_max();
    }
    let grid = f.grid();
    let mut acc = KahanSum::new();
    for i in 0..grid.len() {
        acc.add(f.values()[i].abs().powf(p) * grid.width(i));
    }
    acc.value().powf(1.0 / p)
}

/// Weighted norm `||b f*||_{L^p}` with exact per-cell weight integrals.
fn karamata_norm(f: &StepFunction, p: f64, b: &SlowlyVaryingSpec) -> f64 {
    let star = rearrangement(f);
    let grid = star.grid();
    if p.is_infinite() {
        let mut sup = 0.0f64;
        for i in 0..grid.len() {
            sup = sup.max(star.values()[i] * b.eval_unchecked(grid.rep(i)));
        }
        return sup;
    }
    let w = b.powered(p);
    let mut acc = KahanSum::new();
    for i in 0..grid.len() {
        let v = star.values()[i];
        if v != 0.0 {
            acc.add(v.powf(p) * w.integral(grid.left(i), grid.right(i)));
        }
    }
    acc.value().powf(1.0 / p)
}

/// Evaluates the (quasi-)norm of `f` in the given space. Associate norms
/// are supported only where a closed form exists (the Lebesgue family);
/// elsewhere use [`associate_norm_estimate`].
pub fn norm(space: &SpaceSpec, f: &StepFunction) -> Result<f64> {
    space.validate()?;
    match space.reduced() {
        SpaceSpec::Lebesgue(p) => Ok(lebesgue_norm(f, p)),
        SpaceSpec::Karamata { p, b } => {
            let spec = SlowlyVaryingSpec::new(b)?;
            Ok(karamata_norm(f, p, &spec))
        }
        SpaceSpec::Power { base, exponent } => {
            let powered = f.map(|v| v.abs().powf(exponent));
            Ok(norm(&base, &powered)?.powf(1.0 / exponent))
        }
        SpaceSpec::Associate(base) => Err(Error::UnsupportedAssociate(format!(
            "no closed form for the associate of {base:?}; use the dictionary estimate"
        ))),
    }
}

/// Dictionary lower bound for the associate norm:
/// `sup_g int f* g* / ||g||_base` over the supplied dictionary. Always a
/// LOWER bound on the true associate norm.
pub fn associate_norm_estimate(
    base: &SpaceSpec,
    f: &StepFunction,
    dictionary: &[StepFunction],
) -> Result<f64> {
    if dictionary.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    base.validate()?;
    if base.banach_flag() != BanachFlag::Banach {
        return Err(Error::UnsupportedAssociate(
            "associate estimate requires a Banach base".into(),
        ));
    }
    let fs = rearrangement(f);
    let mut best = 0.0f64;
    for g in dictionary {
        let gn = norm(base, g)?;
        if gn <= 0.0 || !gn.is_finite() {
            continue;
        }
        best = best.max(integrate_product(&fs, &rearrangement(g)) / gn);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `int |f g| <= ||f||_base ||g||_base'` for a base with closed-form
/// associate.
pub fn holder_check(f: &StepFunction, g: &StepFunction, base: &SpaceSpec) -> Result<HolderReport> {
    let associate = SpaceSpec::Associate(Box::new(base.clone())).reduced();
    if matches!(associate, SpaceSpec::Associate(_)) {
        return Err(Error::UnsupportedAssociate(
            "Holder check needs a closed-form associate".into(),
        ));
    }
    let lhs = integrate_product(&f.map(f64::abs), &g.map(f64::abs));
    let rhs = norm(base, f)? * norm(&associate, g)?;
    Ok(HolderReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-10) + 1e-300,
    })
}

/// Normalized indicators, clipped power shapes, and log-power weights: the
/// extremal shapes for duality estimates.
pub fn standard_dual_dictionary(grid: &Arc<Grid>) -> Vec<StepFunction> {
    let mut dict = Vec::new();
    let n = grid.len();
    // Indicator levels at (a subsample of) the breakpoints; geometric grids
    // make these log-spaced in measure.
    let stride = (n / 256).max(1);
    let mut idx = 0usize;
    while idx < n {
        let a = grid.right(idx);
        let (chi, snapped) = StepFunction::indicator(Arc::clone(grid), a);
        if snapped > 0.0 {
            dict.push(chi.map(|v| v / snapped));
        }
        idx += stride;
    }
    for gamma in [0.1, 0.25, 0.45] {
        dict.push(
            StepFunction::from_samples(Arc::clone(grid), |t| t.powf(-gamma))
                .expect("power shape"),
        );
    }
    for delta in [-1.0, -0.5, 0.5, 1.0] {
        let b = SlowlyVaryingSpec::ell_pow(delta);
        dict.push(
            StepFunction::from_samples(Arc::clone(grid), |t| b.eval_unchecked(t))
                .expect("log-power shape"),
        );
    }
    dict.push(StepFunction::constant(Arc::clone(grid), 1.0));
    dict
}
