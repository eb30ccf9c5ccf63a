//! The shared sweep dictionary: indicators at geometrically spaced cut
//! points, power and log-power shapes probing both endpoint regimes,
//! their products, and seeded random nonincreasing step functions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, StepFunction};
use crate::karamata::ell;
use crate::operators::NamedFunction;

use super::scenario::DictionaryConfig;

pub fn build_dictionary(
    grid: &Arc<Grid>,
    p: f64,
    cfg: &DictionaryConfig,
    seed: u64,
) -> Vec<NamedFunction> {
    let mut out = Vec::new();
    // Indicators chi_(0,a) with a geometric from 1e-6 up to 1/2; the
    // indicator is the extremal shape for the tail-vs-composition
    // comparison, so it anchors every sweep.
    if cfg.indicators > 0 {
        let lo = 1e-6f64;
        let hi = 0.5f64;
        for k in 0..cfg.indicators {
            let frac = if cfg.indicators == 1 {
                0.0
            } else {
                k as f64 / (cfg.indicators - 1) as f64
            };
            let a = lo * (hi / lo).powf(frac);
            let (chi, snapped) = StepFunction::indicator(Arc::clone(grid), a);
            out.push(NamedFunction::new(format!("chi-{snapped:.3e}"), chi));
        }
    }
    let gammas = [0.1 / p, 0.25 / p, 0.45 / p];
    if cfg.include_powers {
        for g in gammas {
            let f = StepFunction::from_samples(Arc::clone(grid), |t| t.powf(-g))
                .expect("finite power samples");
            out.push(NamedFunction::new(format!("pow-{g:.3}"), f));
        }
    }
    let deltas = [-1.0, -0.5, 0.5, 1.0];
    if cfg.include_log_powers {
        for d in deltas {
            let f = StepFunction::from_samples(Arc::clone(grid), |t| ell(t).powf(d))
                .expect("finite log-power samples");
            out.push(NamedFunction::new(format!("logpow-{d:.1}"), f));
        }
    }
    if cfg.include_products {
        for (g, d) in [(0.25 / p, 0.5), (0.45 / p, -1.0), (0.1 / p, 1.0)] {
            let f = StepFunction::from_samples(Arc::clone(grid), |t| {
                t.powf(-g) * ell(t).powf(d)
            })
            .expect("finite product samples");
            out.push(NamedFunction::new(format!("pow-{g:.3}-logpow-{d:.1}"), f));
        }
    }
    // Random nonincreasing shapes: sorted exponential samples, one value
    // per cell; seeded for reproducibility.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..cfg.random {
        let mut values: Vec<f64> = (0..grid.len())
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let f = StepFunction::new(Arc::clone(grid), values).expect("finite random samples");
        out.push(NamedFunction::new(format!("rand-{k}"), f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GridScheme};

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = make_grid(128, GridScheme::GeometricToward0, 1e-6).unwrap();
        let cfg = DictionaryConfig::default();
        let a = build_dictionary(&g, 1.0, &cfg, 7);
        let b = build_dictionary(&g, 1.0, &cfg, 7);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.f.values(), y.f.values());
        }
    }

    #[test]
    fn random_entries_are_nonincreasing() {
        let g = make_grid(64, GridScheme::Uniform, 1e-3).unwrap();
        let cfg = DictionaryConfig {
            indicators: 0,
            random: 5,
            include_powers: false,
            include_log_powers: false,
            include_products: false,
        };
        for entry in build_dictionary(&g, 1.0, &cfg, 3) {
            let v = entry.f.values();
            assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn default_config_counts() {
        let g = make_grid(64, GridScheme::Uniform, 1e-3).unwrap();
        let d = build_dictionary(&g, 2.0, &DictionaryConfig::default(), 1);
        // 8 indicators + 3 powers + 4 log powers + 3 products + 50 random.
        assert_eq!(d.len(), 68);
    }
}
