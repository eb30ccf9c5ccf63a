//! Scenario files: the JSON description of a verification run — weight
//! pair, exponent, spaces, grid, dictionary, seed, tolerances.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridScheme;
use crate::karamata::{SlowlyVaryingSpec, SvExpr};
use crate::spaces::SpaceSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub size: usize,
    pub scheme: GridScheme,
    pub min_cell: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            size: 4096,
            scheme: GridScheme::GeometricToward0,
            min_cell: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionaryConfig {
    /// Number of indicator functions with geometrically spaced cut points.
    pub indicators: usize,
    /// Number of seeded random nonincreasing step functions.
    pub random: usize,
    pub include_powers: bool,
    pub include_log_powers: bool,
    pub include_products: bool,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            indicators: 8,
            random: 50,
            include_powers: true,
            include_log_powers: true,
            include_products: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Maximum acceptable defining-identity residual of the map.
    pub residual: f64,
    /// Maximum relative movement of a constant between resolutions.
    pub stability: f64,
    /// Maximum acceptable two-sided band for oracle-consistency ratios.
    pub equivalence_band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            stability: 0.05,
            equivalence_band: 20.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub p: f64,
    pub b1: SvExpr,
    pub b2: SvExpr,
    #[serde(rename = "X")]
    pub x: SpaceSpec,
    #[serde(rename = "Y")]
    pub y: SpaceSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub dictionary: DictionaryConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_seed() -> u64 {
    17
}

impl Scenario {
    /// The motivating preset: p = 1, b1 = ell^{1/2}, b2 = ell^{-1/2},
    /// X = Y = L^2.
    pub fn gaussian_preset() -> Self {
        Self {
            p: 1.0,
            b1: SvExpr::Atom { alpha: 0.5 },
            b2: SvExpr::Atom { alpha: -0.5 },
            x: SpaceSpec::lebesgue(2.0),
            y: SpaceSpec::lebesgue(2.0),
            grid: GridConfig::default(),
            dictionary: DictionaryConfig::default(),
            seed: default_seed(),
            tolerances: Tolerances::default(),
        }
    }

    /// A second preset with the same exponent sum but asymmetric split.
    pub fn quarter_preset() -> Self {
        Self {
            b1: SvExpr::Atom { alpha: 0.25 },
            b2: SvExpr::Atom { alpha: -0.75 },
            ..Self::gaussian_preset()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p = {} out of range", self.p)));
        }
        if self.grid.size < 8 {
            return Err(Error::InvalidArgument("grid size below 8".into()));
        }
        self.b1_spec()?;
        self.b2_spec()?;
        self.x.validate()?;
        self.y.validate()?;
        Ok(())
    }

    pub fn b1_spec(&self) -> Result<SlowlyVaryingSpec> {
        SlowlyVaryingSpec::new(self.b1.clone())
    }

    pub fn b2_spec(&self) -> Result<SlowlyVaryingSpec> {
        SlowlyVaryingSpec::new(self.b2.clone())
    }

    /// SHA-256 of the canonical JSON serialization; ties every report to
    /// the exact inputs that produced it.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&bytes);
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}
