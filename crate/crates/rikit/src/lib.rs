//! Numerical toolkit on the interval (0,1): nonincreasing rearrangements,
//! slowly varying weights, a measure-change map between weighted norms,
//! K-functionals, and the Hardy-type operators tied to them.

pub mod error;
pub mod grid;
pub mod harness;
pub mod karamata;
pub mod kfunc;
pub mod operators;
pub mod rearrange;
pub mod sigma_map;
pub mod spaces;

pub use error::{Error, Result};
pub use grid::{
    compose_with_monotone, integrate, integrate_product, make_grid, Grid, GridScheme, KahanSum,
    MonotoneFlag, QuadratureResult, StepFunction,
};
pub use karamata::{
    ell, in_class_bp, sv_integral_property_check, BpReport, EllPoly, Monotonicity, PoweredWeight,
    RatioRange, SlowlyVaryingSpec, SvExpr,
};
pub use kfunc::{
    k_bruteforce, k_explicit_karamata, k_inequality_chain_check, k_lp_linf, Couple, CoupleParams,
    ExplicitKEvaluator, KChainReport, KEstimate, KMethod, TruncationOracle,
};
pub use operators::{
    gaussibility_check, op_s, op_t, op_u, t_recursion_ratio, ConstantReport, NamedFunction,
    OperatorHandle, ResolutionEntry,
};
pub use rearrange::{
    hardy_lemma_check, hlp_check, maximal_rearrangement, rearrangement, HardyLemmaReport,
    HlpReport,
};
pub use sigma_map::{
    bp_remark_c_check, build_sigma, build_sigma_on_grid, sigma_derivative_diagnostic,
    sigma_domination_check, sigma_inverse_asymptotic_check, DominationReport, RemarkCReport,
    SigmaMap,
};
pub use spaces::{
    associate_norm_estimate, holder_check, norm, standard_dual_dictionary, BanachFlag,
    HolderReport, SpaceSpec,
};
