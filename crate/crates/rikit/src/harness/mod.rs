//! Scenario-driven verification campaigns and the shared sweep
//! dictionary.

pub mod campaign;
pub mod dictionary;
pub mod scenario;

pub use campaign::{
    bp_example_table, build_ctx, gaussian_preset_report, gaussibility_campaign, kfunc_sweep,
    limit_condition_extrapolated, limit_condition_value, verify_main_theorem_links,
    verify_s_dominated_by_u, write_kfunc_csv, BpTable, BpTableEntry, CampaignReport, CheckResult,
    KSweepRow,
};
pub use dictionary::build_dictionary;
pub use scenario::{DictionaryConfig, GridConfig, Scenario, Tolerances};
