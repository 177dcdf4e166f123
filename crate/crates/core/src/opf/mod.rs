//! DC optimal power flow with PV placement on the bundled 14-bus network,
//! plus the (ingest-only) branch-flow AC model.

pub mod ac;
pub mod dc;
pub mod network;

pub use ac::{load_ac_model, AcLayout, AcModel, Link};
pub use dc::{
    binary_relaxation_gap, build_dcopf, build_dcopf_with, dcopf_feasible_set, generator_only_point,
    postprocess_solution, random_box_point, DcOpfLayout, DcOpfPoint, PlanReport,
};
pub use network::{load_network, NetworkData};
