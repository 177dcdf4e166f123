//! Experiment harness: compressed-sensing sweeps, DC OPF multi-start runs and
//! the invariant check suite behind the command-line tool.

pub mod checks;
pub mod config;
pub mod opf_run;
pub mod sweep;

pub use checks::{run_checks, CheckOptions, CheckReport, CheckRow};
pub use config::{ExperimentConfig, OpfConfig, Profile, SolverKind, SolverSettings};
pub use opf_run::{run_opf, OpfResults, OpfRunRecord, OpfSolverStats};
pub use sweep::{generate_bundle, run_cs_sweep, RunRecord, SummaryRow, SweepResults};

use crate::baselines::{gppa_solve, pdcae_solve, BaselineParams};
use crate::error::{Error, Result};
use crate::linear_map::Vector;
use crate::problem::ProblemSpec;
use crate::solver::solve;
use crate::trace::SolveReport;

/// Runs one solver with the shared settings.
pub fn run_solver(
    kind: SolverKind,
    spec: &ProblemSpec,
    x0: &Vector,
    settings: &SolverSettings,
    keep_iterates: bool,
) -> Result<SolveReport> {
    let keep = Some(keep_iterates);
    let base = |scale: f64| BaselineParams {
        max_iter: settings.psg.max_iter,
        stop_rel_tol: settings.psg.stop_rel_tol,
        keep_iterates: keep,
        ..BaselineParams::with_tau(scale / (spec.lipschitz * spec.gram_norm()))
    };
    match kind {
        SolverKind::Psg => solve(
            spec,
            x0,
            &crate::problem::SolverParams {
                keep_iterates: keep,
                ..settings.psg.clone()
            },
        ),
        SolverKind::Gppa => gppa_solve(spec, x0, &base(settings.gppa_tau_scale)),
        SolverKind::Pdcae => pdcae_solve(spec, x0, &base(settings.pdcae_tau_scale)),
    }
}

/// Runs `f` on a private pool of `threads` workers (all cores when `None`).
pub(crate) fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
