//! Multi-start DC OPF runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{OpfConfig, SolverKind};
use super::sweep::write_csv;
use super::{run_solver, with_pool};
use crate::error::Result;
use crate::linear_map::Vector;
use crate::opf::dc::{binary_relaxation_gap, build_dcopf, generator_only_point, postprocess_solution, random_box_point};
use crate::opf::{load_network, NetworkData, PlanReport};
use crate::qp::{ProjectionOptions, Projector};
use crate::trace::{linear_rate_fit, step_norm_rate_fit, RateFit};

#[derive(Debug, Clone, Serialize)]
pub struct OpfRunRecord {
    pub start: usize,
    pub solver: SolverKind,
    pub status: String,
    pub iterations: Option<usize>,
    pub objective: Option<f64>,
    pub initial_objective: Option<f64>,
    /// Extrapolated solver only.
    pub lyapunov_max_violation: Option<f64>,
    /// `;`-separated 1-based buses with `X_i` rounded to 1.
    pub placement: String,
    pub binary_gap: Option<f64>,
    pub rate_r_squared: Option<f64>,
    pub cpu_seconds_nondeterministic: Option<f64>,
    pub message: String,
}

impl OpfRunRecord {
    pub fn succeeded(&self) -> bool {
        self.message.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OpfSolverStats {
    pub solver: SolverKind,
    pub runs: usize,
    pub failed: usize,
    pub mean_objective: f64,
    pub best_objective: f64,
    pub best_start: Option<usize>,
    pub mean_iterations: f64,
    pub mean_cpu_seconds_nondeterministic: f64,
    /// `max_n violation_n / (1 + |F(x_0)|)` over all starts.
    pub max_relative_lyapunov_violation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OpfResults {
    pub runs: Vec<OpfRunRecord>,
    pub stats: Vec<OpfSolverStats>,
    /// Solver whose best run produced [`Self::best_plan`]: the extrapolated
    /// solver when it ran, otherwise the first configured one.
    pub best_solver: SolverKind,
    pub best_plan: Option<PlanReport>,
    pub best_x: Option<Vector>,
    /// Tail fit of `log ||x_n - x_final||` on the best run of `best_solver`.
    pub rate_fit: Option<RateFit>,
    /// Tail fit of `log ||x_n - x_{n-1}||` on the same run.
    pub step_rate_fit: Option<RateFit>,
}

impl OpfResults {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| !r.succeeded()).count()
    }

    pub fn stats_for(&self, solver: SolverKind) -> Option<&OpfSolverStats> {
        self.stats.iter().find(|s| s.solver == solver)
    }

    /// Best objective over the first `k` starts, for `k = 1..=starts`.
    pub fn best_prefix(&self, solver: SolverKind) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.runs
            .iter()
            .filter(|r| r.solver == solver)
            .map(|r| {
                if let Some(f) = r.objective {
                    best = best.min(f);
                }
                best
            })
            .collect()
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<7} {:>5} {:>7} {:>12} {:>12} {:>10} {:>10}\n",
            "solver", "runs", "failed", "mean F", "best F", "iter", "cpu(s)"
        );
        for st in &self.stats {
            s += &format!(
                "{:<7} {:>5} {:>7} {:>12.6} {:>12.6} {:>10.1} {:>10.4}\n",
                st.solver.name(),
                st.runs,
                st.failed,
                st.mean_objective,
                st.best_objective,
                st.mean_iterations,
                st.mean_cpu_seconds_nondeterministic
            );
        }
        for (what, fit) in [("distance", &self.rate_fit), ("step", &self.step_rate_fit)] {
            match fit {
                Some(f) => {
                    s += &format!(
                        "{what} rate fit ({}): slope {:.4}, R^2 {:.4} over {} points\n",
                        self.best_solver.name(),
                        f.slope,
                        f.r_squared,
                        f.points
                    )
                }
                None => s += &format!("{what} rate fit ({}): too few points\n", self.best_solver.name()),
            }
        }
        s
    }
}

struct Run {
    record: OpfRunRecord,
    x: Option<Vector>,
    fit: Option<RateFit>,
    step_fit: Option<RateFit>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs every solver from `cfg.starts` projected starting points and reports
/// aggregate statistics plus the plan of the best run.
pub fn run_opf(cfg: &OpfConfig) -> Result<OpfResults> {
    cfg.validate()?;
    let mut net = match &cfg.network {
        Some(dir) => load_network(dir)?,
        None => NetworkData::bundled(),
    };
    if let Some(g) = cfg.gamma {
        net.gamma = g;
    }
    let (spec, set, layout) = build_dcopf(&net, net.gamma)?;
    let projector = Projector::new(&set, ProjectionOptions::default())?;
    let witness = if cfg.witness_start {
        Some(projector.project(&generator_only_point(&net, &layout)?, None)?.x)
    } else {
        None
    };

    let jobs: Vec<(usize, SolverKind)> = (0..cfg.starts)
        .flat_map(|k| cfg.solvers.iter().map(move |&s| (k, s)))
        .collect();
    let runs: Vec<Run> = with_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(start, solver)| {
                let mut record = OpfRunRecord {
                    start,
                    solver,
                    status: "error".into(),
                    iterations: None,
                    objective: None,
                    initial_objective: None,
                    lyapunov_max_violation: None,
                    placement: String::new(),
                    binary_gap: None,
                    rate_r_squared: None,
                    cpu_seconds_nondeterministic: None,
                    message: String::new(),
                };
                let x0 = match &witness {
                    Some(w) => Ok(w.clone()),
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(start as u64));
                        projector.project(&random_box_point(&set, &mut rng), None).map(|p| p.x)
                    }
                };
                let outcome = x0.and_then(|x0| {
                    record.initial_objective = Some(spec.objective(&x0));
                    run_solver(solver, &spec, &x0, &cfg.settings, true)
                });
                match outcome {
                    Ok(rep) => {
                        let fit = linear_rate_fit(&rep.trace);
                        let step_fit = step_norm_rate_fit(&rep.trace);
                        let placement: Vec<String> = (0..layout.n_buses)
                            .filter(|&i| (rep.x[layout.placement(i)] - 1.0).abs() <= cfg.round_tol)
                            .map(|i| (i + 1).to_string())
                            .collect();
                        record.status = format!("{:?}", rep.status).to_ascii_lowercase();
                        record.iterations = Some(rep.iterations);
                        record.objective = Some(rep.objective);
                        record.lyapunov_max_violation =
                            if solver == SolverKind::Psg { rep.max_lyapunov_violation } else { None };
                        record.placement = placement.join(";");
                        record.binary_gap = binary_relaxation_gap(&rep.x, &layout).ok();
                        record.rate_r_squared = fit.map(|f| f.r_squared);
                        record.cpu_seconds_nondeterministic = Some(rep.trace.elapsed.as_secs_f64());
                        Run {
                            record,
                            x: Some(rep.x),
                            fit,
                            step_fit,
                        }
                    }
                    Err(e) => {
                        record.message = e.to_string();
                        Run {
                            record,
                            x: None,
                            fit: None,
                            step_fit: None,
                        }
                    }
                }
            })
            .collect::<Vec<_>>()
    })?;

    let mut stats = Vec::new();
    for &solver in &cfg.solvers {
        let cell: Vec<&Run> = runs.iter().filter(|r| r.record.solver == solver).collect();
        let ok: Vec<&OpfRunRecord> = cell.iter().map(|r| &r.record).filter(|r| r.succeeded()).collect();
        let best = ok
            .iter()
            .filter_map(|r| r.objective.map(|f| (f, r.start)))
            .fold(None, |acc: Option<(f64, usize)>, (f, k)| match acc {
                Some((bf, _)) if bf <= f => acc,
                _ => Some((f, k)),
            });
        let rel = ok
            .iter()
            .filter_map(|r| Some(r.lyapunov_max_violation? / (1.0 + r.initial_objective?.abs())))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        stats.push(OpfSolverStats {
            solver,
            runs: cell.len(),
            failed: cell.len() - ok.len(),
            mean_objective: mean(ok.iter().filter_map(|r| r.objective)),
            best_objective: best.map_or(f64::NAN, |b| b.0),
            best_start: best.map(|b| b.1),
            mean_iterations: mean(ok.iter().filter_map(|r| r.iterations.map(|i| i as f64))),
            mean_cpu_seconds_nondeterministic: mean(ok.iter().filter_map(|r| r.cpu_seconds_nondeterministic)),
            max_relative_lyapunov_violation: rel,
        });
    }

    let best_solver = if cfg.solvers.contains(&SolverKind::Psg) {
        SolverKind::Psg
    } else {
        cfg.solvers[0]
    };
    let best_run = stats
        .iter()
        .find(|s| s.solver == best_solver)
        .and_then(|s| s.best_start)
        .and_then(|k| runs.iter().find(|r| r.record.solver == best_solver && r.record.start == k));
    let best_x = best_run.and_then(|r| r.x.clone());
    let best_plan = match &best_x {
        Some(x) => Some(postprocess_solution(x, &net, &layout, cfg.round_tol, cfg.baseline_cost_usd)?),
        None => None,
    };
    let results = OpfResults {
        runs: runs.iter().map(|r| r.record.clone()).collect(),
        stats,
        best_solver,
        best_plan,
        best_x,
        rate_fit: best_run.and_then(|r| r.fit),
        step_rate_fit: best_run.and_then(|r| r.step_fit),
    };
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("opf_runs.csv"), &results.runs)?;
        write_csv(&dir.join("opf_summary.csv"), &results.stats)?;
        if let Some(plan) = &results.best_plan {
            std::fs::write(dir.join("plan.json"), serde_json::to_string_pretty(plan)?)?;
            std::fs::write(dir.join("plan.txt"), plan.table())?;
        }
    }
    Ok(results)
}
