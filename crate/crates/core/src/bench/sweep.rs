//! Solver x case x seed sweeps on compressed-sensing instances.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, SolverKind};
use super::{run_solver, with_pool};
use crate::cs::{build_cs_problem, CaseSpec, CsInstance};
use crate::error::Result;
use crate::linear_map::Vector;
use crate::prox::L1L2Regularizer;

/// One solver run. Field order is the CSV column order.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub case: String,
    pub m: usize,
    pub d: usize,
    pub s: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub status: String,
    pub iterations: Option<usize>,
    pub objective: Option<f64>,
    pub initial_objective: Option<f64>,
    pub error: Option<f64>,
    /// Extrapolated solver only.
    pub lyapunov_max_violation: Option<f64>,
    pub cpu_seconds_nondeterministic: Option<f64>,
    pub message: String,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.message.is_empty()
    }
}

/// Per-(case, solver) means over the seeds that ran to completion.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub case: String,
    pub solver: SolverKind,
    pub runs: usize,
    pub failed: usize,
    pub mean_cpu_seconds_nondeterministic: f64,
    pub mean_iterations: f64,
    pub mean_objective: f64,
    pub mean_error: f64,
    pub max_lyapunov_violation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResults {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResults {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| !r.succeeded()).count()
    }

    pub fn row(&self, case: &str, solver: SolverKind) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.case == case && r.solver == solver)
    }

    /// Runs matched by `(case, seed)` for two solvers.
    pub fn paired(&self, a: SolverKind, b: SolverKind) -> Vec<(&RunRecord, &RunRecord)> {
        self.runs
            .iter()
            .filter(|r| r.solver == a)
            .filter_map(|ra| {
                self.runs
                    .iter()
                    .find(|rb| rb.solver == b && rb.case == ra.case && rb.seed == ra.seed)
                    .map(|rb| (ra, rb))
            })
            .collect()
    }

    pub fn write_runs(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.runs)
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.summary)
    }

    /// Fixed-width text rendering of the summary.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<6} {:<7} {:>5} {:>7} {:>10} {:>10} {:>14} {:>11}\n",
            "case", "solver", "runs", "failed", "cpu(s)", "iter", "objective", "error"
        );
        for r in &self.summary {
            s += &format!(
                "{:<6} {:<7} {:>5} {:>7} {:>10.3} {:>10.1} {:>14.6e} {:>11.3e}\n",
                r.case,
                r.solver.name(),
                r.runs,
                r.failed,
                r.mean_cpu_seconds_nondeterministic,
                r.mean_iterations,
                r.mean_objective,
                r.mean_error
            );
        }
        s
    }
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn run_cell(case: CaseSpec, seed: u64, cfg: &ExperimentConfig) -> Vec<RunRecord> {
    let blank = |solver: SolverKind, message: String| RunRecord {
        case: case.label(),
        m: case.m,
        d: case.d,
        s: case.s,
        seed,
        solver,
        status: "error".into(),
        iterations: None,
        objective: None,
        initial_objective: None,
        error: None,
        lyapunov_max_violation: None,
        cpu_seconds_nondeterministic: None,
        message,
    };
    let built = L1L2Regularizer::new(cfg.gamma, cfg.alpha)
        .and_then(|reg| CsInstance::generate(case, cfg.loss, reg, seed, cfg.noise))
        .and_then(|inst| build_cs_problem(&inst).map(|spec| (inst, spec)));
    let (inst, spec) = match built {
        Ok(v) => v,
        Err(e) => return cfg.solvers.iter().map(|&k| blank(k, e.to_string())).collect(),
    };
    let x0 = Vector::zeros(inst.d());
    let f0 = spec.objective(&x0);
    cfg.solvers
        .iter()
        .map(|&kind| match run_solver(kind, &spec, &x0, &cfg.settings, false) {
            Ok(rep) => RunRecord {
                status: format!("{:?}", rep.status).to_ascii_lowercase(),
                iterations: Some(rep.iterations),
                objective: Some(rep.objective),
                initial_objective: Some(f0),
                error: inst.error(&rep.x).ok(),
                lyapunov_max_violation: if kind == SolverKind::Psg { rep.max_lyapunov_violation } else { None },
                cpu_seconds_nondeterministic: Some(rep.trace.elapsed.as_secs_f64()),
                message: String::new(),
                ..blank(kind, String::new())
            },
            Err(e) => blank(kind, e.to_string()),
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn summarize(cfg: &ExperimentConfig, runs: &[RunRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for case in &cfg.cases {
        let label = case.label();
        for &solver in &cfg.solvers {
            let cell: Vec<&RunRecord> = runs.iter().filter(|r| r.case == label && r.solver == solver).collect();
            let ok: Vec<&RunRecord> = cell.iter().copied().filter(|r| r.succeeded()).collect();
            out.push(SummaryRow {
                case: label.clone(),
                solver,
                runs: cell.len(),
                failed: cell.len() - ok.len(),
                mean_cpu_seconds_nondeterministic: mean(ok.iter().filter_map(|r| r.cpu_seconds_nondeterministic)),
                mean_iterations: mean(ok.iter().filter_map(|r| r.iterations.map(|i| i as f64))),
                mean_objective: mean(ok.iter().filter_map(|r| r.objective)),
                mean_error: mean(ok.iter().filter_map(|r| r.error)),
                max_lyapunov_violation: ok
                    .iter()
                    .filter_map(|r| r.lyapunov_max_violation)
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
            });
        }
    }
    out
}

/// Runs every `(case, seed)` cell on a bounded worker pool and aggregates.
///
/// A failing run is recorded with its message and the sweep continues.
/// Output files named in `cfg` are written before returning.
pub fn run_cs_sweep(cfg: &ExperimentConfig) -> Result<SweepResults> {
    cfg.validate()?;
    let jobs: Vec<(CaseSpec, u64)> = cfg
        .cases
        .iter()
        .flat_map(|&c| (0..cfg.seeds as u64).map(move |k| (c, cfg.seed_base + k)))
        .collect();
    let runs: Vec<RunRecord> = with_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(case, seed)| run_cell(case, seed, cfg))
            .collect::<Vec<_>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    let results = SweepResults {
        summary: summarize(cfg, &runs),
        runs,
    };
    if let Some(p) = &cfg.output {
        results.write_runs(p)?;
    }
    if let Some(p) = &cfg.summary {
        results.write_summary(p)?;
    }
    Ok(results)
}

/// Writes the instance CSV bundle for one standard case and seed.
pub fn generate_bundle(case: u8, seed: u64, gamma: f64, out: &Path) -> Result<CsInstance> {
    let inst = CsInstance::generate(
        CaseSpec::standard(case)?,
        crate::prox::LossKind::LeastSquares,
        L1L2Regularizer::new(gamma, 1.0)?,
        seed,
        None,
    )?;
    inst.write_bundle(out)?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::parse_case;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.cases = vec![parse_case("gaussian:20x60:3").unwrap()];
        cfg.seeds = 2;
        cfg.settings.psg.max_iter = 300;
        cfg
    }

    #[test]
    fn one_case_one_seed_is_one_row_per_solver() {
        let mut cfg = tiny();
        cfg.seeds = 1;
        let res = run_cs_sweep(&cfg).unwrap();
        assert_eq!(res.runs.len(), 3);
        assert_eq!(res.summary.len(), 3);
        assert_eq!(res.failures(), 0);
        assert!(res.runs.iter().all(|r| (r.solver == SolverKind::Psg) == r.lyapunov_max_violation.is_some()));
    }

    #[test]
    fn csv_is_stable_apart_from_timing() {
        let dir = tempfile::tempdir().unwrap();
        let strip = |p: &Path| -> Vec<String> {
            let mut r = csv::Reader::from_path(p).unwrap();
            let headers = r.headers().unwrap().clone();
            let keep: Vec<usize> = (0..headers.len()).filter(|&i| !headers[i].contains("nondeterministic")).collect();
            r.records()
                .map(|rec| {
                    let rec = rec.unwrap();
                    keep.iter().map(|&i| rec[i].to_string()).collect::<Vec<_>>().join(",")
                })
                .collect()
        };
        let mut outs = Vec::new();
        for k in 0..2 {
            let mut cfg = tiny();
            cfg.threads = Some(1 + k);
            cfg.output = Some(dir.path().join(format!("runs{k}.csv")));
            run_cs_sweep(&cfg).unwrap();
            outs.push(strip(cfg.output.as_ref().unwrap()));
        }
        assert_eq!(outs[0], outs[1]);
        let header = std::fs::read_to_string(dir.path().join("runs0.csv")).unwrap();
        assert!(header.lines().next().unwrap().contains("cpu_seconds_nondeterministic"));
    }

    #[test]
    fn bad_instance_is_recorded_not_fatal() {
        let mut cfg = tiny();
        cfg.cases.push(CaseSpec {
            id: None,
            kind: crate::cs::MatrixKind::Gaussian,
            m: 10,
            d: 5,
            s: 2,
        });
        let res = run_cs_sweep(&cfg).unwrap();
        assert_eq!(res.failures(), 2 * 3);
        assert_eq!(res.runs.len(), 2 * 2 * 3);
    }
}
