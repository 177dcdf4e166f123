//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are
//! errors so that typos do not silently fall back to defaults.
//!
//! Compressed-sensing sweep keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `profile` | `desk` | `desk`: cases 1,2,5,6 with 5 seeds; `full`: cases 1-8 with 30 seeds |
//! | `cases` | profile | comma list of case ids 1-8 or custom `gaussian:MxD:S` / `dct:MxD:S` |
//! | `seeds` | profile | instances per case |
//! | `seed_base` | `0` | seed of the first instance |
//! | `loss` | `least-squares` | `least-squares` or `lorentzian` |
//! | `gamma`, `alpha` | `0.1`, `1` | L1 - alpha L2 weights |
//! | `solvers` | `psg,gppa,pdcae` (`psg,gppa` for lorentzian) | any of `psg`, `gppa`, `pdcae` |
//! | `max_iter` | 3000 (4000 for lorentzian) | iteration cap for every solver |
//! | `stop_tol` | `1e-8` | relative-change stopping tolerance |
//! | `psg.lambda_bar`, `psg.mu_bar`, `psg.delta`, `psg.restart` | `0.1`, `0.01`, `5e-25`, `50` | extrapolated solver parameters (`restart = none` disables) |
//! | `psg.mu_schedule` | `kappa` | `kappa` or `max` |
//! | `gppa.tau_scale`, `pdcae.tau_scale` | `0.8`, `1` | step as a multiple of `1 / (ell lambda_max(A*A))` |
//! | `noise_count`, `noise_scale` | none | impulsive noise on `b` |
//! | `threads` | all cores | worker pool size |
//! | `output` | none | per-run CSV path |
//! | `summary` | none | per-(case, solver) CSV path |
//!
//! DC OPF keys: `starts` (30), `seed` (0), `gamma` (network value), `max_iter`
//! (1000), `stop_tol`, `solvers`, the `psg.*` / `*.tau_scale` keys above
//! (`psg.mu_schedule` defaults to `max`), `network` (directory; bundled data
//! when absent), `baseline_cost_usd`, `round_tol` (`1e-6`), `start` (`random` or
//! `witness`, the projected generator-only dispatch), `threads`,
//! `output_dir`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::cs::{CaseSpec, ImpulsiveNoise, MatrixKind};
use crate::error::{Error, Result};
use crate::prox::LossKind;
use crate::problem::{MuSchedule, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Psg,
    Gppa,
    Pdcae,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Psg => "psg",
            SolverKind::Gppa => "gppa",
            SolverKind::Pdcae => "pdcae",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psg" | "proposed" => Ok(SolverKind::Psg),
            "gppa" => Ok(SolverKind::Gppa),
            "pdcae" => Ok(SolverKind::Pdcae),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Full,
}

impl Profile {
    pub fn cases(self) -> Vec<CaseSpec> {
        let ids: &[u8] = match self {
            Profile::Desk => &[1, 2, 5, 6],
            Profile::Full => &[1, 2, 3, 4, 5, 6, 7, 8],
        };
        ids.iter().map(|&i| CaseSpec::standard(i).expect("standard id")).collect()
    }

    pub fn seeds(self) -> usize {
        match self {
            Profile::Desk => 5,
            Profile::Full => 30,
        }
    }
}

/// Parameters shared by the three solvers.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub psg: SolverParams,
    pub gppa_tau_scale: f64,
    pub pdcae_tau_scale: f64,
}

impl SolverSettings {
    fn new(max_iter: usize, mu_schedule: MuSchedule) -> Self {
        Self {
            psg: SolverParams {
                max_iter,
                mu_schedule,
                ..SolverParams::default()
            },
            gppa_tau_scale: 0.8,
            pdcae_tau_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub cases: Vec<CaseSpec>,
    pub seeds: usize,
    pub seed_base: u64,
    pub loss: LossKind,
    pub gamma: f64,
    pub alpha: f64,
    pub solvers: Vec<SolverKind>,
    pub settings: SolverSettings,
    pub noise: Option<ImpulsiveNoise>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk profile with least-squares loss.
    pub fn desk() -> Self {
        Self::with_profile(Profile::Desk, LossKind::LeastSquares)
    }

    pub fn with_profile(profile: Profile, loss: LossKind) -> Self {
        Self {
            cases: profile.cases(),
            seeds: profile.seeds(),
            seed_base: 0,
            loss,
            gamma: 0.1,
            alpha: 1.0,
            solvers: match loss {
                LossKind::LeastSquares => vec![SolverKind::Psg, SolverKind::Gppa, SolverKind::Pdcae],
                LossKind::Lorentzian => vec![SolverKind::Psg, SolverKind::Gppa],
            },
            settings: SolverSettings::new(default_max_iter(loss), MuSchedule::Kappa),
            noise: None,
            threads: None,
            output: None,
            summary: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.cases.is_empty() {
            return Err(Error::Config("no cases selected".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solvers selected".into()));
        }
        if self.loss == LossKind::Lorentzian && self.solvers.contains(&SolverKind::Pdcae) {
            return Err(Error::Config("pdcae needs a convex loss; drop it for lorentzian runs".into()));
        }
        if !(self.gamma > 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::Config(format!(
                "need gamma > 0 and alpha >= 0, got {} and {}",
                self.gamma, self.alpha
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        validate_settings(&self.settings)
    }
}

fn default_max_iter(loss: LossKind) -> usize {
    match loss {
        LossKind::LeastSquares => 3000,
        LossKind::Lorentzian => 4000,
    }
}

fn validate_settings(s: &SolverSettings) -> Result<()> {
    s.psg.validate().map_err(|e| Error::Config(e.to_string()))?;
    if !(s.gppa_tau_scale > 0.0) || !(s.pdcae_tau_scale > 0.0) {
        return Err(Error::Config("tau_scale values must be positive".into()));
    }
    Ok(())
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let profile = match kv.take("profile") {
            None => Profile::Desk,
            Some(v) => match v.as_str() {
                "desk" => Profile::Desk,
                "full" => Profile::Full,
                other => return Err(Error::Config(format!("unknown profile `{other}`"))),
            },
        };
        let loss = kv.parsed("loss")?.unwrap_or(LossKind::LeastSquares);
        let mut cfg = Self::with_profile(profile, loss);
        if let Some(v) = kv.take("cases") {
            cfg.cases = split_list(&v).map(parse_case).collect::<Result<_>>()?;
        }
        set(&mut cfg.seeds, kv.parsed("seeds")?);
        set(&mut cfg.seed_base, kv.parsed("seed_base")?);
        set(&mut cfg.gamma, kv.parsed("gamma")?);
        set(&mut cfg.alpha, kv.parsed("alpha")?);
        if let Some(v) = kv.take("solvers") {
            cfg.solvers = parse_solvers(&v)?;
        }
        read_settings(&mut kv, &mut cfg.settings)?;
        let count: Option<usize> = kv.parsed("noise_count")?;
        let scale: Option<f64> = kv.parsed("noise_scale")?;
        cfg.noise = match (count, scale) {
            (None, None) => None,
            (Some(count), Some(scale)) => Some(ImpulsiveNoise { count, scale }),
            _ => return Err(Error::Config("noise_count and noise_scale go together".into())),
        };
        cfg.threads = kv.parsed("threads")?;
        cfg.output = kv.take("output").map(PathBuf::from);
        cfg.summary = kv.take("summary").map(PathBuf::from);
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct OpfConfig {
    pub starts: usize,
    pub seed: u64,
    /// Overrides the network's relaxation weight.
    pub gamma: Option<f64>,
    pub solvers: Vec<SolverKind>,
    pub settings: SolverSettings,
    /// Directory holding the network CSV files; bundled data when `None`.
    pub network: Option<PathBuf>,
    pub baseline_cost_usd: Option<f64>,
    pub round_tol: f64,
    /// Start every run from the projected generator-only dispatch instead of
    /// a random box point.
    pub witness_start: bool,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Default for OpfConfig {
    fn default() -> Self {
        Self {
            starts: 30,
            seed: 0,
            gamma: None,
            solvers: vec![SolverKind::Psg, SolverKind::Gppa, SolverKind::Pdcae],
            settings: SolverSettings::new(1000, MuSchedule::Max),
            network: None,
            baseline_cost_usd: None,
            round_tol: 1e-6,
            witness_start: false,
            threads: None,
            output_dir: None,
        }
    }
}

impl OpfConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::Config("starts must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solvers selected".into()));
        }
        if !(self.round_tol >= 0.0 && self.round_tol < 0.5) {
            return Err(Error::Config(format!("round_tol must lie in [0, 0.5), got {}", self.round_tol)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        validate_settings(&self.settings)
    }
}

impl FromStr for OpfConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut cfg = OpfConfig::default();
        set(&mut cfg.starts, kv.parsed("starts")?);
        set(&mut cfg.seed, kv.parsed("seed")?);
        cfg.gamma = kv.parsed("gamma")?;
        if let Some(v) = kv.take("solvers") {
            cfg.solvers = parse_solvers(&v)?;
        }
        read_settings(&mut kv, &mut cfg.settings)?;
        cfg.network = kv.take("network").map(PathBuf::from);
        cfg.baseline_cost_usd = kv.parsed("baseline_cost_usd")?;
        set(&mut cfg.round_tol, kv.parsed("round_tol")?);
        if let Some(v) = kv.take("start") {
            cfg.witness_start = match v.as_str() {
                "random" => false,
                "witness" => true,
                other => return Err(Error::Config(format!("start: unknown value `{other}`"))),
            };
        }
        cfg.threads = kv.parsed("threads")?;
        cfg.output_dir = kv.take("output_dir").map(PathBuf::from);
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_settings(kv: &mut KeyValues, s: &mut SolverSettings) -> Result<()> {
    set(&mut s.psg.max_iter, kv.parsed("max_iter")?);
    set(&mut s.psg.stop_rel_tol, kv.parsed("stop_tol")?);
    set(&mut s.psg.lambda_bar, kv.parsed("psg.lambda_bar")?);
    set(&mut s.psg.mu_bar, kv.parsed("psg.mu_bar")?);
    set(&mut s.psg.delta, kv.parsed("psg.delta")?);
    if let Some(v) = kv.take("psg.restart") {
        s.psg.restart_period = match v.as_str() {
            "none" | "off" => None,
            n => Some(n.parse().map_err(|_| Error::Config(format!("psg.restart: bad value `{n}`")))?),
        };
    }
    if let Some(v) = kv.take("psg.mu_schedule") {
        s.psg.mu_schedule = match v.as_str() {
            "kappa" => MuSchedule::Kappa,
            "max" => MuSchedule::Max,
            other => return Err(Error::Config(format!("psg.mu_schedule: unknown value `{other}`"))),
        };
    }
    set(&mut s.gppa_tau_scale, kv.parsed("gppa.tau_scale")?);
    set(&mut s.pdcae_tau_scale, kv.parsed("pdcae.tau_scale")?);
    Ok(())
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_solvers(v: &str) -> Result<Vec<SolverKind>> {
    let mut out: Vec<SolverKind> = Vec::new();
    for s in split_list(v) {
        let k: SolverKind = s.parse()?;
        if out.contains(&k) {
            return Err(Error::Config(format!("solver `{s}` listed twice")));
        }
        out.push(k);
    }
    Ok(out)
}

/// `3` or `gaussian:180x640:20`.
pub fn parse_case(s: &str) -> Result<CaseSpec> {
    if let Ok(id) = s.parse::<u8>() {
        return CaseSpec::standard(id).map_err(|e| Error::Config(e.to_string()));
    }
    let bad = || Error::Config(format!("bad case `{s}`; expected 1-8 or kind:MxD:S"));
    let mut parts = s.split(':');
    let (Some(kind), Some(shape), Some(sparsity), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(bad());
    };
    let kind: MatrixKind = kind.parse().map_err(|_| bad())?;
    let (m, d) = shape.split_once('x').ok_or_else(bad)?;
    let case = CaseSpec {
        id: None,
        kind,
        m: m.parse().map_err(|_| bad())?,
        d: d.parse().map_err(|_| bad())?,
        s: sparsity.parse().map_err(|_| bad())?,
    };
    if case.m == 0 || case.m > case.d || case.s == 0 || case.s > case.d {
        return Err(Error::Config(format!("case `{s}`: need 0 < m <= d and 0 < s <= d")));
    }
    Ok(case)
}

struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
            if k.is_empty() || v.is_empty() {
                return Err(Error::Config(format!("line {}: empty key or value", n + 1)));
            }
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::Config(format!("line {}: key `{k}` repeated", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!("unknown key `{k}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_desk_profile() {
        let cfg: ExperimentConfig = "# nothing\n".parse().unwrap();
        let ids: Vec<_> = cfg.cases.iter().map(|c| c.id.unwrap()).collect();
        assert_eq!(ids, [1, 2, 5, 6]);
        assert_eq!(cfg.seeds, 5);
        assert_eq!(cfg.settings.psg.max_iter, 3000);
    }

    #[test]
    fn parses_overrides_and_custom_cases() {
        let cfg: ExperimentConfig = "profile = full\ncases = 5, dct:20x64:3\nseeds=2\nloss = lorentzian\ngamma = 0.001\nsolvers = psg,gppa\npsg.restart = none\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.cases.len(), 2);
        assert_eq!(cfg.cases[1].kind, MatrixKind::Dct);
        assert_eq!((cfg.cases[1].m, cfg.cases[1].d, cfg.cases[1].s), (20, 64, 3));
        assert_eq!(cfg.settings.psg.max_iter, 4000);
        assert_eq!(cfg.settings.psg.restart_period, None);
        assert_eq!(cfg.gamma, 0.001);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "seedz = 3",
            "seeds = 0",
            "seeds = 1\nseeds = 2",
            "solvers = psg, fista",
            "loss = lorentzian\nsolvers = psg, pdcae",
            "cases = 9",
            "cases = gaussian:64x20:3",
            "noise_count = 3",
            "just words",
        ] {
            assert!(text.parse::<ExperimentConfig>().is_err(), "accepted {text:?}");
        }
    }

    #[test]
    fn opf_defaults() {
        let cfg: OpfConfig = "starts = 4\nbaseline_cost_usd = 2500000\n".parse().unwrap();
        assert_eq!(cfg.starts, 4);
        assert_eq!(cfg.settings.psg.max_iter, 1000);
        assert_eq!(cfg.settings.psg.mu_schedule, MuSchedule::Max);
        assert_eq!(cfg.baseline_cost_usd, Some(2.5e6));
        assert!("starts = 0".parse::<OpfConfig>().is_err());
        assert!("cases = 1".parse::<OpfConfig>().is_err());
    }
}
