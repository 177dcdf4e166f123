//! Network data for the 14-bus PV placement study.
//!
//! Six CSV files, all loaded by [`load_network`]:
//!
//! | file              | header                                 | content                                  |
//! |-------------------|----------------------------------------|------------------------------------------|
//! | `parameters.csv`  | `key,value,unit`                       | scalar constants; `kW`/`MW` become pu    |
//! | `demand.csv`      | `bus,active_pu,reactive_pu`            | one row per bus                          |
//! | `susceptance.csv` | `bus,1,...,n`                          | dense `b_ij`, diagonal `-sum_j b_ij`     |
//! | `resistance.csv`  | `bus,1,...,n`                          | dense `r_ij`, zero diagonal              |
//! | `reactance.csv`   | `bus,1,...,n`                          | dense reactance, zero diagonal           |
//!
//! `generator_buses` in `parameters.csv` is a `;`-separated list of 1-based bus labels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear_map::{Matrix, Vector};

const SYMMETRY_TOL: f64 = 1e-12;
/// The published diagonal is rounded to three significant digits.
const DIAGONAL_REL_TOL: f64 = 1e-2;

pub const NETWORK_FILES: [&str; 5] = [
    "parameters.csv",
    "demand.csv",
    "susceptance.csv",
    "resistance.csv",
    "reactance.csv",
];

const BUNDLED: [&str; 5] = [
    include_str!("../../data/network/parameters.csv"),
    include_str!("../../data/network/demand.csv"),
    include_str!("../../data/network/susceptance.csv"),
    include_str!("../../data/network/resistance.csv"),
    include_str!("../../data/network/reactance.csv"),
];

/// Quadratic generator cost `a p^2 + b p + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorCost {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GeneratorCost {
    pub fn value(&self, p: f64) -> f64 {
        (self.a * p + self.b) * p + self.c
    }

    pub fn derivative(&self, p: f64) -> f64 {
        2.0 * self.a * p + self.b
    }
}

/// All quantities in per unit except the costs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    /// 0-based indices of generator buses (bus label minus one).
    pub generator_buses: Vec<usize>,
    pub demand: Vector,
    pub demand_reactive: Vector,
    /// Off-diagonal line susceptances; the diagonal is zero.
    pub susceptance: Matrix,
    /// Diagonal of the published susceptance table (`-sum_j b_ij`).
    pub susceptance_diagonal: Vector,
    pub resistance: Matrix,
    pub reactance: Matrix,
    pub base_power_mva: f64,
    pub base_voltage_kv: f64,
    pub cost: GeneratorCost,
    /// Installation cost `C` of one PV system, in cost units.
    pub pv_unit_cost: f64,
    /// Dollars per cost unit.
    pub dollars_per_unit: f64,
    pub pv_active_max: f64,
    pub pv_reactive_max: f64,
    pub gen_active_max: f64,
    pub gen_reactive_max: f64,
    pub line_active_max: f64,
    pub line_reactive_max: f64,
    pub voltage_max: f64,
    pub voltage_min: f64,
    pub current_max: f64,
    pub current_min: f64,
    pub gamma: f64,
}

impl NetworkData {
    /// The 14-bus network shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_strs(BUNDLED).expect("bundled network data is valid")
    }

    pub fn n_buses(&self) -> usize {
        self.demand.len()
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.sum()
    }

    pub fn is_generator(&self, bus: usize) -> bool {
        self.generator_buses.contains(&bus)
    }

    /// Undirected lines `(i, j)`, `i < j`, with nonzero susceptance.
    pub fn lines(&self) -> Vec<(usize, usize)> {
        let n = self.n_buses();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.susceptance[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Contents in [`NETWORK_FILES`] order.
    pub fn from_strs(files: [&str; 5]) -> Result<Self> {
        let params = parse_parameters(files[0])?;
        let base_power_mva = params.number("base_power")?;
        let n = params.number("buses")?;
        if n < 1.0 || n.fract() != 0.0 {
            return Err(load_err(format!("bus count must be a positive integer, got {n}")));
        }
        let n = n as usize;
        let (demand, demand_reactive) = parse_demand(files[1], n)?;
        let full_b = parse_square(files[2], n, "susceptance")?;
        let resistance = parse_square(files[3], n, "resistance")?;
        let reactance = parse_square(files[4], n, "reactance")?;

        let generator_buses = params
            .raw("generator_buses")?
            .split(';')
            .map(|s| {
                let label: usize = s
                    .trim()
                    .parse()
                    .map_err(|_| load_err(format!("bad generator bus `{s}`")))?;
                if label == 0 || label > n {
                    return Err(load_err(format!("missing bus {label} (network has {n} buses)")));
                }
                Ok(label - 1)
            })
            .collect::<Result<Vec<_>>>()?;

        let power = |key: &str| params.power(key, base_power_mva);
        let mut susceptance = full_b.clone();
        susceptance.fill_diagonal(0.0);
        let net = Self {
            generator_buses,
            demand,
            demand_reactive,
            susceptance_diagonal: full_b.diagonal(),
            susceptance,
            resistance,
            reactance,
            base_power_mva,
            base_voltage_kv: params.number("base_voltage")?,
            cost: GeneratorCost {
                a: params.number("gen_cost_a")?,
                b: params.number("gen_cost_b")?,
                c: params.number("gen_cost_c")?,
            },
            pv_unit_cost: params.number("pv_unit_cost")?,
            dollars_per_unit: params.number("dollars_per_unit")?,
            pv_active_max: power("pv_active_capacity")?,
            pv_reactive_max: power("pv_reactive_capacity")?,
            gen_active_max: power("gen_active_capacity")?,
            gen_reactive_max: power("gen_reactive_capacity")?,
            line_active_max: power("line_active_limit")?,
            line_reactive_max: power("line_reactive_limit")?,
            voltage_max: params.number("voltage_max")?,
            voltage_min: params.number("voltage_min")?,
            current_max: params.number("current_max")?,
            current_min: params.number("current_min")?,
            gamma: params.number("relaxation_gamma")?,
        };
        net.validate(&full_b)?;
        Ok(net)
    }

    fn validate(&self, full_b: &Matrix) -> Result<()> {
        for (name, m) in [
            ("susceptance", full_b),
            ("resistance", &self.resistance),
            ("reactance", &self.reactance),
        ] {
            let asym = (m - m.transpose()).amax();
            if asym > SYMMETRY_TOL {
                return Err(load_err(format!("{name} matrix is asymmetric (max |m_ij - m_ji| = {asym:e})")));
            }
        }
        for (name, m) in [("resistance", &self.resistance), ("reactance", &self.reactance)] {
            if m.diagonal().amax() != 0.0 {
                return Err(load_err(format!("{name} matrix must have a zero diagonal")));
            }
        }
        for i in 0..self.n_buses() {
            let row_sum: f64 = self.susceptance.row(i).sum();
            let diag = self.susceptance_diagonal[i];
            if (diag + row_sum).abs() > DIAGONAL_REL_TOL * row_sum.abs().max(f64::MIN_POSITIVE) {
                return Err(load_err(format!(
                    "susceptance diagonal at bus {} is {diag:e}, expected about {:e}",
                    i + 1,
                    -row_sum
                )));
            }
        }
        for (name, d) in [("active", &self.demand), ("reactive", &self.demand_reactive)] {
            if let Some(i) = d.iter().position(|&v| v < 0.0) {
                return Err(load_err(format!("negative {name} demand at bus {}", i + 1)));
            }
        }
        for (name, v) in [
            ("pv_active_capacity", self.pv_active_max),
            ("pv_reactive_capacity", self.pv_reactive_max),
            ("gen_active_capacity", self.gen_active_max),
            ("gen_reactive_capacity", self.gen_reactive_max),
            ("line_active_limit", self.line_active_max),
            ("line_reactive_limit", self.line_reactive_max),
            ("base_power", self.base_power_mva),
        ] {
            if !(v > 0.0) {
                return Err(load_err(format!("{name} must be positive, got {v}")));
            }
        }
        if self.generator_buses.is_empty() {
            return Err(load_err("no generator bus".into()));
        }
        if !(self.total_demand() > 0.0) {
            return Err(load_err("total active demand must be positive".into()));
        }
        Ok(())
    }
}

/// Reads the files listed in [`NETWORK_FILES`] from `dir`.
pub fn load_network(dir: &Path) -> Result<NetworkData> {
    let mut contents = Vec::with_capacity(NETWORK_FILES.len());
    for name in NETWORK_FILES {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| load_err(format!("{}: {e}", path.display())))?;
        contents.push(text);
    }
    NetworkData::from_strs([&contents[0], &contents[1], &contents[2], &contents[3], &contents[4]])
}

fn load_err(msg: String) -> Error {
    Error::NetworkLoad(msg)
}

struct Parameters(BTreeMap<String, (String, String)>);

impl Parameters {
    fn raw(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| load_err(format!("parameters: missing key `{key}`")))
    }

    fn number(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        raw.trim()
            .parse()
            .map_err(|_| load_err(format!("parameters: `{key}` is not a number: `{raw}`")))
    }

    /// Power quantity in pu; `kW` and `MW` are divided by the base power.
    fn power(&self, key: &str, base_mva: f64) -> Result<f64> {
        let value = self.number(key)?;
        let unit = self.0[key].1.trim().to_ascii_lowercase();
        match unit.as_str() {
            "pu" => Ok(value),
            "kw" => Ok(value / (base_mva * 1000.0)),
            "mw" => Ok(value / base_mva),
            other => Err(load_err(format!("parameters: unknown power unit `{other}` for `{key}`"))),
        }
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn parse_parameters(text: &str) -> Result<Parameters> {
    let mut map = BTreeMap::new();
    for rec in reader(text).records() {
        let rec = rec.map_err(|e| load_err(format!("parameters: {e}")))?;
        if rec.len() != 3 {
            return Err(load_err(format!("parameters: expected key,value,unit, got {} fields", rec.len())));
        }
        map.insert(rec[0].to_string(), (rec[1].to_string(), rec[2].to_string()));
    }
    Ok(Parameters(map))
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| load_err(format!("{what}: not a number: `{field}`")))
}

fn parse_bus(field: &str, n: usize, what: &str) -> Result<usize> {
    match field.parse::<usize>() {
        Ok(b) if (1..=n).contains(&b) => Ok(b - 1),
        _ => Err(load_err(format!("{what}: bad bus label `{field}`"))),
    }
}

fn parse_demand(text: &str, n: usize) -> Result<(Vector, Vector)> {
    let mut p = vec![None; n];
    let mut q = vec![0.0; n];
    for rec in reader(text).records() {
        let rec = rec.map_err(|e| load_err(format!("demand: {e}")))?;
        if rec.len() != 3 {
            return Err(load_err(format!("demand: expected 3 fields, got {}", rec.len())));
        }
        let bus = parse_bus(&rec[0], n, "demand")?;
        p[bus] = Some(parse_f64(&rec[1], "demand")?);
        q[bus] = parse_f64(&rec[2], "demand")?;
    }
    let p = p
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| load_err(format!("demand: missing bus {}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    Ok((Vector::from_vec(p), Vector::from_vec(q)))
}

fn parse_square(text: &str, n: usize, what: &str) -> Result<Matrix> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(|e| load_err(format!("{what}: {e}")))?.clone();
    if header.len() != n + 1 {
        return Err(load_err(format!("{what}: expected {} columns, got {}", n + 1, header.len())));
    }
    let mut m = Matrix::zeros(n, n);
    let mut seen = vec![false; n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| load_err(format!("{what}: {e}")))?;
        let i = parse_bus(&rec[0], n, what)?;
        seen[i] = true;
        for j in 0..n {
            m[(i, j)] = parse_f64(&rec[j + 1], what)?;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(load_err(format!("{what}: missing bus {}", i + 1)));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_values() {
        let net = NetworkData::bundled();
        assert_eq!(net.n_buses(), 14);
        assert_eq!(net.generator_buses, vec![10]);
        assert_eq!(net.demand[0], 7.91e-3);
        assert_eq!(net.susceptance[(0, 1)], 998.0);
        assert_eq!(net.susceptance[(1, 0)], net.susceptance[(0, 1)]);
        assert_eq!(net.lines().len(), 13);
        assert!((net.pv_active_max - 0.008).abs() < 1e-15);
        assert!((net.gen_active_max - 0.05).abs() < 1e-15);
        assert!((net.line_active_max - 0.03).abs() < 1e-15);
        assert!((net.total_demand() - 0.03115).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_demand() {
        let demand = BUNDLED[1].replace("1,7.91E-03", "1,-7.91E-03");
        let err = NetworkData::from_strs([BUNDLED[0], &demand, BUNDLED[2], BUNDLED[3], BUNDLED[4]]).unwrap_err();
        assert!(err.to_string().contains("negative active demand at bus 1"), "{err}");
    }

    #[test]
    fn rejects_asymmetry() {
        let b = BUNDLED[2].replace("1,-9.98E+02,9.98E+02", "1,-9.98E+02,9.99E+02");
        let err = NetworkData::from_strs([BUNDLED[0], BUNDLED[1], &b, BUNDLED[3], BUNDLED[4]]).unwrap_err();
        assert!(err.to_string().contains("asymmetric"), "{err}");
    }

    #[test]
    fn rejects_missing_bus() {
        let demand: String = BUNDLED[1].lines().filter(|l| !l.starts_with("14,")).map(|l| format!("{l}\n")).collect();
        let err = NetworkData::from_strs([BUNDLED[0], &demand, BUNDLED[2], BUNDLED[3], BUNDLED[4]]).unwrap_err();
        assert!(err.to_string().contains("missing bus 14"), "{err}");
    }

    #[test]
    fn unit_conversion() {
        let params = BUNDLED[0].replace("pv_active_capacity,800,kW", "pv_active_capacity,0.8,MW");
        let net = NetworkData::from_strs([&params, BUNDLED[1], BUNDLED[2], BUNDLED[3], BUNDLED[4]]).unwrap();
        assert!((net.pv_active_max - 0.008).abs() < 1e-15);
    }
}
