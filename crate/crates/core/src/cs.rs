//! Compressed sensing with `L1 - L2` regularization:
//! `min_x phi(Ax) + gamma (||x||_1 - alpha ||x||)`.
//!
//! Instances are generated from a ChaCha8 stream seeded per instance
//! (`ChaCha8Rng::seed_from_u64`), so the same seed always yields the same
//! matrix, ground truth and measurements.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Cholesky;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_map::{LinearMap, Matrix, Vector};
use crate::problem::ProblemSpec;
use crate::prox::{L1L2Regularizer, Loss, LossKind};

/// Ground-truth stream is decorrelated from the matrix stream by this offset.
const TRUTH_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;
const NOISE_SEED_OFFSET: u64 = 0xd1b5_4a32_d192_ed03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Gaussian,
    Dct,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::Dct => "dct",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(MatrixKind::Gaussian),
            "dct" => Ok(MatrixKind::Dct),
            other => Err(Error::InvalidArgument(format!("unknown matrix kind `{other}`"))),
        }
    }
}

/// Matrix shape and sparsity of one test case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSpec {
    /// Row of the standard case table, or `None` for custom shapes.
    pub id: Option<u8>,
    pub kind: MatrixKind,
    pub m: usize,
    pub d: usize,
    pub s: usize,
}

/// The eight standard cases: Gaussian 1-4, DCT 5-8.
pub const STANDARD_CASES: [CaseSpec; 8] = [
    case(1, MatrixKind::Gaussian, 180, 640, 20),
    case(2, MatrixKind::Gaussian, 360, 1280, 40),
    case(3, MatrixKind::Gaussian, 720, 2560, 80),
    case(4, MatrixKind::Gaussian, 2880, 10240, 320),
    case(5, MatrixKind::Dct, 180, 640, 20),
    case(6, MatrixKind::Dct, 360, 1280, 40),
    case(7, MatrixKind::Dct, 720, 2560, 80),
    case(8, MatrixKind::Dct, 2880, 10240, 320),
];

const fn case(id: u8, kind: MatrixKind, m: usize, d: usize, s: usize) -> CaseSpec {
    CaseSpec {
        id: Some(id),
        kind,
        m,
        d,
        s,
    }
}

impl CaseSpec {
    pub fn standard(id: u8) -> Result<Self> {
        STANDARD_CASES
            .iter()
            .copied()
            .find(|c| c.id == Some(id))
            .ok_or_else(|| Error::InvalidArgument(format!("no standard case {id} (expected 1-8)")))
    }

    pub fn label(&self) -> String {
        match self.id {
            Some(id) => id.to_string(),
            None => format!("{}-{}x{}-s{}", self.kind.name(), self.m, self.d, self.s),
        }
    }
}

/// Sparse impulsive noise added to `b`: `count` entries get `N(0, scale^2)` spikes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpulsiveNoise {
    pub count: usize,
    pub scale: f64,
}

fn check_shape(m: usize, d: usize) -> Result<()> {
    if m == 0 || d == 0 || m > d {
        return Err(Error::InvalidArgument(format!("need 0 < m <= d, got m = {m}, d = {d}")));
    }
    Ok(())
}

/// I.i.d. standard normal `m x d` matrix with full row rank.
///
/// A rank-deficient draw (probability zero in exact arithmetic) is replaced by
/// the next seed.
pub fn gen_gaussian(m: usize, d: usize, seed: u64) -> Result<Matrix> {
    check_shape(m, d)?;
    for attempt in 0..16u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        // Row-major fill so the stream order does not depend on storage layout.
        let data: Vec<f64> = (0..m * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = Matrix::from_row_slice(m, d, &data);
        if has_full_row_rank(&a) {
            return Ok(a);
        }
    }
    Err(Error::InvalidArgument(format!("could not draw a full-row-rank {m}x{d} matrix")))
}

/// Full row rank via a well-conditioned Cholesky factor of `A A^T`.
pub fn has_full_row_rank(a: &Matrix) -> bool {
    let gram = a * a.transpose();
    let scale = gram.diagonal().max();
    match Cholesky::new(gram) {
        Some(chol) => {
            let l = chol.l_dirty();
            (0..a.nrows()).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * scale)
        }
        None => false,
    }
}

/// Orthonormal DCT-II matrix of order `n`: `C[k, j] = c_k cos(pi (2j + 1) k / 2n)`.
pub fn dct_matrix(n: usize) -> Matrix {
    let n_f = n as f64;
    Matrix::from_fn(n, n, |k, j| {
        let ck = if k == 0 { (1.0 / n_f).sqrt() } else { (2.0 / n_f).sqrt() };
        ck * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * n_f)).cos()
    })
}

/// `m` distinct rows of the `d x d` orthonormal DCT-II matrix, chosen uniformly
/// without replacement and kept in increasing order.
pub fn gen_dct(m: usize, d: usize, seed: u64) -> Result<Matrix> {
    check_shape(m, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, d, m).into_vec();
    rows.sort_unstable();
    let n_f = d as f64;
    Ok(Matrix::from_fn(m, d, |r, j| {
        let k = rows[r];
        let ck = if k == 0 { (1.0 / n_f).sqrt() } else { (2.0 / n_f).sqrt() };
        ck * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * n_f)).cos()
    }))
}

/// `s`-sparse vector with uniform support and standard normal entries.
pub fn gen_ground_truth(d: usize, s: usize, seed: u64) -> Result<Vector> {
    if s == 0 || s > d {
        return Err(Error::InvalidArgument(format!("sparsity must be in 1..={d}, got {s}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = index::sample(&mut rng, d, s).into_vec();
    let mut x = Vector::zeros(d);
    for i in support {
        let mut v: f64 = StandardNormal.sample(&mut rng);
        // Keep exactly s nonzeros.
        while v == 0.0 {
            v = StandardNormal.sample(&mut rng);
        }
        x[i] = v;
    }
    Ok(x)
}

/// `||x - x_g|| / ||x_g||`.
pub fn ground_truth_error(x: &Vector, truth: &Vector) -> Result<f64> {
    let n = truth.norm();
    if n == 0.0 {
        return Err(Error::InvalidArgument("ground truth is zero".into()));
    }
    crate::error::check_dim(truth.len(), x.len())?;
    Ok((x - truth).norm() / n)
}

#[derive(Debug, Clone)]
pub struct CsInstance {
    pub case: CaseSpec,
    pub matrix: Matrix,
    pub b: Vector,
    pub truth: Vector,
    pub regularizer: L1L2Regularizer,
    pub loss: LossKind,
    pub seed: u64,
}

impl CsInstance {
    /// Noiseless measurements `b = A x_g`, unless `noise` is given.
    pub fn generate(
        case: CaseSpec,
        loss: LossKind,
        regularizer: L1L2Regularizer,
        seed: u64,
        noise: Option<ImpulsiveNoise>,
    ) -> Result<Self> {
        let matrix = match case.kind {
            MatrixKind::Gaussian => gen_gaussian(case.m, case.d, seed)?,
            MatrixKind::Dct => gen_dct(case.m, case.d, seed)?,
        };
        let truth = gen_ground_truth(case.d, case.s, seed ^ TRUTH_SEED_OFFSET)?;
        let mut b = &matrix * &truth;
        if let Some(noise) = noise {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_SEED_OFFSET);
            let idx = index::sample(&mut rng, case.m, noise.count.min(case.m)).into_vec();
            for i in idx {
                let spike: f64 = StandardNormal.sample(&mut rng);
                b[i] += noise.scale * spike * if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
        }
        Ok(Self {
            case,
            matrix,
            b,
            truth,
            regularizer,
            loss,
            seed,
        })
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn error(&self, x: &Vector) -> Result<f64> {
        ground_truth_error(x, &self.truth)
    }

    /// Writes `matrix.csv`, `b.csv`, `truth.csv` and `meta.csv` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(dir.join("matrix.csv"))?;
        for i in 0..self.m() {
            w.write_record(self.matrix.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        write_column(&dir.join("b.csv"), &self.b)?;
        write_column(&dir.join("truth.csv"), &self.truth)?;
        let mut w = csv::Writer::from_path(dir.join("meta.csv"))?;
        w.write_record(["key", "value"])?;
        for (k, v) in self.metadata() {
            w.write_record([k, v])?;
        }
        w.flush()?;
        Ok(())
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        let mut meta = BTreeMap::new();
        meta.insert("case".into(), self.case.label());
        meta.insert("matrix".into(), self.case.kind.name().into());
        meta.insert("m".into(), self.case.m.to_string());
        meta.insert("d".into(), self.case.d.to_string());
        meta.insert("s".into(), self.case.s.to_string());
        meta.insert("gamma".into(), self.regularizer.gamma.to_string());
        meta.insert("alpha".into(), self.regularizer.alpha.to_string());
        meta.insert("loss".into(), self.loss.name().into());
        meta.insert("seed".into(), self.seed.to_string());
        meta
    }

    pub fn read_bundle(dir: &Path) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut r = csv::Reader::from_path(dir.join("meta.csv"))?;
        for rec in r.records() {
            let rec = rec?;
            meta.insert(rec[0].to_string(), rec[1].to_string());
        }
        let get = |k: &str| -> Result<&String> {
            meta.get(k).ok_or_else(|| Error::InvalidArgument(format!("bundle metadata lacks `{k}`")))
        };
        let parse_usize = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::InvalidArgument(format!("bad `{k}` in bundle")))
        };
        let parse_f64 = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| Error::InvalidArgument(format!("bad `{k}` in bundle")))
        };
        let kind: MatrixKind = get("matrix")?.parse()?;
        let (m, d, s) = (parse_usize("m")?, parse_usize("d")?, parse_usize("s")?);
        let id = get("case")?.parse::<u8>().ok();

        let mut data = Vec::with_capacity(m * d);
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(dir.join("matrix.csv"))?;
        for rec in r.records() {
            for field in rec?.iter() {
                data.push(parse_number(field)?);
            }
        }
        if data.len() != m * d {
            return Err(Error::DimensionMismatch {
                expected: m * d,
                actual: data.len(),
            });
        }
        Ok(Self {
            case: CaseSpec { id, kind, m, d, s },
            matrix: Matrix::from_row_slice(m, d, &data),
            b: read_column(&dir.join("b.csv"))?,
            truth: read_column(&dir.join("truth.csv"))?,
            regularizer: L1L2Regularizer::new(parse_f64("gamma")?, parse_f64("alpha")?)?,
            loss: get("loss")?.parse()?,
            seed: get("seed")?.parse().map_err(|_| Error::InvalidArgument("bad `seed` in bundle".into()))?,
        })
    }
}

fn parse_number(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("not a number: `{field}`")))
}

fn write_column(path: &Path, v: &Vector) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for x in v.iter() {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_column(path: &Path) -> Result<Vector> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        out.push(parse_number(&rec?[0])?);
    }
    Ok(Vector::from_vec(out))
}

/// `f = gamma ||.||_1`, `h = phi`, `g = gamma alpha ||.||`, `C = R^d`, `beta = 0`.
pub fn build_cs_problem(inst: &CsInstance) -> Result<ProblemSpec> {
    let loss = Loss::new(inst.loss, inst.b.clone());
    ProblemSpec::new(
        Arc::new(inst.regularizer.l1_part()),
        Arc::new(loss),
        Arc::new(inst.regularizer.norm_part()),
        LinearMap::dense(inst.matrix.clone()),
        inst.loss.lipschitz(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_reproducible() {
        let a = gen_gaussian(2, 4, 7).unwrap();
        let b = gen_gaussian(2, 4, 7).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a, gen_gaussian(2, 4, 8).unwrap());
        assert!(gen_gaussian(5, 4, 1).is_err());
    }

    #[test]
    fn dct_square_is_orthonormal() {
        let c = gen_dct(16, 16, 3).unwrap();
        let err = (c.transpose() * &c - Matrix::identity(16, 16)).amax();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn dct_rows_orthonormal() {
        let a = gen_dct(20, 64, 11).unwrap();
        let err = (&a * a.transpose() - Matrix::identity(20, 20)).amax();
        assert!(err < 1e-12, "{err}");
        assert!(gen_dct(65, 64, 1).is_err());
    }

    #[test]
    fn ground_truth_sparsity() {
        let dense = gen_ground_truth(50, 50, 1).unwrap();
        assert_eq!(dense.iter().filter(|v| **v != 0.0).count(), 50);
        let one = gen_ground_truth(50, 1, 2).unwrap();
        assert_eq!(one.iter().filter(|v| **v != 0.0).count(), 1);
        let x = gen_ground_truth(640, 20, 3).unwrap();
        assert_eq!(x.iter().filter(|v| **v != 0.0).count(), 20);
        assert!(gen_ground_truth(10, 0, 1).is_err());
        assert!(gen_ground_truth(10, 11, 1).is_err());
    }

    #[test]
    fn error_metric() {
        let g = Vector::from_vec(vec![1.0, -2.0, 0.0]);
        assert_eq!(ground_truth_error(&g, &g).unwrap(), 0.0);
        assert_eq!(ground_truth_error(&Vector::zeros(3), &g).unwrap(), 1.0);
        assert!((ground_truth_error(&(&g * 2.0), &g).unwrap() - 1.0).abs() < 1e-15);
        assert!(ground_truth_error(&g, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn standard_cases_lookup() {
        let c = CaseSpec::standard(1).unwrap();
        assert_eq!((c.m, c.d, c.s), (180, 640, 20));
        assert_eq!(CaseSpec::standard(5).unwrap().kind, MatrixKind::Dct);
        assert!(CaseSpec::standard(9).is_err());
    }

    #[test]
    fn noiseless_measurements() {
        let case = CaseSpec {
            id: None,
            kind: MatrixKind::Gaussian,
            m: 20,
            d: 60,
            s: 4,
        };
        let reg = L1L2Regularizer::new(0.1, 1.0).unwrap();
        let inst = CsInstance::generate(case, LossKind::LeastSquares, reg, 5, None).unwrap();
        assert!((&inst.matrix * &inst.truth - &inst.b).amax() < 1e-12);
        let noisy = CsInstance::generate(
            case,
            LossKind::Lorentzian,
            reg,
            5,
            Some(ImpulsiveNoise { count: 3, scale: 10.0 }),
        )
        .unwrap();
        let changed = (&noisy.b - &inst.b).iter().filter(|v| **v != 0.0).count();
        assert_eq!(changed, 3);
    }
}
