//! Random forcing generation, dataset assembly and the on-disk format.
//!
//! A dataset directory holds `meta.json` plus three row-major little-endian
//! f64 blobs: `forcings.bin` (n x P), `solutions.bin` (n x P) and
//! `coefficients.bin` (n x N_modes).

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{self, PicardOptions, ProblemSpec, SolverError};
use crate::spectral::{Discretization, SpectralError};

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const FORCINGS_FILE: &str = "forcings.bin";
pub const SOLUTIONS_FILE: &str = "solutions.bin";
pub const COEFFICIENTS_FILE: &str = "coefficients.bin";

/// Out-of-sample test set size used by the experiments.
pub const DEFAULT_TEST_SIZE: usize = 1000;

const RECONSTRUCTION_TOL: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-10;
/// Ceiling on the weak-form MSE of the ground truth (linear, Burgers).
const ANNIHILATION_TOL: (f64, f64) = (1e-16, 1e-14);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingFamily {
    /// m1 sin(π w1 x) + m2 cos(π w2 x), m ~ N(0,1), w ~ U[0,2]
    LinearTrig,
    /// (3+υ1) sin((1+υ2)πx) + (3+υ3) cos((1+υ4)πx), υ ~ U[0,2]
    BurgersTrig,
}

impl ForcingFamily {
    pub fn default_for(problem: &ProblemSpec) -> Self {
        match problem {
            ProblemSpec::Burgers { .. } => ForcingFamily::BurgersTrig,
            _ => ForcingFamily::LinearTrig,
        }
    }

    pub fn distribution(&self) -> &'static str {
        match self {
            ForcingFamily::LinearTrig => "m1,m2 ~ Normal(0,1); w1,w2 ~ Uniform[0,2]",
            ForcingFamily::BurgersTrig => "v1..v4 ~ Uniform[0,2]",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ForcingParams {
    LinearTrig { m1: f64, m2: f64, w1: f64, w2: f64 },
    BurgersTrig { v: [f64; 4] },
}

impl ForcingParams {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ForcingParams::LinearTrig { m1, m2, w1, w2 } => m1 * (PI * w1 * x).sin() + m2 * (PI * w2 * x).cos(),
            ForcingParams::BurgersTrig { v } => {
                (3.0 + v[0]) * ((1.0 + v[1]) * PI * x).sin() + (3.0 + v[2]) * ((1.0 + v[3]) * PI * x).cos()
            }
        }
    }

    pub fn sample_at(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Draw forcing parameters and sample the forcing on `nodes`.
pub fn sample_forcing<R: Rng + ?Sized>(family: ForcingFamily, rng: &mut R, nodes: &[f64]) -> (ForcingParams, Vec<f64>) {
    let params = match family {
        ForcingFamily::LinearTrig => {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let uniform = Uniform::new_inclusive(0.0, 2.0);
            let m1 = normal.sample(rng);
            let m2 = normal.sample(rng);
            let w1 = uniform.sample(rng);
            let w2 = uniform.sample(rng);
            ForcingParams::LinearTrig { m1, m2, w1, w2 }
        }
        ForcingFamily::BurgersTrig => {
            let uniform = Uniform::new_inclusive(0.0, 2.0);
            let mut v = [0.0; 4];
            for vi in &mut v {
                *vi = uniform.sample(rng);
            }
            ForcingParams::BurgersTrig { v }
        }
    };
    let values = params.sample_at(nodes);
    (params, values)
}

/// Independent generator for one dataset row.
pub fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    /// Population mean and standard deviation over every entry.
    pub fn of(values: &Array2<f64>) -> Self {
        let count = values.len() as f64;
        let mean = values.sum() / count;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        NormStats { mean, std: var.sqrt() }
    }

    pub fn normalize(&self, values: &Array2<f64>) -> Array2<f64> {
        values.mapv(|v| (v - self.mean) / self.std)
    }

    pub fn denormalize(&self, values: &Array2<f64>) -> Array2<f64> {
        values.mapv(|v| v * self.std + self.mean)
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("solver failed on sample {index} ({params:?}): {source}")]
    Solver {
        index: usize,
        params: Option<ForcingParams>,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("size mismatch in {file}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        file: String,
        expected: usize,
        actual: usize,
    },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

impl DataError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            DataError::Solver { .. } => "E_SOLVER",
            DataError::Spectral(_) | DataError::InvalidArgument(_) => "E_ARGUMENT",
            DataError::Io { .. } => "E_IO",
            DataError::MalformedHeader(_) => "E_HEADER",
            DataError::SizeMismatch { .. } => "E_SIZE",
            DataError::InvariantViolation(_) => "E_INVARIANT",
        }
    }
}

/// Paired forcings and Galerkin ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub problem: ProblemSpec,
    pub family: ForcingFamily,
    pub points: usize,
    pub num_modes: usize,
    pub seed: u64,
    /// n x P, normalized when `norm_stats` is present
    pub forcings: Array2<f64>,
    /// n x P
    pub solutions: Array2<f64>,
    /// n x N_modes
    pub coefficients: Array2<f64>,
    pub norm_stats: Option<NormStats>,
    /// Largest solver residual over all rows.
    pub max_solver_residual: f64,
}

/// Everything that determines a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub problem: ProblemSpec,
    pub n: usize,
    pub points: usize,
    pub num_modes: usize,
    pub seed: u64,
    pub normalize: bool,
    pub family: ForcingFamily,
    pub picard: PicardOptions,
}

impl DatasetSpec {
    pub fn new(problem: ProblemSpec, n: usize, points: usize, num_modes: usize, seed: u64, normalize: bool) -> Self {
        DatasetSpec {
            problem,
            n,
            points,
            num_modes,
            seed,
            normalize,
            family: ForcingFamily::default_for(&problem),
            picard: PicardOptions::default(),
        }
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.forcings.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn discretization(&self) -> Result<Discretization, SpectralError> {
        Discretization::new(self.problem.bc(), self.points, self.num_modes)
    }

    /// Forcings in physical units (undoes normalization).
    pub fn physical_forcings(&self) -> Array2<f64> {
        match &self.norm_stats {
            Some(stats) => stats.denormalize(&self.forcings),
            None => self.forcings.clone(),
        }
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.forcings.nrows();
        let shapes = [
            ("forcings", self.forcings.dim(), (n, self.points)),
            ("solutions", self.solutions.dim(), (n, self.points)),
            ("coefficients", self.coefficients.dim(), (n, self.num_modes)),
        ];
        for (name, actual, expected) in shapes {
            if actual != expected {
                return Err(DataError::InvariantViolation(format!(
                    "{name} has shape {actual:?}, expected {expected:?}"
                )));
            }
        }
        let disc = self.discretization()?;
        let recon = self.coefficients.dot(&disc.basis.phi().t());
        for (i, (row, rec)) in self.solutions.rows().into_iter().zip(recon.rows()).enumerate() {
            for (u, r) in row.iter().zip(rec.iter()) {
                if !((u - r).abs() <= RECONSTRUCTION_TOL * u.abs().max(1.0)) {
                    return Err(DataError::InvariantViolation(format!(
                        "row {i}: solution differs from basis reconstruction ({u} vs {r})"
                    )));
                }
            }
        }
        if let Some(stats) = &self.norm_stats {
            if !(stats.std > 0.0 && stats.std.is_finite() && stats.mean.is_finite()) {
                return Err(DataError::InvariantViolation(format!(
                    "normalization std must be positive, got {}",
                    stats.std
                )));
            }
            let stored = NormStats::of(&self.forcings);
            if stored.mean.abs() > NORMALIZATION_TOL || (stored.std - 1.0).abs() > NORMALIZATION_TOL {
                return Err(DataError::InvariantViolation(format!(
                    "normalized forcings have mean {} and std {}",
                    stored.mean, stored.std
                )));
            }
        }
        Ok(())
    }
}

/// Generate `n` samples for `problem` (see [`DatasetSpec::new`] for defaults).
pub fn generate_dataset(
    problem: ProblemSpec,
    n: usize,
    points: usize,
    num_modes: usize,
    seed: u64,
    normalize: bool,
) -> Result<Dataset, DataError> {
    generate(&DatasetSpec::new(problem, n, points, num_modes, seed, normalize))
}

pub fn generate(spec: &DatasetSpec) -> Result<Dataset, DataError> {
    if spec.n == 0 {
        return Err(DataError::InvalidArgument("dataset needs at least one sample".into()));
    }
    spec.problem
        .validate()
        .map_err(|source| DataError::Solver { index: 0, params: None, source })?;
    let disc = Discretization::new(spec.problem.bc(), spec.points, spec.num_modes)?;
    let nodes = disc.rule.nodes();
    let mut params = Vec::with_capacity(spec.n);
    let mut forcings = Array2::zeros((spec.n, spec.points));
    for i in 0..spec.n {
        let (p, values) = sample_forcing(spec.family, &mut row_rng(spec.seed, i), nodes);
        params.push(p);
        for (dst, v) in forcings.row_mut(i).iter_mut().zip(values) {
            *dst = v;
        }
    }
    assemble_dataset(spec, &disc, forcings, Some(&params))
}

/// Solve every row of `forcings` (physical units) and package the result.
pub fn assemble_dataset(
    spec: &DatasetSpec,
    disc: &Discretization,
    forcings: Array2<f64>,
    params: Option<&[ForcingParams]>,
) -> Result<Dataset, DataError> {
    let n = forcings.nrows();
    if forcings.ncols() != disc.num_points() {
        return Err(DataError::InvalidArgument(format!(
            "forcings have {} columns, grid has {} points",
            forcings.ncols(),
            disc.num_points()
        )));
    }
    let solutions: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let f = forcings.row(i).to_vec();
            solver::solve(&spec.problem, &f, &disc.basis, &disc.rule, spec.picard).map_err(|source| {
                DataError::Solver {
                    index: i,
                    params: params.map(|p| p[i]),
                    source,
                }
            })
        })
        .collect();

    let mut u = Array2::zeros((n, disc.num_points()));
    let mut alpha = Array2::zeros((n, disc.num_modes()));
    let mut max_solver_residual: f64 = 0.0;
    for (i, sol) in solutions.into_iter().enumerate() {
        let sol = sol?;
        max_solver_residual = max_solver_residual.max(sol.residual_norm);
        for (dst, v) in u.row_mut(i).iter_mut().zip(&sol.nodal_values) {
            *dst = *v;
        }
        for (dst, v) in alpha.row_mut(i).iter_mut().zip(&sol.coefficients) {
            *dst = *v;
        }
    }

    let (forcings, norm_stats) = if spec.normalize {
        let stats = NormStats::of(&forcings);
        if !(stats.std > 0.0) {
            return Err(DataError::InvalidArgument(
                "cannot normalize forcings with zero variance".into(),
            ));
        }
        (stats.normalize(&forcings), Some(stats))
    } else {
        (forcings, None)
    };

    let ds = Dataset {
        problem: spec.problem,
        family: spec.family,
        points: disc.num_points(),
        num_modes: disc.num_modes(),
        seed: spec.seed,
        forcings,
        solutions: u,
        coefficients: alpha,
        norm_stats,
        max_solver_residual,
    };
    let loss_wf = ground_truth_weak_loss(&ds)?;
    let tol = if spec.problem.is_linear() {
        ANNIHILATION_TOL.0
    } else {
        ANNIHILATION_TOL.1
    };
    if !(loss_wf <= tol) {
        return Err(DataError::InvariantViolation(format!(
            "ground truth leaves weak-form MSE {loss_wf:e} (limit {tol:e})"
        )));
    }
    Ok(ds)
}

/// Weak-form residual MSE of the stored coefficients against the stored
/// forcings, with every basis function as a test function.
pub fn ground_truth_weak_loss(ds: &Dataset) -> Result<f64, DataError> {
    let disc = ds.discretization()?;
    let cfg = crate::train::WeakFormConfig::new(ds.problem, disc, None)
        .map_err(|e| DataError::InvariantViolation(e.to_string()))?;
    let (lhs, rhs) = crate::train::weak_residual(ds.coefficients.view(), ds.physical_forcings().view(), &cfg)
        .map_err(|e| DataError::InvariantViolation(e.to_string()))?;
    let count = lhs.len().max(1) as f64;
    Ok(lhs.iter().zip(rhs.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / count)
}

#[derive(Debug, Serialize, Deserialize)]
struct ForcingMeta {
    family: ForcingFamily,
    distribution: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    format_version: u32,
    problem: ProblemSpec,
    points: usize,
    num_modes: usize,
    n: usize,
    seed: u64,
    forcing: ForcingMeta,
    norm_stats: Option<NormStats>,
    max_solver_residual: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn write_f64_file(path: &Path, values: impl Iterator<Item = f64>) -> Result<(), DataError> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&bytes).map_err(io_err(path))?;
    Ok(())
}

pub(crate) fn read_f64_file(path: &Path, expected_len: usize) -> Result<Vec<f64>, DataError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != expected_len * 8 {
        return Err(DataError::SizeMismatch {
            file: path.display().to_string(),
            expected: expected_len * 8,
            actual: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<(), DataError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let meta = DatasetMeta {
        format_version: FORMAT_VERSION,
        problem: ds.problem,
        points: ds.points,
        num_modes: ds.num_modes,
        n: ds.len(),
        seed: ds.seed,
        forcing: ForcingMeta {
            family: ds.family,
            distribution: ds.family.distribution().to_string(),
        },
        norm_stats: ds.norm_stats,
        max_solver_residual: ds.max_solver_residual,
    };
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string_pretty(&meta).expect("dataset meta serializes");
    fs::write(&meta_path, json + "\n").map_err(io_err(&meta_path))?;
    write_f64_file(&dir.join(FORCINGS_FILE), ds.forcings.iter().copied())?;
    write_f64_file(&dir.join(SOLUTIONS_FILE), ds.solutions.iter().copied())?;
    write_f64_file(&dir.join(COEFFICIENTS_FILE), ds.coefficients.iter().copied())?;
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: DatasetMeta =
        serde_json::from_str(&text).map_err(|e| DataError::MalformedHeader(format!("{}: {e}", meta_path.display())))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(DataError::MalformedHeader(format!(
            "unsupported format_version {}",
            meta.format_version
        )));
    }
    if meta.n == 0 || meta.points < 2 || meta.num_modes == 0 {
        return Err(DataError::MalformedHeader(format!(
            "degenerate sizes n={} points={} num_modes={}",
            meta.n, meta.points, meta.num_modes
        )));
    }
    if let Some(stats) = &meta.norm_stats {
        if !(stats.std > 0.0) {
            return Err(DataError::InvariantViolation(format!(
                "normalization std must be positive, got {}",
                stats.std
            )));
        }
    }
    let grid = |name: &str, cols: usize| -> Result<Array2<f64>, DataError> {
        let values = read_f64_file(&dir.join(name), meta.n * cols)?;
        Ok(Array2::from_shape_vec((meta.n, cols), values).expect("length checked"))
    };
    let ds = Dataset {
        problem: meta.problem,
        family: meta.forcing.family,
        points: meta.points,
        num_modes: meta.num_modes,
        seed: meta.seed,
        forcings: grid(FORCINGS_FILE, meta.points)?,
        solutions: grid(SOLUTIONS_FILE, meta.points)?,
        coefficients: grid(COEFFICIENTS_FILE, meta.num_modes)?,
        norm_stats: meta.norm_stats,
        max_solver_residual: meta.max_solver_residual,
    };
    ds.validate()?;
    Ok(ds)
}
