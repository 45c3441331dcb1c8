//! Manufactured-solution convergence sweeps for the Galerkin solvers.

use std::f64::consts::PI;

use serde::Serialize;

use crate::solver::{manufactured_forcing, solve, PicardOptions, ProblemSpec, SolverError};
use crate::spectral::{Discretization, SpectralError};

/// Mode counts swept by default.
pub const SWEEP_MODES: [usize; 4] = [8, 16, 32, 48];
/// Points of the uniform grid the error is measured on.
const CHECK_POINTS: usize = 401;

#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub problem: ProblemSpec,
    pub u: fn(f64) -> f64,
    pub du: fn(f64) -> f64,
    pub d2u: fn(f64) -> f64,
    /// Largest acceptable max-norm error once `num_modes >= from_modes`.
    pub tolerance: f64,
    pub from_modes: usize,
}

/// CDE and Burgers on sin(πx), Helmholtz on cos(πx) and on a constant.
pub fn manufactured_cases() -> Vec<ManufacturedCase> {
    vec![
        ManufacturedCase {
            name: "cde",
            problem: ProblemSpec::Cde { epsilon: 1.0 },
            u: |x| (PI * x).sin(),
            du: |x| PI * (PI * x).cos(),
            d2u: |x| -PI * PI * (PI * x).sin(),
            tolerance: 1e-12,
            from_modes: 32,
        },
        ManufacturedCase {
            name: "helmholtz",
            problem: ProblemSpec::Helmholtz { k_u: 3.5 },
            u: |x| (PI * x).cos(),
            du: |x| -PI * (PI * x).sin(),
            d2u: |x| -PI * PI * (PI * x).cos(),
            tolerance: 1e-12,
            from_modes: 32,
        },
        ManufacturedCase {
            name: "helmholtz_constant",
            problem: ProblemSpec::Helmholtz { k_u: 3.5 },
            u: |_| 1.0 / 3.5,
            du: |_| 0.0,
            d2u: |_| 0.0,
            tolerance: 1e-14,
            from_modes: 0,
        },
        ManufacturedCase {
            name: "burgers",
            problem: ProblemSpec::Burgers { epsilon: 0.5 },
            u: |x| (PI * x).sin(),
            du: |x| PI * (PI * x).cos(),
            d2u: |x| -PI * PI * (PI * x).sin(),
            tolerance: 1e-8,
            from_modes: 32,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub case: &'static str,
    pub num_modes: usize,
    pub points: usize,
    pub max_error: f64,
    pub tolerance: Option<f64>,
}

impl ConvergenceRow {
    pub fn passed(&self) -> bool {
        self.tolerance.map_or(true, |t| self.max_error <= t)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{case} with {num_modes} modes: {source}")]
    Solver {
        case: &'static str,
        num_modes: usize,
        #[source]
        source: SolverError,
    },
}

/// Max-norm error of the Galerkin solution on a fine uniform grid, with
/// `points` Gauss-Lobatto nodes.
pub fn manufactured_error(
    case: &ManufacturedCase,
    num_modes: usize,
    points: usize,
    picard: PicardOptions,
) -> Result<f64, VerifyError> {
    let disc = Discretization::new(case.problem.bc(), points, num_modes)?;
    let f = manufactured_forcing(&case.problem, case.u, case.du, case.d2u, &disc.rule);
    let sol = solve(&case.problem, &f, &disc.basis, &disc.rule, picard).map_err(|source| VerifyError::Solver {
        case: case.name,
        num_modes,
        source,
    })?;
    let worst = (0..CHECK_POINTS)
        .map(|i| -1.0 + 2.0 * i as f64 / (CHECK_POINTS - 1) as f64)
        .map(|x| (disc.basis.eval_expansion(&sol.coefficients, x).0 - (case.u)(x)).abs())
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Every case at every mode count in `modes`, on `N + 2` points.
pub fn convergence_sweep(modes: &[usize], picard: PicardOptions) -> Result<Vec<ConvergenceRow>, VerifyError> {
    let mut rows = Vec::new();
    for case in manufactured_cases() {
        for &n in modes {
            let points = n + 2;
            rows.push(ConvergenceRow {
                case: case.name,
                num_modes: n,
                points,
                max_error: manufactured_error(&case, n, points, picard)?,
                tolerance: (n >= case.from_modes).then_some(case.tolerance),
            });
        }
    }
    Ok(rows)
}
