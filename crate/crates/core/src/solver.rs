//! Legendre-Galerkin solves for the three model problems on [-1, 1]:
//!
//! * convection-diffusion `-ε u'' - u' = f`, `u(±1) = 0`
//! * Helmholtz `u'' + k_u u = f`, `u'(±1) = 0`
//! * steady Burgers `-ε u'' + u u' = f`, `u(±1) = 0` (Picard iteration)
//!
//! All Galerkin matrices are assembled by quadrature over the collocation
//! grid and solved with dense LU.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{BcKind, ModalBasis, QuadratureRule};

/// Systems with a 1-norm condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e14;

pub const DEFAULT_PICARD_TOL: f64 = 1e-9;
pub const DEFAULT_PICARD_MAX_ITER: usize = 500;
/// Consecutive growing Picard increments tolerated before aborting.
pub const DIVERGENCE_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Cde { epsilon: f64 },
    Helmholtz { k_u: f64 },
    Burgers { epsilon: f64 },
}

impl ProblemSpec {
    pub fn bc(&self) -> BcKind {
        match self {
            ProblemSpec::Cde { .. } | ProblemSpec::Burgers { .. } => BcKind::Dirichlet,
            ProblemSpec::Helmholtz { .. } => BcKind::Neumann,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Cde { .. } => "cde",
            ProblemSpec::Helmholtz { .. } => "helmholtz",
            ProblemSpec::Burgers { .. } => "burgers",
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, ProblemSpec::Burgers { .. })
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        match *self {
            ProblemSpec::Cde { epsilon } | ProblemSpec::Burgers { epsilon } => {
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(SolverError::InvalidProblem(format!(
                        "epsilon must be positive, got {epsilon}"
                    )));
                }
            }
            ProblemSpec::Helmholtz { k_u } => {
                if !k_u.is_finite() {
                    return Err(SolverError::InvalidProblem(format!("k_u must be finite, got {k_u}")));
                }
                if k_u >= 0.0 {
                    // Neumann eigenvalues of -d²/dx² on [-1, 1] are (nπ/2)²
                    let n = (2.0 * k_u.sqrt() / PI).round();
                    let eig = (n * PI / 2.0).powi(2);
                    if (k_u - eig).abs() <= 1e-14 * eig.max(1.0) {
                        return Err(SolverError::InvalidProblem(format!(
                            "k_u = {k_u} coincides with Neumann eigenvalue ({n}π/2)²"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Galerkin solution: modal coefficients plus nodal values on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    pub coefficients: Vec<f64>,
    pub nodal_values: Vec<f64>,
    /// Linear problems: ‖Aα - b‖∞. Burgers: max weak-form residual of the
    /// full nonlinear form at the final iterate.
    pub residual_norm: f64,
    /// Picard increments ‖u^(n) - u^(n-1)‖∞, one per iteration (empty for
    /// linear problems).
    pub increments: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("{problem} needs a {expected:?} basis, got {actual:?}")]
    WrongBasis {
        problem: &'static str,
        expected: BcKind,
        actual: BcKind,
    },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("Galerkin system is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("Picard iteration did not converge in {iterations} iterations (last increment {last_increment:e})")]
    NoConvergence { iterations: usize, last_increment: f64 },
    #[error("Picard iteration diverging after {iterations} iterations (last increment {last_increment:e})")]
    Diverged { iterations: usize, last_increment: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: DEFAULT_PICARD_TOL,
            max_iter: DEFAULT_PICARD_MAX_ITER,
        }
    }
}

/// Quadrature-assembled Galerkin operators, rows indexed by test function.
struct Operators {
    /// ∫ φ'_k φ'_j
    stiffness: DMatrix<f64>,
    /// ∫ φ'_k φ_j
    convection: DMatrix<f64>,
    /// ∫ φ_k φ_j
    mass: DMatrix<f64>,
}

fn weighted_gram(rule: &QuadratureRule, test: &Array2<f64>, trial: &Array2<f64>) -> DMatrix<f64> {
    let n = test.ncols();
    let w = rule.weights();
    DMatrix::from_fn(n, n, |j, k| {
        let mut s = 0.0;
        for (i, wi) in w.iter().enumerate() {
            s += wi * test[[i, j]] * trial[[i, k]];
        }
        s
    })
}

impl Operators {
    fn assemble(basis: &ModalBasis, rule: &QuadratureRule, with_mass: bool, with_convection: bool) -> Self {
        let stiffness = weighted_gram(rule, basis.dphi(), basis.dphi());
        let convection = if with_convection {
            weighted_gram(rule, basis.phi(), basis.dphi())
        } else {
            DMatrix::zeros(0, 0)
        };
        let mass = if with_mass {
            weighted_gram(rule, basis.phi(), basis.phi())
        } else {
            DMatrix::zeros(0, 0)
        };
        Operators {
            stiffness,
            convection,
            mass,
        }
    }
}

/// ∫ f φ_j for every basis function.
fn load_vector(f_nodal: &[f64], basis: &ModalBasis, rule: &QuadratureRule) -> DVector<f64> {
    let w = rule.weights();
    let phi = basis.phi();
    DVector::from_fn(basis.num_modes(), |j, _| {
        let mut s = 0.0;
        for (i, wi) in w.iter().enumerate() {
            s += wi * f_nodal[i] * phi[[i, j]];
        }
        s
    })
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense LU solve with partial pivoting; returns the solution and ‖Ax - b‖∞.
fn lu_solve(a: DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64), SolverError> {
    let a_norm = norm1(&a);
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or(SolverError::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let condition = a_norm * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(SolverError::IllConditioned { condition });
    }
    let x = lu.solve(rhs).ok_or(SolverError::IllConditioned { condition })?;
    let residual = (&a * &x - rhs).amax();
    Ok((x, residual))
}

fn check_inputs(
    problem: &ProblemSpec,
    f_nodal: &[f64],
    basis: &ModalBasis,
    rule: &QuadratureRule,
) -> Result<(), SolverError> {
    problem.validate()?;
    if basis.bc() != problem.bc() {
        return Err(SolverError::WrongBasis {
            problem: problem.name(),
            expected: problem.bc(),
            actual: basis.bc(),
        });
    }
    if f_nodal.len() != rule.num_points() {
        return Err(SolverError::LengthMismatch {
            expected: rule.num_points(),
            actual: f_nodal.len(),
        });
    }
    if basis.num_points() != rule.num_points() {
        return Err(SolverError::LengthMismatch {
            expected: rule.num_points(),
            actual: basis.num_points(),
        });
    }
    Ok(())
}

fn finish(coefficients: DVector<f64>, basis: &ModalBasis, residual_norm: f64, increments: Vec<f64>) -> SpectralSolution {
    let coefficients: Vec<f64> = coefficients.iter().copied().collect();
    let nodal_values = phi_times(basis, &coefficients);
    SpectralSolution {
        coefficients,
        nodal_values,
        residual_norm,
        increments,
    }
}

fn phi_times(basis: &ModalBasis, coefficients: &[f64]) -> Vec<f64> {
    basis
        .phi()
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(coefficients).map(|(p, c)| p * c).sum())
        .collect()
}

/// Convection-diffusion: ε∫u'φ'_j - ∫u'φ_j = ∫fφ_j.
pub fn solve_cde(
    problem: &ProblemSpec,
    f_nodal: &[f64],
    basis: &ModalBasis,
    rule: &QuadratureRule,
) -> Result<SpectralSolution, SolverError> {
    let ProblemSpec::Cde { epsilon } = *problem else {
        return Err(SolverError::InvalidProblem(format!(
            "solve_cde called with a {} problem",
            problem.name()
        )));
    };
    check_inputs(problem, f_nodal, basis, rule)?;
    let ops = Operators::assemble(basis, rule, false, true);
    let a = ops.stiffness * epsilon - ops.convection;
    let rhs = load_vector(f_nodal, basis, rule);
    let (x, residual) = lu_solve(a, &rhs)?;
    Ok(finish(x, basis, residual, Vec::new()))
}

/// Helmholtz with Neumann data: -∫u'φ'_j + k_u∫uφ_j = ∫fφ_j.
pub fn solve_helmholtz(
    problem: &ProblemSpec,
    f_nodal: &[f64],
    basis: &ModalBasis,
    rule: &QuadratureRule,
) -> Result<SpectralSolution, SolverError> {
    let ProblemSpec::Helmholtz { k_u } = *problem else {
        return Err(SolverError::InvalidProblem(format!(
            "solve_helmholtz called with a {} problem",
            problem.name()
        )));
    };
    check_inputs(problem, f_nodal, basis, rule)?;
    let ops = Operators::assemble(basis, rule, true, false);
    let a = ops.mass * k_u - ops.stiffness;
    let rhs = load_vector(f_nodal, basis, rule);
    let (x, residual) = lu_solve(a, &rhs)?;
    Ok(finish(x, basis, residual, Vec::new()))
}

/// Steady Burgers by Picard iteration.
///
/// Each step solves the linear system
/// `ε∫u⁽ⁿ⁾'φ'_j - ½∫u⁽ⁿ⁻¹⁾u⁽ⁿ⁾φ'_j = ∫fφ_j` starting from u⁽⁰⁾ = 0, and stops
/// once the nodal max-norm increment falls to `opts.tol`.
pub fn solve_burgers(
    problem: &ProblemSpec,
    f_nodal: &[f64],
    basis: &ModalBasis,
    rule: &QuadratureRule,
    opts: PicardOptions,
) -> Result<SpectralSolution, SolverError> {
    let ProblemSpec::Burgers { epsilon } = *problem else {
        return Err(SolverError::InvalidProblem(format!(
            "solve_burgers called with a {} problem",
            problem.name()
        )));
    };
    check_inputs(problem, f_nodal, basis, rule)?;
    let n = basis.num_modes();
    let p = rule.num_points();
    let w = rule.weights();
    let phi = basis.phi();
    let dphi = basis.dphi();

    let diffusion = Operators::assemble(basis, rule, false, false).stiffness * epsilon;
    let rhs = load_vector(f_nodal, basis, rule);

    let mut u_prev = vec![0.0; p];
    let mut increments: Vec<f64> = Vec::new();
    let mut growing = 0usize;
    for iter in 1..=opts.max_iter {
        // ½∫u_prev φ_k φ'_j
        let nonlinear = DMatrix::from_fn(n, n, |j, k| {
            let mut s = 0.0;
            for i in 0..p {
                s += w[i] * u_prev[i] * phi[[i, k]] * dphi[[i, j]];
            }
            0.5 * s
        });
        let (x, _) = lu_solve(&diffusion - nonlinear, &rhs)?;
        let coefficients: Vec<f64> = x.iter().copied().collect();
        let u = phi_times(basis, &coefficients);
        let inc = u
            .iter()
            .zip(&u_prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if let Some(&last) = increments.last() {
            if inc > last {
                growing += 1;
            } else {
                growing = 0;
            }
        }
        increments.push(inc);
        if !inc.is_finite() || growing >= DIVERGENCE_WINDOW {
            return Err(SolverError::Diverged {
                iterations: iter,
                last_increment: inc,
            });
        }
        if inc <= opts.tol {
            let residual = burgers_weak_residual(epsilon, &coefficients, f_nodal, basis, rule);
            return Ok(SpectralSolution {
                coefficients,
                nodal_values: u,
                residual_norm: residual,
                increments,
            });
        }
        u_prev = u;
    }
    Err(SolverError::NoConvergence {
        iterations: opts.max_iter,
        last_increment: increments.last().copied().unwrap_or(f64::NAN),
    })
}

/// max_j |ε∫u'φ'_j - ½∫u²φ'_j - ∫fφ_j|
fn burgers_weak_residual(
    epsilon: f64,
    coefficients: &[f64],
    f_nodal: &[f64],
    basis: &ModalBasis,
    rule: &QuadratureRule,
) -> f64 {
    let u = phi_times(basis, coefficients);
    let ux: Vec<f64> = basis
        .dphi()
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(coefficients).map(|(p, c)| p * c).sum())
        .collect();
    let w = rule.weights();
    let (phi, dphi) = (basis.phi(), basis.dphi());
    (0..basis.num_modes())
        .map(|j| {
            let mut s = 0.0;
            for i in 0..rule.num_points() {
                s += w[i] * ((epsilon * ux[i] - 0.5 * u[i] * u[i]) * dphi[[i, j]] - f_nodal[i] * phi[[i, j]]);
            }
            s.abs()
        })
        .fold(0.0, f64::max)
}

/// Dispatch to the solver matching `problem`.
pub fn solve(
    problem: &ProblemSpec,
    f_nodal: &[f64],
    basis: &ModalBasis,
    rule: &QuadratureRule,
    picard: PicardOptions,
) -> Result<SpectralSolution, SolverError> {
    match problem {
        ProblemSpec::Cde { .. } => solve_cde(problem, f_nodal, basis, rule),
        ProblemSpec::Helmholtz { .. } => solve_helmholtz(problem, f_nodal, basis, rule),
        ProblemSpec::Burgers { .. } => solve_burgers(problem, f_nodal, basis, rule, picard),
    }
}

/// Nodal values Σ α_k φ_k(x_i).
pub fn reconstruct(coefficients: &[f64], basis: &ModalBasis) -> Result<Vec<f64>, SolverError> {
    if coefficients.len() != basis.num_modes() {
        return Err(SolverError::LengthMismatch {
            expected: basis.num_modes(),
            actual: coefficients.len(),
        });
    }
    Ok(phi_times(basis, coefficients))
}

/// Forcing that makes `u` an exact strong-form solution of `problem`,
/// sampled at the rule's nodes.
pub fn manufactured_forcing(
    problem: &ProblemSpec,
    u: impl Fn(f64) -> f64,
    du: impl Fn(f64) -> f64,
    d2u: impl Fn(f64) -> f64,
    rule: &QuadratureRule,
) -> Vec<f64> {
    rule.nodes()
        .iter()
        .map(|&x| match *problem {
            ProblemSpec::Cde { epsilon } => -epsilon * d2u(x) - du(x),
            ProblemSpec::Helmholtz { k_u } => d2u(x) + k_u * u(x),
            ProblemSpec::Burgers { epsilon } => -epsilon * d2u(x) + u(x) * du(x),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{gauss_lobatto, Discretization};

    fn max_err(sol: &SpectralSolution, rule: &QuadratureRule, exact: impl Fn(f64) -> f64) -> f64 {
        sol.nodal_values
            .iter()
            .zip(rule.nodes())
            .map(|(u, &x)| (u - exact(x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn cde_zero_forcing_gives_zero() {
        let d = Discretization::new(BcKind::Dirichlet, 16, 14).unwrap();
        let p = ProblemSpec::Cde { epsilon: 0.1 };
        let sol = solve_cde(&p, &[0.0; 16], &d.basis, &d.rule).unwrap();
        assert!(sol.coefficients.iter().all(|&c| c == 0.0));
        assert!(sol.nodal_values.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn cde_manufactured_sine() {
        let d = Discretization::new(BcKind::Dirichlet, 64, 30).unwrap();
        let p = ProblemSpec::Cde { epsilon: 1.0 };
        let f = manufactured_forcing(
            &p,
            |x| (PI * x).sin(),
            |x| PI * (PI * x).cos(),
            |x| -PI * PI * (PI * x).sin(),
            &d.rule,
        );
        for (fi, &x) in f.iter().zip(d.rule.nodes()) {
            let expect = PI * PI * (PI * x).sin() - PI * (PI * x).cos();
            assert!((fi - expect).abs() < 1e-13);
        }
        let sol = solve_cde(&p, &f, &d.basis, &d.rule).unwrap();
        assert!(max_err(&sol, &d.rule, |x| (PI * x).sin()) <= 1e-10);
        let rhs_norm = load_vector(&f, &d.basis, &d.rule).amax();
        assert!(sol.residual_norm <= 1e-12 * rhs_norm);
    }

    #[test]
    fn helmholtz_constant_forcing() {
        let d = Discretization::new(BcKind::Neumann, 20, 18).unwrap();
        let p = ProblemSpec::Helmholtz { k_u: 3.5 };
        let sol = solve_helmholtz(&p, &[2.0; 20], &d.basis, &d.rule).unwrap();
        for u in &sol.nodal_values {
            assert!((u - 2.0 / 3.5).abs() < 1e-14);
        }
        let zero = solve_helmholtz(&p, &[0.0; 20], &d.basis, &d.rule).unwrap();
        assert!(zero.nodal_values.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn helmholtz_manufactured_cosine() {
        let d = Discretization::new(BcKind::Neumann, 64, 30).unwrap();
        let p = ProblemSpec::Helmholtz { k_u: 3.5 };
        let f: Vec<f64> = d
            .rule
            .nodes()
            .iter()
            .map(|&x| (3.5 - PI * PI) * (PI * x).cos())
            .collect();
        let sol = solve_helmholtz(&p, &f, &d.basis, &d.rule).unwrap();
        assert!(max_err(&sol, &d.rule, |x| (PI * x).cos()) <= 1e-10);
    }

    #[test]
    fn helmholtz_rejects_eigenvalues() {
        for n in 0..5 {
            let k_u = (n as f64 * PI / 2.0).powi(2);
            let p = ProblemSpec::Helmholtz { k_u };
            assert!(matches!(p.validate(), Err(SolverError::InvalidProblem(_))), "n={n}");
        }
        assert!(ProblemSpec::Helmholtz { k_u: 3.5 }.validate().is_ok());
        assert!(ProblemSpec::Helmholtz { k_u: -1.0 }.validate().is_ok());
    }

    #[test]
    fn helmholtz_near_eigenvalue_is_ill_conditioned() {
        let d = Discretization::new(BcKind::Neumann, 32, 30).unwrap();
        let k_u = (PI / 2.0).powi(2) * (1.0 + 1e-13);
        let p = ProblemSpec::Helmholtz { k_u };
        let f: Vec<f64> = d.rule.nodes().iter().map(|&x| x.sin()).collect();
        let err = solve_helmholtz(&p, &f, &d.basis, &d.rule).unwrap_err();
        assert!(matches!(err, SolverError::IllConditioned { .. }), "{err:?}");
    }

    #[test]
    fn burgers_zero_forcing_single_iteration() {
        let d = Discretization::new(BcKind::Dirichlet, 31, 25).unwrap();
        let p = ProblemSpec::Burgers { epsilon: 0.5 };
        let sol = solve_burgers(&p, &[0.0; 31], &d.basis, &d.rule, PicardOptions::default()).unwrap();
        assert_eq!(sol.increments.len(), 1);
        assert!(sol.nodal_values.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn burgers_manufactured_sine() {
        let d = Discretization::new(BcKind::Dirichlet, 31, 25).unwrap();
        let p = ProblemSpec::Burgers { epsilon: 0.5 };
        let f: Vec<f64> = d
            .rule
            .nodes()
            .iter()
            .map(|&x| 0.5 * PI * PI * (PI * x).sin() + 0.5 * PI * (2.0 * PI * x).sin())
            .collect();
        let sol = solve_burgers(&p, &f, &d.basis, &d.rule, PicardOptions::default()).unwrap();
        assert!(max_err(&sol, &d.rule, |x| (PI * x).sin()) <= 1e-8);
        assert!(*sol.increments.last().unwrap() <= 1e-9);
    }

    #[test]
    fn burgers_reports_non_convergence() {
        let d = Discretization::new(BcKind::Dirichlet, 31, 25).unwrap();
        let p = ProblemSpec::Burgers { epsilon: 0.5 };
        let f: Vec<f64> = d.rule.nodes().iter().map(|&x| 3.0 * (PI * x).sin()).collect();
        let opts = PicardOptions { tol: 1e-9, max_iter: 2 };
        let err = solve_burgers(&p, &f, &d.basis, &d.rule, opts).unwrap_err();
        assert!(matches!(err, SolverError::NoConvergence { iterations: 2, .. }));
    }

    #[test]
    fn wrong_basis_and_lengths_rejected() {
        let rule = gauss_lobatto(10).unwrap();
        let neu = ModalBasis::new(BcKind::Neumann, 8, &rule).unwrap();
        let p = ProblemSpec::Cde { epsilon: 1.0 };
        assert!(matches!(
            solve_cde(&p, &[0.0; 10], &neu, &rule),
            Err(SolverError::WrongBasis { .. })
        ));
        let dir = ModalBasis::new(BcKind::Dirichlet, 8, &rule).unwrap();
        assert!(matches!(
            solve_cde(&p, &[0.0; 9], &dir, &rule),
            Err(SolverError::LengthMismatch { expected: 10, actual: 9 })
        ));
        assert!(matches!(
            solve_cde(&ProblemSpec::Cde { epsilon: 0.0 }, &[0.0; 10], &dir, &rule),
            Err(SolverError::InvalidProblem(_))
        ));
    }

    #[test]
    fn reconstruct_selects_columns() {
        let d = Discretization::new(BcKind::Dirichlet, 12, 10).unwrap();
        assert!(reconstruct(&[0.0; 10], &d.basis).unwrap().iter().all(|&v| v == 0.0));
        let mut e0 = vec![0.0; 10];
        e0[0] = 1.0;
        let u = reconstruct(&e0, &d.basis).unwrap();
        for (ui, &x) in u.iter().zip(d.rule.nodes()) {
            assert!((ui - (1.0 - crate::spectral::legendre(2, x))).abs() < 1e-15);
        }
        assert!(matches!(
            reconstruct(&[1.0; 9], &d.basis),
            Err(SolverError::LengthMismatch { expected: 10, actual: 9 })
        ));
    }

    #[test]
    fn manufactured_trivial_cases() {
        let rule = gauss_lobatto(9).unwrap();
        let h = manufactured_forcing(&ProblemSpec::Helmholtz { k_u: 3.5 }, |_| 1.0, |_| 0.0, |_| 0.0, &rule);
        assert!(h.iter().all(|&f| f == 3.5));
        let b = manufactured_forcing(&ProblemSpec::Burgers { epsilon: 0.5 }, |_| 0.0, |_| 0.0, |_| 0.0, &rule);
        assert!(b.iter().all(|&f| f == 0.0));
    }
}
