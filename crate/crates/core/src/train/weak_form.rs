//! Weak-form residual of a predicted expansion û = Σ α̂_k φ_k against the
//! first `m` basis functions, all integrals by Gauss-Lobatto quadrature:
//!
//! * CDE: `ε∫û'φ'_j - ∫û'φ_j`
//! * Helmholtz: `-∫û'φ'_j + k_u∫ûφ_j`
//! * Burgers: `ε∫û'φ'_j - ½∫û²φ'_j`
//!
//! and RHS `∫fφ_j` in every case.

use ndarray::{s, Array2, ArrayView2};

use crate::dataset::NormStats;
use crate::solver::ProblemSpec;
use crate::spectral::{diff_matrix, Discretization};

use super::TrainError;

#[derive(Debug, Clone)]
pub struct WeakFormConfig {
    pub num_test_functions: usize,
    pub problem: ProblemSpec,
    pub disc: Discretization,
    /// When set, forcings passed in are normalized and get mapped back to
    /// physical units before the RHS is integrated.
    pub norm_stats: Option<NormStats>,
    /// Weight on the weak-form MSE.
    pub lambda_wf: f64,
    /// `W φ_j` for the test functions, `P x m`
    test_phi: Array2<f64>,
    /// `W φ'_j`, `P x m`
    test_dphi: Array2<f64>,
}

impl WeakFormConfig {
    /// `m = None` uses every basis function as a test function.
    pub fn new(problem: ProblemSpec, disc: Discretization, m: Option<usize>) -> Result<Self, TrainError> {
        let n_modes = disc.num_modes();
        let m = m.unwrap_or(n_modes);
        if m == 0 || m > n_modes {
            return Err(TrainError::Invalid(format!(
                "number of test functions must be in 1..={n_modes}, got {m}"
            )));
        }
        if disc.basis.bc() != problem.bc() {
            return Err(TrainError::Invalid(format!(
                "{} needs a {:?} basis",
                problem.name(),
                problem.bc()
            )));
        }
        let weights = ndarray::Array1::from(disc.rule.weights().to_vec());
        let weights = weights.insert_axis(ndarray::Axis(1));
        let test_phi = &disc.basis.phi().slice(s![.., ..m]) * &weights;
        let test_dphi = &disc.basis.dphi().slice(s![.., ..m]) * &weights;
        Ok(WeakFormConfig {
            num_test_functions: m,
            problem,
            disc,
            norm_stats: None,
            lambda_wf: 1.0,
            test_phi,
            test_dphi,
        })
    }

    pub fn with_norm_stats(mut self, stats: Option<NormStats>) -> Self {
        self.norm_stats = stats;
        self
    }

    pub fn with_lambda(mut self, lambda_wf: f64) -> Self {
        self.lambda_wf = lambda_wf;
        self
    }
}

/// Nodal quantities shared by the residual and its gradient.
pub(crate) struct WeakTerms {
    pub u: Array2<f64>,
    pub lhs: Array2<f64>,
    pub rhs: Array2<f64>,
}

impl WeakTerms {
    /// Pull a gradient on LHS back to gradients on nodal û and û'.
    pub fn backprop_lhs(&self, grad_lhs: &Array2<f64>, cfg: &WeakFormConfig) -> (Array2<f64>, Array2<f64>) {
        let (tp, tdp) = (&cfg.test_phi, &cfg.test_dphi);
        match cfg.problem {
            ProblemSpec::Cde { epsilon } => {
                let g_ux = grad_lhs.dot(&(tdp * epsilon - tp).t());
                (Array2::zeros(self.u.dim()), g_ux)
            }
            ProblemSpec::Helmholtz { k_u } => {
                let g_ux = -grad_lhs.dot(&tdp.t());
                let g_u = grad_lhs.dot(&tp.t()) * k_u;
                (g_u, g_ux)
            }
            ProblemSpec::Burgers { epsilon } => {
                let back = grad_lhs.dot(&tdp.t());
                let g_ux = &back * epsilon;
                let g_u = -(back * &self.u);
                (g_u, g_ux)
            }
        }
    }
}

pub(crate) fn weak_terms(
    coefficients: ArrayView2<f64>,
    f_nodal: ArrayView2<f64>,
    cfg: &WeakFormConfig,
) -> Result<WeakTerms, TrainError> {
    let basis = &cfg.disc.basis;
    let (n, p) = (coefficients.nrows(), basis.num_points());
    if coefficients.ncols() != basis.num_modes() {
        return Err(TrainError::Shape(format!(
            "coefficients have {} columns, basis has {} modes",
            coefficients.ncols(),
            basis.num_modes()
        )));
    }
    if f_nodal.dim() != (n, p) {
        return Err(TrainError::Shape(format!(
            "forcings have shape {:?}, expected ({n}, {p})",
            f_nodal.dim()
        )));
    }
    let u = coefficients.dot(&basis.phi().t());
    let ux = coefficients.dot(&basis.dphi().t());
    let (tp, tdp) = (&cfg.test_phi, &cfg.test_dphi);
    let lhs = match cfg.problem {
        ProblemSpec::Cde { epsilon } => ux.dot(&(tdp * epsilon - tp)),
        ProblemSpec::Helmholtz { k_u } => u.dot(tp) * k_u - ux.dot(tdp),
        ProblemSpec::Burgers { epsilon } => (&ux * epsilon - &u * &u * 0.5).dot(tdp),
    };
    let rhs = match &cfg.norm_stats {
        Some(stats) => f_nodal.mapv(|v| v * stats.std + stats.mean).dot(tp),
        None => f_nodal.dot(tp),
    };
    Ok(WeakTerms { u, lhs, rhs })
}

/// Per-sample, per-test-function LHS and RHS (`n x m` each).
pub fn weak_residual(
    coefficients: ArrayView2<f64>,
    f_nodal: ArrayView2<f64>,
    cfg: &WeakFormConfig,
) -> Result<(Array2<f64>, Array2<f64>), TrainError> {
    let terms = weak_terms(coefficients, f_nodal, cfg)?;
    Ok((terms.lhs, terms.rhs))
}

/// Nodal derivative of the expansion through the modal derivative table.
pub fn modal_derivative(coefficients: ArrayView2<f64>, disc: &Discretization) -> Array2<f64> {
    coefficients.dot(&disc.basis.dphi().t())
}

/// Nodal derivative of the expansion through the collocation
/// differentiation matrix.
pub fn collocation_derivative(coefficients: ArrayView2<f64>, disc: &Discretization) -> Array2<f64> {
    let u = coefficients.dot(&disc.basis.phi().t());
    u.dot(&diff_matrix(&disc.rule).t())
}
