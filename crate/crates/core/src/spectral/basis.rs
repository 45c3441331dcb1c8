use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::legendre::legendre_pair;
use super::quadrature::QuadratureRule;
use super::SpectralError;

/// Homogeneous boundary condition built into the modal basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Boundary-adapted modal basis φ_k = L_k + a_k L_{k+1} + b_k L_{k+2}
/// tabulated on a quadrature grid.
///
/// * Dirichlet: a_k = 0, b_k = -1, so φ_k(±1) = 0.
/// * Neumann: a_k = 0, b_k = -k(k+1)/((k+2)(k+3)), so φ'_k(±1) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    bc: BcKind,
    a: Vec<f64>,
    b: Vec<f64>,
    /// P x N_modes, φ_k(x_i)
    phi: Array2<f64>,
    /// P x N_modes, φ'_k(x_i)
    dphi: Array2<f64>,
}

fn coefficients(bc: BcKind, k: usize) -> (f64, f64) {
    match bc {
        BcKind::Dirichlet => (0.0, -1.0),
        BcKind::Neumann => {
            let kf = k as f64;
            (0.0, -kf * (kf + 1.0) / ((kf + 2.0) * (kf + 3.0)))
        }
    }
}

impl ModalBasis {
    /// Tabulate `num_modes` basis functions on the nodes of `rule`.
    ///
    /// The highest degree present is `num_modes + 1`, so the rule needs at
    /// least `num_modes + 2` points.
    pub fn new(bc: BcKind, num_modes: usize, rule: &QuadratureRule) -> Result<Self, SpectralError> {
        if num_modes == 0 {
            return Err(SpectralError::NoModes);
        }
        let p = rule.num_points();
        if num_modes + 2 > p {
            return Err(SpectralError::GridTooSmall {
                num_modes,
                points: p,
                required: num_modes + 2,
            });
        }
        let (a, b): (Vec<f64>, Vec<f64>) = (0..num_modes).map(|k| coefficients(bc, k)).unzip();
        let mut basis = ModalBasis {
            bc,
            a,
            b,
            phi: Array2::zeros((p, num_modes)),
            dphi: Array2::zeros((p, num_modes)),
        };
        for (i, &x) in rule.nodes().iter().enumerate() {
            let (vals, ders) = basis.eval_row(x);
            for k in 0..num_modes {
                basis.phi[[i, k]] = vals[k];
                basis.dphi[[i, k]] = ders[k];
            }
        }
        Ok(basis)
    }

    pub fn bc(&self) -> BcKind {
        self.bc
    }

    pub fn num_modes(&self) -> usize {
        self.a.len()
    }

    pub fn num_points(&self) -> usize {
        self.phi.nrows()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    pub fn dphi(&self) -> &Array2<f64> {
        &self.dphi
    }

    /// Values and derivatives of every basis function at an arbitrary `x`.
    pub fn eval_row(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.num_modes();
        // L_j and L'_j for j = 0..n+2
        let legendre: Vec<(f64, f64)> = (0..n + 2).map(|j| legendre_pair(j, x)).collect();
        let mut vals = Vec::with_capacity(n);
        let mut ders = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = (self.a[k], self.b[k]);
            vals.push(legendre[k].0 + a * legendre[k + 1].0 + b * legendre[k + 2].0);
            ders.push(legendre[k].1 + a * legendre[k + 1].1 + b * legendre[k + 2].1);
        }
        (vals, ders)
    }

    /// Evaluate Σ α_k φ_k(x) and its derivative at an arbitrary `x`.
    pub fn eval_expansion(&self, coefficients: &[f64], x: f64) -> (f64, f64) {
        let (vals, ders) = self.eval_row(x);
        let u = vals.iter().zip(coefficients).map(|(v, c)| v * c).sum();
        let du = ders.iter().zip(coefficients).map(|(v, c)| v * c).sum();
        (u, du)
    }
}
