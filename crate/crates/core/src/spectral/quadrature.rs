use std::f64::consts::PI;

use ndarray::Array2;

use super::legendre::{legendre, legendre_deriv, legendre_second_deriv_interior};
use super::SpectralError;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Gauss-Lobatto-Legendre rule on [-1, 1] with ascending nodes.
///
/// With `P` points the rule integrates polynomials of degree up to `2P - 3`
/// exactly. The nodes double as the collocation grid for every sampled
/// function in the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn num_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Σ w_i g(x_i)
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// Σ w_i v_i for values already sampled at the nodes.
    pub fn integrate_nodal(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.num_points() - 3
    }
}

/// Build the `P`-point Gauss-Lobatto rule.
///
/// Interior nodes are the roots of L'_{P-1}, found by Newton iteration from
/// Chebyshev-Lobatto seeds. Weights are `2 / (P (P-1) L_{P-1}(x_i)^2)`.
pub fn gauss_lobatto(p: usize) -> Result<QuadratureRule, SpectralError> {
    if p < 2 {
        return Err(SpectralError::TooFewPoints(p));
    }
    let n = p - 1;
    let mut nodes = vec![0.0; p];
    nodes[0] = -1.0;
    nodes[n] = 1.0;

    // roots are symmetric; solve the left half and mirror
    for i in 1..=(n / 2) {
        if 2 * i == n {
            nodes[i] = 0.0;
            continue;
        }
        let mut x = -(PI * i as f64 / n as f64).cos();
        let mut converged = false;
        let mut last_step = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let step = legendre_deriv(n, x) / legendre_second_deriv_interior(n, x);
            x -= step;
            last_step = step.abs();
            if last_step <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpectralError::NodeSolver {
                points: p,
                residual: legendre_deriv(n, x).abs().max(last_step),
            });
        }
        nodes[i] = x;
    }
    for i in 1..=(n / 2) {
        nodes[n - i] = -nodes[i];
    }

    let scale = 2.0 / (p as f64 * n as f64);
    let weights = nodes
        .iter()
        .map(|&x| {
            let l = legendre(n, x);
            scale / (l * l)
        })
        .collect();

    Ok(QuadratureRule { nodes, weights })
}

/// First-order collocation differentiation matrix on the rule's nodes.
///
/// `D v` gives the nodal derivative of the degree-(P-1) interpolant of `v`.
/// Diagonal entries are set to the negative off-diagonal row sum so that
/// constants are annihilated to rounding.
pub fn diff_matrix(rule: &QuadratureRule) -> Array2<f64> {
    let p = rule.num_points();
    let n = p - 1;
    let x = rule.nodes();
    let l: Vec<f64> = x.iter().map(|&xi| legendre(n, xi)).collect();
    let mut d = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        let mut row_sum = 0.0;
        for j in 0..p {
            if i != j {
                let v = l[i] / (l[j] * (x[i] - x[j]));
                d[[i, j]] = v;
                row_sum += v;
            }
        }
        d[[i, i]] = -row_sum;
    }
    d
}
