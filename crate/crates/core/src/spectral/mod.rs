//! Legendre polynomials, Gauss-Lobatto quadrature, collocation
//! differentiation and boundary-adapted modal bases.

mod basis;
mod legendre;
mod quadrature;

use thiserror::Error;

pub use basis::{BcKind, ModalBasis};
pub use legendre::{legendre, legendre_deriv, legendre_pair};
pub use quadrature::{diff_matrix, gauss_lobatto, QuadratureRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("a Gauss-Lobatto rule needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("Gauss-Lobatto node solver did not converge for P={points} (residual {residual:e})")]
    NodeSolver { points: usize, residual: f64 },
    #[error("modal basis needs at least one mode")]
    NoModes,
    #[error("{num_modes} modes need at least {required} collocation points, grid has {points}")]
    GridTooSmall {
        num_modes: usize,
        points: usize,
        required: usize,
    },
}

/// Quadrature rule plus basis tables for one (P, N_modes, bc) triple.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub rule: QuadratureRule,
    pub basis: ModalBasis,
}

impl Discretization {
    pub fn new(bc: BcKind, points: usize, num_modes: usize) -> Result<Self, SpectralError> {
        let rule = gauss_lobatto(points)?;
        let basis = ModalBasis::new(bc, num_modes, &rule)?;
        Ok(Discretization { rule, basis })
    }

    pub fn num_points(&self) -> usize {
        self.rule.num_points()
    }

    pub fn num_modes(&self) -> usize {
        self.basis.num_modes()
    }
}
