//! Legendre-Galerkin spectral toolkit: ground-truth boundary-value solves,
//! dataset generation, and a convolutional network trained to predict modal
//! coefficients with a solution MSE plus weak-form residual loss.

pub mod dataset;
pub mod nn;
pub mod solver;
pub mod spectral;
pub mod train;
pub mod verify;
