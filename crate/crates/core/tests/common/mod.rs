//! Checks shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use lgnet::dataset::generate_dataset;
use lgnet::nn::{Arch, Network, NetworkConfig};
use lgnet::solver::ProblemSpec;
use lgnet::spectral::{diff_matrix, gauss_lobatto, BcKind, Discretization, ModalBasis};
use lgnet::train::{compute_loss, WeakFormConfig};
use ndarray::Array2;

pub const PROBLEMS: [ProblemSpec; 3] = [
    ProblemSpec::Cde { epsilon: 0.1 },
    ProblemSpec::Helmholtz { k_u: 3.5 },
    ProblemSpec::Burgers { epsilon: 0.5 },
];

pub const ACTIVATION_ARCHS: [Arch; 3] = [Arch::NetA, Arch::NetB, Arch::NetC];

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// |quadrature - exact integral| for the polynomial with monomial
/// coefficients `c` (degree `c.len() - 1`).
pub fn quadrature_error(points: usize, c: &[f64]) -> f64 {
    let rule = gauss_lobatto(points).unwrap();
    let exact: f64 = c
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, a)| 2.0 * a / (k as f64 + 1.0))
        .sum();
    (rule.integrate(|x| horner(c, x)) - exact).abs()
}

/// Max nodal error of the collocation derivative of a polynomial.
pub fn differentiation_error(points: usize, c: &[f64]) -> f64 {
    let rule = gauss_lobatto(points).unwrap();
    let d = diff_matrix(&rule);
    let values: Vec<f64> = rule.nodes().iter().map(|&x| horner(c, x)).collect();
    let dc: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect();
    rule.nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let num: f64 = (0..points).map(|j| d[[i, j]] * values[j]).sum();
            (num - horner(&dc, x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest boundary value (Dirichlet) or boundary slope (Neumann) of the
/// expansion, both at ±1 exactly and through the tabulated end rows.
pub fn boundary_violation(bc: BcKind, points: usize, alpha: &[f64]) -> f64 {
    let rule = gauss_lobatto(points).unwrap();
    let basis = ModalBasis::new(bc, alpha.len(), &rule).unwrap();
    let table = match bc {
        BcKind::Dirichlet => basis.phi(),
        BcKind::Neumann => basis.dphi(),
    };
    let mut worst: f64 = 0.0;
    for (x, row) in [(-1.0, 0), (1.0, points - 1)] {
        let (u, du) = basis.eval_expansion(alpha, x);
        let direct = if bc == BcKind::Dirichlet { u } else { du };
        let tabulated: f64 = table.row(row).iter().zip(alpha).map(|(p, a)| p * a).sum();
        worst = worst.max(direct.abs()).max(tabulated.abs());
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries skipped because the finite-difference stencil crosses a ReLU kink.
    pub kinks: usize,
}

/// Network + reconstruction + weak-form loss, analytic parameter gradient
/// against central differences (step 1e-6). P = 8, N_modes = 6, one block of
/// three filters, two samples.
pub fn end_to_end_gradient(problem: ProblemSpec, arch: Arch, seed: u64) -> GradientCheck {
    let (points, modes) = (8, 6);
    let ds = generate_dataset(problem, 2, points, modes, seed, problem.name() == "burgers").unwrap();
    let disc = Discretization::new(problem.bc(), points, modes).unwrap();
    let wf = WeakFormConfig::new(problem, disc, None)
        .unwrap()
        .with_norm_stats(ds.norm_stats)
        .with_lambda(0.5);
    let mut nc = NetworkConfig::new(arch, 1, points, modes, seed);
    nc.filters = 3;
    let mut net = Network::new(nc).unwrap();

    let loss_at = |net: &Network, params: &[f64]| -> f64 {
        let mut n = net.clone();
        n.set_params(params).unwrap();
        let alpha = n.predict(ds.forcings.view()).unwrap();
        compute_loss(alpha.view(), ds.solutions.view(), ds.forcings.view(), &wf).unwrap().0.total
    };

    net.zero_grad();
    let alpha = net.forward(ds.forcings.view()).unwrap();
    let (_, grad_alpha) = compute_loss(alpha.view(), ds.solutions.view(), ds.forcings.view(), &wf).unwrap();
    net.backward(grad_alpha.view()).unwrap();
    let analytic = net.grads();
    let base = net.params();

    let h = 1e-6;
    let (mut worst, mut checked, mut kinks) = (0.0f64, 0, 0);
    for (i, &g) in analytic.iter().enumerate() {
        let mut p = base.clone();
        let f0 = loss_at(&net, &p);
        p[i] = base[i] + h;
        let up = loss_at(&net, &p);
        p[i] = base[i] - h;
        let down = loss_at(&net, &p);
        let fd = (up - down) / (2.0 * h);
        if arch == Arch::NetA {
            // one-sided slopes disagree when the stencil straddles a kink
            let (fwd, bwd) = ((up - f0) / h, (f0 - down) / h);
            if (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()).max(1e-3) {
                kinks += 1;
                continue;
            }
        }
        let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-6);
        worst = worst.max(rel);
        checked += 1;
    }
    GradientCheck {
        max_rel_error: worst,
        checked,
        kinks,
    }
}

/// Random matrix helper for tests that need plain inputs.
pub fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}
