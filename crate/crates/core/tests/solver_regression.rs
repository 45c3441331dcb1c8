//! CDE (ε = 0.1) regression fixture, checked bit-for-bit, and an independent
//! second-order finite-difference solve with Richardson extrapolation.

use std::path::PathBuf;

use lgnet::dataset::{row_rng, sample_forcing, ForcingFamily, ForcingParams};
use lgnet::solver::{solve, PicardOptions, ProblemSpec, SpectralSolution};
use lgnet::spectral::Discretization;

const EPSILON: f64 = 0.1;
const SEED: u64 = 20240601;
const POINTS: usize = 64;
const MODES: usize = 62;

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/cde_eps0.1.txt")
}

fn fixture_solution() -> (ForcingParams, Discretization, SpectralSolution) {
    let problem = ProblemSpec::Cde { epsilon: EPSILON };
    let disc = Discretization::new(problem.bc(), POINTS, MODES).unwrap();
    let (params, f) = sample_forcing(ForcingFamily::LinearTrig, &mut row_rng(SEED, 0), disc.rule.nodes());
    let sol = solve(&problem, &f, &disc.basis, &disc.rule, PicardOptions::default()).unwrap();
    (params, disc, sol)
}

fn render(sol: &SpectralSolution) -> String {
    let mut out = String::from("# kind index bits\n");
    for (i, c) in sol.coefficients.iter().enumerate() {
        out += &format!("alpha {i} {:016x}\n", c.to_bits());
    }
    for (i, u) in sol.nodal_values.iter().enumerate() {
        out += &format!("u {i} {:016x}\n", u.to_bits());
    }
    out
}

#[test]
fn matches_stored_fixture_bit_for_bit() {
    let (_, _, sol) = fixture_solution();
    let text = render(&sol);
    let path = fixture_path();
    if std::env::var_os("LGNET_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let stored = std::fs::read_to_string(&path).expect("fixture file (regenerate with LGNET_BLESS=1)");
    assert_eq!(stored, text);
}

/// -ε u'' - u' = f, u(±1) = 0 by central differences on `intervals` cells.
/// Returns interior and boundary values on the uniform grid.
fn finite_difference(params: &ForcingParams, intervals: usize) -> Vec<f64> {
    let h = 2.0 / intervals as f64;
    let m = intervals - 1;
    let lower = -EPSILON / (h * h) + 1.0 / (2.0 * h);
    let diag = 2.0 * EPSILON / (h * h);
    let upper = -EPSILON / (h * h) - 1.0 / (2.0 * h);
    let mut rhs: Vec<f64> = (1..=m).map(|i| params.eval(-1.0 + i as f64 * h)).collect();
    // Thomas algorithm; the system is diagonally dominant for h < 2ε
    let mut c = vec![0.0; m];
    let mut d = diag;
    c[0] = upper / d;
    rhs[0] /= d;
    for i in 1..m {
        d = diag - lower * c[i - 1];
        c[i] = upper / d;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) / d;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    let mut u = Vec::with_capacity(intervals + 1);
    u.push(0.0);
    u.extend(rhs);
    u.push(0.0);
    u
}

#[test]
fn agrees_with_richardson_extrapolated_finite_differences() {
    let (params, disc, sol) = fixture_solution();
    let coarse = finite_difference(&params, 4096);
    let fine = finite_difference(&params, 8192);
    let mut worst: f64 = 0.0;
    for (i, uc) in coarse.iter().enumerate() {
        let x = -1.0 + i as f64 * 2.0 / 4096.0;
        let extrapolated = (4.0 * fine[2 * i] - uc) / 3.0;
        let (spectral, _) = disc.basis.eval_expansion(&sol.coefficients, x);
        worst = worst.max((spectral - extrapolated).abs());
    }
    assert!(worst <= 1e-6, "max deviation {worst:e}");
}

#[test]
fn burgers_family_forcing_converges_to_picard_tolerance() {
    let problem = ProblemSpec::Burgers { epsilon: 0.5 };
    let disc = Discretization::new(problem.bc(), 31, 29).unwrap();
    for row in 0..5 {
        let (_, f) = sample_forcing(ForcingFamily::BurgersTrig, &mut row_rng(SEED, row), disc.rule.nodes());
        let sol = solve(&problem, &f, &disc.basis, &disc.rule, PicardOptions::default()).unwrap();
        assert!(*sol.increments.last().unwrap() <= 1e-9, "row {row}: {:?}", sol.increments.last());
    }
}
