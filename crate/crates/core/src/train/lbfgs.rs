//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Curvature pairs with sᵀy at or below this are skipped.
const CURVATURE_EPS: f64 = 1e-10;
/// Step taken along -g when the line search fails.
pub const FALLBACK_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_linesearch: usize,
    pub tol_grad: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant; smaller means a more exact line search.
    pub c2: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 10,
            max_linesearch: 25,
            tol_grad: 1e-12,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

/// Objective value and gradient at a point, plus caller data carried along
/// with the accepted point.
#[derive(Debug, Clone)]
pub struct Evaluated<T> {
    pub value: f64,
    pub grad: Vec<f64>,
    pub aux: T,
}

#[derive(Debug, Clone, Default)]
pub struct LbfgsState<T> {
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
    current: Option<Evaluated<T>>,
    iterations: usize,
}

impl<T: Clone> LbfgsState<T> {
    pub fn new() -> Self {
        LbfgsState {
            s: VecDeque::new(),
            y: VecDeque::new(),
            rho: VecDeque::new(),
            current: None,
            iterations: 0,
        }
    }

    pub fn history_len(&self) -> usize {
        self.s.len()
    }

    pub fn current(&self) -> Option<&Evaluated<T>> {
        self.current.as_ref()
    }

    fn reset_history(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }
}

#[derive(Debug, Clone)]
pub struct StepReport<T> {
    /// Objective at the returned point.
    pub value: f64,
    pub aux: T,
    pub grad_norm: f64,
    pub step: f64,
    pub evaluations: usize,
    /// Line search failed and a fixed steepest-descent step was taken.
    pub fallback: bool,
    /// Gradient was already below `tol_grad`; nothing moved.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + t * di).collect()
}

/// Minimizer of the cubic through (x1, f1, g1), (x2, f2, g2), clamped to
/// `bounds` (the interval spanned by the points when `None`).
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, bounds: Option<(f64, f64)>) -> f64 {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    if !(f1.is_finite() && f2.is_finite()) {
        return 0.5 * (lo + hi);
    }
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt();
        let t = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if t.is_finite() {
            return t.max(lo).min(hi);
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone)]
struct Trial<T> {
    t: f64,
    eval: Evaluated<T>,
    gtd: f64,
}

/// Strong-Wolfe line search along `d` from `x`. Returns the accepted trial
/// (if any point achieved sufficient decrease) and the evaluation count.
fn strong_wolfe<T: Clone, F>(
    objective: &mut F,
    x: &[f64],
    d: &[f64],
    start: &Evaluated<T>,
    gtd0: f64,
    t_init: f64,
    cfg: &LbfgsConfig,
) -> (Option<Trial<T>>, usize)
where
    F: FnMut(&[f64]) -> Evaluated<T>,
{
    let (c1, c2) = (cfg.c1, cfg.c2);
    let max_evals = cfg.max_linesearch.max(1);
    let f0 = start.value;
    let d_norm = inf_norm(d);
    let armijo = |t: f64, f: f64| f.is_finite() && f <= f0 + c1 * t * gtd0;
    let mut evals = 0usize;
    let mut probe = |t: f64, evals: &mut usize| {
        *evals += 1;
        let eval = objective(&axpy(x, t, d));
        let gtd = dot(&eval.grad, d);
        Trial { t, eval, gtd }
    };

    let origin = Trial {
        t: 0.0,
        eval: start.clone(),
        gtd: gtd0,
    };
    let mut prev = origin.clone();
    let mut cur = probe(t_init, &mut evals);

    // bracketing phase; (lo, hi) brackets a strong-Wolfe point, lo has the
    // lower value and satisfies sufficient decrease
    let (mut lo, mut hi) = loop {
        if !armijo(cur.t, cur.eval.value) || (evals > 1 && cur.eval.value >= prev.eval.value) {
            break (prev, cur);
        }
        if cur.gtd.abs() <= -c2 * gtd0 {
            return (Some(cur), evals);
        }
        if cur.gtd >= 0.0 {
            break (cur, prev);
        }
        if evals >= max_evals {
            return (Some(cur), evals);
        }
        let min_step = cur.t + 0.01 * (cur.t - prev.t);
        let max_step = cur.t * 10.0;
        let t_next = cubic_interpolate(
            prev.t,
            prev.eval.value,
            prev.gtd,
            cur.t,
            cur.eval.value,
            cur.gtd,
            Some((min_step, max_step)),
        );
        prev = cur;
        cur = probe(t_next, &mut evals);
    };

    // zoom phase
    while evals < max_evals {
        let (a, b) = if lo.t <= hi.t { (lo.t, hi.t) } else { (hi.t, lo.t) };
        if (b - a) * d_norm < 1e-15 * (1.0 + lo.t.abs() * d_norm) {
            break;
        }
        let mut t = cubic_interpolate(
            lo.t,
            lo.eval.value,
            lo.gtd,
            hi.t,
            hi.eval.value,
            hi.gtd,
            None,
        );
        // keep away from the bracket ends
        let margin = 0.1 * (b - a);
        t = t.max(a + margin).min(b - margin);
        let trial = probe(t, &mut evals);
        if !armijo(trial.t, trial.eval.value) || trial.eval.value >= lo.eval.value {
            hi = trial;
        } else {
            if trial.gtd.abs() <= -c2 * gtd0 {
                return (Some(trial), evals);
            }
            if trial.gtd * (hi.t - lo.t) >= 0.0 {
                hi = lo;
            }
            lo = trial;
        }
    }

    if lo.t > 0.0 && armijo(lo.t, lo.eval.value) {
        (Some(lo), evals)
    } else {
        (None, evals)
    }
}

/// Search direction -H g from the two-loop recursion.
fn two_loop<T: Clone>(state: &LbfgsState<T>, g: &[f64]) -> Vec<f64> {
    let k = state.s.len();
    let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut alpha = vec![0.0; k];
    for i in (0..k).rev() {
        alpha[i] = state.rho[i] * dot(&state.s[i], &q);
        for (qj, yj) in q.iter_mut().zip(&state.y[i]) {
            *qj -= alpha[i] * yj;
        }
    }
    if k > 0 {
        let (s, y) = (&state.s[k - 1], &state.y[k - 1]);
        let gamma = dot(s, y) / dot(y, y);
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
    }
    for i in 0..k {
        let beta = state.rho[i] * dot(&state.y[i], &q);
        for (qj, sj) in q.iter_mut().zip(&state.s[i]) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q
}

/// One L-BFGS iteration on `x` (updated in place).
pub fn lbfgs_step<T: Clone, F>(
    x: &mut Vec<f64>,
    objective: &mut F,
    state: &mut LbfgsState<T>,
    cfg: &LbfgsConfig,
) -> StepReport<T>
where
    F: FnMut(&[f64]) -> Evaluated<T>,
{
    let mut evaluations = 0;
    let current = match state.current.take() {
        Some(c) => c,
        None => {
            evaluations += 1;
            objective(x)
        }
    };
    let g_norm = inf_norm(&current.grad);
    if g_norm <= cfg.tol_grad || !current.value.is_finite() {
        let report = StepReport {
            value: current.value,
            aux: current.aux.clone(),
            grad_norm: g_norm,
            step: 0.0,
            evaluations,
            fallback: false,
            converged: current.value.is_finite(),
        };
        state.current = Some(current);
        return report;
    }

    let mut d = two_loop(state, &current.grad);
    let mut gtd = dot(&current.grad, &d);
    if !(gtd < 0.0) {
        state.reset_history();
        d = current.grad.iter().map(|v| -v).collect();
        gtd = dot(&current.grad, &d);
    }
    let t_init = if state.s.is_empty() {
        let g1: f64 = current.grad.iter().map(|v| v.abs()).sum();
        (1.0 / g1).min(1.0)
    } else {
        1.0
    };

    let (accepted, ls_evals) = strong_wolfe(objective, x, &d, &current, gtd, t_init, cfg);
    evaluations += ls_evals;
    state.iterations += 1;

    match accepted {
        Some(trial) => {
            let s: Vec<f64> = d.iter().map(|v| v * trial.t).collect();
            let y: Vec<f64> = trial.eval.grad.iter().zip(&current.grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > CURVATURE_EPS {
                if state.s.len() == cfg.history.max(1) {
                    state.s.pop_front();
                    state.y.pop_front();
                    state.rho.pop_front();
                }
                state.s.push_back(s.clone());
                state.y.push_back(y);
                state.rho.push_back(1.0 / sy);
            }
            for (xi, si) in x.iter_mut().zip(&s) {
                *xi += si;
            }
            let report = StepReport {
                value: trial.eval.value,
                aux: trial.eval.aux.clone(),
                grad_norm: inf_norm(&trial.eval.grad),
                step: trial.t,
                evaluations,
                fallback: false,
                converged: false,
            };
            state.current = Some(trial.eval);
            report
        }
        None => {
            let next = axpy(x, -FALLBACK_STEP, &current.grad);
            let eval = objective(&next);
            evaluations += 1;
            *x = next;
            state.reset_history();
            let report = StepReport {
                value: eval.value,
                aux: eval.aux.clone(),
                grad_norm: inf_norm(&eval.grad),
                step: FALLBACK_STEP,
                evaluations,
                fallback: true,
                converged: false,
            };
            state.current = Some(eval);
            report
        }
    }
}
