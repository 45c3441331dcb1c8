use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, NormStats};
use crate::nn::Network;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::lbfgs::{lbfgs_step, Evaluated, LbfgsConfig, LbfgsState};
use super::loss::{compute_loss, LossBreakdown};
use super::metrics::evaluate_predictions;
use super::weak_form::WeakFormConfig;
use super::TrainError;

pub const TRACE_HEADER: &str = "epoch,train_total,train_u,train_wf,test_total,test_mean_rel_l2";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Full batch; one iteration per epoch.
    Lbfgs(LbfgsConfig),
    /// Mini-batches drawn in an order fixed by `shuffle_seed`; `batch_size`
    /// of `None` means full batch.
    Adam {
        #[serde(flatten)]
        config: AdamConfig,
        #[serde(default)]
        batch_size: Option<usize>,
        #[serde(default)]
        shuffle_seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    #[serde(flatten)]
    pub kind: OptimizerKind,
    pub epochs: usize,
}

impl OptimizerConfig {
    pub fn lbfgs(epochs: usize) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Lbfgs(LbfgsConfig::default()),
            epochs,
        }
    }

    pub fn adam(epochs: usize, config: AdamConfig) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam {
                config,
                batch_size: None,
                shuffle_seed: 0,
            },
            epochs,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        match &self.kind {
            OptimizerKind::Lbfgs(c) if c.history == 0 => Err(TrainError::Invalid("L-BFGS history must be at least 1".into())),
            OptimizerKind::Adam { config, .. } if !(config.lr > 0.0) => {
                Err(TrainError::Invalid(format!("Adam lr must be positive, got {}", config.lr)))
            }
            OptimizerKind::Adam {
                batch_size: Some(0), ..
            } => Err(TrainError::Invalid("batch size must be positive".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub test_total: f64,
    pub test_mean_rel_l2: f64,
    /// The L-BFGS line search failed and a fixed gradient step was taken.
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
    pub best_epoch: Option<usize>,
    /// Parameters at `best_epoch` (lowest test mean relative ℓ²).
    pub best_params: Option<Vec<f64>>,
    /// Statistics used to normalize network inputs.
    pub input_norm: Option<NormStats>,
    pub evaluations: usize,
}

impl TrainingTrace {
    pub fn fallback_epochs(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.fallback).map(|r| r.epoch).collect()
    }

    pub fn best_row(&self) -> Option<&TraceRow> {
        let epoch = self.best_epoch?;
        self.rows.iter().find(|r| r.epoch == epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(110 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.epoch, r.train.total, r.train.loss_u, r.train.loss_wf, r.test_total, r.test_mean_rel_l2
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Network inputs for `ds`: physical forcings mapped through `input_norm`.
pub fn network_inputs(ds: &Dataset, input_norm: Option<&NormStats>) -> Array2<f64> {
    if ds.norm_stats.as_ref() == input_norm {
        return ds.forcings.clone();
    }
    let physical = ds.physical_forcings();
    match input_norm {
        Some(stats) => stats.normalize(&physical),
        None => physical,
    }
}

fn check_compatible(net: &Network, train_ds: &Dataset, test_ds: &Dataset, cfg: &WeakFormConfig) -> Result<(), TrainError> {
    for (name, ds) in [("train", train_ds), ("test", test_ds)] {
        if ds.problem != cfg.problem || ds.points != cfg.disc.num_points() || ds.num_modes != cfg.disc.num_modes() {
            return Err(TrainError::Invalid(format!(
                "{name} dataset ({} P={} N={}) does not match the weak-form setup ({} P={} N={})",
                ds.problem.name(),
                ds.points,
                ds.num_modes,
                cfg.problem.name(),
                cfg.disc.num_points(),
                cfg.disc.num_modes()
            )));
        }
    }
    let nc = net.config();
    if nc.input_len != cfg.disc.num_points() || nc.output_len != cfg.disc.num_modes() {
        return Err(TrainError::Invalid(format!(
            "network maps {} -> {}, data needs {} -> {}",
            nc.input_len,
            nc.output_len,
            cfg.disc.num_points(),
            cfg.disc.num_modes()
        )));
    }
    Ok(())
}

struct Split {
    inputs: Array2<f64>,
    targets: Array2<f64>,
    forcing: Array2<f64>,
}

/// Loss and gradient with respect to every network parameter.
fn objective(
    net: &mut Network,
    params: &[f64],
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    forcing: ArrayView2<f64>,
    cfg: &WeakFormConfig,
) -> Result<Evaluated<LossBreakdown>, TrainError> {
    net.set_params(params)?;
    net.zero_grad();
    let coeffs = net.forward(inputs)?;
    let (loss, grad) = compute_loss(coeffs.view(), targets, forcing, cfg)?;
    net.backward(grad.view())?;
    Ok(Evaluated {
        value: loss.total,
        grad: net.grads(),
        aux: loss,
    })
}

fn test_scores(net: &Network, test: &Split, cfg: &WeakFormConfig) -> Result<(f64, f64), TrainError> {
    let coeffs = net.predict(test.inputs.view())?;
    let (loss, _) = compute_loss(coeffs.view(), test.targets.view(), test.forcing.view(), cfg)?;
    let predicted = coeffs.dot(&cfg.disc.basis.phi().t());
    let metrics = evaluate_predictions(predicted.view(), test.targets.view(), 0)?;
    Ok((loss.total, metrics.mean_rel_l2))
}

/// Train `net` in place. See [`train_with`].
pub fn train(
    net: &mut Network,
    train_ds: &Dataset,
    test_ds: &Dataset,
    opt: &OptimizerConfig,
    cfg: &WeakFormConfig,
) -> Result<TrainingTrace, TrainError> {
    train_with(net, train_ds, test_ds, opt, cfg, |_| {})
}

/// Train `net` in place, calling `on_epoch` after every epoch.
///
/// Network inputs are the forcings normalized with the training set's
/// statistics (raw when the training set is not normalized); the weak form
/// always sees physical forcings. On return `net` holds the final
/// parameters; the best ones are in the trace.
pub fn train_with(
    net: &mut Network,
    train_ds: &Dataset,
    test_ds: &Dataset,
    opt: &OptimizerConfig,
    cfg: &WeakFormConfig,
    mut on_epoch: impl FnMut(&TraceRow),
) -> Result<TrainingTrace, TrainError> {
    opt.validate()?;
    check_compatible(net, train_ds, test_ds, cfg)?;
    let cfg = cfg.clone().with_norm_stats(None);
    let input_norm = train_ds.norm_stats;
    let split = |ds: &Dataset| Split {
        inputs: network_inputs(ds, input_norm.as_ref()),
        targets: ds.solutions.clone(),
        forcing: ds.physical_forcings(),
    };
    let train_split = split(train_ds);
    let test_split = split(test_ds);

    let mut trace = TrainingTrace {
        input_norm,
        ..TrainingTrace::default()
    };
    let mut params = net.params();
    let mut best = f64::INFINITY;

    let mut lbfgs_state = LbfgsState::new();
    let mut adam_state = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    let mut shuffle_rng = match opt.kind {
        OptimizerKind::Adam { shuffle_seed, .. } => ChaCha8Rng::seed_from_u64(shuffle_seed),
        _ => ChaCha8Rng::seed_from_u64(0),
    };

    for epoch in 1..=opt.epochs {
        let (train_loss, fallback) = match &opt.kind {
            OptimizerKind::Lbfgs(lcfg) => {
                let mut failure = None;
                let mut f = |x: &[f64]| {
                    trace.evaluations += 1;
                    match objective(
                        net,
                        x,
                        train_split.inputs.view(),
                        train_split.targets.view(),
                        train_split.forcing.view(),
                        &cfg,
                    ) {
                        Ok(e) => e,
                        Err(err) => {
                            failure.get_or_insert(err);
                            Evaluated {
                                value: f64::NAN,
                                grad: vec![0.0; x.len()],
                                aux: LossBreakdown::default(),
                            }
                        }
                    }
                };
                let report = lbfgs_step(&mut params, &mut f, &mut lbfgs_state, lcfg);
                if let Some(err) = failure {
                    return Err(err);
                }
                let mut loss = report.aux;
                if !report.value.is_finite() {
                    loss.total = report.value;
                }
                (loss, report.fallback)
            }
            OptimizerKind::Adam {
                config, batch_size, ..
            } => {
                let n = train_ds.len();
                let bs = batch_size.unwrap_or(n).min(n).max(1);
                if bs < n {
                    order.shuffle(&mut shuffle_rng);
                }
                for chunk in order.chunks(bs) {
                    let sel = |a: &Array2<f64>| a.select(Axis(0), chunk);
                    let (xi, ti, fi) = (sel(&train_split.inputs), sel(&train_split.targets), sel(&train_split.forcing));
                    let e = objective(net, &params, xi.view(), ti.view(), fi.view(), &cfg)?;
                    trace.evaluations += 1;
                    adam_step(&mut params, &e.grad, &mut adam_state, config);
                }
                net.set_params(&params)?;
                let coeffs = net.predict(train_split.inputs.view())?;
                let (loss, _) = compute_loss(
                    coeffs.view(),
                    train_split.targets.view(),
                    train_split.forcing.view(),
                    &cfg,
                )?;
                (loss, false)
            }
        };
        net.set_params(&params)?;

        if !train_loss.total.is_finite() {
            return Err(TrainError::NonFinite {
                epoch,
                trace: Box::new(trace),
            });
        }
        let (test_total, test_rel) = test_scores(net, &test_split, &cfg)?;
        let row = TraceRow {
            epoch,
            train: train_loss,
            test_total,
            test_mean_rel_l2: test_rel,
            fallback,
        };
        if test_rel < best {
            best = test_rel;
            trace.best_epoch = Some(epoch);
            trace.best_params = Some(params.clone());
        }
        on_epoch(&row);
        trace.rows.push(row);
    }
    Ok(trace)
}
