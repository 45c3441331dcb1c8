use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lgnet::dataset::{generate, load_dataset, save_dataset, Dataset, DatasetSpec};
use lgnet::nn::{load_checkpoint, save_checkpoint, Network, NetworkConfig};
use lgnet::train::{evaluate, train_with, Metrics, TrainError, WeakFormConfig};
use lgnet::verify::{convergence_sweep, SWEEP_MODES};

use crate::config::RunConfig;
use crate::CliError;

pub const BEST_DIR: &str = "best";
pub const FINAL_DIR: &str = "final";
pub const TRACE_FILE: &str = "trace.csv";
pub const LOG_FILE: &str = "run.log";
pub const METRICS_FILE: &str = "metrics.json";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const POINTWISE_FILE: &str = "pointwise.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn existing_dir<'a>(path: Option<&'a Path>, what: &str) -> Result<&'a Path, CliError> {
    let path = path.ok_or_else(|| CliError::Config(format!("{what} is not set")))?;
    if !path.is_dir() {
        return Err(CliError::Io(format!("{what} {} does not exist", path.display())));
    }
    Ok(path)
}

pub fn generate_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let out = cfg.out_dir()?;
    let problem = cfg.problem.ok_or_else(|| CliError::Config("problem is not set".into()))?;
    let mut spec = DatasetSpec::new(problem, cfg.n, cfg.points, cfg.num_modes(), cfg.seed, cfg.normalize);
    spec.picard = cfg.picard;
    let ds = generate(&spec)?;
    save_dataset(&ds, out)?;
    Ok(format!(
        "generated {} {} samples (P={}, N_modes={}, seed {}) in {}; max solver residual {:.3e}",
        ds.len(),
        problem.name(),
        ds.points,
        ds.num_modes,
        ds.seed,
        out.display(),
        ds.max_solver_residual
    ))
}

fn network_config(cfg: &RunConfig, ds: &Dataset) -> NetworkConfig {
    let mut nc = NetworkConfig::new(cfg.network.arch, cfg.network.blocks, ds.points, ds.num_modes, cfg.seed);
    nc.filters = cfg.network.filters;
    nc.kernel_size = cfg.network.kernel_size;
    nc.padding = cfg.network.kernel_size.saturating_sub(1) / 2;
    nc
}

pub fn train_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let out = cfg.out_dir()?;
    let train_path = existing_dir(cfg.train_data.as_deref(), "train_data")?;
    let test_path = existing_dir(cfg.test_data.as_deref(), "test_data")?;
    let train_ds = load_dataset(train_path)?;
    let test_ds = load_dataset(test_path)?;
    let mut net = Network::new(network_config(cfg, &train_ds))?;
    let disc = train_ds.discretization().map_err(lgnet::dataset::DataError::from)?;
    let wf = WeakFormConfig::new(train_ds.problem, disc, cfg.weak_form.num_test_functions)?
        .with_lambda(cfg.weak_form.lambda_wf);
    create_dir(out)?;

    let nc = net.config().clone();
    let mut log = String::new();
    writeln!(log, "problem {}", serde_json::to_string(&train_ds.problem).expect("serializes")).ok();
    writeln!(
        log,
        "data train {} samples, test {} samples, P {}, N_modes {}, normalized {}",
        train_ds.len(),
        test_ds.len(),
        train_ds.points,
        train_ds.num_modes,
        train_ds.norm_stats.is_some()
    )
    .ok();
    writeln!(
        log,
        "architecture {:?} blocks {} filters {} ks {} stride {} padding {} params {}",
        nc.arch,
        nc.blocks,
        nc.filters,
        nc.kernel_size,
        nc.stride,
        nc.padding,
        net.num_params()
    )
    .ok();
    writeln!(log, "layers {}", net.describe()).ok();
    writeln!(log, "optimizer {}", serde_json::to_string(&cfg.optimizer).expect("serializes")).ok();
    writeln!(log, "init_seed {}", nc.init_seed).ok();
    write(&out.join("config.json"), serde_json::to_string_pretty(cfg).expect("serializes") + "\n")?;

    let epochs = cfg.optimizer.epochs;
    let every = (epochs / 20).max(1);
    let result = train_with(&mut net, &train_ds, &test_ds, &cfg.optimizer, &wf, |row| {
        if row.epoch % every == 0 || row.epoch == epochs {
            eprintln!(
                "epoch {:>6}  train {:.4e}  test rel l2 {:.4e}",
                row.epoch, row.train.total, row.test_mean_rel_l2
            );
        }
    });
    let trace = match result {
        Ok(t) => t,
        Err(TrainError::NonFinite { epoch, trace }) => {
            trace.write_csv(out.join(TRACE_FILE))?;
            writeln!(log, "aborted: non-finite loss at epoch {epoch}").ok();
            write(&out.join(LOG_FILE), &log)?;
            return Err(TrainError::NonFinite { epoch, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    trace.write_csv(out.join(TRACE_FILE))?;
    let input_norm = trace.input_norm;
    save_checkpoint(&net, input_norm.as_ref(), out.join(FINAL_DIR))?;
    let mut best = net.clone();
    if let Some(params) = &trace.best_params {
        best.set_params(params)?;
    }
    save_checkpoint(&best, input_norm.as_ref(), out.join(BEST_DIR))?;

    for epoch in trace.fallback_epochs() {
        writeln!(log, "line search fallback at epoch {epoch}").ok();
    }
    let summary = match (trace.rows.last(), trace.best_row()) {
        (Some(last), Some(best_row)) => format!(
            "trained {epochs} epochs: final train loss {:.4e}, final test rel l2 {:.4e}, best test rel l2 {:.4e} at epoch {}",
            last.train.total, last.test_mean_rel_l2, best_row.test_mean_rel_l2, best_row.epoch
        ),
        _ => "trained 0 epochs; checkpoints hold the initialization".to_string(),
    };
    writeln!(log, "{summary}").ok();
    write(&out.join(LOG_FILE), &log)?;
    Ok(summary)
}

pub fn metrics_json(m: &Metrics) -> serde_json::Value {
    serde_json::json!({
        "count": m.per_sample_rel_l2.len(),
        "excluded": m.excluded,
        "mean_rel_l2": m.mean_rel_l2,
        "median_rel_l2": m.median_rel_l2,
        "max_rel_l2": m.max_rel_l2,
        "mean_mae": m.mean_mae,
    })
}

pub fn eval_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let out = cfg.out_dir()?;
    let ckpt = existing_dir(cfg.checkpoint.as_deref(), "checkpoint")?;
    let test_path = existing_dir(cfg.test_data.as_deref(), "test_data")?;
    let (net, input_norm) = load_checkpoint(ckpt)?;
    let ds = load_dataset(test_path)?;
    let metrics = evaluate(&net, &ds, input_norm.as_ref(), cfg.pointwise_samples)?;
    create_dir(out)?;

    let json = serde_json::to_string_pretty(&metrics_json(&metrics)).expect("serializes");
    write(&out.join(METRICS_FILE), json + "\n")?;

    let mut hist = String::from("sample,rel_l2\n");
    for (i, e) in metrics.sample_indices.iter().zip(&metrics.per_sample_rel_l2) {
        writeln!(hist, "{i},{e:.16e}").ok();
    }
    write(&out.join(HISTOGRAM_FILE), hist)?;

    let nodes = ds.discretization().map_err(lgnet::dataset::DataError::from)?.rule.nodes().to_vec();
    let mut pw = String::from("sample,node,x,abs_error\n");
    for (s, errs) in metrics.pointwise_errors.iter().enumerate() {
        for (j, (x, e)) in nodes.iter().zip(errs).enumerate() {
            writeln!(pw, "{s},{j},{x:.16e},{e:.16e}").ok();
        }
    }
    write(&out.join(POINTWISE_FILE), pw)?;

    Ok(format!(
        "evaluated {} samples: mean rel l2 {:.4e}, median {:.4e}, max {:.4e}, mean MAE {:.4e}",
        metrics.per_sample_rel_l2.len(),
        metrics.mean_rel_l2,
        metrics.median_rel_l2,
        metrics.max_rel_l2,
        metrics.mean_mae
    ))
}

pub fn verify_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let rows = convergence_sweep(&SWEEP_MODES, cfg.picard).map_err(|e| CliError::Verify(e.to_string()))?;
    let mut csv = String::from("case,num_modes,points,max_error,tolerance,passed\n");
    for r in &rows {
        let tol = r.tolerance.map(|t| format!("{t:e}")).unwrap_or_default();
        writeln!(csv, "{},{},{},{:.16e},{},{}", r.case, r.num_modes, r.points, r.max_error, tol, r.passed()).ok();
    }
    if let Some(out) = &cfg.out {
        create_dir(out)?;
        write(&out.join(CONVERGENCE_FILE), &csv)?;
    }
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{} N={} error {:.3e}", r.case, r.num_modes, r.max_error))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Verify(format!("{csv}failed: {}", failed.join("; "))));
    }
    Ok(csv.trim_end().to_string())
}
