use std::path::{Path, PathBuf};

use lgnet::nn::Arch;
use lgnet::solver::{PicardOptions, ProblemSpec};
use lgnet::train::OptimizerConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSection {
    pub arch: Arch,
    pub blocks: usize,
    pub filters: usize,
    pub kernel_size: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            arch: Arch::Linear,
            blocks: 0,
            filters: 32,
            kernel_size: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakFormSection {
    /// `null` uses every basis function.
    pub num_test_functions: Option<usize>,
    pub lambda_wf: f64,
}

impl Default for WeakFormSection {
    fn default() -> Self {
        WeakFormSection {
            num_test_functions: None,
            lambda_wf: 1.0,
        }
    }
}

/// Everything a command needs; unset fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub problem: Option<ProblemSpec>,
    pub points: usize,
    /// `null` means `points - 2`.
    pub num_modes: Option<usize>,
    pub n: usize,
    pub normalize: bool,
    /// Dataset seed for `generate`, weight initialization seed for `train`.
    pub seed: u64,
    pub picard: PicardOptions,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub network: NetworkSection,
    pub optimizer: OptimizerConfig,
    pub weak_form: WeakFormSection,
    pub pointwise_samples: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: None,
            points: 64,
            num_modes: None,
            n: 1000,
            normalize: false,
            seed: 0,
            picard: PicardOptions::default(),
            train_data: None,
            test_data: None,
            checkpoint: None,
            network: NetworkSection::default(),
            optimizer: OptimizerConfig::lbfgs(5000),
            weak_form: WeakFormSection::default(),
            pointwise_samples: 4,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn num_modes(&self) -> usize {
        self.num_modes.unwrap_or(self.points.saturating_sub(2))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Config("no output directory (use --out)".into()))
    }

    /// Resolve a config from an optional JSON file plus `key.path=value`
    /// overrides, applied in order over the defaults.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("default config serializes");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let doc: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if !doc.is_object() {
                return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
            }
            merge(&mut value, doc);
        }
        for (key, raw) in overrides {
            set_path(&mut value, key, parse_scalar(raw))?;
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Deep-merge `patch` into `base`; objects merge key by key, anything else
/// replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

fn parse_scalar(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key '{key}'")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node = node
            .as_object_mut()
            .expect("just made an object")
            .entry(part.to_string())
            .or_insert(Value::Null);
    }
    if !node.is_object() {
        *node = Value::Object(Default::default());
    }
    node.as_object_mut()
        .expect("just made an object")
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
