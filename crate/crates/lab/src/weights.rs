//! Portable weights files.
//!
//! A weights file is a single JSON document holding the layer stack of a
//! [`PortableNetwork`], its role and action metadata, and optional probe
//! pairs recorded by whoever wrote the file. See `docs/weights-format.md`.

use std::fs;
use std::path::Path;

use calf_core::policy::{ActionTransform, Activation, Layer, OutputRole, PortableNetwork};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "calf-portable-weights";
pub const VERSION: u32 = 1;

/// Default tolerance when checking recorded probes.
pub const PROBE_TOLERANCE: f64 = 1e-5;

#[derive(Debug, thiserror::Error)]
pub enum WeightsError {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("layer {layer} expects {expected} inputs but the previous layer has {found} outputs")]
    DimChain {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("layer {layer}: {what} has {found} entries, expected {expected}")]
    WeightShape {
        layer: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

impl From<calf_core::Error> for WeightsError {
    fn from(e: calf_core::Error) -> Self {
        use calf_core::Error as E;
        match e {
            E::DimChain {
                layer,
                expected,
                found,
            } => WeightsError::DimChain {
                layer,
                expected,
                found,
            },
            E::UnknownActivation(a) => WeightsError::UnknownActivation(a),
            E::WeightShape {
                layer,
                what,
                expected,
                found,
            } => WeightsError::WeightShape {
                layer,
                what,
                expected,
                found,
            },
            other => WeightsError::Schema(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    #[serde(rename = "in")]
    pub inputs: usize,
    #[serde(rename = "out")]
    pub outputs: usize,
    pub activation: String,
    /// Row-major `out x in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// An input and the raw network output recorded for it (before any action
/// scaling or clipping).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    pub format: String,
    pub version: u32,
    pub role: String,
    pub observation_dim: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub action_low: Vec<f64>,
    #[serde(default)]
    pub action_high: Vec<f64>,
    #[serde(default = "default_transform")]
    pub action_transform: String,
    pub layers: Vec<LayerRecord>,
    #[serde(default)]
    pub probes: Vec<Probe>,
    /// Free-form provenance (environment, checkpoint tag, exporter, ...).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

fn default_transform() -> String {
    "clip".into()
}

impl WeightsFile {
    pub fn from_network(net: &PortableNetwork) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            role: net.role().as_str().into(),
            observation_dim: net.observation_dim(),
            output_dim: net.output_dim(),
            action_low: net.action_low().to_vec(),
            action_high: net.action_high().to_vec(),
            action_transform: net.action_transform().as_str().into(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation().as_str().into(),
                    weights: l.weights().to_vec(),
                    bias: l.bias().to_vec(),
                })
                .collect(),
            probes: Vec::new(),
            metadata: serde_json::Map::new(),
        }
    }

    /// Records the raw outputs of `net` at `inputs` as probes.
    pub fn with_probes(
        mut self,
        net: &PortableNetwork,
        inputs: &[Vec<f64>],
    ) -> Result<Self, WeightsError> {
        self.probes = inputs
            .iter()
            .map(|x| {
                Ok(Probe {
                    input: x.clone(),
                    output: net.forward(x)?,
                })
            })
            .collect::<Result<_, calf_core::Error>>()?;
        Ok(self)
    }

    pub fn to_network(&self) -> Result<PortableNetwork, WeightsError> {
        if self.format != FORMAT {
            return Err(WeightsError::Schema(format!(
                "format tag is `{}`, expected `{FORMAT}`",
                self.format
            )));
        }
        if self.version != VERSION {
            return Err(WeightsError::Schema(format!(
                "unsupported version {} (this build reads version {VERSION})",
                self.version
            )));
        }
        let role: OutputRole = self
            .role
            .parse()
            .map_err(|_| WeightsError::Schema(format!("unknown role `{}`", self.role)))?;
        let transform: ActionTransform = self.action_transform.parse().map_err(|_| {
            WeightsError::Schema(format!(
                "unknown action transform `{}`",
                self.action_transform
            ))
        })?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, rec) in self.layers.iter().enumerate() {
            let act: Activation = rec.activation.parse()?;
            layers.push(Layer::new(
                i,
                rec.inputs,
                rec.outputs,
                rec.weights.clone(),
                rec.bias.clone(),
                act,
            )?);
        }
        let net = PortableNetwork::new(
            layers,
            role,
            self.action_low.clone(),
            self.action_high.clone(),
            transform,
        )?;
        if net.observation_dim() != self.observation_dim {
            return Err(WeightsError::Schema(format!(
                "observation_dim is {} but the first layer takes {} inputs",
                self.observation_dim,
                net.observation_dim()
            )));
        }
        if net.output_dim() != self.output_dim {
            return Err(WeightsError::Schema(format!(
                "output_dim is {} but the last layer has {} outputs",
                self.output_dim,
                net.output_dim()
            )));
        }
        Ok(net)
    }
}

pub fn parse_weights(text: &str) -> Result<(PortableNetwork, WeightsFile), WeightsError> {
    let file: WeightsFile = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            WeightsError::Schema(e.to_string())
        } else {
            WeightsError::Json(e)
        }
    })?;
    let net = file.to_network()?;
    Ok((net, file))
}

pub fn load_weights_file(path: &Path) -> Result<(PortableNetwork, WeightsFile), WeightsError> {
    let text = fs::read_to_string(path).map_err(|source| WeightsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_weights(&text)
}

/// Loads a network, ignoring any probes.
pub fn load_portable_weights(path: &Path) -> Result<PortableNetwork, WeightsError> {
    Ok(load_weights_file(path)?.0)
}

pub fn save_weights_file(path: &Path, file: &WeightsFile) -> Result<(), WeightsError> {
    let mut text = serde_json::to_string_pretty(file)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| WeightsError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_portable_weights(path: &Path, net: &PortableNetwork) -> Result<(), WeightsError> {
    save_weights_file(path, &WeightsFile::from_network(net))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub probes: usize,
    pub max_abs_error: f64,
    /// Index of the worst probe, if any.
    pub worst: Option<usize>,
    pub tolerance: f64,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error <= self.tolerance
    }
}

/// Re-evaluates every probe and reports the largest deviation from the
/// recorded outputs.
pub fn verify_probes(
    net: &PortableNetwork,
    probes: &[Probe],
    tolerance: f64,
) -> Result<ProbeReport, WeightsError> {
    let mut worst = None;
    let mut max_err: f64 = 0.0;
    for (i, p) in probes.iter().enumerate() {
        let out = net.forward(&p.input)?;
        if out.len() != p.output.len() {
            return Err(WeightsError::Schema(format!(
                "probe {i} records {} outputs, network produces {}",
                p.output.len(),
                out.len()
            )));
        }
        for (a, b) in out.iter().zip(&p.output) {
            let err = (a - b).abs();
            if !(err <= max_err) {
                max_err = err;
                worst = Some(i);
            }
        }
    }
    Ok(ProbeReport {
        probes: probes.len(),
        max_abs_error: max_err,
        worst,
        tolerance,
    })
}
