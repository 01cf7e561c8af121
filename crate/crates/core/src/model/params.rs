use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::tensor::Tensor;

const FORMAT: &str = "wsn-anomaly-checkpoint";
const VERSION: u32 = 1;

/// Every learnable tensor of the autoencoder, by name, together with the
/// configuration and graph it was built for.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub n_modalities: usize,
    pub adjacency: AdjacencyMatrix,
    names: Vec<String>,
    tensors: Vec<Tensor>,
    /// Set once training has completed; scoring refuses untrained params.
    pub trained: bool,
    /// Detection threshold, once calibrated.
    pub threshold: Option<f64>,
}

/// Whether weight decay applies to a parameter. Biases and the attention
/// query/key projections are exempt so attention can stay sharp.
pub fn is_decayed(name: &str) -> bool {
    let last = name.rsplit('.').next().unwrap_or(name);
    let leaf = if last.chars().all(|c| c.is_ascii_digit()) {
        name.rsplit('.').nth(1).unwrap_or(name)
    } else {
        last
    };
    !(leaf.starts_with('b') || matches!(leaf, "w_q" | "w_k" | "w_o"))
}

/// Names and shapes of all parameters, in slot order.
pub fn layout(cfg: &ModelConfig, m: usize) -> Vec<(String, Vec<usize>)> {
    let c = cfg.component_len();
    let mut out = vec![
        ("trend.mlp.w1".to_string(), vec![c, cfg.hidden]),
        ("trend.mlp.b1".to_string(), vec![cfg.hidden]),
        ("trend.mlp.w2".to_string(), vec![cfg.hidden, c]),
        ("trend.mlp.b2".to_string(), vec![c]),
        ("seasonal.fdam.w_q".to_string(), vec![m, cfg.attention_dim]),
        ("seasonal.fdam.w_k".to_string(), vec![m, cfg.attention_dim]),
        ("seasonal.fdam.w_v".to_string(), vec![m, m]),
    ];
    for enc in ["trend", "seasonal"] {
        for i in 0..m {
            out.push((format!("{enc}.fusion.w_o.{i}"), vec![c, cfg.fusion_dim]));
            out.push((format!("{enc}.fusion.w_k.{i}"), vec![c, cfg.fusion_dim]));
            out.push((format!("{enc}.fusion.w_v.{i}"), vec![c, c]));
        }
        for l in 0..cfg.depth {
            out.push((format!("{enc}.graph.{l}"), vec![m * c, m * c]));
        }
    }
    out.push(("output.w".to_string(), vec![cfg.window, cfg.window]));
    out.push(("output.b".to_string(), vec![cfg.window]));
    out
}

impl ModelParams {
    /// Fresh parameters: matrices uniform in `±1/√fan_in`, biases zero.
    pub fn init(cfg: &ModelConfig, n_modalities: usize, adjacency: AdjacencyMatrix) -> Result<Self> {
        cfg.validate()?;
        if n_modalities == 0 {
            return Err(Error::Config("model needs at least one modality".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (names, tensors) = layout(cfg, n_modalities)
            .into_iter()
            .map(|(name, shape)| {
                let t = if shape.len() == 1 {
                    Tensor::zeros(&shape)
                } else {
                    Tensor::uniform(&shape, 1.0 / (shape[0] as f64).sqrt(), &mut rng)
                };
                (name, t)
            })
            .unzip();
        Ok(Self {
            config: cfg.clone(),
            n_modalities,
            adjacency,
            names,
            tensors,
            trained: false,
            threshold: None,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Panics on unknown names; names come from [`layout`].
    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors[self.slot(name).unwrap_or_else(|| panic!("unknown parameter {name}"))]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        let i = self.slot(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        &mut self.tensors[i]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, &self.to_checkpoint()).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        Ok(buf)
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_checkpoint_bytes()?)))
    }

    pub fn read_checkpoint<R: Read>(input: R) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(input).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.config.validate()?;
        let expected = layout(&ck.config, ck.n_modalities);
        if expected.len() != ck.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, configuration needs {}",
                ck.params.len(),
                expected.len()
            )));
        }
        for ((name, shape), p) in expected.iter().zip(&ck.params) {
            if *name != p.name || shape.as_slice() != p.value.shape() || p.value.len() != shape.iter().product::<usize>() {
                return Err(Error::Format(format!("checkpoint tensor {} does not match layout", p.name)));
            }
        }
        let n = ck.node_ids.len();
        if ck.adjacency.shape() != [n, n] {
            return Err(Error::Format("checkpoint adjacency does not match node list".into()));
        }
        let (names, tensors) = ck.params.into_iter().map(|p| (p.name, p.value)).unzip();
        Ok(Self {
            config: ck.config,
            n_modalities: ck.n_modalities,
            adjacency: AdjacencyMatrix {
                weights: ck.adjacency,
                node_ids: ck.node_ids,
            },
            names,
            tensors,
            trained: ck.trained,
            threshold: ck.threshold,
        })
    }

    fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            config: self.config.clone(),
            n_modalities: self.n_modalities,
            trained: self.trained,
            threshold: self.threshold,
            node_ids: self.adjacency.node_ids.clone(),
            adjacency: self.adjacency.weights.clone(),
            params: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(n, t)| NamedTensor {
                    name: n.clone(),
                    value: t.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    value: Tensor,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    n_modalities: usize,
    trained: bool,
    threshold: Option<f64>,
    node_ids: Vec<u32>,
    adjacency: Tensor,
    params: Vec<NamedTensor>,
}
