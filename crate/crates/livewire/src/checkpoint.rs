//! Checkpoint serialization: a self-describing JSON document holding
//! layer widths, the step counter, per-layer norm state, and every edge
//! with its weight, momentum buffer and age. Reals round-trip exactly
//! (shortest-representation float formatting).

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{validate_edge_list, EdgeState, Network, NodeRef, NormState, Violation};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("checkpoint violates network invariants: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("norm_state has {found} layers, expected {expected} hidden layers")]
    NormShape { expected: usize, found: usize },
    #[error("norm_state layer {layer} has {found} nodes, expected {expected}")]
    NormWidth {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("layer_widths must list at least 2 positive widths")]
    BadShape,
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    src_layer: usize,
    src_index: usize,
    dst_layer: usize,
    dst_index: usize,
    weight: f64,
    momentum: f64,
    age: u64,
}

#[derive(Serialize, Deserialize)]
struct NormLayerRecord {
    scale: Vec<f64>,
    shift: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    layer_widths: Vec<usize>,
    step_count: u64,
    norm_state: Vec<NormLayerRecord>,
    edges: Vec<EdgeRecord>,
}

/// Serialize a network to its canonical checkpoint string. Edges appear
/// in lexicographic order, so equal networks produce identical bytes.
pub fn to_string(net: &Network) -> String {
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        layer_widths: net.layer_widths().to_vec(),
        step_count: net.step_count(),
        norm_state: net
            .norm_layers()
            .iter()
            .map(|layer| NormLayerRecord {
                scale: layer.iter().map(|s| s.scale).collect(),
                shift: layer.iter().map(|s| s.shift).collect(),
                running_mean: layer.iter().map(|s| s.running_mean).collect(),
                running_var: layer.iter().map(|s| s.running_var).collect(),
            })
            .collect(),
        edges: net
            .edges()
            .map(|e| EdgeRecord {
                src_layer: e.src.layer,
                src_index: e.src.index,
                dst_layer: e.dst.layer,
                dst_index: e.dst.index,
                weight: e.weight,
                momentum: e.momentum,
                age: e.age,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("checkpoint serialization cannot fail")
}

pub fn save(net: &Network, path: &Path) -> Result<(), CheckpointError> {
    let body = to_string(net);
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(body.as_bytes()).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

pub fn from_str(body: &str, origin: &str) -> Result<Network, CheckpointError> {
    let file: CheckpointFile =
        serde_json::from_str(body).map_err(|source| CheckpointError::Parse {
            path: origin.to_string(),
            source,
        })?;
    if file.format_version != FORMAT_VERSION {
        return Err(CheckpointError::Version(file.format_version));
    }
    if file.layer_widths.len() < 2 || file.layer_widths.iter().any(|&w| w == 0) {
        return Err(CheckpointError::BadShape);
    }

    let keys: Vec<(NodeRef, NodeRef)> = file
        .edges
        .iter()
        .map(|e| {
            (
                NodeRef::new(e.src_layer, e.src_index),
                NodeRef::new(e.dst_layer, e.dst_index),
            )
        })
        .collect();
    let violations = validate_edge_list(&file.layer_widths, keys.iter().copied());
    if !violations.is_empty() {
        return Err(CheckpointError::Invalid(violations));
    }

    let hidden = file.layer_widths.len() - 2;
    if file.norm_state.len() != hidden {
        return Err(CheckpointError::NormShape {
            expected: hidden,
            found: file.norm_state.len(),
        });
    }

    let mut net = Network::new(file.layer_widths.clone()).map_err(|_| CheckpointError::BadShape)?;
    for (h, rec) in file.norm_state.iter().enumerate() {
        let width = file.layer_widths[h + 1];
        for field_len in [
            rec.scale.len(),
            rec.shift.len(),
            rec.running_mean.len(),
            rec.running_var.len(),
        ] {
            if field_len != width {
                return Err(CheckpointError::NormWidth {
                    layer: h + 1,
                    expected: width,
                    found: field_len,
                });
            }
        }
        for i in 0..width {
            net.norm_layers_mut()[h][i] = NormState {
                scale: rec.scale[i],
                shift: rec.shift[i],
                running_mean: rec.running_mean[i],
                running_var: rec.running_var[i],
            };
        }
    }
    for (key, rec) in keys.into_iter().zip(&file.edges) {
        net.insert_edge_raw(
            key.0,
            key.1,
            EdgeState {
                weight: rec.weight,
                momentum: rec.momentum,
                age: rec.age,
            },
        );
    }
    net.set_step_count(file.step_count);

    let violations = net.validate();
    if !violations.is_empty() {
        return Err(CheckpointError::Invalid(violations));
    }
    Ok(net)
}

pub fn load(path: &Path) -> Result<Network, CheckpointError> {
    let body = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_str(&body, &path.display().to_string())
}
