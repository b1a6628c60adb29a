//! `.gnet.json` weight files.
//!
//! Schema: `{"input_dim":int,"radius":float,"layers":[{"w":[[...]],"b":[...],"act":"elu"}]}`
//! with every number written to 17 significant digits. Layers may carry an
//! optional `"elu_scale"` when it differs from 1.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{Activation, ActivationKind, GeneratorNet, Layer};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const WEIGHT_FILE_EXTENSION: &str = ".gnet.json";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    input_dim: usize,
    radius: f64,
    layers: Vec<RawLayer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: String,
    #[serde(default)]
    elu_scale: Option<f64>,
}

fn fmt_f64(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").unwrap();
}

fn fmt_list(out: &mut String, xs: &[f64]) {
    out.push('[');
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        fmt_f64(out, *x);
    }
    out.push(']');
}

pub fn net_to_json(net: &GeneratorNet) -> String {
    let mut out = String::new();
    write!(out, "{{\"input_dim\":{},\"radius\":", net.input_dim()).unwrap();
    fmt_f64(&mut out, net.radius());
    out.push_str(",\"layers\":[\n");
    for (l, layer) in net.layers().iter().enumerate() {
        if l > 0 {
            out.push_str(",\n");
        }
        out.push_str("{\"w\":[");
        for i in 0..layer.output_dim() {
            if i > 0 {
                out.push(',');
            }
            fmt_list(&mut out, layer.weights.row(i));
        }
        out.push_str("],\"b\":");
        fmt_list(&mut out, &layer.bias);
        write!(out, ",\"act\":\"{}\"", layer.activation.kind.name()).unwrap();
        if layer.activation.kind == ActivationKind::Elu && layer.activation.elu_scale != 1.0 {
            out.push_str(",\"elu_scale\":");
            fmt_f64(&mut out, layer.activation.elu_scale);
        }
        out.push('}');
    }
    out.push_str("\n]}\n");
    out
}

pub fn net_from_json(text: &str) -> Result<GeneratorNet> {
    let raw: RawNet = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let mut layers = Vec::with_capacity(raw.layers.len());
    let mut expected_in = raw.input_dim;
    for (l, rl) in raw.layers.into_iter().enumerate() {
        let layer_err = |message: String| Error::Layer { layer: l, message };
        let kind = ActivationKind::parse(&rl.act).ok_or_else(|| layer_err(format!("unknown activation {:?}", rl.act)))?;
        let rows = rl.w.len();
        if rows == 0 {
            return Err(layer_err("empty weight matrix".into()));
        }
        let cols = rl.w[0].len();
        if cols != expected_in {
            return Err(layer_err(format!("weight matrix has {cols} columns, expected {expected_in}")));
        }
        if let Some(i) = rl.w.iter().position(|r| r.len() != cols) {
            return Err(layer_err(format!("weight row {i} has {} entries, expected {cols}", rl.w[i].len())));
        }
        if rl.b.len() != rows {
            return Err(layer_err(format!("bias has {} entries, expected {rows}", rl.b.len())));
        }
        let weights = Matrix::from_rows(&rl.w).map_err(|e| layer_err(e.to_string()))?;
        let activation = Activation {
            kind,
            elu_scale: rl.elu_scale.unwrap_or(1.0),
        };
        layers.push(Layer::new(weights, rl.b, activation).map_err(|e| layer_err(e.to_string()))?);
        expected_in = rows;
    }
    GeneratorNet::new(layers, raw.radius)
}

pub fn save_net(net: &GeneratorNet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, net_to_json(net))?;
    Ok(())
}

pub fn load_net(path: impl AsRef<Path>) -> Result<GeneratorNet> {
    let text = std::fs::read_to_string(path)?;
    net_from_json(&text)
}
