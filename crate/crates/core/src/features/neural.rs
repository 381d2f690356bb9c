//! Forward pass for exported feed-forward networks (dense and 1-D convolution
//! layers). Training happens elsewhere; this module only reads weights files.
//!
//! Weights file layout (JSON):
//!
//! ```json
//! {"input_dim": 4, "output_dim": 2, "layers": [
//!   {"type": "conv1d", "weights": [[[1, 1]]], "bias": [0], "activation": "linear",
//!    "kernel": 2, "stride": 2, "in_channels": 1, "out_channels": 1}
//! ]}
//! ```
//!
//! Dense weights are `[out][in]`, convolution weights `[out_channels][in_channels][kernel]`.
//! A flat activation vector feeding a convolution is read channel-major
//! (`x[c * len + t]`), and convolution outputs are flattened the same way.
//! Convolutions take an optional `"padding"`: `"valid"` (default) or `"same"`
//! (output length `ceil(len / stride)`, zero padding split with the smaller half
//! on the left). Layers of type `"dropout"` are skipped at inference.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Linear,
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => {
                let slope = other
                    .strip_prefix("leaky_relu:")
                    .ok_or_else(|| format!("unknown activation `{other}`"))?
                    .parse::<f64>()
                    .map_err(|e| format!("bad leaky_relu slope: {e}"))?;
                if slope > 0.0 && slope < 1.0 {
                    Ok(Activation::LeakyRelu(slope))
                } else {
                    Err(format!("leaky_relu slope must lie in (0, 1), got {slope}"))
                }
            }
        }
    }

    fn name(self) -> String {
        match self {
            Activation::Linear => "linear".into(),
            Activation::Relu => "relu".into(),
            Activation::LeakyRelu(s) => format!("leaky_relu:{s}"),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Tanh => "tanh".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    Same,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NeuralLayer {
    Dense {
        input: usize,
        output: usize,
        /// Row-major `output x input`.
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        /// `out_channels x in_channels x kernel`, row-major.
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    },
}

impl NeuralLayer {
    /// Flat output length for a flat input of length `len`.
    fn output_len(&self, len: usize) -> std::result::Result<usize, String> {
        match self {
            NeuralLayer::Dense { input, output, .. } => {
                if len != *input {
                    return Err(format!("dense layer expects {input} inputs, receives {len}"));
                }
                Ok(*output)
            }
            NeuralLayer::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                if len % in_channels != 0 {
                    return Err(format!(
                        "input of length {len} does not split into {in_channels} channels"
                    ));
                }
                let steps = conv_steps(len / in_channels, *kernel, *stride, *padding)?;
                Ok(steps.0 * out_channels)
            }
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        match self {
            NeuralLayer::Dense {
                input,
                weights,
                bias,
                activation,
                ..
            } => weights
                .chunks_exact(*input)
                .zip(bias)
                .map(|(row, b)| {
                    let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
                    activation.apply(s + b)
                })
                .collect(),
            NeuralLayer::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                weights,
                bias,
                activation,
            } => {
                let len = x.len() / in_channels;
                let (out_len, pad_left) =
                    conv_steps(len, *kernel, *stride, *padding).expect("validated at load");
                let mut y = vec![0.0; out_channels * out_len];
                for o in 0..*out_channels {
                    for t in 0..out_len {
                        let start = (t * stride) as isize - pad_left as isize;
                        let mut s = bias[o];
                        for c in 0..*in_channels {
                            let w = &weights[(o * in_channels + c) * kernel..][..*kernel];
                            let xc = &x[c * len..(c + 1) * len];
                            for (j, wj) in w.iter().enumerate() {
                                let idx = start + j as isize;
                                if idx >= 0 && (idx as usize) < len {
                                    s += wj * xc[idx as usize];
                                }
                            }
                        }
                        y[o * out_len + t] = activation.apply(s);
                    }
                }
                y
            }
        }
    }
}

/// `(output length, left padding)` of a convolution over `len` positions.
fn conv_steps(
    len: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> std::result::Result<(usize, usize), String> {
    match padding {
        Padding::Valid => {
            if len < kernel {
                return Err(format!("input length {len} shorter than kernel {kernel}"));
            }
            Ok(((len - kernel) / stride + 1, 0))
        }
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(len);
            Ok((out, total / 2))
        }
    }
}

/// A validated network: the dimension chain runs from `input_dim` to `output_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct NeuralNet {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<NeuralLayer>,
}

impl NeuralNet {
    pub fn new(input_dim: usize, output_dim: usize, layers: Vec<NeuralLayer>) -> Result<Self> {
        let mut len = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            check_layer_shapes(layer).map_err(|m| Error::parse(Some(i), m))?;
            len = layer.output_len(len).map_err(|m| Error::parse(Some(i), m))?;
        }
        if len != output_dim {
            return Err(Error::parse(
                None,
                format!("network produces {len} outputs, declared output_dim is {output_dim}"),
            ));
        }
        Ok(Self {
            input_dim,
            output_dim,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[NeuralLayer] {
        &self.layers
    }

    pub fn forward(&self, sample: &[f64]) -> Result<Vec<f64>> {
        if sample.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "network expects {} inputs, got {}",
                self.input_dim,
                sample.len()
            )));
        }
        let mut x = sample.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("layer {i}"), "non-finite activation"));
            }
        }
        Ok(x)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawNet =
            serde_json::from_str(text).map_err(|e| Error::parse(None, e.to_string()))?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&RawNet::from(self.clone())).expect("plain data serializes")
    }
}

fn check_layer_shapes(layer: &NeuralLayer) -> std::result::Result<(), String> {
    match layer {
        NeuralLayer::Dense {
            input,
            output,
            weights,
            bias,
            ..
        } => {
            if *input == 0 || *output == 0 {
                return Err("dense layer has an empty dimension".into());
            }
            if weights.len() != input * output {
                return Err(format!(
                    "dense weights have {} entries, expected {output}x{input}",
                    weights.len()
                ));
            }
            if bias.len() != *output {
                return Err(format!("bias has length {}, expected {output}", bias.len()));
            }
        }
        NeuralLayer::Conv1d {
            in_channels,
            out_channels,
            kernel,
            stride,
            weights,
            bias,
            ..
        } => {
            if *in_channels == 0 || *out_channels == 0 || *kernel == 0 || *stride == 0 {
                return Err("conv1d channels, kernel and stride must be positive".into());
            }
            if weights.len() != out_channels * in_channels * kernel {
                return Err(format!(
                    "conv1d weights have {} entries, expected {out_channels}x{in_channels}x{kernel}",
                    weights.len()
                ));
            }
            if bias.len() != *out_channels {
                return Err(format!(
                    "bias has length {}, expected {out_channels}",
                    bias.len()
                ));
            }
        }
    }
    if weights_of(layer).iter().chain(bias_of(layer)).any(|v| !v.is_finite()) {
        return Err("non-finite weight".into());
    }
    Ok(())
}

fn weights_of(layer: &NeuralLayer) -> &[f64] {
    match layer {
        NeuralLayer::Dense { weights, .. } | NeuralLayer::Conv1d { weights, .. } => weights,
    }
}

fn bias_of(layer: &NeuralLayer) -> &[f64] {
    match layer {
        NeuralLayer::Dense { bias, .. } | NeuralLayer::Conv1d { bias, .. } => bias,
    }
}

pub fn load_weights_file(path: impl AsRef<Path>) -> Result<NeuralNet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse(None, format!("cannot read {}: {e}", path.display())))?;
    NeuralNet::from_json(&text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawNet {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<RawLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawLayer {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    weights: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    padding: Option<String>,
}

/// Flattens a nested numeric array whose shape must equal `shape`.
fn flatten(value: &Value, shape: &[usize], out: &mut Vec<f64>) -> std::result::Result<(), String> {
    match (shape.split_first(), value) {
        (None, Value::Number(n)) => {
            out.push(n.as_f64().ok_or("weight is not a finite number")?);
            Ok(())
        }
        (Some((&len, rest)), Value::Array(items)) => {
            if items.len() != len {
                return Err(format!("weights array has length {}, expected {len}", items.len()));
            }
            items.iter().try_for_each(|v| flatten(v, rest, out))
        }
        _ => Err("weights nesting does not match the layer shape".into()),
    }
}

fn array_len(v: &Value) -> std::result::Result<usize, String> {
    v.as_array()
        .map(Vec::len)
        .ok_or_else(|| "weights must be a nested array".to_string())
}

impl RawLayer {
    fn into_layer(self) -> std::result::Result<Option<NeuralLayer>, String> {
        let activation = || -> std::result::Result<Activation, String> {
            Activation::parse(self.activation.as_deref().ok_or("missing activation")?)
        };
        match self.kind.as_str() {
            "dropout" => Ok(None),
            "dense" => {
                let output = array_len(&self.weights)?;
                let input = self
                    .weights
                    .get(0)
                    .map(array_len)
                    .transpose()?
                    .ok_or("dense weights are empty")?;
                let mut weights = Vec::with_capacity(input * output);
                flatten(&self.weights, &[output, input], &mut weights)?;
                let bias = self.bias.clone().unwrap_or_else(|| vec![0.0; output]);
                Ok(Some(NeuralLayer::Dense {
                    input,
                    output,
                    weights,
                    bias,
                    activation: activation()?,
                }))
            }
            "conv1d" => {
                let kernel = self.kernel.ok_or("conv1d needs `kernel`")?;
                let stride = self.stride.ok_or("conv1d needs `stride`")?;
                let in_channels = self.in_channels.ok_or("conv1d needs `in_channels`")?;
                let out_channels = self.out_channels.ok_or("conv1d needs `out_channels`")?;
                let padding = match self.padding.as_deref() {
                    None | Some("valid") => Padding::Valid,
                    Some("same") => Padding::Same,
                    Some(other) => return Err(format!("unknown padding `{other}`")),
                };
                let mut weights = Vec::with_capacity(out_channels * in_channels * kernel);
                flatten(&self.weights, &[out_channels, in_channels, kernel], &mut weights)?;
                let bias = self.bias.clone().unwrap_or_else(|| vec![0.0; out_channels]);
                Ok(Some(NeuralLayer::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weights,
                    bias,
                    activation: activation()?,
                }))
            }
            other => Err(format!("unknown layer type `{other}`")),
        }
    }
}

impl TryFrom<RawNet> for NeuralNet {
    type Error = Error;

    fn try_from(raw: RawNet) -> Result<Self> {
        let mut layers = Vec::with_capacity(raw.layers.len());
        for (i, l) in raw.layers.into_iter().enumerate() {
            if let Some(layer) = l.into_layer().map_err(|m| Error::parse(Some(i), m))? {
                // Chain errors should name the index in the file, not in the filtered list.
                check_layer_shapes(&layer).map_err(|m| Error::parse(Some(i), m))?;
                layers.push((i, layer));
            }
        }
        let mut len = raw.input_dim;
        for (i, layer) in &layers {
            len = layer.output_len(len).map_err(|m| Error::parse(Some(*i), m))?;
        }
        NeuralNet::new(
            raw.input_dim,
            raw.output_dim,
            layers.into_iter().map(|(_, l)| l).collect(),
        )
    }
}

fn nest(values: &[f64], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => Value::from(values[0]),
        Some((&len, rest)) => {
            let stride: usize = rest.iter().product();
            Value::Array((0..len).map(|i| nest(&values[i * stride..], rest)).collect())
        }
    }
}

impl From<NeuralNet> for RawNet {
    fn from(net: NeuralNet) -> Self {
        let layers = net
            .layers
            .into_iter()
            .map(|layer| match layer {
                NeuralLayer::Dense {
                    input,
                    output,
                    weights,
                    bias,
                    activation,
                } => RawLayer {
                    kind: "dense".into(),
                    weights: nest(&weights, &[output, input]),
                    bias: Some(bias),
                    activation: Some(activation.name()),
                    kernel: None,
                    stride: None,
                    in_channels: None,
                    out_channels: None,
                    padding: None,
                },
                NeuralLayer::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weights,
                    bias,
                    activation,
                } => RawLayer {
                    kind: "conv1d".into(),
                    weights: nest(&weights, &[out_channels, in_channels, kernel]),
                    bias: Some(bias),
                    activation: Some(activation.name()),
                    kernel: Some(kernel),
                    stride: Some(stride),
                    in_channels: Some(in_channels),
                    out_channels: Some(out_channels),
                    padding: Some(match padding {
                        Padding::Valid => "valid".into(),
                        Padding::Same => "same".into(),
                    }),
                },
            })
            .collect();
        RawNet {
            input_dim: net.input_dim,
            output_dim: net.output_dim,
            layers,
            metadata: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_identity() {
        let net = NeuralNet::from_json(
            r#"{"input_dim": 2, "output_dim": 2, "layers": [
                {"type": "dense", "weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "linear"}
            ]}"#,
        )
        .unwrap();
        assert_eq!(net.forward(&[3.5, -2.0]).unwrap(), vec![3.5, -2.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn leaky_relu_slope() {
        assert_eq!(Activation::parse("leaky_relu:0.2").unwrap().apply(-1.0), -0.2);
        assert!(Activation::parse("leaky_relu:1.5").is_err());
        assert!(Activation::parse("swish").is_err());
    }

    #[test]
    fn conv1d_manual_example() {
        let net = NeuralNet::from_json(
            r#"{"input_dim": 4, "output_dim": 2, "layers": [
                {"type": "conv1d", "weights": [[[1, 1]]], "bias": [0], "activation": "linear",
                 "kernel": 2, "stride": 2, "in_channels": 1, "out_channels": 1}
            ]}"#,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn conv1d_multi_channel_matches_direct_sum() {
        // Two input channels of length 3, two output channels, kernel 2, stride 1.
        let w = [[[1.0, 2.0], [0.5, -1.0]], [[0.0, 1.0], [1.0, 0.0]]];
        let layer = NeuralLayer::Conv1d {
            in_channels: 2,
            out_channels: 2,
            kernel: 2,
            stride: 1,
            padding: Padding::Valid,
            weights: w.iter().flatten().flatten().copied().collect(),
            bias: vec![0.1, -0.1],
            activation: Activation::Linear,
        };
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = layer.forward(&x);
        let xc = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let bias = [0.1, -0.1];
        for o in 0..2 {
            for t in 0..2 {
                let mut s = bias[o];
                for c in 0..2 {
                    for j in 0..2 {
                        s += w[o][c][j] * xc[c][t + j];
                    }
                }
                assert!((y[o * 2 + t] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_padding_lengths() {
        assert_eq!(conv_steps(1799, 4, 2, Padding::Same).unwrap(), (900, 1));
        assert_eq!(conv_steps(900, 4, 2, Padding::Same).unwrap().0, 450);
        assert_eq!(conv_steps(4, 2, 2, Padding::Valid).unwrap(), (2, 0));
        assert!(conv_steps(1, 2, 1, Padding::Valid).is_err());
    }

    #[test]
    fn bias_mismatch_names_layer() {
        let err = NeuralNet::from_json(
            r#"{"input_dim": 2, "output_dim": 2, "layers": [
                {"type": "dense", "weights": [[1, 0], [0, 1]], "bias": [0], "activation": "linear"}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { layer: Some(0), .. }), "{err}");
    }

    #[test]
    fn broken_chain_and_unknown_activation() {
        let err = NeuralNet::from_json(
            r#"{"input_dim": 3, "output_dim": 2, "layers": [
                {"type": "dense", "weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "linear"}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { layer: Some(0), .. }));
        let err = NeuralNet::from_json(
            r#"{"input_dim": 2, "output_dim": 2, "layers": [
                {"type": "dense", "weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "gelu"}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { layer: Some(0), .. }));
    }

    #[test]
    fn dropout_is_skipped_and_index_kept() {
        let net = NeuralNet::from_json(
            r#"{"input_dim": 2, "output_dim": 1, "layers": [
                {"type": "dense", "weights": [[1, 1], [1, -1]], "bias": [0, 0], "activation": "relu"},
                {"type": "dropout"},
                {"type": "dense", "weights": [[1, 1]], "bias": [0.5], "activation": "linear"}
            ]}"#,
        )
        .unwrap();
        assert_eq!(net.layers().len(), 2);
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![3.5]);

        let err = NeuralNet::from_json(
            r#"{"input_dim": 2, "output_dim": 1, "layers": [
                {"type": "dropout"},
                {"type": "dense", "weights": [[1, 1, 1]], "bias": [0], "activation": "linear"}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { layer: Some(1), .. }), "{err}");
    }

    #[test]
    fn non_finite_activation_names_layer() {
        let net = NeuralNet::new(
            1,
            1,
            vec![NeuralLayer::Dense {
                input: 1,
                output: 1,
                weights: vec![1e300],
                bias: vec![0.0],
                activation: Activation::Linear,
            }],
        )
        .unwrap();
        let err = net.forward(&[1e300]).unwrap_err();
        assert!(matches!(err, Error::Numeric { ref location, .. } if location == "layer 0"));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"input_dim": 6, "output_dim": 3, "layers": [
            {"type": "conv1d", "weights": [[[0.5, -1, 2]]], "bias": [0.25], "activation": "leaky_relu:0.2",
             "kernel": 3, "stride": 2, "in_channels": 1, "out_channels": 1, "padding": "same"}
        ]}"#;
        let net = NeuralNet::from_json(text).unwrap();
        let again = NeuralNet::from_json(&net.to_json()).unwrap();
        assert_eq!(net, again);
    }
}
