//! Per-neuron training sets obtained by pushing the data through a trained
//! network and thresholding every unit's activation.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;

/// Activations at or above this value read as 1.
pub const THRESHOLD: f64 = 0.5;

/// Activations strictly inside this band are reported as poorly saturated.
pub const SATURATION_BAND: (f64, f64) = (0.05, 0.95);

/// Share of mid-band activations above which the pipeline warns.
pub const SATURATION_WARNING: f64 = 0.05;

pub fn binarize(a: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::ActivationOutOfRange(a));
    }
    Ok(u8::from(a >= THRESHOLD))
}

/// A non-input unit: `layer` counts weight layers from 1, so the first hidden
/// layer is 1 and the output layer is `layers.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub unit: usize,
}

impl NeuronId {
    pub fn new(layer: usize, unit: usize) -> Self {
        NeuronId { layer, unit }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}_{}", self.layer, self.unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    Binary,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronSampleSet {
    pub neuron: NeuronId,
    pub input_names: Vec<String>,
    pub input_kinds: Vec<InputKind>,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<u8>,
}

impl NeuronSampleSet {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// `Some(bit)` if the unit produced the same bit on every instance.
    pub fn constant_output(&self) -> Option<u8> {
        let first = *self.outputs.first()?;
        self.outputs.iter().all(|&b| b == first).then_some(first)
    }

    /// Rows restricted to `indices`.
    pub fn subset(&self, indices: &[usize]) -> NeuronSampleSet {
        NeuronSampleSet {
            neuron: self.neuron,
            input_names: self.input_names.clone(),
            input_kinds: self.input_kinds.clone(),
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            outputs: indices.iter().map(|&i| self.outputs[i]).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.input_names.join(",");
        writeln!(out, ",{}", self.neuron).unwrap();
        for (x, y) in self.inputs.iter().zip(&self.outputs) {
            for v in x {
                write!(out, "{v},").unwrap();
            }
            writeln!(out, "{y}").unwrap();
        }
        out
    }
}

/// Binarized activations of every non-input layer for one instance.
pub fn binary_trace(net: &Network, x: &[f64]) -> Result<Vec<Vec<u8>>> {
    let trace = net.forward(x)?;
    trace.layers[1..]
        .iter()
        .map(|layer| layer.iter().map(|&a| binarize(a)).collect())
        .collect()
}

/// Builds one sample set per non-input unit, ordered by layer then unit.
///
/// First-layer units see the encoded features unchanged; deeper units see
/// the binarized outputs of the layer below.
pub fn collect_neuron_samples(net: &Network, ds: &Dataset) -> Result<Vec<NeuronSampleSet>> {
    if !ds.encoded {
        return Err(Error::InvalidArgument("dataset must be encoded".into()));
    }
    if ds.width() != net.input_width() {
        return Err(Error::Dimension {
            expected: net.input_width(),
            found: ds.width(),
        });
    }
    let traces: Vec<Vec<Vec<u8>>> = ds.rows.iter().map(|x| binary_trace(net, x)).collect::<Result<_>>()?;

    let mut sets = Vec::with_capacity(net.unit_count());
    for (k, layer) in net.layers.iter().enumerate() {
        let (names, kinds, inputs): (Vec<String>, Vec<InputKind>, Vec<Vec<f64>>) = if k == 0 {
            (
                ds.feature_names(),
                ds.schema
                    .iter()
                    .map(|f| {
                        if f.is_real() {
                            InputKind::Real
                        } else {
                            InputKind::Binary
                        }
                    })
                    .collect(),
                ds.rows.clone(),
            )
        } else {
            (
                (0..layer.inputs).map(|j| NeuronId::new(k, j).to_string()).collect(),
                vec![InputKind::Binary; layer.inputs],
                traces
                    .iter()
                    .map(|t| t[k - 1].iter().map(|&b| f64::from(b)).collect())
                    .collect(),
            )
        };
        for unit in 0..layer.outputs {
            sets.push(NeuronSampleSet {
                neuron: NeuronId::new(k + 1, unit),
                input_names: names.clone(),
                input_kinds: kinds.clone(),
                inputs: inputs.clone(),
                outputs: traces.iter().map(|t| t[k][unit]).collect(),
            });
        }
    }
    Ok(sets)
}

/// Fraction of non-input activations strictly inside [`SATURATION_BAND`].
pub fn unsaturated_fraction(net: &Network, rows: &[Vec<f64>]) -> Result<f64> {
    let (lo, hi) = SATURATION_BAND;
    let mut mid = 0usize;
    let mut total = 0usize;
    for x in rows {
        let trace = net.forward(x)?;
        for layer in &trace.layers[1..] {
            total += layer.len();
            mid += layer.iter().filter(|&&a| a > lo && a < hi).count();
        }
    }
    Ok(if total == 0 { 0.0 } else { mid as f64 / total as f64 })
}
