//! Dense feed-forward ReLU networks, binary weight masks, and subnetwork
//! evaluation.
//!
//! A depth-l network evaluates `W(l) relu(W(l-1) relu(... relu(W(1) x)))`:
//! ReLU after every layer except the last, which stays linear. A subnetwork
//! is the elementwise product `B (.) W` with a congruent 0/1 mask. Masks
//! from the constructions are extremely sparse, so [`MaskedEvaluator`]
//! evaluates subnetworks by touching active entries only; the dense
//! [`apply_mask`] product exists for small instances and round-trips.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub fn relu(t: f64) -> f64 {
    t.max(0.0)
}

/// Feed-forward network with ReLU hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct DenseNetwork {
    layers: Vec<Matrix>,
}

/// On-disk JSON schema: `{"layers": [{"rows", "cols", "data"}], "last_layer_linear": true}`.
#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    layers: Vec<Matrix>,
    last_layer_linear: bool,
}

impl From<DenseNetwork> for NetworkRepr {
    fn from(net: DenseNetwork) -> Self {
        NetworkRepr {
            layers: net.layers,
            last_layer_linear: true,
        }
    }
}

impl TryFrom<NetworkRepr> for DenseNetwork {
    type Error = Error;
    fn try_from(repr: NetworkRepr) -> Result<Self> {
        if !repr.last_layer_linear {
            return Err(Error::InvalidParam(
                "only networks with a linear output layer are supported".into(),
            ));
        }
        DenseNetwork::new(repr.layers)
    }
}

impl DenseNetwork {
    /// Checks the dimension chain: layer i+1 consumes layer i's output.
    pub fn new(layers: Vec<Matrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParam("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::Dimension {
                    expected: pair[0].rows(),
                    got: pair[1].cols(),
                });
            }
        }
        Ok(DenseNetwork { layers })
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Matrix {
        &self.layers[i]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows()
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.rows() * l.cols()).sum()
    }

    /// Composed evaluation with ReLU on all hidden layers, identity on the
    /// last.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut current = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = layer.mul_vec(&current)?;
            if i != last {
                next.iter_mut().for_each(|v| *v = relu(*v));
            }
            current = next;
        }
        Ok(current)
    }

    /// Scalar convenience for single-output networks.
    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64> {
        let out = self.forward(x)?;
        debug_assert_eq!(out.len(), 1);
        Ok(out[0])
    }

    /// Post-activation output of every layer, in order. The last entry is
    /// the network output.
    pub fn forward_trace(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = layer.mul_vec(&current)?;
            if i != last {
                next.iter_mut().for_each(|v| *v = relu(*v));
            }
            trace.push(next.clone());
            current = next;
        }
        Ok(trace)
    }
}

/// One {0,1} mask layer, congruent with a weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskLayerRepr", into = "MaskLayerRepr")]
pub struct MaskLayer {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct MaskLayerRepr {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl From<MaskLayer> for MaskLayerRepr {
    fn from(m: MaskLayer) -> Self {
        MaskLayerRepr {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl TryFrom<MaskLayerRepr> for MaskLayer {
    type Error = Error;
    fn try_from(repr: MaskLayerRepr) -> Result<Self> {
        if repr.data.len() != repr.rows * repr.cols {
            return Err(Error::Dimension {
                expected: repr.rows * repr.cols,
                got: repr.data.len(),
            });
        }
        if repr.data.iter().any(|&b| b > 1) {
            return Err(Error::InvalidParam("mask entries must be 0 or 1".into()));
        }
        Ok(MaskLayer {
            rows: repr.rows,
            cols: repr.cols,
            data: repr.data,
        })
    }
}

impl MaskLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MaskLayer {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        MaskLayer {
            rows,
            cols,
            data: vec![1; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c] == 1
    }

    pub fn set(&mut self, r: usize, c: usize, active: bool) {
        self.data[r * self.cols + c] = u8::from(active);
    }

    pub fn active_count(&self) -> usize {
        self.data.iter().map(|&b| b as usize).sum()
    }

    pub fn iter_active(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| (i / self.cols, i % self.cols))
    }
}

/// Per-layer {0,1} matrices defining a weight-subnetwork of a congruent
/// [`DenseNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMask {
    layers: Vec<MaskLayer>,
}

impl BinaryMask {
    pub fn new(layers: Vec<MaskLayer>) -> Self {
        BinaryMask { layers }
    }

    pub fn zeros_like(net: &DenseNetwork) -> Self {
        BinaryMask {
            layers: net
                .layers()
                .iter()
                .map(|l| MaskLayer::zeros(l.rows(), l.cols()))
                .collect(),
        }
    }

    pub fn ones_like(net: &DenseNetwork) -> Self {
        BinaryMask {
            layers: net
                .layers()
                .iter()
                .map(|l| MaskLayer::ones(l.rows(), l.cols()))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[MaskLayer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &MaskLayer {
        &self.layers[i]
    }

    pub fn layer_mut(&mut self, i: usize) -> &mut MaskLayer {
        &mut self.layers[i]
    }

    pub fn congruent_with(&self, net: &DenseNetwork) -> bool {
        self.layers.len() == net.depth()
            && self
                .layers
                .iter()
                .zip(net.layers())
                .all(|(m, w)| m.rows() == w.rows() && m.cols() == w.cols())
    }

    /// Number of 1-entries summed over layers.
    pub fn active_count(&self) -> usize {
        self.layers.iter().map(MaskLayer::active_count).sum()
    }

    pub fn active_count_per_layer(&self) -> Vec<usize> {
        self.layers.iter().map(MaskLayer::active_count).collect()
    }
}

/// Elementwise product `B (.) W`, leaving the input unchanged.
pub fn apply_mask(net: &DenseNetwork, mask: &BinaryMask) -> Result<DenseNetwork> {
    if !mask.congruent_with(net) {
        let (er, ec) = net
            .layers()
            .first()
            .map(|l| (l.rows(), l.cols()))
            .unwrap_or((0, 0));
        let (gr, gc) = mask
            .layers()
            .first()
            .map(|l| (l.rows(), l.cols()))
            .unwrap_or((0, 0));
        return Err(Error::Shape {
            expected_rows: er,
            expected_cols: ec,
            rows: gr,
            cols: gc,
        });
    }
    let layers = net
        .layers()
        .iter()
        .zip(mask.layers())
        .map(|(w, b)| {
            let mut out = Matrix::zeros(w.rows(), w.cols());
            for (r, c) in b.iter_active() {
                out[(r, c)] = w[(r, c)];
            }
            out
        })
        .collect();
    DenseNetwork::new(layers)
}

const DENSE_LIMIT: usize = 1 << 12;

enum ValueVec {
    Dense(Vec<f64>),
    /// Sorted by index; absent indices are exactly zero.
    Sparse {
        entries: Vec<(u32, f64)>,
    },
}

impl ValueVec {
    fn get(&self, i: u32) -> f64 {
        match self {
            ValueVec::Dense(v) => v[i as usize],
            ValueVec::Sparse { entries } => entries
                .binary_search_by_key(&i, |&(idx, _)| idx)
                .map(|pos| entries[pos].1)
                .unwrap_or(0.0),
        }
    }
}

struct SparseLayer {
    out_dim: usize,
    /// Active (row, col, weight) triples sorted by row.
    entries: Vec<(u32, u32, f64)>,
}

/// Mask-aware subnetwork evaluator: cost per input scales with the number
/// of active weights, not the (possibly enormous) layer widths.
pub struct MaskedEvaluator {
    layers: Vec<SparseLayer>,
    input_dim: usize,
}

impl MaskedEvaluator {
    pub fn new(net: &DenseNetwork, mask: &BinaryMask) -> Result<Self> {
        if !mask.congruent_with(net) {
            return Err(Error::InvalidParam(
                "mask shape does not match network".into(),
            ));
        }
        let layers = net
            .layers()
            .iter()
            .zip(mask.layers())
            .map(|(w, b)| {
                let mut entries: Vec<(u32, u32, f64)> = b
                    .iter_active()
                    .map(|(r, c)| (r as u32, c as u32, w[(r, c)]))
                    .collect();
                entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
                SparseLayer {
                    out_dim: w.rows(),
                    entries,
                }
            })
            .collect();
        Ok(MaskedEvaluator {
            layers,
            input_dim: net.input_dim(),
        })
    }

    pub fn active_count(&self) -> usize {
        self.layers.iter().map(|l| l.entries.len()).sum()
    }

    fn propagate(&self, layer: &SparseLayer, x: &ValueVec, is_last: bool) -> ValueVec {
        // Entries are sorted by row, so each output index is built up in one
        // contiguous run.
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(layer.entries.len());
        for &(r, c, w) in &layer.entries {
            let contribution = w * x.get(c);
            match out.last_mut() {
                Some((last_r, acc)) if *last_r == r => *acc += contribution,
                _ => out.push((r, contribution)),
            }
        }
        if !is_last {
            out.iter_mut().for_each(|(_, v)| *v = relu(*v));
        }
        if layer.out_dim <= DENSE_LIMIT {
            let mut dense = vec![0.0; layer.out_dim];
            for (r, v) in out {
                dense[r as usize] = v;
            }
            ValueVec::Dense(dense)
        } else {
            ValueVec::Sparse { entries: out }
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_with_taps(x, &[])?.0)
    }

    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64> {
        let out = self.forward(x)?;
        debug_assert_eq!(out.len(), 1);
        Ok(out[0])
    }

    /// Forward pass that also materializes the outputs of the requested
    /// layers (ascending indices; tap only layers of reasonable width).
    pub fn forward_with_taps(&self, x: &[f64], taps: &[usize]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut current = ValueVec::Dense(x.to_vec());
        let mut tapped = Vec::with_capacity(taps.len());
        for (i, layer) in self.layers.iter().enumerate() {
            current = self.propagate(layer, &current, i == last);
            if taps.contains(&i) {
                let dense = match &current {
                    ValueVec::Dense(v) => v.clone(),
                    ValueVec::Sparse { entries } => {
                        let mut v = vec![0.0; layer.out_dim];
                        for &(r, val) in entries {
                            v[r as usize] = val;
                        }
                        v
                    }
                };
                tapped.push(dense);
            }
        }
        let out = match current {
            ValueVec::Dense(v) => v,
            ValueVec::Sparse { entries } => {
                let dim = self.layers[last].out_dim;
                let mut v = vec![0.0; dim];
                for (r, val) in entries {
                    v[r as usize] = val;
                }
                v
            }
        };
        Ok((out, tapped))
    }
}
