//! Constructive weight-subnetwork builders.
//!
//! The builders form a ladder: approximate one coordinate map `x -> a x_i`
//! with two candidate neurons, sum such pieces into a linear map, wrap a
//! matched output coefficient around it for one ReLU neuron, tile neurons
//! into a layer, and stack layers into a deep network. Each rung splits its
//! error budget exactly the way its guarantee requires (eps/2s per
//! coordinate, eps/sqrt(n) per layer neuron, eps/2l per depth stage), so
//! measured errors stay attributable to the accounting.
//!
//! Candidate searches are deterministic: among all admissible candidates
//! the one minimizing the product mismatch wins, first match on ties.
//! Failure to find a candidate is [`Error::ConstructionFailed`] — the
//! probability-delta event of the guarantees, never a panic.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FailurePoint, Result, Side};
use crate::matrix::Matrix;
use crate::net::{BinaryMask, DenseNetwork, MaskLayer};

/// Named width requirements, one per construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma {
    /// Two-candidate approximation of `x -> a x_i`.
    OneCoord,
    /// Blocked sum approximating `x -> <w*, x>`.
    LinearFunc,
    /// Output coefficient + linear inner stage for one ReLU neuron.
    OneNeuron,
    /// Depth-3 subnetwork for a depth-2 target.
    ReluNetwork,
    /// One ReLU layer, vector-valued, l2 error.
    OneLayer,
    /// Depth-2l subnetwork for a depth-l target.
    Deep,
}

/// Instance parameters entering the width formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthParams {
    pub s: usize,
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RequiredWidth {
    Single { k: usize },
    Pair { k1: usize, k2: usize },
}

impl RequiredWidth {
    pub fn single(&self) -> usize {
        match *self {
            RequiredWidth::Single { k } => k,
            RequiredWidth::Pair { .. } => panic!("expected a single width"),
        }
    }

    pub fn pair(&self) -> (usize, usize) {
        match *self {
            RequiredWidth::Pair { k1, k2 } => (k1, k2),
            RequiredWidth::Single { .. } => panic!("expected a width pair"),
        }
    }
}

fn ceil_usize(x: f64) -> usize {
    x.ceil().max(1.0) as usize
}

/// Exact evaluation of each construction's width requirement, natural log,
/// ceiling applied as the formula states it.
pub fn required_width(lemma: Lemma, p: &WidthParams) -> RequiredWidth {
    assert!(p.epsilon > 0.0 && p.epsilon < 1.0, "epsilon must be in (0,1)");
    assert!(p.delta > 0.0 && p.delta < 1.0, "delta must be in (0,1)");
    assert!(p.s >= 1 && p.n >= 1 && p.d >= 1 && p.l >= 1);
    let (s, n, l) = (p.s as f64, p.n as f64, p.l as f64);
    let (eps, delta) = (p.epsilon, p.delta);
    match lemma {
        Lemma::OneCoord => RequiredWidth::Single {
            k: ceil_usize(4.0 / (eps * eps) * (2.0 / delta).ln()),
        },
        Lemma::LinearFunc => RequiredWidth::Single {
            k: p.s * ceil_usize(16.0 * s * s / (eps * eps) * (2.0 * s / delta).ln()),
        },
        Lemma::OneNeuron => RequiredWidth::Pair {
            k1: p.s * ceil_usize(64.0 * s * s / (eps * eps) * (4.0 * s / delta).ln()),
            k2: ceil_usize(2.0 / eps * (2.0 / delta).ln()),
        },
        Lemma::ReluNetwork => RequiredWidth::Pair {
            k1: p.n * p.s * ceil_usize(64.0 * s * s * n * n / (eps * eps) * (4.0 * n * s / delta).ln()),
            // Each of the n disjoint blocks needs the full single-neuron
            // output width at budget (eps/n, delta/n), hence n^2.
            k2: ceil_usize(2.0 * n * n / eps * (2.0 * n / delta).ln()),
        },
        Lemma::OneLayer => RequiredWidth::Single {
            k: p.n * p.s * ceil_usize(16.0 * s * s * n / (eps * eps) * (2.0 * n * s / delta).ln()),
        },
        Lemma::Deep => RequiredWidth::Single {
            k: p.n
                * p.s
                * ceil_usize(64.0 * s * s * l * l * n / (eps * eps) * (2.0 * n * s * l / delta).ln()),
        },
    }
}

/// An (epsilon, delta) budget with the split rules the constructions use.
/// Splits recombine to at most the original budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl EpsilonBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidParam(format!("epsilon {epsilon} must be positive")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParam(format!("delta {delta} must be in (0,1)")));
        }
        Ok(EpsilonBudget { epsilon, delta })
    }

    /// Matching window per coordinate in the linear construction: the
    /// coordinate piece then errs by at most 2 * eps/(2s) = eps/s.
    pub fn coordinate_window(&self, s: usize) -> f64 {
        self.epsilon / (2.0 * s as f64)
    }

    /// Per-neuron share for summing n independent pieces.
    pub fn per_neuron(&self, n: usize) -> Self {
        EpsilonBudget {
            epsilon: self.epsilon / n as f64,
            delta: self.delta / n as f64,
        }
    }

    /// Per-output share when n per-neuron errors combine in l2.
    pub fn per_layer_output(&self, n: usize) -> Self {
        EpsilonBudget {
            epsilon: self.epsilon / (n as f64).sqrt(),
            delta: self.delta / n as f64,
        }
    }

    /// Two-stage split (output coefficient / inner linear map).
    pub fn halved(&self) -> Self {
        EpsilonBudget {
            epsilon: self.epsilon / 2.0,
            delta: self.delta / 2.0,
        }
    }

    /// Per-stage share in the deep construction: eps/2l at unit input
    /// scale, which the homogeneity argument stretches to eps/l on the
    /// doubled domain.
    pub fn deep_stage(&self, l: usize) -> Self {
        EpsilonBudget {
            epsilon: self.epsilon / (2.0 * l as f64),
            delta: self.delta / l as f64,
        }
    }
}

/// Chosen candidate pair for one target coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSelection {
    /// Target layer (stage) this belongs to; 0 for single-stage builders.
    pub layer: usize,
    /// Target neuron within the layer; 0 when not applicable.
    pub neuron: usize,
    /// Target input coordinate being matched.
    pub coordinate: usize,
    /// Candidate row approximating +alpha with coefficient near +1.
    pub plus_index: Option<usize>,
    /// Candidate row approximating -alpha with coefficient near -1.
    pub minus_index: Option<usize>,
    /// Matching window eps' the conditions were checked against.
    pub window: f64,
}

impl ScalarSelection {
    pub fn active_weights(&self) -> usize {
        usize::from(self.plus_index.is_some()) + usize::from(self.minus_index.is_some())
    }
}

/// Chosen output coefficient for one target neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSelection {
    pub layer: usize,
    pub neuron: usize,
    /// Global index of the selected output candidate.
    pub index: usize,
    pub window: f64,
}

/// Disjoint candidate block assigned to one piece of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAssignment {
    pub layer: usize,
    pub neuron: usize,
    /// Coordinate the block serves, when the block is per-coordinate.
    pub coordinate: Option<usize>,
    pub start: usize,
    pub len: usize,
}

/// Record of what a construction selected: replayable and serializable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneCertificate {
    pub budget: EpsilonBudget,
    pub scalar_selections: Vec<ScalarSelection>,
    pub output_selections: Vec<OutputSelection>,
    pub blocks: Vec<BlockAssignment>,
    pub active_per_layer: Vec<usize>,
}

impl PruneCertificate {
    fn new(budget: EpsilonBudget) -> Self {
        PruneCertificate {
            budget,
            scalar_selections: Vec::new(),
            output_selections: Vec::new(),
            blocks: Vec::new(),
            active_per_layer: Vec::new(),
        }
    }

    pub fn total_active(&self) -> usize {
        self.active_per_layer.iter().sum()
    }
}

/// Candidate search for one coordinate map `x -> alpha * x_i` over the
/// rows of `weights` in `rows`, with output coefficients `coeffs`.
///
/// With |alpha| <= epsilon the empty selection already satisfies the 2*eps
/// bound, so nothing is searched. Otherwise the plus side needs a row j
/// with |w_j[i] - alpha| <= eps and |u_j - 1| <= eps, the minus side the
/// sign-flipped conditions, and among admissible rows the one whose
/// product u_j * w_j[i] lands closest to alpha wins.
pub fn prune_scalar_in(
    coordinate: usize,
    alpha: f64,
    weights: &Matrix,
    coeffs: &[f64],
    rows: Range<usize>,
    epsilon: f64,
) -> Result<ScalarSelection> {
    if coeffs.len() != weights.rows() {
        return Err(Error::Dimension {
            expected: weights.rows(),
            got: coeffs.len(),
        });
    }
    if coordinate >= weights.cols() {
        return Err(Error::Dimension {
            expected: weights.cols(),
            got: coordinate,
        });
    }
    let mut selection = ScalarSelection {
        layer: 0,
        neuron: 0,
        coordinate,
        plus_index: None,
        minus_index: None,
        window: epsilon,
    };
    if alpha.abs() <= epsilon {
        return Ok(selection);
    }

    let mut best_plus: Option<(f64, usize)> = None;
    let mut best_minus: Option<(f64, usize)> = None;
    for j in rows {
        let w = weights[(j, coordinate)];
        let u = coeffs[j];
        let mismatch = (u * w - alpha).abs();
        if (w - alpha).abs() <= epsilon && (u - 1.0).abs() <= epsilon {
            if best_plus.is_none_or(|(m, _)| mismatch < m) {
                best_plus = Some((mismatch, j));
            }
        } else if (w + alpha).abs() <= epsilon && (u + 1.0).abs() <= epsilon {
            // |alpha| > epsilon keeps the two conditions disjoint, so the
            // else-branch cannot steal a plus-side row.
            if best_minus.is_none_or(|(m, _)| mismatch < m) {
                best_minus = Some((mismatch, j));
            }
        }
    }

    let fail = |side: Side| {
        Error::ConstructionFailed(FailurePoint {
            coordinate: Some(coordinate),
            side: Some(side),
            ..FailurePoint::default()
        })
    };
    let (_, j_plus) = best_plus.ok_or_else(|| fail(Side::Plus))?;
    let (_, j_minus) = best_minus.ok_or_else(|| fail(Side::Minus))?;
    debug_assert_ne!(j_plus, j_minus);
    selection.plus_index = Some(j_plus);
    selection.minus_index = Some(j_minus);
    Ok(selection)
}

/// [`prune_scalar_in`] over the full candidate set.
pub fn prune_scalar(
    coordinate: usize,
    alpha: f64,
    weights: &Matrix,
    coeffs: &[f64],
    epsilon: f64,
) -> Result<ScalarSelection> {
    prune_scalar_in(coordinate, alpha, weights, coeffs, 0..weights.rows(), epsilon)
}

/// Blocked construction for `x -> <w_star, x>` on candidate rows `rows`:
/// one coordinate piece per nonzero of `w_star`, each on its own
/// sub-block of k/s rows, each with window eps/(2s).
#[allow(clippy::too_many_arguments)]
fn linear_selection(
    w_star: &[f64],
    weights: &Matrix,
    coeffs: &[f64],
    rows: Range<usize>,
    sparsity: usize,
    epsilon: f64,
    layer: usize,
    neuron: usize,
    cert: &mut PruneCertificate,
) -> Result<Vec<ScalarSelection>> {
    if w_star.len() != weights.cols() {
        return Err(Error::Dimension {
            expected: weights.cols(),
            got: w_star.len(),
        });
    }
    if sparsity == 0 {
        return Err(Error::InvalidParam("sparsity must be at least 1".into()));
    }
    let nonzero: Vec<usize> = (0..w_star.len()).filter(|&i| w_star[i] != 0.0).collect();
    if nonzero.len() > sparsity {
        return Err(Error::InvalidParam(format!(
            "target has {} nonzero coordinates, more than sparsity {}",
            nonzero.len(),
            sparsity
        )));
    }
    let block_len = rows.len() / sparsity;
    if block_len == 0 && !nonzero.is_empty() {
        return Err(Error::InvalidParam(format!(
            "{} candidates cannot be split into {} blocks",
            rows.len(),
            sparsity
        )));
    }
    let window = epsilon / (2.0 * sparsity as f64);

    let mut selections = Vec::with_capacity(nonzero.len());
    for (t, &coord) in nonzero.iter().enumerate() {
        // The t-th nonzero coordinate owns the t-th sub-block; rows beyond
        // s * block_len stay masked, per the width formulas' ceiling.
        let start = rows.start + t * block_len;
        let block = start..start + block_len;
        cert.blocks.push(BlockAssignment {
            layer,
            neuron,
            coordinate: Some(coord),
            start: block.start,
            len: block_len,
        });
        let mut sel = prune_scalar_in(coord, w_star[coord], weights, coeffs, block, window)
            .map_err(|e| match e {
                Error::ConstructionFailed(mut fp) => {
                    fp.layer = Some(layer);
                    fp.neuron = Some(neuron);
                    Error::ConstructionFailed(fp)
                }
                other => other,
            })?;
        sel.layer = layer;
        sel.neuron = neuron;
        selections.push(sel);
    }
    Ok(selections)
}

fn write_scalar_masks(
    selections: &[ScalarSelection],
    first_layer: &mut MaskLayer,
    coeff_mask: Option<(&mut MaskLayer, usize)>,
) {
    let mut coeff_mask = coeff_mask;
    for sel in selections {
        for j in [sel.plus_index, sel.minus_index].into_iter().flatten() {
            first_layer.set(j, sel.coordinate, true);
            if let Some((mask, row)) = coeff_mask.as_mut() {
                mask.set(*row, j, true);
            }
        }
    }
}

/// Approximate `x -> <w_star, x>` (|g - <w*,x>| <= eps on the unit cube)
/// by masking first-layer candidates. Returns the first-layer mask; the
/// output coefficients stay unmasked because fully-masked rows contribute
/// sigma(0) = 0.
pub fn prune_linear(
    w_star: &[f64],
    weights: &Matrix,
    coeffs: &[f64],
    sparsity: usize,
    epsilon: f64,
    delta: f64,
) -> Result<(MaskLayer, PruneCertificate)> {
    let mut cert = PruneCertificate::new(EpsilonBudget::new(epsilon, delta)?);
    let selections = linear_selection(
        w_star,
        weights,
        coeffs,
        0..weights.rows(),
        sparsity,
        epsilon,
        0,
        0,
        &mut cert,
    )?;
    let mut mask = MaskLayer::zeros(weights.rows(), weights.cols());
    write_scalar_masks(&selections, &mut mask, None);
    cert.active_per_layer = vec![mask.active_count()];
    cert.scalar_selections = selections;
    Ok((mask, cert))
}

fn output_selection(
    v_star: f64,
    v: &[f64],
    rows: Range<usize>,
    window: f64,
    layer: usize,
    neuron: usize,
) -> Result<OutputSelection> {
    let mut best: Option<(f64, usize)> = None;
    for i in rows {
        let gap = (v[i] - v_star).abs();
        if gap <= window && best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, i));
        }
    }
    let (_, index) = best.ok_or_else(|| {
        Error::ConstructionFailed(FailurePoint {
            layer: Some(layer),
            neuron: Some(neuron),
            stage: Some("output-coefficient"),
            ..FailurePoint::default()
        })
    })?;
    Ok(OutputSelection {
        layer,
        neuron,
        index,
        window,
    })
}

struct NeuronScope {
    w_rows: Range<usize>,
    u_rows: Range<usize>,
    layer: usize,
    neuron: usize,
}

/// Single-neuron construction inside the given blocks of a depth-3 net
/// (weights k1 x d, mixing u k2 x k1, output v 1 x k2).
#[allow(clippy::too_many_arguments)]
fn prune_neuron_scoped(
    w_star: &[f64],
    v_star: f64,
    weights: &Matrix,
    mixing: &Matrix,
    output: &[f64],
    scope: NeuronScope,
    sparsity: usize,
    budget: EpsilonBudget,
    masks: &mut [MaskLayer; 3],
    cert: &mut PruneCertificate,
) -> Result<()> {
    let half = budget.halved();
    let out_sel = output_selection(
        v_star,
        output,
        scope.u_rows.clone(),
        half.epsilon,
        scope.layer,
        scope.neuron,
    )?;
    let chosen_row = out_sel.index;

    let inner = linear_selection(
        w_star,
        weights,
        mixing.row(chosen_row),
        scope.w_rows.clone(),
        sparsity,
        half.epsilon,
        scope.layer,
        scope.neuron,
        cert,
    )
    .map_err(|e| match e {
        Error::ConstructionFailed(mut fp) => {
            fp.stage = Some("inner-linear");
            Error::ConstructionFailed(fp)
        }
        other => other,
    })?;

    let [first, mid, out] = masks;
    write_scalar_masks(&inner, first, Some((mid, chosen_row)));
    out.set(0, chosen_row, true);
    cert.blocks.push(BlockAssignment {
        layer: scope.layer,
        neuron: scope.neuron,
        coordinate: None,
        start: scope.u_rows.start,
        len: scope.u_rows.len(),
    });
    cert.scalar_selections.extend(inner);
    cert.output_selections.push(out_sel);
    Ok(())
}

fn expect_depth(net: &DenseNetwork, depth: usize) -> Result<()> {
    if net.depth() != depth {
        return Err(Error::InvalidParam(format!(
            "expected a depth-{depth} network, got depth {}",
            net.depth()
        )));
    }
    Ok(())
}

/// Approximate one ReLU neuron `x -> v* sigma(<w*, x>)` by pruning a
/// depth-3 random net: pick an output coefficient within eps/2 of v*,
/// then build the inner linear map with the remaining eps/2.
pub fn prune_neuron(
    w_star: &[f64],
    v_star: f64,
    g: &DenseNetwork,
    sparsity: usize,
    epsilon: f64,
    delta: f64,
) -> Result<(BinaryMask, PruneCertificate)> {
    expect_depth(g, 3)?;
    let budget = EpsilonBudget::new(epsilon, delta)?;
    let (weights, mixing, out_layer) = (g.layer(0), g.layer(1), g.layer(2));
    let mut cert = PruneCertificate::new(budget);
    let mut masks = [
        MaskLayer::zeros(weights.rows(), weights.cols()),
        MaskLayer::zeros(mixing.rows(), mixing.cols()),
        MaskLayer::zeros(1, out_layer.cols()),
    ];
    prune_neuron_scoped(
        w_star,
        v_star,
        weights,
        mixing,
        out_layer.row(0),
        NeuronScope {
            w_rows: 0..weights.rows(),
            u_rows: 0..mixing.rows(),
            layer: 0,
            neuron: 0,
        },
        sparsity,
        budget,
        &mut masks,
        &mut cert,
    )?;
    let mask = BinaryMask::new(masks.to_vec());
    cert.active_per_layer = mask.active_count_per_layer();
    Ok((mask, cert))
}

/// Approximate a depth-2 target (n ReLU neurons with output coefficients)
/// by pruning a depth-3 random net: disjoint candidate blocks per target
/// neuron, each neuron built with budget eps/n, delta/n.
pub fn prune_two_layer_target(
    target: &DenseNetwork,
    g: &DenseNetwork,
    sparsity: usize,
    epsilon: f64,
    delta: f64,
) -> Result<(BinaryMask, PruneCertificate)> {
    expect_depth(target, 2)?;
    expect_depth(g, 3)?;
    if target.output_dim() != 1 || g.output_dim() != 1 {
        return Err(Error::InvalidParam("expected single-output networks".into()));
    }
    if g.input_dim() != target.input_dim() {
        return Err(Error::Dimension {
            expected: target.input_dim(),
            got: g.input_dim(),
        });
    }
    let budget = EpsilonBudget::new(epsilon, delta)?;
    let n = target.layer(0).rows();
    let (weights, mixing, out_layer) = (g.layer(0), g.layer(1), g.layer(2));
    let (k1, k2) = (weights.rows(), mixing.rows());
    let (k1_block, k2_block) = (k1 / n, k2 / n);
    if k1_block == 0 || k2_block == 0 {
        return Err(Error::InvalidParam(format!(
            "widths ({k1}, {k2}) cannot host {n} disjoint neuron blocks"
        )));
    }

    let per_neuron = budget.per_neuron(n);
    let mut cert = PruneCertificate::new(budget);
    let mut masks = [
        MaskLayer::zeros(weights.rows(), weights.cols()),
        MaskLayer::zeros(mixing.rows(), mixing.cols()),
        MaskLayer::zeros(1, out_layer.cols()),
    ];
    for neuron in 0..n {
        prune_neuron_scoped(
            target.layer(0).row(neuron),
            target.layer(1)[(0, neuron)],
            weights,
            mixing,
            out_layer.row(0),
            NeuronScope {
                w_rows: neuron * k1_block..(neuron + 1) * k1_block,
                u_rows: neuron * k2_block..(neuron + 1) * k2_block,
                layer: 0,
                neuron,
            },
            sparsity,
            per_neuron,
            &mut masks,
            &mut cert,
        )?;
    }
    let mask = BinaryMask::new(masks.to_vec());
    cert.active_per_layer = mask.active_count_per_layer();
    Ok((mask, cert))
}

/// Approximate one ReLU layer `x -> sigma(W* x)` in l2 by pruning a
/// (candidate layer, mixing layer) pair: per output neuron a disjoint
/// block of k/n candidates and budget eps/sqrt(n), delta/n. Returns the
/// mask pair (candidates, mixing).
#[allow(clippy::too_many_arguments)]
fn prune_layer_scoped(
    w_star_rows: &Matrix,
    weights: &Matrix,
    mixing: &Matrix,
    sparsity: usize,
    budget: EpsilonBudget,
    layer: usize,
    masks: (&mut MaskLayer, &mut MaskLayer),
    cert: &mut PruneCertificate,
) -> Result<()> {
    let n = w_star_rows.rows();
    let k = weights.rows();
    let block = k / n;
    if block == 0 {
        return Err(Error::InvalidParam(format!(
            "width {k} cannot host {n} disjoint blocks"
        )));
    }
    let share = budget.per_layer_output(n);
    let (first, mid) = masks;
    for neuron in 0..n {
        let rows = neuron * block..(neuron + 1) * block;
        let selections = linear_selection(
            w_star_rows.row(neuron),
            weights,
            mixing.row(neuron),
            rows,
            sparsity,
            share.epsilon,
            layer,
            neuron,
            cert,
        )?;
        write_scalar_masks(&selections, first, Some((mid, neuron)));
        cert.scalar_selections.extend(selections);
    }
    Ok(())
}

/// Public single-layer form; see the module docs for the blocking scheme.
pub fn prune_layer(
    w_star_rows: &Matrix,
    weights: &Matrix,
    mixing: &Matrix,
    sparsity: usize,
    epsilon: f64,
    delta: f64,
) -> Result<((MaskLayer, MaskLayer), PruneCertificate)> {
    if mixing.cols() != weights.rows() {
        return Err(Error::Dimension {
            expected: weights.rows(),
            got: mixing.cols(),
        });
    }
    if mixing.rows() != w_star_rows.rows() {
        return Err(Error::Dimension {
            expected: w_star_rows.rows(),
            got: mixing.rows(),
        });
    }
    let budget = EpsilonBudget::new(epsilon, delta)?;
    let mut cert = PruneCertificate::new(budget);
    let mut first = MaskLayer::zeros(weights.rows(), weights.cols());
    let mut mid = MaskLayer::zeros(mixing.rows(), mixing.cols());
    prune_layer_scoped(
        w_star_rows,
        weights,
        mixing,
        sparsity,
        budget,
        0,
        (&mut first, &mut mid),
        &mut cert,
    )?;
    cert.active_per_layer = vec![first.active_count(), mid.active_count()];
    Ok(((first, mid), cert))
}

/// Approximate a depth-l target by pruning a depth-2l random net.
///
/// Each target layer i gets one (candidate, mixing) pair of the random net
/// and budget eps/2l at unit scale: positive homogeneity stretches the
/// guarantee to the slightly inflated intermediate inputs, so stage drifts
/// telescope to |G(x) - F(x)| <= eps on the unit ball.
pub fn prune_deep(
    target: &DenseNetwork,
    g: &DenseNetwork,
    sparsity: usize,
    epsilon: f64,
    delta: f64,
) -> Result<(BinaryMask, PruneCertificate)> {
    let l = target.depth();
    expect_depth(g, 2 * l)?;
    if g.input_dim() != target.input_dim() {
        return Err(Error::Dimension {
            expected: target.input_dim(),
            got: g.input_dim(),
        });
    }
    if target.output_dim() != 1 || g.output_dim() != 1 {
        return Err(Error::InvalidParam("expected single-output networks".into()));
    }
    let budget = EpsilonBudget::new(epsilon, delta)?;
    let stage = budget.deep_stage(l);
    let mut cert = PruneCertificate::new(budget);
    let mut mask_layers: Vec<MaskLayer> = g
        .layers()
        .iter()
        .map(|m| MaskLayer::zeros(m.rows(), m.cols()))
        .collect();

    for i in 0..l - 1 {
        let (head, tail) = mask_layers.split_at_mut(2 * i + 1);
        let first = &mut head[2 * i];
        let mid = &mut tail[0];
        prune_layer_scoped(
            target.layer(i),
            g.layer(2 * i),
            g.layer(2 * i + 1),
            sparsity,
            stage,
            i,
            (first, mid),
            &mut cert,
        )
        .map_err(|e| match e {
            Error::ConstructionFailed(mut fp) => {
                fp.layer = Some(i);
                Error::ConstructionFailed(fp)
            }
            other => other,
        })?;
    }

    // Final linear stage: same window arithmetic, single output.
    let last = l - 1;
    let selections = linear_selection(
        target.layer(last).row(0),
        g.layer(2 * last),
        g.layer(2 * last + 1).row(0),
        0..g.layer(2 * last).rows(),
        sparsity,
        stage.epsilon,
        last,
        0,
        &mut cert,
    )?;
    let (head, tail) = mask_layers.split_at_mut(2 * last + 1);
    write_scalar_masks(&selections, &mut head[2 * last], Some((&mut tail[0], 0)));
    cert.scalar_selections.extend(selections);

    let mask = BinaryMask::new(mask_layers);
    cert.active_per_layer = mask.active_count_per_layer();
    Ok((mask, cert))
}
