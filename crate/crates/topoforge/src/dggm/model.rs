//! Model parameters and the teacher-forced forward pass.
//!
//! Two recurrent levels: a graph-level gated unit consumes the previous
//! node's (padded) edge vector and carries the graph state; an edge-level
//! gated unit, initialized from a learned projection of the graph state,
//! consumes the previous edge bit and emits a logistic probability per
//! window slot.
//!
//! All parameters live in one flat buffer with a fixed layout so the
//! optimizer, the gradient checks, and the checkpoint format can treat
//! them uniformly.

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use super::sequence::EdgeSequence;
use crate::util::seeded_rng;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
}

/// Architecture sizes: the window width `M`, the graph-level state width
/// `L`, and the edge-level state width `L'` (defaults to `L / 2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub transient: usize,
    pub latent: usize,
    pub edge_latent: usize,
}

impl ModelDims {
    pub fn new(transient: usize, latent: usize) -> Self {
        ModelDims {
            transient,
            latent,
            edge_latent: (latent / 2).max(1),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.transient == 0 || self.latent == 0 || self.edge_latent == 0 {
            return Err(ModelError::DimMismatch(
                "all dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Closed-form parameter count for the architecture.
pub fn param_count(dims: &ModelDims) -> usize {
    let (m, l, le) = (dims.transient, dims.latent, dims.edge_latent);
    3 * l * (m + l + 1)      // graph unit: W (LxM), U (LxL), b (L), three gates
        + 3 * le * (le + 2)  // edge unit: W (L'x1), U (L'xL'), b (L')
        + le * (l + 1)       // state projection W (L'xL) + bias
        + le + 1             // output projection + bias
        + l                  // initial graph state
        + 2 * m              // start and stop tokens
}

/// Byte-order of tensors in the flat buffer (also the checkpoint order).
pub(crate) struct Layout {
    pub gw_r: Range<usize>,
    pub gw_z: Range<usize>,
    pub gw_n: Range<usize>,
    pub gu_r: Range<usize>,
    pub gu_z: Range<usize>,
    pub gu_n: Range<usize>,
    pub gb_r: Range<usize>,
    pub gb_z: Range<usize>,
    pub gb_n: Range<usize>,
    pub ew_r: Range<usize>,
    pub ew_z: Range<usize>,
    pub ew_n: Range<usize>,
    pub eu_r: Range<usize>,
    pub eu_z: Range<usize>,
    pub eu_n: Range<usize>,
    pub eb_r: Range<usize>,
    pub eb_z: Range<usize>,
    pub eb_n: Range<usize>,
    pub w_init: Range<usize>,
    pub b_init: Range<usize>,
    pub w_out: Range<usize>,
    pub b_out: Range<usize>,
    pub h0: Range<usize>,
    pub sos: Range<usize>,
    pub eos: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(dims: &ModelDims) -> Layout {
        let (m, l, le) = (dims.transient, dims.latent, dims.edge_latent);
        let mut cursor = 0usize;
        let mut next = |len: usize| {
            let r = cursor..cursor + len;
            cursor += len;
            r
        };
        let layout = Layout {
            gw_r: next(l * m),
            gw_z: next(l * m),
            gw_n: next(l * m),
            gu_r: next(l * l),
            gu_z: next(l * l),
            gu_n: next(l * l),
            gb_r: next(l),
            gb_z: next(l),
            gb_n: next(l),
            ew_r: next(le),
            ew_z: next(le),
            ew_n: next(le),
            eu_r: next(le * le),
            eu_z: next(le * le),
            eu_n: next(le * le),
            eb_r: next(le),
            eb_z: next(le),
            eb_n: next(le),
            w_init: next(le * l),
            b_init: next(le),
            w_out: next(le),
            b_out: next(1),
            h0: next(l),
            sos: next(m),
            eos: next(m),
            total: cursor,
        };
        debug_assert_eq!(layout.total, param_count(dims));
        layout
    }

    /// `(range, fan_in)` pairs in layout order, for initialization.
    fn init_plan(&self, dims: &ModelDims) -> Vec<(Range<usize>, usize)> {
        let (m, l, le) = (dims.transient, dims.latent, dims.edge_latent);
        vec![
            (self.gw_r.clone(), m),
            (self.gw_z.clone(), m),
            (self.gw_n.clone(), m),
            (self.gu_r.clone(), l),
            (self.gu_z.clone(), l),
            (self.gu_n.clone(), l),
            (self.gb_r.clone(), l),
            (self.gb_z.clone(), l),
            (self.gb_n.clone(), l),
            (self.ew_r.clone(), 1),
            (self.ew_z.clone(), 1),
            (self.ew_n.clone(), 1),
            (self.eu_r.clone(), le),
            (self.eu_z.clone(), le),
            (self.eu_n.clone(), le),
            (self.eb_r.clone(), le),
            (self.eb_z.clone(), le),
            (self.eb_n.clone(), le),
            (self.w_init.clone(), l),
            (self.b_init.clone(), l),
            (self.w_out.clone(), le),
            (self.b_out.clone(), le),
            (self.h0.clone(), l),
            (self.sos.clone(), m),
        ]
        // the stop token stays zero: it is a target pattern, not an input
    }
}

/// All weights, biases, and tokens of the model in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    data: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters (probabilities come out at exactly 0.5).
    pub fn zeros(dims: ModelDims) -> Self {
        let layout = Layout::new(&dims);
        ModelParams {
            dims,
            data: vec![0.0; layout.total],
        }
    }

    /// Seeded uniform(-k, k) initialization with k = 1/sqrt(fan_in) per
    /// tensor; the stop token stays zero.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let layout = Layout::new(&dims);
        let mut data = vec![0.0; layout.total];
        let mut rng = seeded_rng(seed);
        for (range, fan_in) in layout.init_plan(&dims) {
            let k = 1.0 / (fan_in as f64).sqrt();
            for slot in &mut data[range] {
                *slot = rng.gen_range(-k..k);
            }
        }
        ModelParams { dims, data }
    }

    pub(crate) fn from_data(dims: ModelDims, data: Vec<f64>) -> Result<Self, ModelError> {
        let layout = Layout::new(&dims);
        if data.len() != layout.total {
            return Err(ModelError::DimMismatch(format!(
                "parameter buffer has {} values, dims need {}",
                data.len(),
                layout.total
            )));
        }
        Ok(ModelParams { dims, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.dims)
    }

    pub fn sos_token(&self) -> &[f64] {
        &self.data[self.layout().sos]
    }

    pub fn eos_token(&self) -> &[f64] {
        &self.data[self.layout().eos]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// y += W x for a row-major `rows x cols` matrix stored at `w`.
fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (i, yi) in y.iter_mut().enumerate().take(rows) {
        let row = &w[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for (wj, xj) in row.iter().zip(x) {
            acc += wj * xj;
        }
        *yi += acc;
    }
}

/// Borrowed view of one gated unit's nine tensors.
pub(crate) struct GruView<'a> {
    pub wr: &'a [f64],
    pub wz: &'a [f64],
    pub wn: &'a [f64],
    pub ur: &'a [f64],
    pub uz: &'a [f64],
    pub un: &'a [f64],
    pub br: &'a [f64],
    pub bz: &'a [f64],
    pub bn: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

impl<'a> GruView<'a> {
    pub fn graph_unit(params: &'a ModelParams, layout: &Layout) -> Self {
        let d = &params.data;
        GruView {
            wr: &d[layout.gw_r.clone()],
            wz: &d[layout.gw_z.clone()],
            wn: &d[layout.gw_n.clone()],
            ur: &d[layout.gu_r.clone()],
            uz: &d[layout.gu_z.clone()],
            un: &d[layout.gu_n.clone()],
            br: &d[layout.gb_r.clone()],
            bz: &d[layout.gb_z.clone()],
            bn: &d[layout.gb_n.clone()],
            input: params.dims.transient,
            hidden: params.dims.latent,
        }
    }

    pub fn edge_unit(params: &'a ModelParams, layout: &Layout) -> Self {
        let d = &params.data;
        GruView {
            wr: &d[layout.ew_r.clone()],
            wz: &d[layout.ew_z.clone()],
            wn: &d[layout.ew_n.clone()],
            ur: &d[layout.eu_r.clone()],
            uz: &d[layout.eu_z.clone()],
            un: &d[layout.eu_n.clone()],
            br: &d[layout.eb_r.clone()],
            bz: &d[layout.eb_z.clone()],
            bn: &d[layout.eb_n.clone()],
            input: 1,
            hidden: params.dims.edge_latent,
        }
    }

    /// One step: reset/update gates, tanh candidate,
    /// `h = z * h_prev + (1 - z) * candidate`.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> GruStepCache {
        let h = self.hidden;
        let mut a_r = self.br.to_vec();
        let mut a_z = self.bz.to_vec();
        matvec_acc(self.wr, h, self.input, x, &mut a_r);
        matvec_acc(self.ur, h, h, h_prev, &mut a_r);
        matvec_acc(self.wz, h, self.input, x, &mut a_z);
        matvec_acc(self.uz, h, h, h_prev, &mut a_z);
        let r: Vec<f64> = a_r.iter().map(|&a| sigmoid(a)).collect();
        let z: Vec<f64> = a_z.iter().map(|&a| sigmoid(a)).collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
        let mut a_n = self.bn.to_vec();
        matvec_acc(self.wn, h, self.input, x, &mut a_n);
        matvec_acc(self.un, h, h, &rh, &mut a_n);
        let c: Vec<f64> = a_n.iter().map(|&a| a.tanh()).collect();
        let h_new: Vec<f64> = z
            .iter()
            .zip(h_prev)
            .zip(&c)
            .map(|((zi, hi), ci)| zi * hi + (1.0 - zi) * ci)
            .collect();
        GruStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            r,
            z,
            c,
            h: h_new,
        }
    }
}

/// Everything the backward pass needs from one gated-unit step.
#[derive(Debug, Clone)]
pub(crate) struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Per-row activations cached during the forward pass.
pub(crate) struct RowCache {
    /// Graph state after consuming this row's input (used to seed the
    /// edge unit).
    pub h_g: Vec<f64>,
    pub edge_steps: Vec<GruStepCache>,
    pub probs: Vec<f64>,
}

/// Activation cache returned by [`forward`] and consumed by the backward
/// pass.
pub struct ForwardCache {
    pub(crate) graph_steps: Vec<GruStepCache>,
    pub(crate) rows: Vec<RowCache>,
    pub(crate) slot_count: usize,
}

/// Right-align a window row into an `m`-wide input vector: the last slot
/// is always the immediate predecessor.
pub fn pad_row(row: &[u8], m: usize) -> Vec<f64> {
    let mut x = vec![0.0; m];
    let offset = m - row.len();
    for (j, &bit) in row.iter().enumerate() {
        x[offset + j] = f64::from(bit);
    }
    x
}

/// Incremental forward state for free-running generation: callers feed an
/// input row, get back thresholded edge decisions for the next node.
pub struct GenerationStepper<'a> {
    params: &'a ModelParams,
    layout: Layout,
    h_g: Vec<f64>,
}

impl ModelParams {
    pub fn generation_stepper(&self) -> GenerationStepper<'_> {
        let layout = self.layout();
        let h_g = self.data[layout.h0.clone()].to_vec();
        GenerationStepper {
            params: self,
            layout,
            h_g,
        }
    }
}

impl GenerationStepper<'_> {
    /// Advance the graph state with input `x` (an `M`-wide padded row),
    /// then emit `width` slots: per slot a logistic probability and its
    /// thresholded bit, each bit fed forward into the edge unit.
    pub fn emit_row(&mut self, x: &[f64], width: usize, tau: f64) -> (Vec<f64>, Vec<u8>) {
        let params = self.params;
        let layout = &self.layout;
        let graph_unit = GruView::graph_unit(params, layout);
        let edge_unit = GruView::edge_unit(params, layout);
        let w_init = &params.data[layout.w_init.clone()];
        let b_init = &params.data[layout.b_init.clone()];
        let w_out = &params.data[layout.w_out.clone()];
        let b_out = params.data[layout.b_out.clone()][0];
        let le = params.dims.edge_latent;
        let l = params.dims.latent;

        self.h_g = graph_unit.step(x, &self.h_g).h;
        let mut h_f = b_init.to_vec();
        matvec_acc(w_init, le, l, &self.h_g, &mut h_f);
        let mut probs = Vec::with_capacity(width);
        let mut bits = Vec::with_capacity(width);
        let mut e_in = 1.0_f64;
        for _ in 0..width {
            h_f = edge_unit.step(&[e_in], &h_f).h;
            let logit = w_out.iter().zip(&h_f).map(|(w, h)| w * h).sum::<f64>() + b_out;
            let p = sigmoid(logit);
            let bit = u8::from(p >= tau);
            probs.push(p);
            bits.push(bit);
            e_in = f64::from(bit);
        }
        (probs, bits)
    }
}

/// Teacher-forced pass: the graph unit consumes ground-truth edge vectors
/// (start token first) and the edge unit consumes ground-truth previous
/// bits, emitting one probability per window slot of `target`.
pub fn forward(
    params: &ModelParams,
    target: &EdgeSequence,
) -> Result<(Vec<Vec<f64>>, ForwardCache), ModelError> {
    if target.m_dim() != params.dims.transient {
        return Err(ModelError::DimMismatch(format!(
            "sequence window {} vs model transient dimension {}",
            target.m_dim(),
            params.dims.transient
        )));
    }
    let layout = params.layout();
    let graph_unit = GruView::graph_unit(params, &layout);
    let edge_unit = GruView::edge_unit(params, &layout);
    let w_init = &params.data[layout.w_init.clone()];
    let b_init = &params.data[layout.b_init.clone()];
    let w_out = &params.data[layout.w_out.clone()];
    let b_out = params.data[layout.b_out.clone()][0];
    let le = params.dims.edge_latent;
    let l = params.dims.latent;

    let mut h_g = params.data[layout.h0.clone()].to_vec();
    let mut graph_steps = Vec::with_capacity(target.rows().len());
    let mut rows = Vec::with_capacity(target.rows().len());
    let mut probs = Vec::with_capacity(target.rows().len());
    let mut slot_count = 0usize;

    for (r, row) in target.rows().iter().enumerate() {
        let x = if r == 0 {
            params.data[layout.sos.clone()].to_vec()
        } else {
            pad_row(&target.rows()[r - 1], params.dims.transient)
        };
        let step = graph_unit.step(&x, &h_g);
        h_g = step.h.clone();
        graph_steps.push(step);

        let mut h_f = b_init.to_vec();
        matvec_acc(w_init, le, l, &h_g, &mut h_f);
        let mut edge_steps = Vec::with_capacity(row.len());
        let mut row_probs = Vec::with_capacity(row.len());
        let mut e_in = 1.0_f64; // edge-level start value
        for &bit in row {
            let estep = edge_unit.step(&[e_in], &h_f);
            h_f = estep.h.clone();
            let logit = w_out.iter().zip(&h_f).map(|(w, h)| w * h).sum::<f64>() + b_out;
            let p = sigmoid(logit);
            row_probs.push(p);
            edge_steps.push(estep);
            e_in = f64::from(bit);
            slot_count += 1;
        }
        probs.push(row_probs.clone());
        rows.push(RowCache {
            h_g: h_g.clone(),
            edge_steps,
            probs: row_probs,
        });
    }
    Ok((
        probs,
        ForwardCache {
            graph_steps,
            rows,
            slot_count,
        },
    ))
}

/// Probabilities are clamped into `[1e-7, 1 - 1e-7]` before the logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Mean binary cross entropy over all window slots; 0 for an empty
/// sequence.
pub fn bce_loss(probs: &[Vec<f64>], target: &EdgeSequence) -> Result<f64, ModelError> {
    if probs.len() != target.rows().len()
        || probs
            .iter()
            .zip(target.rows())
            .any(|(p, t)| p.len() != t.len())
    {
        return Err(ModelError::DimMismatch(
            "probability shape differs from target shape".into(),
        ));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (row_p, row_t) in probs.iter().zip(target.rows()) {
        for (&p, &t) in row_p.iter().zip(row_t) {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let t = f64::from(t);
            sum -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}
