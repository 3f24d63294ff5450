//! Interval-regression loss, exact BPTT gradients for both cell paths
//! with shared-parameter accumulation, finite-difference verification,
//! and the seeded SGD training loop.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{EncodedSequence, StepKind, TargetTransform};
use crate::error::{Error, Result};
use crate::lafee::{forward_sequence, LaFeeDims, LaFeeParams, LatentState, Path};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Backward flow is truncated to windows of this many steps.
    pub bptt_window: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
    /// Weight on the in-game interval loss term.
    pub lambda_in: f64,
    /// Weight on the off-game interval loss term.
    pub lambda_out: f64,
    pub target_transform: TargetTransform,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 20,
            bptt_window: 16,
            grad_clip_norm: 5.0,
            seed: 0,
            lambda_in: 1.0,
            lambda_out: 1.0,
            target_transform: TargetTransform::Ln1p,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.bptt_window == 0 {
            return Err(Error::InvalidConfig("bptt_window must be at least 1".into()));
        }
        if !(self.grad_clip_norm > 0.0) {
            return Err(Error::InvalidConfig("grad_clip_norm must be positive".into()));
        }
        if self.lambda_in < 0.0 || self.lambda_out < 0.0 {
            return Err(Error::InvalidConfig("lambda weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Mean squared error between predicted and actual transformed
/// intervals: Σ(t_j − t*_j)²/n.
pub fn loss(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("loss over zero intervals"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: targets.len() });
    }
    let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sse / predictions.len() as f64)
}

/// The λ-weighted per-sequence objective: lambda_in·MSE over in-game
/// steps plus lambda_out·MSE over off-game steps. A term with no steps
/// of its kind contributes zero.
pub fn weighted_loss(predictions: &[f64], seq: &EncodedSequence, cfg: &TrainConfig) -> f64 {
    let mut sse_in = 0.0;
    let mut n_in = 0usize;
    let mut sse_out = 0.0;
    let mut n_out = 0usize;
    for (pred, step) in predictions.iter().zip(&seq.steps) {
        let r = pred - step.target;
        match step.kind {
            StepKind::InGame => {
                sse_in += r * r;
                n_in += 1;
            }
            StepKind::OffGame => {
                sse_out += r * r;
                n_out += 1;
            }
        }
    }
    let mut total = 0.0;
    if n_in > 0 {
        total += cfg.lambda_in * sse_in / n_in as f64;
    }
    if n_out > 0 {
        total += cfg.lambda_out * sse_out / n_out as f64;
    }
    total
}

// ---------------------------------------------------------------------------
// Tensor plumbing shared by the two models: named views over every
// parameter or gradient tensor, giving flat coordinate access for
// clipping and finite differences.
// ---------------------------------------------------------------------------

pub enum TensorView<'a> {
    Mat(&'a Array2<f64>),
    Vec(&'a Array1<f64>),
    Scalar(&'a f64),
}

pub enum TensorViewMut<'a> {
    Mat(&'a mut Array2<f64>),
    Vec(&'a mut Array1<f64>),
    Scalar(&'a mut f64),
}

impl TensorView<'_> {
    pub fn len(&self) -> usize {
        match self {
            TensorView::Mat(m) => m.len(),
            TensorView::Vec(v) => v.len(),
            TensorView::Scalar(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            TensorView::Mat(m) => m.as_slice().expect("standard layout")[i],
            TensorView::Vec(v) => v[i],
            TensorView::Scalar(s) => **s,
        }
    }
}

impl TensorViewMut<'_> {
    pub fn len(&self) -> usize {
        match self {
            TensorViewMut::Mat(m) => m.len(),
            TensorViewMut::Vec(v) => v.len(),
            TensorViewMut::Scalar(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn set(&mut self, i: usize, value: f64) {
        match self {
            TensorViewMut::Mat(m) => m.as_slice_mut().expect("standard layout")[i] = value,
            TensorViewMut::Vec(v) => v[i] = value,
            TensorViewMut::Scalar(s) => **s = value,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            TensorViewMut::Mat(m) => m.as_slice().expect("standard layout")[i],
            TensorViewMut::Vec(v) => v[i],
            TensorViewMut::Scalar(s) => **s,
        }
    }
}

/// A fixed, ordered collection of named tensors.
pub trait TensorSet {
    fn tensors(&self) -> Vec<(&'static str, TensorView<'_>)>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, TensorViewMut<'_>)>;
}

/// Euclidean norm over every coordinate of every tensor.
pub fn global_norm(set: &impl TensorSet) -> f64 {
    let mut sum = 0.0;
    for (_, view) in set.tensors() {
        for i in 0..view.len() {
            let v = view.get(i);
            sum += v * v;
        }
    }
    sum.sqrt()
}

pub fn scale_tensors(set: &mut impl TensorSet, factor: f64) {
    for (_, mut view) in set.tensors_mut() {
        for i in 0..view.len() {
            let v = view.get(i);
            view.set(i, v * factor);
        }
    }
}

/// SGD update: params ← params − lr·grads, tensor by tensor.
pub fn sgd_apply(params: &mut impl TensorSet, grads: &impl TensorSet, lr: f64) {
    for ((pname, mut p), (gname, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        debug_assert_eq!(pname, gname);
        match (&mut p, &g) {
            (TensorViewMut::Mat(p), TensorView::Mat(g)) => p.scaled_add(-lr, *g),
            (TensorViewMut::Vec(p), TensorView::Vec(g)) => p.scaled_add(-lr, *g),
            (TensorViewMut::Scalar(p), TensorView::Scalar(g)) => **p -= lr * **g,
            _ => panic!("tensor layout mismatch between params and gradients"),
        }
    }
}

fn ensure_finite(set: &impl TensorSet) -> Result<()> {
    for (name, view) in set.tensors() {
        for i in 0..view.len() {
            if !view.get(i).is_finite() {
                return Err(Error::NonFinite { tensor: name, step: i });
            }
        }
    }
    Ok(())
}

/// A model trainable by per-sequence gradient steps.
pub trait SequenceModel: TensorSet + Clone {
    type Grads: TensorSet;

    /// Per-step interval predictions in transformed-time space.
    fn predictions(&self, seq: &EncodedSequence) -> Result<Vec<f64>>;

    /// Loss and exact gradients of the λ-weighted objective, with
    /// backward flow truncated to `cfg.bptt_window` steps.
    fn backward(&self, seq: &EncodedSequence, cfg: &TrainConfig) -> Result<(f64, Self::Grads)>;

    fn kind(&self) -> &'static str;

    fn sequence_loss(&self, seq: &EncodedSequence, cfg: &TrainConfig) -> Result<f64> {
        let preds = self.predictions(seq)?;
        Ok(weighted_loss(&preds, seq, cfg))
    }
}

/// One gradient accumulator per LaFee parameter tensor. The four
/// shared translations each have exactly one accumulator, so both
/// paths add into the same storage.
#[derive(Debug, Clone, PartialEq)]
pub struct LaFeeGradients {
    pub w_us: Array2<f64>,
    pub b_us: Array1<f64>,
    pub w_cs: Array2<f64>,
    pub b_cs: Array1<f64>,
    pub w_ua: Array2<f64>,
    pub b_ua: Array1<f64>,
    pub w_ca: Array2<f64>,
    pub b_ca: Array1<f64>,
    pub w_sa: Array2<f64>,
    pub b_sa: Array1<f64>,
    pub w_at: Array1<f64>,
    pub b_at: f64,
    pub w_as: Array2<f64>,
    pub b_as: Array1<f64>,
    pub w_st: Array1<f64>,
    pub b_st: f64,
}

impl LaFeeGradients {
    pub fn zeros(dims: LaFeeDims) -> LaFeeGradients {
        let p = LaFeeParams::zeros(dims);
        LaFeeGradients {
            w_us: p.w_us,
            b_us: p.b_us,
            w_cs: p.w_cs,
            b_cs: p.b_cs,
            w_ua: p.w_ua,
            b_ua: p.b_ua,
            w_ca: p.w_ca,
            b_ca: p.b_ca,
            w_sa: p.w_sa,
            b_sa: p.b_sa,
            w_at: p.w_at,
            b_at: 0.0,
            w_as: p.w_as,
            b_as: p.b_as,
            w_st: p.w_st,
            b_st: 0.0,
        }
    }
}

impl TensorSet for LaFeeParams {
    fn tensors(&self) -> Vec<(&'static str, TensorView<'_>)> {
        vec![
            ("w_us", TensorView::Mat(&self.w_us)),
            ("b_us", TensorView::Vec(&self.b_us)),
            ("w_cs", TensorView::Mat(&self.w_cs)),
            ("b_cs", TensorView::Vec(&self.b_cs)),
            ("w_ua", TensorView::Mat(&self.w_ua)),
            ("b_ua", TensorView::Vec(&self.b_ua)),
            ("w_ca", TensorView::Mat(&self.w_ca)),
            ("b_ca", TensorView::Vec(&self.b_ca)),
            ("w_sa", TensorView::Mat(&self.w_sa)),
            ("b_sa", TensorView::Vec(&self.b_sa)),
            ("w_at", TensorView::Vec(&self.w_at)),
            ("b_at", TensorView::Scalar(&self.b_at)),
            ("w_as", TensorView::Mat(&self.w_as)),
            ("b_as", TensorView::Vec(&self.b_as)),
            ("w_st", TensorView::Vec(&self.w_st)),
            ("b_st", TensorView::Scalar(&self.b_st)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, TensorViewMut<'_>)> {
        vec![
            ("w_us", TensorViewMut::Mat(&mut self.w_us)),
            ("b_us", TensorViewMut::Vec(&mut self.b_us)),
            ("w_cs", TensorViewMut::Mat(&mut self.w_cs)),
            ("b_cs", TensorViewMut::Vec(&mut self.b_cs)),
            ("w_ua", TensorViewMut::Mat(&mut self.w_ua)),
            ("b_ua", TensorViewMut::Vec(&mut self.b_ua)),
            ("w_ca", TensorViewMut::Mat(&mut self.w_ca)),
            ("b_ca", TensorViewMut::Vec(&mut self.b_ca)),
            ("w_sa", TensorViewMut::Mat(&mut self.w_sa)),
            ("b_sa", TensorViewMut::Vec(&mut self.b_sa)),
            ("w_at", TensorViewMut::Vec(&mut self.w_at)),
            ("b_at", TensorViewMut::Scalar(&mut self.b_at)),
            ("w_as", TensorViewMut::Mat(&mut self.w_as)),
            ("b_as", TensorViewMut::Vec(&mut self.b_as)),
            ("w_st", TensorViewMut::Vec(&mut self.w_st)),
            ("b_st", TensorViewMut::Scalar(&mut self.b_st)),
        ]
    }
}

impl TensorSet for LaFeeGradients {
    fn tensors(&self) -> Vec<(&'static str, TensorView<'_>)> {
        vec![
            ("w_us", TensorView::Mat(&self.w_us)),
            ("b_us", TensorView::Vec(&self.b_us)),
            ("w_cs", TensorView::Mat(&self.w_cs)),
            ("b_cs", TensorView::Vec(&self.b_cs)),
            ("w_ua", TensorView::Mat(&self.w_ua)),
            ("b_ua", TensorView::Vec(&self.b_ua)),
            ("w_ca", TensorView::Mat(&self.w_ca)),
            ("b_ca", TensorView::Vec(&self.b_ca)),
            ("w_sa", TensorView::Mat(&self.w_sa)),
            ("b_sa", TensorView::Vec(&self.b_sa)),
            ("w_at", TensorView::Vec(&self.w_at)),
            ("b_at", TensorView::Scalar(&self.b_at)),
            ("w_as", TensorView::Mat(&self.w_as)),
            ("b_as", TensorView::Vec(&self.b_as)),
            ("w_st", TensorView::Vec(&self.w_st)),
            ("b_st", TensorView::Scalar(&self.b_st)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, TensorViewMut<'_>)> {
        vec![
            ("w_us", TensorViewMut::Mat(&mut self.w_us)),
            ("b_us", TensorViewMut::Vec(&mut self.b_us)),
            ("w_cs", TensorViewMut::Mat(&mut self.w_cs)),
            ("b_cs", TensorViewMut::Vec(&mut self.b_cs)),
            ("w_ua", TensorViewMut::Mat(&mut self.w_ua)),
            ("b_ua", TensorViewMut::Vec(&mut self.b_ua)),
            ("w_ca", TensorViewMut::Mat(&mut self.w_ca)),
            ("b_ca", TensorViewMut::Vec(&mut self.b_ca)),
            ("w_sa", TensorViewMut::Mat(&mut self.w_sa)),
            ("b_sa", TensorViewMut::Vec(&mut self.b_sa)),
            ("w_at", TensorViewMut::Vec(&mut self.w_at)),
            ("b_at", TensorViewMut::Scalar(&mut self.b_at)),
            ("w_as", TensorViewMut::Mat(&mut self.w_as)),
            ("b_as", TensorViewMut::Vec(&mut self.b_as)),
            ("w_st", TensorViewMut::Vec(&mut self.w_st)),
            ("b_st", TensorViewMut::Scalar(&mut self.b_st)),
        ]
    }
}

// accumulate u ⊗ [a, b] into a (|u| × (|a|+|b|)) gradient matrix
fn add_outer_concat(g: &mut Array2<f64>, u: &Array1<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    let split = a.len();
    for (i, ui) in u.iter().enumerate() {
        let mut row = g.row_mut(i);
        for (j, av) in a.iter().enumerate() {
            row[j] += ui * av;
        }
        for (j, bv) in b.iter().enumerate() {
            row[split + j] += ui * bv;
        }
    }
}

fn add_outer(g: &mut Array2<f64>, u: &Array1<f64>, v: &Array1<f64>) {
    for (i, ui) in u.iter().enumerate() {
        let mut row = g.row_mut(i);
        for (j, vj) in v.iter().enumerate() {
            row[j] += ui * vj;
        }
    }
}

// (w[:, 0..cols])ᵀ·u
fn left_cols_t_dot(w: &Array2<f64>, cols: usize, u: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(cols);
    for (i, ui) in u.iter().enumerate() {
        let row = w.row(i);
        for j in 0..cols {
            out[j] += row[j] * ui;
        }
    }
    out
}

/// Exact gradients of the λ-weighted objective through the unrolled
/// LaFee recurrence. Contributions from both paths accumulate into the
/// single storage of each shared translation; gradient flow stops at
/// `bptt_window`-step boundaries.
pub fn backward(
    params: &LaFeeParams,
    seq: &EncodedSequence,
    cfg: &TrainConfig,
) -> Result<(f64, LaFeeGradients)> {
    if seq.steps.is_empty() {
        return Err(Error::EmptyInput("backward over an empty sequence"));
    }
    let traces = forward_sequence(params, seq, &LatentState::zeros(&params.dims))?;
    let preds: Vec<f64> = traces.iter().map(|t| t.prediction).collect();
    let total_loss = weighted_loss(&preds, seq, cfg);

    let n_in = seq.steps.iter().filter(|s| s.kind == StepKind::InGame).count();
    let n_out = seq.steps.len() - n_in;

    // d loss / d prediction_t
    let seeds: Vec<f64> = preds
        .iter()
        .zip(&seq.steps)
        .map(|(pred, step)| match step.kind {
            StepKind::InGame if n_in > 0 => {
                2.0 * cfg.lambda_in / n_in as f64 * (pred - step.target)
            }
            StepKind::OffGame if n_out > 0 => {
                2.0 * cfg.lambda_out / n_out as f64 * (pred - step.target)
            }
            _ => 0.0,
        })
        .collect();

    let dims = params.dims;
    let mut g = LaFeeGradients::zeros(dims);

    let t_total = seq.steps.len();
    let window = cfg.bptt_window.max(1);
    let mut chunk_end = t_total;
    while chunk_end > 0 {
        let chunk_start = chunk_end.saturating_sub(window);
        let mut dsat: Array1<f64> = Array1::zeros(dims.d_sat);
        let mut dasp: Array1<f64> = Array1::zeros(dims.d_asp);
        for t in (chunk_start..chunk_end).rev() {
            let tr = &traces[t];
            let step = &seq.steps[t];
            let seed = seeds[t];
            let sat_prev = &tr.before.sat;
            let asp_prev = &tr.before.asp;
            let us = &tr.gate_sat;
            let cs = &tr.cand_sat;
            let ua = &tr.gate_asp;
            let ca = &tr.cand_asp;

            match tr.path {
                Path::In => {
                    // t_in = W_at·asp_t + b_at
                    dasp.scaled_add(seed, &params.w_at);
                    g.w_at.scaled_add(seed, &tr.after.asp);
                    g.b_at += seed;

                    // asp_t = (1-Ua)*asp_{t-1} + Ua*C̃a + W_sa·sat_t + b_sa
                    let dza = Array1::from_shape_fn(dims.d_asp, |i| {
                        dasp[i] * (ca[i] - asp_prev[i]) * ua[i] * (1.0 - ua[i])
                    });
                    let dzca = Array1::from_shape_fn(dims.d_asp, |i| {
                        dasp[i] * ua[i] * (1.0 - ca[i] * ca[i])
                    });
                    dsat = dsat + params.w_sa.t().dot(&dasp);
                    add_outer(&mut g.w_sa, &dasp, &tr.after.sat);
                    g.b_sa += &dasp;
                    let mut dasp_prev =
                        Array1::from_shape_fn(dims.d_asp, |i| dasp[i] * (1.0 - ua[i]));
                    dasp_prev += &left_cols_t_dot(&params.w_ua, dims.d_asp, &dza);
                    dasp_prev += &left_cols_t_dot(&params.w_ca, dims.d_asp, &dzca);
                    add_outer_concat(&mut g.w_ua, &dza, asp_prev, &step.action);
                    g.b_ua += &dza;
                    add_outer_concat(&mut g.w_ca, &dzca, asp_prev, &step.action);
                    g.b_ca += &dzca;

                    // sat_t = (1-Us)*sat_{t-1} + Us*C̃s
                    let dzs = Array1::from_shape_fn(dims.d_sat, |i| {
                        dsat[i] * (cs[i] - sat_prev[i]) * us[i] * (1.0 - us[i])
                    });
                    let dzcs = Array1::from_shape_fn(dims.d_sat, |i| {
                        dsat[i] * us[i] * (1.0 - cs[i] * cs[i])
                    });
                    let mut dsat_prev =
                        Array1::from_shape_fn(dims.d_sat, |i| dsat[i] * (1.0 - us[i]));
                    dsat_prev += &left_cols_t_dot(&params.w_us, dims.d_sat, &dzs);
                    dsat_prev += &left_cols_t_dot(&params.w_cs, dims.d_sat, &dzcs);
                    add_outer_concat(&mut g.w_us, &dzs, sat_prev, &step.state);
                    g.b_us += &dzs;
                    add_outer_concat(&mut g.w_cs, &dzcs, sat_prev, &step.state);
                    g.b_cs += &dzcs;

                    dsat = dsat_prev;
                    dasp = dasp_prev;
                }
                Path::Out => {
                    // t_out = W_st·sat_t + b_st
                    dsat.scaled_add(seed, &params.w_st);
                    g.w_st.scaled_add(seed, &tr.after.sat);
                    g.b_st += seed;

                    // sat_t = (1-Us)*sat_{t-1} + Us*C̃s + W_as·asp_t + b_as
                    let dzs = Array1::from_shape_fn(dims.d_sat, |i| {
                        dsat[i] * (cs[i] - sat_prev[i]) * us[i] * (1.0 - us[i])
                    });
                    let dzcs = Array1::from_shape_fn(dims.d_sat, |i| {
                        dsat[i] * us[i] * (1.0 - cs[i] * cs[i])
                    });
                    dasp = dasp + params.w_as.t().dot(&dsat);
                    add_outer(&mut g.w_as, &dsat, &tr.after.asp);
                    g.b_as += &dsat;
                    let mut dsat_prev =
                        Array1::from_shape_fn(dims.d_sat, |i| dsat[i] * (1.0 - us[i]));
                    dsat_prev += &left_cols_t_dot(&params.w_us, dims.d_sat, &dzs);
                    dsat_prev += &left_cols_t_dot(&params.w_cs, dims.d_sat, &dzcs);
                    add_outer_concat(&mut g.w_us, &dzs, sat_prev, &step.state);
                    g.b_us += &dzs;
                    add_outer_concat(&mut g.w_cs, &dzcs, sat_prev, &step.state);
                    g.b_cs += &dzcs;

                    // asp_t = (1-Ua)*asp_{t-1} + Ua*C̃a
                    let dza = Array1::from_shape_fn(dims.d_asp, |i| {
                        dasp[i] * (ca[i] - asp_prev[i]) * ua[i] * (1.0 - ua[i])
                    });
                    let dzca = Array1::from_shape_fn(dims.d_asp, |i| {
                        dasp[i] * ua[i] * (1.0 - ca[i] * ca[i])
                    });
                    let mut dasp_prev =
                        Array1::from_shape_fn(dims.d_asp, |i| dasp[i] * (1.0 - ua[i]));
                    dasp_prev += &left_cols_t_dot(&params.w_ua, dims.d_asp, &dza);
                    dasp_prev += &left_cols_t_dot(&params.w_ca, dims.d_asp, &dzca);
                    add_outer_concat(&mut g.w_ua, &dza, asp_prev, &step.action);
                    g.b_ua += &dza;
                    add_outer_concat(&mut g.w_ca, &dzca, asp_prev, &step.action);
                    g.b_ca += &dzca;

                    dsat = dsat_prev;
                    dasp = dasp_prev;
                }
            }
        }
        chunk_end = chunk_start;
    }

    ensure_finite(&g)?;
    Ok((total_loss, g))
}

impl SequenceModel for LaFeeParams {
    type Grads = LaFeeGradients;

    fn predictions(&self, seq: &EncodedSequence) -> Result<Vec<f64>> {
        let traces = forward_sequence(self, seq, &LatentState::zeros(&self.dims))?;
        Ok(traces.into_iter().map(|t| t.prediction).collect())
    }

    fn backward(&self, seq: &EncodedSequence, cfg: &TrainConfig) -> Result<(f64, LaFeeGradients)> {
        backward(self, seq, cfg)
    }

    fn kind(&self) -> &'static str {
        "lafee"
    }
}

// ---------------------------------------------------------------------------
// Finite-difference verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step, sensible range [1e-7, 1e-4].
    pub h: f64,
    pub tolerance: f64,
    /// Coordinates checked per tensor; larger tensors are subsampled.
    pub max_coords_per_tensor: usize,
    pub sample_seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> GradCheckOptions {
        GradCheckOptions { h: 1e-5, tolerance: 1e-4, max_coords_per_tensor: 64, sample_seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct FlaggedCoord {
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_err: f64,
    pub flagged: Vec<FlaggedCoord>,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }

    pub fn ok(&self) -> bool {
        self.tensors.iter().all(|t| t.flagged.is_empty())
    }
}

/// Relative error with a 1e-12 floor so near-zero pairs compare as equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compare the model's analytic gradients against central finite
/// differences of the same objective.
pub fn grad_check<M: SequenceModel>(
    model: &M,
    seq: &EncodedSequence,
    cfg: &TrainConfig,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let (_, grads) = model.backward(seq, cfg)?;
    check_against_fd(model, &grads, seq, cfg, opts)
}

/// The comparison half of `grad_check`, reusable for verifying an
/// externally supplied (possibly corrupted) gradient set.
pub fn check_against_fd<M: SequenceModel>(
    model: &M,
    analytic: &M::Grads,
    seq: &EncodedSequence,
    cfg: &TrainConfig,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(opts.sample_seed);
    let mut work = model.clone();
    let analytic_tensors = analytic.tensors();
    let mut report = GradCheckReport { tensors: Vec::with_capacity(analytic_tensors.len()) };

    for (tensor_idx, (name, aview)) in analytic_tensors.iter().enumerate() {
        let len = aview.len();
        let coords: Vec<usize> = if len <= opts.max_coords_per_tensor {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, opts.max_coords_per_tensor).into_vec()
        };
        let mut check =
            TensorCheck { name, checked: coords.len(), max_rel_err: 0.0, flagged: Vec::new() };
        for coord in coords {
            let original = {
                let views = work.tensors();
                views[tensor_idx].1.get(coord)
            };
            set_coord(&mut work, tensor_idx, coord, original + opts.h);
            let loss_plus = work.sequence_loss(seq, cfg)?;
            set_coord(&mut work, tensor_idx, coord, original - opts.h);
            let loss_minus = work.sequence_loss(seq, cfg)?;
            set_coord(&mut work, tensor_idx, coord, original);
            let numeric = (loss_plus - loss_minus) / (2.0 * opts.h);
            let a = aview.get(coord);
            let rel = relative_error(a, numeric);
            check.max_rel_err = check.max_rel_err.max(rel);
            if rel > opts.tolerance {
                check.flagged.push(FlaggedCoord { coord, analytic: a, numeric, rel_err: rel });
            }
        }
        report.tensors.push(check);
    }
    Ok(report)
}

fn set_coord(set: &mut impl TensorSet, tensor_idx: usize, coord: usize, value: f64) {
    let mut views = set.tensors_mut();
    views[tensor_idx].1.set(coord, value);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Seeded per-sequence SGD with global-norm clipping. Sequences are
/// reshuffled each epoch from the config seed; given identical inputs
/// and seed the resulting parameters are bit-identical.
pub fn fit<M: SequenceModel>(
    model: &mut M,
    train: &[EncodedSequence],
    val: Option<&[EncodedSequence]>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training split has no sequences"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut stats = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (step_no, &idx) in order.iter().enumerate() {
            let (seq_loss, mut grads) = model.backward(&train[idx], cfg)?;
            if !seq_loss.is_finite() {
                return Err(Error::Diverged { epoch, sequence: step_no });
            }
            loss_sum += seq_loss;
            let norm = global_norm(&grads);
            if norm > cfg.grad_clip_norm {
                scale_tensors(&mut grads, cfg.grad_clip_norm / norm);
            }
            sgd_apply(model, &grads, cfg.learning_rate);
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = match val {
            Some(seqs) if !seqs.is_empty() => {
                let mut sum = 0.0;
                for seq in seqs {
                    sum += model.sequence_loss(seq, cfg)?;
                }
                Some(sum / seqs.len() as f64)
            }
            _ => None,
        };
        stats.push(EpochStats { epoch, train_loss, val_loss });
    }
    Ok(stats)
}

/// Seeded shuffle split into (train, test) with `train_frac` of the
/// sequences in the training part.
pub fn split_sequences<T: Clone>(items: &[T], train_frac: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((items.len() as f64) * train_frac).floor() as usize;
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    (train, test)
}

/// Write the per-epoch loss curve as CSV: epoch, mean train loss, mean
/// validation loss (blank when absent).
pub fn write_training_log<W: std::io::Write>(stats: &[EpochStats], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "val_loss"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for s in stats {
        w.write_record([
            s.epoch.to_string(),
            format!("{}", s.train_loss),
            s.val_loss.map(|v| format!("{v}")).unwrap_or_default(),
        ])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}
