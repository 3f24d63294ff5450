//! Standard LSTM baseline with a linear interval readout, trained
//! under the same λ-weighted objective as the LaFee cell.
//!
//! Per step: f, i, o = σ(W·[H_{t-1}, I_t] + b), C̃ = tanh(W_c·[...]),
//! C_t = f*C_{t-1} + i*C̃, H_t = o*tanh(C_t), prediction = W_y·H_t + b_y.
//! The input is the encoded step without its interval component (8
//! standardized states + 19 one-hot actions), keeping the target out
//! of the features.

use ndarray::{Array1, Array2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::domain::{EncodedSequence, EncodedStep, StepKind, ACTION_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::lafee::{glorot_fill, glorot_fill_vec, sigmoid};
use crate::train::{
    weighted_loss, SequenceModel, TensorSet, TensorView, TensorViewMut, TrainConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LstmDims {
    pub d_x: usize,
    pub d_h: usize,
}

impl Default for LstmDims {
    fn default() -> LstmDims {
        // hidden width 27 roughly matches the coupled cell's 8+19 latent budget
        LstmDims { d_x: STATE_DIM + ACTION_DIM, d_h: 27 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub dims: LstmDims,
    pub w_f: Array2<f64>,
    pub b_f: Array1<f64>,
    pub w_i: Array2<f64>,
    pub b_i: Array1<f64>,
    pub w_c: Array2<f64>,
    pub b_c: Array1<f64>,
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
    pub w_y: Array1<f64>,
    pub b_y: f64,
}

impl LstmParams {
    pub fn zeros(dims: LstmDims) -> LstmParams {
        let LstmDims { d_x, d_h } = dims;
        LstmParams {
            dims,
            w_f: Array2::zeros((d_h, d_h + d_x)),
            b_f: Array1::zeros(d_h),
            w_i: Array2::zeros((d_h, d_h + d_x)),
            b_i: Array1::zeros(d_h),
            w_c: Array2::zeros((d_h, d_h + d_x)),
            b_c: Array1::zeros(d_h),
            w_o: Array2::zeros((d_h, d_h + d_x)),
            b_o: Array1::zeros(d_h),
            w_y: Array1::zeros(d_h),
            b_y: 0.0,
        }
    }

    pub fn init(dims: LstmDims, seed: u64) -> LstmParams {
        let mut p = LstmParams::zeros(dims);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for m in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            glorot_fill(m, &mut rng);
        }
        glorot_fill_vec(&mut p.w_y, 1, &mut rng);
        p
    }
}

fn gate_preact(
    w: &Array2<f64>,
    b: &Array1<f64>,
    h_prev: &Array1<f64>,
    x: &Array1<f64>,
) -> Array1<f64> {
    let d_h = h_prev.len();
    let mut out = b.clone();
    for (row, o) in w.rows().into_iter().zip(out.iter_mut()) {
        let mut acc = 0.0;
        for (wv, hv) in row.iter().take(d_h).zip(h_prev.iter()) {
            acc += wv * hv;
        }
        for (wv, xv) in row.iter().skip(d_h).zip(x.iter()) {
            acc += wv * xv;
        }
        *o += acc;
    }
    out
}

/// Model input for one step: states then one-hot action, interval
/// component excluded.
pub fn lstm_input(step: &EncodedStep) -> Array1<f64> {
    let mut x = Array1::zeros(step.state.len() + step.action.len());
    for (i, v) in step.state.iter().enumerate() {
        x[i] = *v;
    }
    for (i, v) in step.action.iter().enumerate() {
        x[step.state.len() + i] = *v;
    }
    x
}

/// One LSTM step; returns the new hidden state, cell state, and
/// interval prediction.
pub fn lstm_step(
    params: &LstmParams,
    h_prev: &Array1<f64>,
    c_prev: &Array1<f64>,
    x: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>, f64)> {
    let f = gate_preact(&params.w_f, &params.b_f, h_prev, x).mapv(sigmoid);
    let i = gate_preact(&params.w_i, &params.b_i, h_prev, x).mapv(sigmoid);
    let cand = gate_preact(&params.w_c, &params.b_c, h_prev, x).mapv(f64::tanh);
    let o = gate_preact(&params.w_o, &params.b_o, h_prev, x).mapv(sigmoid);
    let c = Array1::from_shape_fn(c_prev.len(), |k| f[k] * c_prev[k] + i[k] * cand[k]);
    let h = Array1::from_shape_fn(c.len(), |k| o[k] * c[k].tanh());
    if !c.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { tensor: "C_t", step: 0 });
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { tensor: "H_t", step: 0 });
    }
    let prediction = params.w_y.dot(&h) + params.b_y;
    if !prediction.is_finite() {
        return Err(Error::NonFinite { tensor: "prediction", step: 0 });
    }
    Ok((h, c, prediction))
}

struct LstmStepCache {
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    x: Array1<f64>,
    f: Array1<f64>,
    i: Array1<f64>,
    cand: Array1<f64>,
    o: Array1<f64>,
    c: Array1<f64>,
    h: Array1<f64>,
}

fn forward_cached(params: &LstmParams, seq: &EncodedSequence) -> Result<(Vec<LstmStepCache>, Vec<f64>)> {
    let d_h = params.dims.d_h;
    let mut h = Array1::zeros(d_h);
    let mut c = Array1::zeros(d_h);
    let mut caches = Vec::with_capacity(seq.steps.len());
    let mut preds = Vec::with_capacity(seq.steps.len());
    for (index, step) in seq.steps.iter().enumerate() {
        let x = lstm_input(step);
        let f = gate_preact(&params.w_f, &params.b_f, &h, &x).mapv(sigmoid);
        let i = gate_preact(&params.w_i, &params.b_i, &h, &x).mapv(sigmoid);
        let cand = gate_preact(&params.w_c, &params.b_c, &h, &x).mapv(f64::tanh);
        let o = gate_preact(&params.w_o, &params.b_o, &h, &x).mapv(sigmoid);
        let c_next: Array1<f64> = Array1::from_shape_fn(d_h, |k| f[k] * c[k] + i[k] * cand[k]);
        let h_next: Array1<f64> = Array1::from_shape_fn(d_h, |k| o[k] * c_next[k].tanh());
        if !h_next.iter().all(|v| v.is_finite()) || !c_next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { tensor: "H_t", step: index });
        }
        let pred = params.w_y.dot(&h_next) + params.b_y;
        if !pred.is_finite() {
            return Err(Error::NonFinite { tensor: "prediction", step: index });
        }
        caches.push(LstmStepCache {
            h_prev: h.clone(),
            c_prev: c.clone(),
            x,
            f,
            i,
            cand,
            o,
            c: c_next.clone(),
            h: h_next.clone(),
        });
        preds.push(pred);
        h = h_next;
        c = c_next;
    }
    Ok((caches, preds))
}

/// Interval predictions for a whole sequence.
pub fn lstm_forward(params: &LstmParams, seq: &EncodedSequence) -> Result<Vec<f64>> {
    let (_, preds) = forward_cached(params, seq)?;
    Ok(preds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGradients {
    pub w_f: Array2<f64>,
    pub b_f: Array1<f64>,
    pub w_i: Array2<f64>,
    pub b_i: Array1<f64>,
    pub w_c: Array2<f64>,
    pub b_c: Array1<f64>,
    pub w_o: Array2<f64>,
    pub b_o: Array1<f64>,
    pub w_y: Array1<f64>,
    pub b_y: f64,
}

impl LstmGradients {
    pub fn zeros(dims: LstmDims) -> LstmGradients {
        let p = LstmParams::zeros(dims);
        LstmGradients {
            w_f: p.w_f,
            b_f: p.b_f,
            w_i: p.w_i,
            b_i: p.b_i,
            w_c: p.w_c,
            b_c: p.b_c,
            w_o: p.w_o,
            b_o: p.b_o,
            w_y: p.w_y,
            b_y: 0.0,
        }
    }
}

impl TensorSet for LstmParams {
    fn tensors(&self) -> Vec<(&'static str, TensorView<'_>)> {
        vec![
            ("w_f", TensorView::Mat(&self.w_f)),
            ("b_f", TensorView::Vec(&self.b_f)),
            ("w_i", TensorView::Mat(&self.w_i)),
            ("b_i", TensorView::Vec(&self.b_i)),
            ("w_c", TensorView::Mat(&self.w_c)),
            ("b_c", TensorView::Vec(&self.b_c)),
            ("w_o", TensorView::Mat(&self.w_o)),
            ("b_o", TensorView::Vec(&self.b_o)),
            ("w_y", TensorView::Vec(&self.w_y)),
            ("b_y", TensorView::Scalar(&self.b_y)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, TensorViewMut<'_>)> {
        vec![
            ("w_f", TensorViewMut::Mat(&mut self.w_f)),
            ("b_f", TensorViewMut::Vec(&mut self.b_f)),
            ("w_i", TensorViewMut::Mat(&mut self.w_i)),
            ("b_i", TensorViewMut::Vec(&mut self.b_i)),
            ("w_c", TensorViewMut::Mat(&mut self.w_c)),
            ("b_c", TensorViewMut::Vec(&mut self.b_c)),
            ("w_o", TensorViewMut::Mat(&mut self.w_o)),
            ("b_o", TensorViewMut::Vec(&mut self.b_o)),
            ("w_y", TensorViewMut::Vec(&mut self.w_y)),
            ("b_y", TensorViewMut::Scalar(&mut self.b_y)),
        ]
    }
}

impl TensorSet for LstmGradients {
    fn tensors(&self) -> Vec<(&'static str, TensorView<'_>)> {
        vec![
            ("w_f", TensorView::Mat(&self.w_f)),
            ("b_f", TensorView::Vec(&self.b_f)),
            ("w_i", TensorView::Mat(&self.w_i)),
            ("b_i", TensorView::Vec(&self.b_i)),
            ("w_c", TensorView::Mat(&self.w_c)),
            ("b_c", TensorView::Vec(&self.b_c)),
            ("w_o", TensorView::Mat(&self.w_o)),
            ("b_o", TensorView::Vec(&self.b_o)),
            ("w_y", TensorView::Vec(&self.w_y)),
            ("b_y", TensorView::Scalar(&self.b_y)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, TensorViewMut<'_>)> {
        vec![
            ("w_f", TensorViewMut::Mat(&mut self.w_f)),
            ("b_f", TensorViewMut::Vec(&mut self.b_f)),
            ("w_i", TensorViewMut::Mat(&mut self.w_i)),
            ("b_i", TensorViewMut::Vec(&mut self.b_i)),
            ("w_c", TensorViewMut::Mat(&mut self.w_c)),
            ("b_c", TensorViewMut::Vec(&mut self.b_c)),
            ("w_o", TensorViewMut::Mat(&mut self.w_o)),
            ("b_o", TensorViewMut::Vec(&mut self.b_o)),
            ("w_y", TensorViewMut::Vec(&mut self.w_y)),
            ("b_y", TensorViewMut::Scalar(&mut self.b_y)),
        ]
    }
}

fn add_outer_concat(g: &mut Array2<f64>, u: &Array1<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    let split = a.len();
    for (row_idx, ui) in u.iter().enumerate() {
        let mut row = g.row_mut(row_idx);
        for (j, av) in a.iter().enumerate() {
            row[j] += ui * av;
        }
        for (j, bv) in b.iter().enumerate() {
            row[split + j] += ui * bv;
        }
    }
}

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

/// BPTT for the LSTM under the λ-weighted objective, truncated to
/// `cfg.bptt_window` steps of backward flow.
pub fn lstm_backward(
    params: &LstmParams,
    seq: &EncodedSequence,
    cfg: &TrainConfig,
) -> Result<(f64, LstmGradients)> {
    if seq.steps.is_empty() {
        return Err(Error::EmptyInput("backward over an empty sequence"));
    }
    let (caches, preds) = forward_cached(params, seq)?;
    let total_loss = weighted_loss(&preds, seq, cfg);

    let n_in = seq.steps.iter().filter(|s| s.kind == StepKind::InGame).count();
    let n_out = seq.steps.len() - n_in;
    let seeds: Vec<f64> = preds
        .iter()
        .zip(&seq.steps)
        .map(|(pred, step)| match step.kind {
            StepKind::InGame if n_in > 0 => 2.0 * cfg.lambda_in / n_in as f64 * (pred - step.target),
            StepKind::OffGame if n_out > 0 => {
                2.0 * cfg.lambda_out / n_out as f64 * (pred - step.target)
            }
            _ => 0.0,
        })
        .collect();

    let d_h = params.dims.d_h;
    let mut g = LstmGradients::zeros(params.dims);
    let window = cfg.bptt_window.max(1);
    let mut chunk_end = seq.steps.len();
    while chunk_end > 0 {
        let chunk_start = chunk_end.saturating_sub(window);
        let mut dh: Array1<f64> = Array1::zeros(d_h);
        let mut dc: Array1<f64> = Array1::zeros(d_h);
        for t in (chunk_start..chunk_end).rev() {
            let cache = &caches[t];
            let seed = seeds[t];
            dh.scaled_add(seed, &params.w_y);
            g.w_y.scaled_add(seed, &cache.h);
            g.b_y += seed;

            let tanh_c = cache.c.mapv(f64::tanh);
            // H_t = o * tanh(C_t)
            let dzo = Array1::from_shape_fn(d_h, |k| {
                dh[k] * tanh_c[k] * cache.o[k] * (1.0 - cache.o[k])
            });
            for k in 0..d_h {
                dc[k] += dh[k] * cache.o[k] * (1.0 - tanh_c[k] * tanh_c[k]);
            }
            // C_t = f*C_{t-1} + i*C̃
            let dzf = Array1::from_shape_fn(d_h, |k| {
                dc[k] * cache.c_prev[k] * cache.f[k] * (1.0 - cache.f[k])
            });
            let dzi = Array1::from_shape_fn(d_h, |k| {
                dc[k] * cache.cand[k] * cache.i[k] * (1.0 - cache.i[k])
            });
            let dzc = Array1::from_shape_fn(d_h, |k| {
                dc[k] * cache.i[k] * (1.0 - cache.cand[k] * cache.cand[k])
            });
            let dc_prev = Array1::from_shape_fn(d_h, |k| dc[k] * cache.f[k]);

            add_outer_concat(&mut g.w_f, &dzf, &cache.h_prev, &cache.x);
            g.b_f += &dzf;
            add_outer_concat(&mut g.w_i, &dzi, &cache.h_prev, &cache.x);
            g.b_i += &dzi;
            add_outer_concat(&mut g.w_c, &dzc, &cache.h_prev, &cache.x);
            g.b_c += &dzc;
            add_outer_concat(&mut g.w_o, &dzo, &cache.h_prev, &cache.x);
            g.b_o += &dzo;

            let mut dh_prev = left_cols_t_dot(&params.w_f, d_h, &dzf);
            dh_prev += &left_cols_t_dot(&params.w_i, d_h, &dzi);
            dh_prev += &left_cols_t_dot(&params.w_c, d_h, &dzc);
            dh_prev += &left_cols_t_dot(&params.w_o, d_h, &dzo);

            dh = dh_prev;
            dc = dc_prev;
        }
        chunk_end = chunk_start;
    }

    for (name, view) in g.tensors() {
        for i in 0..view.len() {
            if !view.get(i).is_finite() {
                return Err(Error::NonFinite { tensor: name, step: i });
            }
        }
    }
    Ok((total_loss, g))
}

impl SequenceModel for LstmParams {
    type Grads = LstmGradients;

    fn predictions(&self, seq: &EncodedSequence) -> Result<Vec<f64>> {
        lstm_forward(self, seq)
    }

    fn backward(&self, seq: &EncodedSequence, cfg: &TrainConfig) -> Result<(f64, LstmGradients)> {
        lstm_backward(self, seq, cfg)
    }

    fn kind(&self) -> &'static str {
        "lstm"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{fit, grad_check, GradCheckOptions};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    fn scalar_params(weight: f64) -> LstmParams {
        let mut p = LstmParams::zeros(LstmDims { d_x: 1, d_h: 1 });
        p.w_f.fill(weight);
        p.w_i.fill(weight);
        p.w_c.fill(weight);
        p.w_o.fill(weight);
        p.w_y.fill(weight);
        p
    }

    #[test]
    fn zero_network_maps_zero_to_zero() {
        let p = LstmParams::zeros(LstmDims { d_x: 3, d_h: 4 });
        let h = Array1::zeros(4);
        let c = Array1::zeros(4);
        let (h1, c1, pred) = lstm_step(&p, &h, &c, &Array1::zeros(3)).unwrap();
        assert!(h1.iter().all(|v| *v == 0.0));
        assert!(c1.iter().all(|v| *v == 0.0));
        assert_eq!(pred, 0.0);
    }

    #[test]
    fn saturated_gates_preserve_the_cell_state() {
        let mut p = LstmParams::zeros(LstmDims { d_x: 2, d_h: 2 });
        p.b_f.fill(1e3); // forget gate ≈ 1
        p.b_i.fill(-1e3); // input gate ≈ 0
        let c_prev = array![0.4, -0.9];
        let (_, c, _) = lstm_step(&p, &Array1::zeros(2), &c_prev, &array![1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(c[0], 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], -0.9, epsilon = 1e-12);
    }

    /// Hand evaluation with scalar dims, unit weights, zero biases and
    /// zero carries, recomputed independently of the implementation.
    #[test]
    fn scalar_step_matches_hand_evaluation() {
        let p = scalar_params(1.0);
        let (h, c, pred) =
            lstm_step(&p, &Array1::zeros(1), &Array1::zeros(1), &array![1.0]).unwrap();
        let sig1 = 1.0 / (1.0 + (-1.0f64).exp());
        let tanh1 = 1.0f64.tanh();
        let c_expected = sig1 * tanh1;
        let h_expected = sig1 * c_expected.tanh();
        assert_abs_diff_eq!(c[0], c_expected, epsilon = 1e-15);
        assert_abs_diff_eq!(h[0], h_expected, epsilon = 1e-15);
        assert_abs_diff_eq!(pred, h_expected, epsilon = 1e-15);
        // frozen: σ(1)·tanh(1) and σ(1)·tanh(σ(1)·tanh(1))
        assert_abs_diff_eq!(c[0], 0.5567699411459397, epsilon = 1e-12);
        assert_abs_diff_eq!(h[0], 0.36960635293570576, epsilon = 1e-12);
    }

    fn random_sequence(d_x: usize, len: usize, seed: u64) -> EncodedSequence {
        use crate::domain::EncodedStep;
        let d_state = 1usize;
        let d_action = d_x - d_state;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let steps = (0..len)
            .map(|i| {
                let kind = if i % 3 == 2 { StepKind::OffGame } else { StepKind::InGame };
                let action_index = rng.random_range(0..d_action);
                let mut action = Array1::zeros(d_action);
                action[action_index] = 1.0;
                EncodedStep {
                    state: Array1::from_shape_fn(d_state, |_| rng.random_range(-1.0..1.0)),
                    action,
                    action_index,
                    kind,
                    target: rng.random_range(0.0..10.0),
                    interval_seconds: 10.0,
                    win_flag: None,
                }
            })
            .collect();
        EncodedSequence { user_id: "u".into(), steps }
    }

    #[test]
    fn gradients_match_central_differences_on_a_small_instance() {
        let dims = LstmDims { d_x: 4, d_h: 3 };
        let params = LstmParams::init(dims, 3);
        let seq = random_sequence(4, 9, 5);
        let report =
            grad_check(&params, &seq, &TrainConfig::default(), &GradCheckOptions::default())
                .unwrap();
        assert!(
            report.ok() && report.max_rel_err() < 1e-4,
            "max relative error {}",
            report.max_rel_err()
        );
    }

    #[test]
    fn zero_epochs_leave_params_unchanged() {
        let dims = LstmDims { d_x: 4, d_h: 3 };
        let mut params = LstmParams::init(dims, 3);
        let before = params.clone();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        fit(&mut params, &[random_sequence(4, 6, 2)], None, &cfg).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn same_seed_fits_identical_parameters() {
        let dims = LstmDims { d_x: 4, d_h: 3 };
        let seqs: Vec<EncodedSequence> = (0..3).map(|i| random_sequence(4, 7, 30 + i)).collect();
        let cfg = TrainConfig { epochs: 2, seed: 9, ..TrainConfig::default() };
        let mut a = LstmParams::init(dims, 9);
        let mut b = LstmParams::init(dims, 9);
        fit(&mut a, &seqs, None, &cfg).unwrap();
        fit(&mut b, &seqs, None, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
