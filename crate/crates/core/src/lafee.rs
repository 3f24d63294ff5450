//! The LaFee cell: coupled satisfaction/aspiration latent states with
//! two asymmetric gated update paths sharing four translations.
//!
//! Both latents update on every step through the shared gate/candidate
//! translations. The in-game path injects satisfaction into aspiration
//! and reads the interval off aspiration:
//!
//! ```text
//! Us_t  = σ(W_us·[sat_{t-1}, state_t] + b_us)
//! C̃s_t  = tanh(W_cs·[sat_{t-1}, state_t] + b_cs)
//! sat_t = (1 - Us_t)*sat_{t-1} + Us_t*C̃s_t
//! Ua_t  = σ(W_ua·[asp_{t-1}, action_t] + b_ua)
//! C̃a_t  = tanh(W_ca·[asp_{t-1}, action_t] + b_ca)
//! asp_t = (1 - Ua_t)*asp_{t-1} + Ua_t*C̃a_t + W_sa·sat_t + b_sa
//! t_in  = W_at·asp_t + b_at
//! ```
//!
//! The off-game path mirrors it: aspiration updates without injection,
//! satisfaction receives W_as·asp_t + b_as, and t_out = W_st·sat_t + b_st.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::domain::{EncodedSequence, StepKind, ACTION_DIM, STATE_DIM};
use crate::error::{Error, Result};

/// Layer widths. Satisfaction mirrors the 8 state dimensions by
/// default; aspiration mirrors the 19 action dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LaFeeDims {
    pub d_state: usize,
    pub d_action: usize,
    pub d_sat: usize,
    pub d_asp: usize,
}

impl Default for LaFeeDims {
    fn default() -> LaFeeDims {
        LaFeeDims { d_state: STATE_DIM, d_action: ACTION_DIM, d_sat: STATE_DIM, d_asp: ACTION_DIM }
    }
}

impl LaFeeDims {
    pub fn validate(&self) -> Result<()> {
        if self.d_state == 0 || self.d_action == 0 || self.d_sat == 0 || self.d_asp == 0 {
            return Err(Error::InvalidConfig("all LaFee dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// All weights of the cell. The four shared translations (satisfaction
/// gate/candidate, aspiration gate/candidate) are stored exactly once;
/// both paths read the same fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LaFeeParams {
    pub dims: LaFeeDims,
    /// Shared satisfaction gate over [sat, state].
    pub w_us: Array2<f64>,
    pub b_us: Array1<f64>,
    /// Shared satisfaction candidate over [sat, state].
    pub w_cs: Array2<f64>,
    pub b_cs: Array1<f64>,
    /// Shared aspiration gate over [asp, action].
    pub w_ua: Array2<f64>,
    pub b_ua: Array1<f64>,
    /// Shared aspiration candidate over [asp, action].
    pub w_ca: Array2<f64>,
    pub b_ca: Array1<f64>,
    /// In-path injection: satisfaction into aspiration.
    pub w_sa: Array2<f64>,
    pub b_sa: Array1<f64>,
    /// In-path readout: aspiration to t_in.
    pub w_at: Array1<f64>,
    pub b_at: f64,
    /// Out-path injection: aspiration into satisfaction.
    pub w_as: Array2<f64>,
    pub b_as: Array1<f64>,
    /// Out-path readout: satisfaction to t_out.
    pub w_st: Array1<f64>,
    pub b_st: f64,
}

impl LaFeeParams {
    pub fn zeros(dims: LaFeeDims) -> LaFeeParams {
        let LaFeeDims { d_state, d_action, d_sat, d_asp } = dims;
        LaFeeParams {
            dims,
            w_us: Array2::zeros((d_sat, d_sat + d_state)),
            b_us: Array1::zeros(d_sat),
            w_cs: Array2::zeros((d_sat, d_sat + d_state)),
            b_cs: Array1::zeros(d_sat),
            w_ua: Array2::zeros((d_asp, d_asp + d_action)),
            b_ua: Array1::zeros(d_asp),
            w_ca: Array2::zeros((d_asp, d_asp + d_action)),
            b_ca: Array1::zeros(d_asp),
            w_sa: Array2::zeros((d_asp, d_sat)),
            b_sa: Array1::zeros(d_asp),
            w_at: Array1::zeros(d_asp),
            b_at: 0.0,
            w_as: Array2::zeros((d_sat, d_asp)),
            b_as: Array1::zeros(d_sat),
            w_st: Array1::zeros(d_sat),
            b_st: 0.0,
        }
    }

    /// Seeded Glorot-uniform initialization (±√(6/(fan_in+fan_out))),
    /// biases zero. Matrices are filled in declared order so the result
    /// is reproducible across runs.
    pub fn init(dims: LaFeeDims, seed: u64) -> LaFeeParams {
        let mut params = LaFeeParams::zeros(dims);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for m in [
            &mut params.w_us,
            &mut params.w_cs,
            &mut params.w_ua,
            &mut params.w_ca,
            &mut params.w_sa,
            &mut params.w_as,
        ] {
            glorot_fill(m, &mut rng);
        }
        glorot_fill_vec(&mut params.w_at, 1, &mut rng);
        glorot_fill_vec(&mut params.w_st, 1, &mut rng);
        params
    }
}

pub(crate) fn glorot_fill<R: Rng>(m: &mut Array2<f64>, rng: &mut R) {
    let (fan_out, fan_in) = m.dim();
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in m.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

pub(crate) fn glorot_fill_vec<R: Rng>(v: &mut Array1<f64>, fan_out: usize, rng: &mut R) {
    let bound = (6.0 / (v.len() + fan_out) as f64).sqrt();
    for x in v.iter_mut() {
        *x = rng.random_range(-bound..bound);
    }
}

/// The (satisfaction, aspiration) vectors carried across time slices.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub sat: Array1<f64>,
    pub asp: Array1<f64>,
}

impl LatentState {
    pub fn zeros(dims: &LaFeeDims) -> LatentState {
        LatentState { sat: Array1::zeros(dims.d_sat), asp: Array1::zeros(dims.d_asp) }
    }
}

/// Which update path a step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    In,
    Out,
}

/// Everything observable about one cell application.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub before: LatentState,
    pub after: LatentState,
    /// Us_t, the satisfaction update gate.
    pub gate_sat: Array1<f64>,
    /// Ua_t, the aspiration update gate.
    pub gate_asp: Array1<f64>,
    /// C̃s_t, the satisfaction candidate.
    pub cand_sat: Array1<f64>,
    /// C̃a_t, the aspiration candidate.
    pub cand_asp: Array1<f64>,
    /// Predicted interval in transformed-time space.
    pub prediction: f64,
    pub path: Path,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(
    w: &Array2<f64>,
    b: &Array1<f64>,
    recurrent: &Array1<f64>,
    input: &Array1<f64>,
) -> Array1<f64> {
    let d_rec = recurrent.len();
    let mut out = b.clone();
    for (row, o) in w.rows().into_iter().zip(out.iter_mut()) {
        let mut acc = 0.0;
        for (wv, xv) in row.iter().take(d_rec).zip(recurrent.iter()) {
            acc += wv * xv;
        }
        for (wv, xv) in row.iter().skip(d_rec).zip(input.iter()) {
            acc += wv * xv;
        }
        *o += acc;
    }
    out
}

fn check_finite(values: &Array1<f64>, tensor: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { tensor, step: 0 })
    }
}

/// Shared pre-injection satisfaction update: gate, candidate, convex
/// combination with the previous satisfaction.
fn sat_core(
    params: &LaFeeParams,
    prev_sat: &Array1<f64>,
    state: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
    let gate = affine(&params.w_us, &params.b_us, prev_sat, state).mapv(sigmoid);
    let cand = affine(&params.w_cs, &params.b_cs, prev_sat, state).mapv(f64::tanh);
    check_finite(&gate, "Us_t")?;
    check_finite(&cand, "Cs_t")?;
    let sat = Array1::from_shape_fn(prev_sat.len(), |i| {
        (1.0 - gate[i]) * prev_sat[i] + gate[i] * cand[i]
    });
    Ok((gate, cand, sat))
}

fn asp_core(
    params: &LaFeeParams,
    prev_asp: &Array1<f64>,
    action: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
    let gate = affine(&params.w_ua, &params.b_ua, prev_asp, action).mapv(sigmoid);
    let cand = affine(&params.w_ca, &params.b_ca, prev_asp, action).mapv(f64::tanh);
    check_finite(&gate, "Ua_t")?;
    check_finite(&cand, "Ca_t")?;
    let asp = Array1::from_shape_fn(prev_asp.len(), |i| {
        (1.0 - gate[i]) * prev_asp[i] + gate[i] * cand[i]
    });
    Ok((gate, cand, asp))
}

/// One in-game step: satisfaction first, injected into aspiration,
/// interval read off aspiration.
pub fn step_in(
    params: &LaFeeParams,
    prev: &LatentState,
    state: &Array1<f64>,
    action: &Array1<f64>,
) -> Result<StepTrace> {
    let (gate_sat, cand_sat, sat) = sat_core(params, &prev.sat, state)?;
    check_finite(&sat, "sat_t")?;
    let (gate_asp, cand_asp, asp_pre) = asp_core(params, &prev.asp, action)?;
    let asp = asp_pre + params.w_sa.dot(&sat) + &params.b_sa;
    check_finite(&asp, "asp_t")?;
    let prediction = params.w_at.dot(&asp) + params.b_at;
    if !prediction.is_finite() {
        return Err(Error::NonFinite { tensor: "t_in", step: 0 });
    }
    Ok(StepTrace {
        before: prev.clone(),
        after: LatentState { sat, asp },
        gate_sat,
        gate_asp,
        cand_sat,
        cand_asp,
        prediction,
        path: Path::In,
    })
}

/// One off-game step: aspiration first (no injection), injected into
/// satisfaction, interval read off satisfaction.
pub fn step_out(
    params: &LaFeeParams,
    prev: &LatentState,
    state: &Array1<f64>,
    action: &Array1<f64>,
) -> Result<StepTrace> {
    let (gate_asp, cand_asp, asp) = asp_core(params, &prev.asp, action)?;
    check_finite(&asp, "asp_t")?;
    let (gate_sat, cand_sat, sat_pre) = sat_core(params, &prev.sat, state)?;
    let sat = sat_pre + params.w_as.dot(&asp) + &params.b_as;
    check_finite(&sat, "sat_t")?;
    let prediction = params.w_st.dot(&sat) + params.b_st;
    if !prediction.is_finite() {
        return Err(Error::NonFinite { tensor: "t_out", step: 0 });
    }
    Ok(StepTrace {
        before: prev.clone(),
        after: LatentState { sat, asp },
        gate_sat,
        gate_asp,
        cand_sat,
        cand_asp,
        prediction,
        path: Path::Out,
    })
}

/// Run the cell left to right over an encoded sequence. The path per
/// step is chosen by step kind; the latent state threads through every
/// step, including across session boundaries.
pub fn forward_sequence(
    params: &LaFeeParams,
    seq: &EncodedSequence,
    init: &LatentState,
) -> Result<Vec<StepTrace>> {
    let mut traces = Vec::with_capacity(seq.steps.len());
    let mut latent = init.clone();
    for (index, step) in seq.steps.iter().enumerate() {
        let trace = match step.kind {
            StepKind::OffGame => step_out(params, &latent, &step.state, &step.action),
            StepKind::InGame => step_in(params, &latent, &step.state, &step.action),
        }
        .map_err(|e| match e {
            Error::NonFinite { tensor, .. } => Error::NonFinite { tensor, step: index },
            other => other,
        })?;
        latent = trace.after.clone();
        traces.push(trace);
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EncodedStep;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn scalar_dims() -> LaFeeDims {
        LaFeeDims { d_state: 1, d_action: 1, d_sat: 1, d_asp: 1 }
    }

    fn ones_params() -> LaFeeParams {
        let mut p = LaFeeParams::zeros(scalar_dims());
        p.w_us.fill(1.0);
        p.w_cs.fill(1.0);
        p.w_ua.fill(1.0);
        p.w_ca.fill(1.0);
        p.w_sa.fill(1.0);
        p.w_at.fill(1.0);
        p.w_as.fill(1.0);
        p.w_st.fill(1.0);
        p
    }

    #[test]
    fn zero_network_maps_zero_to_zero() {
        let dims = LaFeeDims { d_state: 3, d_action: 2, d_sat: 2, d_asp: 2 };
        let p = LaFeeParams::zeros(dims);
        let prev = LatentState::zeros(&dims);
        let state = Array1::zeros(3);
        let action = Array1::zeros(2);
        let t = step_in(&p, &prev, &state, &action).unwrap();
        assert!(t.after.sat.iter().all(|v| *v == 0.0));
        assert!(t.after.asp.iter().all(|v| *v == 0.0));
        assert_eq!(t.prediction, 0.0);
        assert!(t.gate_sat.iter().all(|v| *v == 0.5));
        let t = step_out(&p, &prev, &state, &action).unwrap();
        assert_eq!(t.prediction, 0.0);
    }

    #[test]
    fn closed_gate_preserves_satisfaction_memory() {
        let dims = LaFeeDims { d_state: 2, d_action: 2, d_sat: 2, d_asp: 2 };
        let mut p = LaFeeParams::zeros(dims);
        p.b_us.fill(-1e3);
        let prev = LatentState { sat: array![0.7, -0.4], asp: Array1::zeros(2) };
        let t = step_in(&p, &prev, &Array1::zeros(2), &Array1::zeros(2)).unwrap();
        assert_abs_diff_eq!(t.after.sat[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(t.after.sat[1], -0.4, epsilon = 1e-12);
    }

    /// Hand evaluation of the in-path recurrence with scalar dims, all
    /// weights 1 and biases 0, recomputed here independently of the
    /// implementation.
    #[test]
    fn scalar_in_path_matches_hand_evaluation() {
        let p = ones_params();
        let prev = LatentState::zeros(&scalar_dims());
        let state = array![1.0];
        let action = array![1.0];
        let t = step_in(&p, &prev, &state, &action).unwrap();

        let us = sigmoid(1.0 * 0.0 + 1.0 * 1.0);
        let cs = (1.0f64 * 0.0 + 1.0 * 1.0).tanh();
        let sat = (1.0 - us) * 0.0 + us * cs;
        let ua = sigmoid(1.0 * 0.0 + 1.0 * 1.0);
        let ca = (1.0f64 * 0.0 + 1.0 * 1.0).tanh();
        let asp = (1.0 - ua) * 0.0 + ua * ca + 1.0 * sat + 0.0;
        let pred = 1.0 * asp + 0.0;

        assert_abs_diff_eq!(t.gate_sat[0], us, epsilon = 1e-15);
        assert_abs_diff_eq!(t.cand_sat[0], cs, epsilon = 1e-15);
        assert_abs_diff_eq!(t.after.sat[0], sat, epsilon = 1e-15);
        assert_abs_diff_eq!(t.after.asp[0], asp, epsilon = 1e-15);
        assert_abs_diff_eq!(t.prediction, pred, epsilon = 1e-15);
        // frozen values: σ(1)≈0.731058..., tanh(1)≈0.761594...
        assert_abs_diff_eq!(t.after.sat[0], 0.5567699411459397, epsilon = 1e-12);
        assert_abs_diff_eq!(t.prediction, 1.1135398822918794, epsilon = 1e-12);
    }

    #[test]
    fn scalar_out_path_matches_hand_evaluation() {
        let p = ones_params();
        let prev = LatentState::zeros(&scalar_dims());
        let t = step_out(&p, &prev, &array![1.0], &array![1.0]).unwrap();

        let ua = sigmoid(1.0);
        let ca = 1.0f64.tanh();
        let asp = ua * ca;
        let us = sigmoid(1.0);
        let cs = 1.0f64.tanh();
        let sat = us * cs + 1.0 * asp;
        let pred = sat;

        assert_abs_diff_eq!(t.after.asp[0], asp, epsilon = 1e-15);
        assert_abs_diff_eq!(t.after.sat[0], sat, epsilon = 1e-15);
        assert_abs_diff_eq!(t.prediction, pred, epsilon = 1e-15);
        assert_abs_diff_eq!(t.after.asp[0], 0.5567699411459397, epsilon = 1e-12);
        assert_abs_diff_eq!(t.prediction, 1.1135398822918794, epsilon = 1e-12);
    }

    #[test]
    fn out_path_without_injection_matches_in_path_satisfaction() {
        // shared translations: with W_as = 0 and b_as = 0 both paths
        // produce the same satisfaction for identical inputs
        let dims = LaFeeDims { d_state: 3, d_action: 2, d_sat: 2, d_asp: 2 };
        let mut p = LaFeeParams::init(dims, 11);
        p.w_as.fill(0.0);
        p.b_as.fill(0.0);
        let prev = LatentState { sat: array![0.2, -0.1], asp: array![0.3, 0.4] };
        let state = array![0.5, -0.2, 0.9];
        let action = array![1.0, 0.0];
        let a = step_in(&p, &prev, &state, &action).unwrap();
        let b = step_out(&p, &prev, &state, &action).unwrap();
        assert_abs_diff_eq!(a.after.sat[0], b.after.sat[0], epsilon = 1e-15);
        assert_abs_diff_eq!(a.after.sat[1], b.after.sat[1], epsilon = 1e-15);
    }

    fn encoded_step(kind: StepKind, state: Array1<f64>, action_index: usize) -> EncodedStep {
        let mut action = Array1::zeros(2);
        action[action_index] = 1.0;
        EncodedStep {
            state,
            action,
            action_index,
            kind,
            target: 1.0,
            interval_seconds: 1.0,
            win_flag: None,
        }
    }

    #[test]
    fn empty_sequence_gives_empty_traces() {
        let dims = LaFeeDims { d_state: 2, d_action: 2, d_sat: 2, d_asp: 2 };
        let p = LaFeeParams::init(dims, 3);
        let seq = EncodedSequence { user_id: "u".into(), steps: vec![] };
        let traces = forward_sequence(&p, &seq, &LatentState::zeros(&dims)).unwrap();
        assert!(traces.is_empty());
    }

    #[test]
    fn path_follows_step_kind_and_latents_chain() {
        let dims = LaFeeDims { d_state: 2, d_action: 2, d_sat: 2, d_asp: 2 };
        let p = LaFeeParams::init(dims, 5);
        let steps = vec![
            encoded_step(StepKind::InGame, array![0.1, 0.2], 0),
            encoded_step(StepKind::OffGame, array![0.3, -0.1], 1),
            encoded_step(StepKind::InGame, array![0.0, 0.5], 0),
            encoded_step(StepKind::OffGame, array![-0.4, 0.2], 1),
        ];
        let seq = EncodedSequence { user_id: "u".into(), steps };
        let traces = forward_sequence(&p, &seq, &LatentState::zeros(&dims)).unwrap();
        let paths: Vec<Path> = traces.iter().map(|t| t.path).collect();
        assert_eq!(paths, vec![Path::In, Path::Out, Path::In, Path::Out]);
        for pair in traces.windows(2) {
            assert_eq!(pair[1].before, pair[0].after);
        }
    }

    #[test]
    fn all_in_game_sequence_uses_only_the_in_path() {
        let dims = LaFeeDims { d_state: 2, d_action: 2, d_sat: 2, d_asp: 2 };
        let p = LaFeeParams::init(dims, 5);
        let steps =
            (0..6).map(|i| encoded_step(StepKind::InGame, array![0.1 * i as f64, 0.2], i % 2));
        let seq = EncodedSequence { user_id: "u".into(), steps: collect_vec(steps) };
        let traces = forward_sequence(&p, &seq, &LatentState::zeros(&dims)).unwrap();
        assert!(traces.iter().all(|t| t.path == Path::In));
    }

    fn collect_vec<T>(iter: impl Iterator<Item = T>) -> Vec<T> {
        iter.collect()
    }

    #[test]
    fn shared_parameter_mutation_is_visible_on_both_paths() {
        let dims = LaFeeDims { d_state: 2, d_action: 2, d_sat: 2, d_asp: 2 };
        let mut p = LaFeeParams::zeros(dims);
        let prev = LatentState::zeros(&dims);
        let state = array![1.0, 0.0];
        let action = array![0.0, 1.0];
        let before_in = step_in(&p, &prev, &state, &action).unwrap();
        let before_out = step_out(&p, &prev, &state, &action).unwrap();
        // mutate the shared satisfaction gate once
        p.w_us[(0, 2)] = 3.0;
        let after_in = step_in(&p, &prev, &state, &action).unwrap();
        let after_out = step_out(&p, &prev, &state, &action).unwrap();
        assert_ne!(before_in.gate_sat[0], after_in.gate_sat[0]);
        assert_ne!(before_out.gate_sat[0], after_out.gate_sat[0]);
        assert_eq!(after_in.gate_sat[0], after_out.gate_sat[0]);
    }

    #[test]
    fn identical_inputs_give_bit_identical_traces() {
        let dims = LaFeeDims::default();
        let p = LaFeeParams::init(dims, 42);
        let q = LaFeeParams::init(dims, 42);
        assert_eq!(p, q);
        let prev = LatentState::zeros(&dims);
        let state = Array1::from_iter((0..STATE_DIM).map(|i| (i as f64).sin()));
        let mut action = Array1::zeros(ACTION_DIM);
        action[4] = 1.0;
        let a = step_in(&p, &prev, &state, &action).unwrap();
        let b = step_in(&q, &prev, &state, &action).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_input_is_reported_with_tensor_name() {
        let dims = LaFeeDims { d_state: 1, d_action: 1, d_sat: 1, d_asp: 1 };
        let p = ones_params();
        let prev = LatentState { sat: array![f64::INFINITY], asp: array![0.0] };
        let err = step_in(&p, &prev, &array![1.0], &array![1.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        let _ = dims;
    }
}
