//! Core data model: play sequences of (state, action, interval) steps,
//! the 29-dimensional step encoding, and churn criteria.

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of state counters per step.
pub const STATE_DIM: usize = 8;
/// Number of distinct action labels.
pub const ACTION_DIM: usize = 19;
/// Encoded step width: 8 standardized states + 19 one-hot actions + 1 interval.
pub const STEP_VECTOR_DIM: usize = STATE_DIM + ACTION_DIM + 1;

/// The 19 action labels, with a fixed index 0..=18.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionLabel {
    LoginRole,
    LogoutRole,
    ReplaceRole,
    PrivateGame,
    QuickMatch1V1,
    QuickMatch2V2,
    DailyTaskFinish,
    DailyTaskReward,
    DailySign,
    DailySignReward,
    RewardAchievement,
    InviteLog,
    ShareLog,
    FollowLog,
    PraisePlayRound,
    RoomModeCreate,
    ConsumeItem,
    GuideInfo,
    AdsLog,
}

impl ActionLabel {
    pub const ALL: [ActionLabel; ACTION_DIM] = [
        ActionLabel::LoginRole,
        ActionLabel::LogoutRole,
        ActionLabel::ReplaceRole,
        ActionLabel::PrivateGame,
        ActionLabel::QuickMatch1V1,
        ActionLabel::QuickMatch2V2,
        ActionLabel::DailyTaskFinish,
        ActionLabel::DailyTaskReward,
        ActionLabel::DailySign,
        ActionLabel::DailySignReward,
        ActionLabel::RewardAchievement,
        ActionLabel::InviteLog,
        ActionLabel::ShareLog,
        ActionLabel::FollowLog,
        ActionLabel::PraisePlayRound,
        ActionLabel::RoomModeCreate,
        ActionLabel::ConsumeItem,
        ActionLabel::GuideInfo,
        ActionLabel::AdsLog,
    ];

    /// Stable enumeration index in 0..19.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|a| *a == self).expect("label in ALL")
    }

    pub fn from_index(index: usize) -> Option<ActionLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionLabel::LoginRole => "LoginRole",
            ActionLabel::LogoutRole => "LogoutRole",
            ActionLabel::ReplaceRole => "ReplaceRole",
            ActionLabel::PrivateGame => "PrivateGame",
            ActionLabel::QuickMatch1V1 => "QuickMatch1V1",
            ActionLabel::QuickMatch2V2 => "QuickMatch2V2",
            ActionLabel::DailyTaskFinish => "DailyTaskFinish",
            ActionLabel::DailyTaskReward => "DailyTaskReward",
            ActionLabel::DailySign => "DailySign",
            ActionLabel::DailySignReward => "DailySignReward",
            ActionLabel::RewardAchievement => "RewardAchievement",
            ActionLabel::InviteLog => "InviteLog",
            ActionLabel::ShareLog => "ShareLog",
            ActionLabel::FollowLog => "FollowLog",
            ActionLabel::PraisePlayRound => "PraisePlayRound",
            ActionLabel::RoomModeCreate => "RoomModeCreate",
            ActionLabel::ConsumeItem => "ConsumeItem",
            ActionLabel::GuideInfo => "GuideInfo",
            ActionLabel::AdsLog => "AdsLog",
        }
    }
}

impl FromStr for ActionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<ActionLabel> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAction(s.to_string()))
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Names of the 8 state counters, in encoding order.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "gold",
    "experience",
    "emojis_sent",
    "gifts_sent",
    "achievement_got",
    "item_num",
    "grade_up",
    "online_duration",
];

/// A snapshot of the user's 8 counters. OnlineDuration is in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn zeros() -> StateVector {
        StateVector([0.0; STATE_DIM])
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.0.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Format(format!("state `{}` is not finite", STATE_NAMES[i])));
            }
            if *v < 0.0 {
                return Err(Error::Format(format!("state `{}` is negative: {v}", STATE_NAMES[i])));
            }
        }
        Ok(())
    }
}

/// Whether the step's interval is in-game time or off-game time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    InGame,
    OffGame,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::InGame => "in",
            StepKind::OffGame => "out",
        }
    }
}

impl FromStr for StepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<StepKind> {
        match s {
            "in" => Ok(StepKind::InGame),
            "out" => Ok(StepKind::OffGame),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// One time slice: the user takes `action` under `state` and waits
/// `interval_seconds` before the next event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: StateVector,
    pub action: ActionLabel,
    pub interval_seconds: f64,
    pub kind: StepKind,
    /// Present only on match actions where the outcome could be read
    /// from the log.
    pub win_flag: Option<bool>,
}

impl Step {
    pub fn validate(&self) -> Result<()> {
        self.state.validate()?;
        if !self.interval_seconds.is_finite() || self.interval_seconds < 0.0 {
            return Err(Error::Format(format!(
                "interval must be finite and nonnegative, got {}",
                self.interval_seconds
            )));
        }
        let off = self.kind == StepKind::OffGame;
        let logout = self.action == ActionLabel::LogoutRole;
        if off != logout {
            return Err(Error::Format(format!(
                "kind/action mismatch: action {} with kind {}",
                self.action,
                self.kind.as_str()
            )));
        }
        Ok(())
    }
}

/// One user's ordered sequence of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaySequence {
    pub user_id: String,
    pub steps: Vec<Step>,
}

impl PlaySequence {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::EmptyInput("play sequence has no steps"));
        }
        for step in &self.steps {
            step.validate()?;
        }
        Ok(())
    }
}

/// A collection of per-user sequences with unique user ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub sequences: Vec<PlaySequence>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for seq in &self.sequences {
            if !seen.insert(seq.user_id.as_str()) {
                return Err(Error::Format(format!("duplicate user_id `{}`", seq.user_id)));
            }
            seq.validate()?;
        }
        Ok(())
    }
}

/// Partition a sequence into in-game and off-game steps.
///
/// Off-game steps are exactly the LogoutRole steps; the partition is
/// exhaustive and order-preserving.
pub fn split_by_kind(seq: &PlaySequence) -> (Vec<&Step>, Vec<&Step>) {
    seq.steps.iter().partition(|s| s.kind == StepKind::InGame)
}

/// The churn time criterion τ in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChurnCriterion {
    pub tau_seconds: f64,
}

impl ChurnCriterion {
    pub fn new(tau_seconds: f64) -> Result<ChurnCriterion> {
        if !(tau_seconds > 0.0) || !tau_seconds.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "churn criterion must be a positive finite number of seconds, got {tau_seconds}"
            )));
        }
        Ok(ChurnCriterion { tau_seconds })
    }

    pub fn from_days(days: f64) -> Result<ChurnCriterion> {
        ChurnCriterion::new(days * 86_400.0)
    }

    pub fn days(&self) -> f64 {
        self.tau_seconds / 86_400.0
    }
}

/// Transform applied to interval targets before regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTransform {
    /// y = ln(1 + t). Compresses the 1 s .. 10^6 s range.
    #[default]
    Ln1p,
    Identity,
}

impl TargetTransform {
    pub fn apply(self, seconds: f64) -> f64 {
        match self {
            TargetTransform::Ln1p => seconds.ln_1p(),
            TargetTransform::Identity => seconds,
        }
    }

    /// Inverse of `apply`, clamped to nonnegative seconds so that
    /// arbitrary regression outputs map back into the time domain.
    pub fn invert(self, value: f64) -> f64 {
        let t = match self {
            TargetTransform::Ln1p => value.exp_m1(),
            TargetTransform::Identity => value,
        };
        t.max(0.0)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetTransform::Ln1p => "ln1p",
            TargetTransform::Identity => "identity",
        }
    }
}

impl FromStr for TargetTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<TargetTransform> {
        match s {
            "ln1p" => Ok(TargetTransform::Ln1p),
            "identity" => Ok(TargetTransform::Identity),
            other => Err(Error::InvalidConfig(format!("unknown target transform `{other}`"))),
        }
    }
}

/// Per-dimension affine statistics for state standardization.
///
/// Fit on the training split only; `std` is floored at 1e-8 so constant
/// dimensions map to zero instead of dividing by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: [f64; STATE_DIM],
    pub std: [f64; STATE_DIM],
}

pub const SCALER_STD_FLOOR: f64 = 1e-8;

impl Scaler {
    /// Identity scaler: mean 0, std 1 on every dimension.
    pub fn identity() -> Scaler {
        Scaler { mean: [0.0; STATE_DIM], std: [1.0; STATE_DIM] }
    }

    /// Fit mean/std over every step of the given sequences.
    pub fn fit<'a, I>(sequences: I) -> Result<Scaler>
    where
        I: IntoIterator<Item = &'a PlaySequence>,
    {
        let mut n = 0usize;
        let mut sum = [0.0; STATE_DIM];
        let mut sum_sq = [0.0; STATE_DIM];
        for seq in sequences {
            for step in &seq.steps {
                n += 1;
                for d in 0..STATE_DIM {
                    sum[d] += step.state.0[d];
                    sum_sq[d] += step.state.0[d] * step.state.0[d];
                }
            }
        }
        if n == 0 {
            return Err(Error::EmptyInput("cannot fit a scaler on zero steps"));
        }
        let mut mean = [0.0; STATE_DIM];
        let mut std = [0.0; STATE_DIM];
        for d in 0..STATE_DIM {
            mean[d] = sum[d] / n as f64;
            let var = (sum_sq[d] / n as f64 - mean[d] * mean[d]).max(0.0);
            std[d] = var.sqrt().max(SCALER_STD_FLOOR);
        }
        Ok(Scaler { mean, std })
    }

    pub fn standardize(&self, state: &StateVector) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        for d in 0..STATE_DIM {
            out[d] = (state.0[d] - self.mean[d]) / self.std[d];
        }
        out
    }
}

/// The 29-dimensional encoded step: 8 standardized state components,
/// 19 one-hot action components, 1 transformed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepVector(pub [f64; STEP_VECTOR_DIM]);

impl StepVector {
    pub fn state_block(&self) -> &[f64] {
        &self.0[..STATE_DIM]
    }

    pub fn action_block(&self) -> &[f64] {
        &self.0[STATE_DIM..STATE_DIM + ACTION_DIM]
    }

    pub fn interval(&self) -> f64 {
        self.0[STEP_VECTOR_DIM - 1]
    }
}

/// Encode one step as its 29-dimensional vector.
pub fn encode_step(step: &Step, scaler: &Scaler, transform: TargetTransform) -> StepVector {
    let mut v = [0.0; STEP_VECTOR_DIM];
    v[..STATE_DIM].copy_from_slice(&scaler.standardize(&step.state));
    v[STATE_DIM + step.action.index()] = 1.0;
    v[STEP_VECTOR_DIM - 1] = transform.apply(step.interval_seconds);
    StepVector(v)
}

/// One step in model-ready form.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedStep {
    /// Standardized state components (length 8).
    pub state: Array1<f64>,
    /// One-hot action components (length 19).
    pub action: Array1<f64>,
    pub action_index: usize,
    pub kind: StepKind,
    /// Transformed interval, the regression target.
    pub target: f64,
    /// Raw interval in seconds, kept for threshold evaluation.
    pub interval_seconds: f64,
    pub win_flag: Option<bool>,
}

/// A sequence encoded for training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub user_id: String,
    pub steps: Vec<EncodedStep>,
}

pub fn encode_sequence(
    seq: &PlaySequence,
    scaler: &Scaler,
    transform: TargetTransform,
) -> EncodedSequence {
    let steps = seq
        .steps
        .iter()
        .map(|step| {
            let sv = encode_step(step, scaler, transform);
            EncodedStep {
                state: Array1::from_iter(sv.state_block().iter().copied()),
                action: Array1::from_iter(sv.action_block().iter().copied()),
                action_index: step.action.index(),
                kind: step.kind,
                target: sv.interval(),
                interval_seconds: step.interval_seconds,
                win_flag: step.win_flag,
            }
        })
        .collect();
    EncodedSequence { user_id: seq.user_id.clone(), steps }
}

pub fn encode_dataset(
    dataset: &Dataset,
    scaler: &Scaler,
    transform: TargetTransform,
) -> Vec<EncodedSequence> {
    dataset.sequences.iter().map(|s| encode_sequence(s, scaler, transform)).collect()
}

// ---------------------------------------------------------------------------
// Canonical step-file interchange: line-delimited CSV records, one per step.
// Field order: user_id, action, 8 state values, interval_seconds, kind,
// win_flag (empty when absent). No header row.
// ---------------------------------------------------------------------------

/// Write a dataset in the canonical step format.
pub fn write_step_records<W: io::Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for seq in &dataset.sequences {
        for step in &seq.steps {
            let mut record = Vec::with_capacity(STEP_VECTOR_DIM + 3);
            record.push(seq.user_id.clone());
            record.push(step.action.name().to_string());
            for v in &step.state.0 {
                record.push(format_float(*v));
            }
            record.push(format_float(step.interval_seconds));
            record.push(step.kind.as_str().to_string());
            record.push(match step.win_flag {
                Some(true) => "true".to_string(),
                Some(false) => "false".to_string(),
                None => String::new(),
            });
            w.write_record(&record).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset from the canonical step format. Steps sharing a
/// user_id must be contiguous; sequence order follows first appearance.
pub fn read_step_records<R: io::Read>(reader: R) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut dataset = Dataset::default();
    for (index, record) in r.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let expected = STATE_DIM + 5;
        if record.len() != expected {
            return Err(Error::Format(format!(
                "step record {index}: expected {expected} fields, got {}",
                record.len()
            )));
        }
        let user_id = record[0].to_string();
        let action: ActionLabel = record[1].parse()?;
        let mut state = [0.0; STATE_DIM];
        for d in 0..STATE_DIM {
            state[d] = parse_float(&record[2 + d], index)?;
        }
        let interval_seconds = parse_float(&record[2 + STATE_DIM], index)?;
        let kind: StepKind = record[3 + STATE_DIM].parse()?;
        let win_flag = match &record[4 + STATE_DIM] {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => {
                return Err(Error::Format(format!("step record {index}: bad win flag `{other}`")))
            }
        };
        let step = Step { state: StateVector(state), action, interval_seconds, kind, win_flag };
        step.validate()?;
        match dataset.sequences.last_mut() {
            Some(seq) if seq.user_id == user_id => seq.steps.push(step),
            _ => {
                if dataset.sequences.iter().any(|s| s.user_id == user_id) {
                    return Err(Error::Format(format!(
                        "step record {index}: user `{user_id}` is not contiguous"
                    )));
                }
                dataset.sequences.push(PlaySequence { user_id, steps: vec![step] });
            }
        }
    }
    Ok(dataset)
}

fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn parse_float(s: &str, index: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("step record {index}: bad number `{s}`")))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(action: ActionLabel, interval: f64) -> Step {
        Step {
            state: StateVector::zeros(),
            action,
            interval_seconds: interval,
            kind: if action == ActionLabel::LogoutRole {
                StepKind::OffGame
            } else {
                StepKind::InGame
            },
            win_flag: None,
        }
    }

    #[test]
    fn action_labels_are_exactly_19_and_indexing_round_trips() {
        assert_eq!(ActionLabel::ALL.len(), ACTION_DIM);
        let mut names = HashSet::new();
        for (i, label) in ActionLabel::ALL.iter().enumerate() {
            assert_eq!(label.index(), i);
            assert_eq!(ActionLabel::from_index(i), Some(*label));
            assert!(names.insert(label.name()));
            assert_eq!(label.name().parse::<ActionLabel>().unwrap(), *label);
        }
        assert_eq!(ActionLabel::ALL[0], ActionLabel::LoginRole);
        assert_eq!(ActionLabel::ALL[18], ActionLabel::AdsLog);
    }

    #[test]
    fn unknown_action_is_rejected_with_its_name() {
        let err = "MysteryAction".parse::<ActionLabel>().unwrap_err();
        assert!(matches!(err, Error::UnknownAction(name) if name == "MysteryAction"));
    }

    #[test]
    fn encode_sets_one_hot_at_the_action_index() {
        let s = step(ActionLabel::LoginRole, 1.0);
        let v = encode_step(&s, &Scaler::identity(), TargetTransform::Ln1p);
        for (i, x) in v.action_block().iter().enumerate() {
            let expected = if i == ActionLabel::LoginRole.index() { 1.0 } else { 0.0 };
            assert_eq!(*x, expected);
        }
        assert_eq!(v.action_block().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn encode_standardizes_to_zero_at_the_scaler_means() {
        let mut scaler = Scaler::identity();
        scaler.mean = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let mut s = step(ActionLabel::DailySign, 10.0);
        s.state = StateVector(scaler.mean);
        let v = encode_step(&s, &scaler, TargetTransform::Ln1p);
        for x in v.state_block() {
            assert_eq!(*x, 0.0);
        }
    }

    #[test]
    fn encode_maps_zero_interval_to_zero_under_ln1p() {
        let s = step(ActionLabel::AdsLog, 0.0);
        let v = encode_step(&s, &Scaler::identity(), TargetTransform::Ln1p);
        assert_eq!(v.interval(), 0.0);
    }

    #[test]
    fn one_hot_blocks_are_distinct_across_labels() {
        let scaler = Scaler::identity();
        let mut seen = HashSet::new();
        for label in ActionLabel::ALL {
            let mut s = step(label, 0.0);
            // keep kind consistent for LogoutRole
            s.kind =
                if label == ActionLabel::LogoutRole { StepKind::OffGame } else { StepKind::InGame };
            let v = encode_step(&s, &scaler, TargetTransform::Ln1p);
            let key: Vec<u64> = v.action_block().iter().map(|x| x.to_bits()).collect();
            assert!(seen.insert(key), "duplicate one-hot block for {label}");
        }
    }

    #[test]
    fn split_by_kind_handles_empty_partitions() {
        let seq = PlaySequence {
            user_id: "u".into(),
            steps: vec![step(ActionLabel::LoginRole, 1.0), step(ActionLabel::DailySign, 2.0)],
        };
        let (ins, outs) = split_by_kind(&seq);
        assert_eq!(ins.len(), 2);
        assert!(outs.is_empty());

        let seq = PlaySequence {
            user_id: "u".into(),
            steps: vec![step(ActionLabel::LogoutRole, 1.0), step(ActionLabel::LogoutRole, 2.0)],
        };
        let (ins, outs) = split_by_kind(&seq);
        assert!(ins.is_empty());
        assert_eq!(outs.len(), 2);
    }

    #[test]
    fn split_by_kind_counts_login_match_logout_login_logout() {
        let seq = PlaySequence {
            user_id: "u".into(),
            steps: vec![
                step(ActionLabel::LoginRole, 10.0),
                step(ActionLabel::QuickMatch1V1, 300.0),
                step(ActionLabel::LogoutRole, 3600.0),
                step(ActionLabel::LoginRole, 15.0),
                step(ActionLabel::LogoutRole, 7200.0),
            ],
        };
        let (ins, outs) = split_by_kind(&seq);
        assert_eq!(ins.len(), 3);
        assert_eq!(outs.len(), 2);
        assert_eq!(ins.len() + outs.len(), seq.steps.len());
        assert!(outs.iter().all(|s| s.action == ActionLabel::LogoutRole));
    }

    #[test]
    fn kind_action_mismatch_is_rejected() {
        let mut s = step(ActionLabel::LogoutRole, 1.0);
        s.kind = StepKind::InGame;
        assert!(s.validate().is_err());
        let mut s = step(ActionLabel::DailySign, 1.0);
        s.kind = StepKind::OffGame;
        assert!(s.validate().is_err());
    }

    #[test]
    fn dataset_rejects_duplicate_user_ids() {
        let seq = PlaySequence { user_id: "u1".into(), steps: vec![step(ActionLabel::AdsLog, 1.0)] };
        let dataset = Dataset { sequences: vec![seq.clone(), seq] };
        assert!(dataset.validate().is_err());
    }

    #[test]
    fn step_records_round_trip() {
        let dataset = Dataset {
            sequences: vec![
                PlaySequence {
                    user_id: "alice".into(),
                    steps: vec![
                        step(ActionLabel::LoginRole, 12.0),
                        Step {
                            state: StateVector([1.0, 2.0, 0.0, 0.0, 0.0, 3.5, 0.0, 60.0]),
                            action: ActionLabel::QuickMatch2V2,
                            interval_seconds: 272.0,
                            kind: StepKind::InGame,
                            win_flag: Some(true),
                        },
                        step(ActionLabel::LogoutRole, 1771.0),
                    ],
                },
                PlaySequence { user_id: "bob".into(), steps: vec![step(ActionLabel::AdsLog, 5.0)] },
            ],
        };
        let mut buf = Vec::new();
        write_step_records(&dataset, &mut buf).unwrap();
        let back = read_step_records(buf.as_slice()).unwrap();
        assert_eq!(back, dataset);
    }

    #[test]
    fn churn_criterion_requires_positive_tau() {
        assert!(ChurnCriterion::new(0.0).is_err());
        assert!(ChurnCriterion::new(-5.0).is_err());
        assert!(ChurnCriterion::from_days(1.0).unwrap().tau_seconds == 86_400.0);
    }

    #[test]
    fn scaler_floors_std_on_constant_dimensions() {
        let seq = PlaySequence {
            user_id: "u".into(),
            steps: vec![step(ActionLabel::AdsLog, 1.0), step(ActionLabel::AdsLog, 2.0)],
        };
        let scaler = Scaler::fit([&seq]).unwrap();
        for d in 0..STATE_DIM {
            assert_eq!(scaler.std[d], SCALER_STD_FLOOR);
            assert_eq!(scaler.mean[d], 0.0);
        }
    }
}
