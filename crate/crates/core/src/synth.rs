//! Seeded player simulator with explicit ground-truth latent dynamics.
//!
//! Each simulated user carries a scalar satisfaction and aspiration.
//! Satisfaction drifts with match outcomes toward a skill-dependent
//! baseline; aspiration fatigues with every in-session action (matches
//! weigh more) and raises the session-end probability, then recovers
//! while logged out. The logout interval follows the decreasing link
//! g(s) = ⌊T_max·σ(−k·s)⌋ with multiplicative log-normal noise, so low
//! satisfaction means long breaks.
//!
//! The generator emits paper-format raw logs and derives the step
//! dataset from them through the ingest pipeline, which makes the
//! JSON → parse → clean → derive round trip exact by construction.

use std::io;

use chrono::{DateTime, NaiveDateTime};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::domain::{ActionLabel, Dataset};
use crate::error::{Error, Result};
use crate::ingest::{ingest_documents, CleaningReport, DeriveOptions, RawLog, RepairRules};

/// Sampling weights over in-session actions. Session boundaries
/// (LoginRole/LogoutRole) are structural and may not carry weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub weights: Vec<(ActionLabel, f64)>,
}

impl ActionProfile {
    pub fn battle_default() -> ActionProfile {
        ActionProfile {
            weights: vec![
                (ActionLabel::QuickMatch1V1, 0.33),
                (ActionLabel::QuickMatch2V2, 0.22),
                (ActionLabel::PrivateGame, 0.06),
                (ActionLabel::RoomModeCreate, 0.04),
                (ActionLabel::DailyTaskFinish, 0.07),
                (ActionLabel::DailyTaskReward, 0.05),
                (ActionLabel::DailySign, 0.04),
                (ActionLabel::DailySignReward, 0.03),
                (ActionLabel::RewardAchievement, 0.04),
                (ActionLabel::ConsumeItem, 0.05),
                (ActionLabel::ReplaceRole, 0.02),
                (ActionLabel::PraisePlayRound, 0.02),
                (ActionLabel::InviteLog, 0.01),
                (ActionLabel::ShareLog, 0.01),
                (ActionLabel::GuideInfo, 0.005),
                (ActionLabel::AdsLog, 0.005),
            ],
        }
    }

    pub fn social_default() -> ActionProfile {
        ActionProfile {
            weights: vec![
                (ActionLabel::QuickMatch1V1, 0.06),
                (ActionLabel::QuickMatch2V2, 0.04),
                (ActionLabel::PrivateGame, 0.03),
                (ActionLabel::RoomModeCreate, 0.02),
                (ActionLabel::InviteLog, 0.14),
                (ActionLabel::ShareLog, 0.13),
                (ActionLabel::FollowLog, 0.12),
                (ActionLabel::PraisePlayRound, 0.13),
                (ActionLabel::DailyTaskFinish, 0.08),
                (ActionLabel::DailyTaskReward, 0.06),
                (ActionLabel::DailySign, 0.06),
                (ActionLabel::DailySignReward, 0.04),
                (ActionLabel::RewardAchievement, 0.03),
                (ActionLabel::ConsumeItem, 0.03),
                (ActionLabel::GuideInfo, 0.02),
                (ActionLabel::AdsLog, 0.01),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut total = 0.0;
        for (label, w) in &self.weights {
            if *label == ActionLabel::LoginRole || *label == ActionLabel::LogoutRole {
                return Err(Error::InvalidConfig(format!(
                    "profile may not weight the session boundary action {label}"
                )));
            }
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidConfig(format!("bad weight {w} for {label}")));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidConfig("action profile has all-zero propensities".into()));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> ActionLabel {
        let total: f64 = self.weights.iter().map(|(_, w)| w).sum();
        let mut u = rng.random_range(0.0..total);
        for (label, w) in &self.weights {
            if u < *w {
                return *label;
            }
            u -= w;
        }
        self.weights.last().expect("non-empty profile").0
    }

    /// Total weight on the configured match actions, normalized.
    pub fn match_share(&self, match_actions: &std::collections::HashSet<ActionLabel>) -> f64 {
        let total: f64 = self.weights.iter().map(|(_, w)| w).sum();
        let m: f64 =
            self.weights.iter().filter(|(l, _)| match_actions.contains(l)).map(|(_, w)| w).sum();
        m / total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub seed: u64,
    /// Probability that a user draws the battle-heavy profile.
    pub battle_fraction: f64,
    pub battle_profile: ActionProfile,
    pub social_profile: ActionProfile,
    /// Mean number of sessions per user (Poisson, at least 1).
    pub mean_sessions: f64,
    /// Approximate mean in-session actions per session.
    pub mean_session_steps: f64,
    /// Satisfaction shift per match outcome (+ on win, − on loss).
    pub sat_win_drift: f64,
    /// Pull of satisfaction toward the user's skill baseline, in [0,1].
    pub sat_pull: f64,
    /// Aspiration lost per in-session action, in [0,1]; matches weigh
    /// fully, lighter actions 0.4 of it.
    pub asp_fatigue: f64,
    /// Aspiration recovered over a logout break, in [0,1].
    pub asp_recovery: f64,
    /// Std-dev of the white noise added to both latents per step.
    pub latent_noise: f64,
    /// Churn link steepness: t_out ≈ T_max·σ(−k·sat).
    pub churn_k: f64,
    pub t_max_seconds: f64,
    /// Log-normal σ of the multiplicative noise on in-game intervals.
    pub noise_t_in: f64,
    /// Log-normal σ of the multiplicative noise on logout intervals.
    pub noise_t_out: f64,
    pub win_prob_min: f64,
    pub win_prob_max: f64,
    /// User start times spread uniformly over this many seconds.
    pub start_spread_seconds: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            n_users: 500,
            seed: 0,
            battle_fraction: 0.5,
            battle_profile: ActionProfile::battle_default(),
            social_profile: ActionProfile::social_default(),
            mean_sessions: 8.0,
            mean_session_steps: 6.0,
            sat_win_drift: 0.10,
            sat_pull: 0.15,
            asp_fatigue: 0.10,
            asp_recovery: 0.6,
            latent_noise: 0.02,
            churn_k: 6.0,
            t_max_seconds: 21.0 * 86_400.0,
            noise_t_in: 0.30,
            noise_t_out: 0.35,
            win_prob_min: 0.2,
            win_prob_max: 0.8,
            start_spread_seconds: 3 * 86_400,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.battle_profile.validate()?;
        self.social_profile.validate()?;
        if !(0.0..=1.0).contains(&self.battle_fraction) {
            return Err(Error::InvalidConfig("battle_fraction must lie in [0,1]".into()));
        }
        for (name, rate) in
            [("sat_pull", self.sat_pull), ("asp_fatigue", self.asp_fatigue), ("asp_recovery", self.asp_recovery)]
        {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0,1]")));
            }
        }
        if self.mean_sessions <= 0.0 || self.mean_session_steps <= 0.0 {
            return Err(Error::InvalidConfig("session means must be positive".into()));
        }
        if self.t_max_seconds < 1.0 || self.churn_k <= 0.0 {
            return Err(Error::InvalidConfig("churn link needs T_max ≥ 1 and k > 0".into()));
        }
        if self.win_prob_min < 0.0
            || self.win_prob_max > 1.0
            || self.win_prob_min > self.win_prob_max
        {
            return Err(Error::InvalidConfig("win probability range must sit inside [0,1]".into()));
        }
        if self.noise_t_in < 0.0 || self.noise_t_out < 0.0 || self.latent_noise < 0.0 {
            return Err(Error::InvalidConfig("noise scales must be nonnegative".into()));
        }
        Ok(())
    }

    /// The satisfaction→logout link: whole seconds, at least 1,
    /// strictly decreasing in satisfaction up to flooring.
    pub fn logout_link(&self, satisfaction: f64) -> f64 {
        let sigma = 1.0 / (1.0 + (self.churn_k * satisfaction).exp());
        (self.t_max_seconds * sigma).floor().max(1.0)
    }
}

/// True latent values and the pre-noise interval for every emitted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub user_id: String,
    pub step_index: usize,
    pub true_sat: f64,
    pub true_asp: f64,
    pub true_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub records: Vec<GroundTruthRecord>,
}

impl GroundTruth {
    pub fn for_user<'a>(&'a self, user_id: &'a str) -> impl Iterator<Item = &'a GroundTruthRecord> {
        self.records.iter().filter(move |r| r.user_id == user_id)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub ground_truth: GroundTruth,
    pub raw_logs: Vec<(String, Vec<RawLog>)>,
    pub cleaning: Vec<(String, CleaningReport)>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn noise_factor<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 1.0;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    normal.sample(rng).exp()
}

fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

const BASE_EPOCH: i64 = 1_514_764_800; // 2018-01-01 00:00:00

fn timestamp(epoch: i64) -> NaiveDateTime {
    DateTime::from_timestamp(epoch, 0).expect("valid epoch").naive_utc()
}

/// Typical dwell time per action kind before the aspiration slowdown.
fn base_action_seconds(action: ActionLabel) -> f64 {
    use ActionLabel::*;
    match action {
        QuickMatch1V1 | QuickMatch2V2 => 300.0,
        PrivateGame | RoomModeCreate => 360.0,
        DailyTaskFinish | DailyTaskReward | DailySign | DailySignReward => 15.0,
        RewardAchievement | ConsumeItem => 20.0,
        InviteLog | ShareLog | FollowLog | PraisePlayRound => 30.0,
        GuideInfo | AdsLog | ReplaceRole => 25.0,
        LoginRole | LogoutRole => 5.0,
    }
}

struct UserSim<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha20Rng,
    battle: bool,
    p_win: f64,
    baseline_sat: f64,
    sat: f64,
    asp: f64,
    exp_total: f64,
    grade: u64,
    logs: Vec<RawLog>,
    truth: Vec<(f64, f64, f64)>,
}

impl<'a> UserSim<'a> {
    fn new(cfg: &'a SynthConfig, user_index: usize) -> UserSim<'a> {
        let mut rng = ChaCha20Rng::seed_from_u64(splitmix64(cfg.seed ^ (user_index as u64)));
        let battle = rng.random_range(0.0..1.0) < cfg.battle_fraction;
        let p_win = rng.random_range(cfg.win_prob_min..=cfg.win_prob_max);
        let baseline_sat = (0.55 + 1.0 * (p_win - 0.5)).clamp(-0.9, 0.9);
        let sat = (baseline_sat + gauss(&mut rng, 0.15)).clamp(-1.0, 1.0);
        let asp = rng.random_range(0.6..1.0);
        UserSim {
            cfg,
            rng,
            battle,
            p_win,
            baseline_sat,
            sat,
            asp,
            exp_total: 0.0,
            grade: 0,
            logs: Vec::new(),
            truth: Vec::new(),
        }
    }

    fn emit(&mut self, action: ActionLabel, epoch: i64, raw_info: Map<String, Value>) {
        self.logs.push(RawLog {
            log_id: action.name().to_string(),
            raw_info,
            timestamp: timestamp(epoch),
        });
    }

    fn record_truth(&mut self, true_interval: f64) {
        self.truth.push((self.sat, self.asp, true_interval));
    }

    /// State deltas carried on the action's own log record.
    fn action_info(&mut self, action: ActionLabel, win: Option<bool>) -> Map<String, Value> {
        use ActionLabel::*;
        let mut info = Map::new();
        let mut exp_gain = 0.0;
        match action {
            QuickMatch1V1 | QuickMatch2V2 => {
                let won = win.expect("match actions carry an outcome");
                let margin = self.rng.random_range(10..60);
                info.insert("total1".into(), Value::from(if won { margin } else { -margin }));
                info.insert("gold".into(), Value::from(if won { 24 } else { -18 }));
                exp_gain = if won { 15.0 } else { 6.0 };
            }
            PrivateGame | RoomModeCreate => {
                exp_gain = 8.0;
                info.insert("gold".into(), Value::from(2));
            }
            DailyTaskFinish | DailyTaskReward | DailySign | DailySignReward => {
                info.insert("gold".into(), Value::from(self.rng.random_range(5..15)));
            }
            RewardAchievement => {
                info.insert("achievement_got".into(), Value::from(1));
                info.insert("gold".into(), Value::from(10));
            }
            ConsumeItem => {
                let delta = if self.rng.random_range(0.0..1.0) < 0.5 { -1 } else { 2 };
                info.insert("item_num".into(), Value::from(delta));
            }
            PraisePlayRound => {
                info.insert("emojis_sent".into(), Value::from(1));
            }
            InviteLog => {
                info.insert("gifts_sent".into(), Value::from(1));
            }
            ShareLog | FollowLog => {
                info.insert("emojis_sent".into(), Value::from(1));
            }
            GuideInfo | AdsLog | ReplaceRole | LoginRole | LogoutRole => {}
        }
        if exp_gain > 0.0 {
            info.insert("experience".into(), Value::from(exp_gain));
            self.exp_total += exp_gain;
            let new_grade = (self.exp_total / 300.0).floor() as u64;
            if new_grade > self.grade {
                info.insert("grade_up".into(), Value::from(new_grade - self.grade));
                self.grade = new_grade;
            }
        }
        info
    }

    fn run(&mut self, start_epoch: i64) {
        let sessions = {
            let draw = Poisson::new(self.cfg.mean_sessions).expect("positive mean");
            (draw.sample(&mut self.rng) as usize).max(1)
        };
        let profile =
            if self.battle { self.cfg.battle_profile.clone() } else { self.cfg.social_profile.clone() };
        let mut epoch = start_epoch;
        for _ in 0..sessions {
            // login
            self.emit(ActionLabel::LoginRole, epoch, Map::new());
            let warmup = self.rng.random_range(1..=5) as f64;
            self.record_truth(warmup);
            epoch += warmup as i64;

            // in-session actions with fatigue-driven session end
            let mut steps_in_session = 0usize;
            loop {
                let action = profile.sample(&mut self.rng);
                let is_match = matches!(
                    action,
                    ActionLabel::QuickMatch1V1 | ActionLabel::QuickMatch2V2
                );
                let win = if is_match {
                    Some(self.rng.random_range(0.0..1.0) < self.p_win)
                } else {
                    None
                };
                if let Some(won) = win {
                    self.sat += self.cfg.sat_win_drift * if won { 1.0 } else { -1.0 };
                }
                self.sat += self.cfg.sat_pull * (self.baseline_sat - self.sat)
                    + gauss(&mut self.rng, self.cfg.latent_noise);
                self.sat = self.sat.clamp(-1.0, 1.0);
                let fatigue = self.cfg.asp_fatigue * if is_match { 1.0 } else { 0.4 };
                self.asp = (self.asp - fatigue + gauss(&mut self.rng, self.cfg.latent_noise))
                    .clamp(0.0, 1.2);

                let slow = 1.0 + 1.5 * (1.0 - self.asp.min(1.0));
                let t_true = (base_action_seconds(action) * slow).floor().max(1.0);
                let t_emit = if self.cfg.noise_t_in <= 0.0 {
                    t_true
                } else {
                    (t_true * noise_factor(&mut self.rng, self.cfg.noise_t_in)).floor().max(1.0)
                };
                let info = self.action_info(action, win);
                self.emit(action, epoch, info);
                self.record_truth(t_true);
                epoch += t_emit as i64;

                steps_in_session += 1;
                let hazard = (1.0 / self.cfg.mean_session_steps)
                    * (1.0 + 3.0 * (1.0 - self.asp.min(1.0)));
                if steps_in_session >= 40 || self.rng.random_range(0.0..1.0) < hazard.min(0.95) {
                    break;
                }
            }

            // logout: interval from the satisfaction link
            let t_out_true = self.cfg.logout_link(self.sat);
            let t_out_emit = if self.cfg.noise_t_out <= 0.0 {
                t_out_true
            } else {
                (t_out_true * noise_factor(&mut self.rng, self.cfg.noise_t_out)).floor().max(1.0)
            };
            self.emit(ActionLabel::LogoutRole, epoch, Map::new());
            self.record_truth(t_out_true);
            epoch += t_out_emit as i64;

            // the break restores the urge to play; satisfaction drifts
            // mildly back to baseline
            self.asp = (self.asp + self.cfg.asp_recovery * (1.0 - self.asp)).clamp(0.0, 1.2);
            self.sat = (self.sat + 0.3 * self.cfg.sat_pull * (self.baseline_sat - self.sat))
                .clamp(-1.0, 1.0);
        }
    }
}

/// Generate a dataset, its ground truth, and the raw logs it came from.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut documents: Vec<(String, Vec<u8>)> = Vec::with_capacity(cfg.n_users);
    let mut raw_logs = Vec::with_capacity(cfg.n_users);
    let mut truths: Vec<(String, Vec<(f64, f64, f64)>)> = Vec::with_capacity(cfg.n_users);

    for user_index in 0..cfg.n_users {
        let user_id = format!("u{user_index:05}");
        let mut sim = UserSim::new(cfg, user_index);
        let start = BASE_EPOCH
            + (splitmix64(cfg.seed ^ 0xA5A5_0000 ^ user_index as u64)
                % cfg.start_spread_seconds.max(1)) as i64;
        sim.run(start);
        documents.push((user_id.clone(), logs_to_json_bytes(&sim.logs)?));
        raw_logs.push((user_id.clone(), sim.logs));
        truths.push((user_id, sim.truth));
    }

    if cfg.n_users == 0 {
        return Ok(SynthOutput {
            dataset: Dataset::default(),
            ground_truth: GroundTruth::default(),
            raw_logs,
            cleaning: Vec::new(),
        });
    }

    let (dataset, cleaning) =
        ingest_documents(&documents, &RepairRules::default(), &DeriveOptions::default())?;

    let mut ground_truth = GroundTruth::default();
    for (user_id, rows) in truths {
        let seq = dataset
            .sequences
            .iter()
            .find(|s| s.user_id == user_id)
            .ok_or_else(|| Error::Format(format!("generated user `{user_id}` missing")))?;
        if seq.steps.len() != rows.len() {
            return Err(Error::Format(format!(
                "ground truth misaligned for `{user_id}`: {} steps vs {} records",
                seq.steps.len(),
                rows.len()
            )));
        }
        for (step_index, (true_sat, true_asp, true_interval)) in rows.into_iter().enumerate() {
            ground_truth.records.push(GroundTruthRecord {
                user_id: user_id.clone(),
                step_index,
                true_sat,
                true_asp,
                true_interval,
            });
        }
    }
    ground_truth.records.sort_by(|a, b| {
        a.user_id.cmp(&b.user_id).then(a.step_index.cmp(&b.step_index))
    });

    Ok(SynthOutput { dataset, ground_truth, raw_logs, cleaning })
}

/// Serialize logs in the raw JSON file format.
pub fn logs_to_json_bytes(logs: &[RawLog]) -> Result<Vec<u8>> {
    let values: Vec<Value> = logs
        .iter()
        .map(|log| {
            let mut obj = Map::new();
            obj.insert("log_id".into(), Value::from(log.log_id.clone()));
            obj.insert("raw_info".into(), Value::Object(log.raw_info.clone()));
            obj.insert(
                "timestamp".into(),
                Value::from(log.timestamp.format("%Y-%m-%d %H:%M:%S").to_string()),
            );
            Value::Object(obj)
        })
        .collect();
    serde_json::to_vec_pretty(&values).map_err(|e| Error::Format(format!("json: {e}")))
}

/// Ground truth as CSV: user_id, step_index, true_sat, true_asp,
/// true_interval.
pub fn write_ground_truth_csv<W: io::Write>(truth: &GroundTruth, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "step_index", "true_sat", "true_asp", "true_interval"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for r in &truth.records {
        w.write_record([
            r.user_id.clone(),
            r.step_index.to_string(),
            format!("{}", r.true_sat),
            format!("{}", r.true_asp),
            format!("{}", r.true_interval),
        ])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::spearman;
    use crate::domain::{ActionLabel, StepKind};
    use crate::ingest::{clean_logs, parse_logs};
    use std::collections::HashSet;

    fn small_config(seed: u64) -> SynthConfig {
        SynthConfig { n_users: 12, seed, mean_sessions: 4.0, ..SynthConfig::default() }
    }

    #[test]
    fn zero_users_give_an_empty_dataset() {
        let cfg = SynthConfig { n_users: 0, ..SynthConfig::default() };
        let out = generate(&cfg).unwrap();
        assert!(out.dataset.sequences.is_empty());
        assert!(out.ground_truth.records.is_empty());
    }

    #[test]
    fn all_zero_propensities_are_rejected() {
        let mut cfg = SynthConfig::default();
        cfg.battle_profile =
            ActionProfile { weights: vec![(ActionLabel::AdsLog, 0.0), (ActionLabel::GuideInfo, 0.0)] };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = generate(&small_config(9)).unwrap();
        let b = generate(&small_config(9)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.ground_truth, b.ground_truth);
        let ja: Vec<Vec<u8>> =
            a.raw_logs.iter().map(|(_, l)| logs_to_json_bytes(l).unwrap()).collect();
        let jb: Vec<Vec<u8>> =
            b.raw_logs.iter().map(|(_, l)| logs_to_json_bytes(l).unwrap()).collect();
        assert_eq!(ja, jb);
    }

    #[test]
    fn emitted_logs_need_zero_repairs_and_round_trip() {
        let out = generate(&small_config(4)).unwrap();
        for (_, report) in &out.cleaning {
            assert_eq!(report.total(), 0, "generator logs should be already clean");
        }
        // independent round trip: parse + clean each document again
        for (user_id, logs) in &out.raw_logs {
            let bytes = logs_to_json_bytes(logs).unwrap();
            let parsed = parse_logs(&bytes).unwrap();
            assert_eq!(&parsed, logs, "round trip for {user_id}");
            let (cleaned, report) = clean_logs(&parsed, &crate::ingest::RepairRules::default());
            assert_eq!(report.total(), 0);
            assert_eq!(&cleaned, logs);
        }
    }

    #[test]
    fn ground_truth_aligns_one_to_one_with_steps() {
        let out = generate(&small_config(7)).unwrap();
        for seq in &out.dataset.sequences {
            let n = out.ground_truth.for_user(&seq.user_id).count();
            assert_eq!(n, seq.steps.len());
        }
    }

    #[test]
    fn zero_noise_reproduces_the_logout_link_exactly() {
        let cfg = SynthConfig {
            noise_t_in: 0.0,
            noise_t_out: 0.0,
            latent_noise: 0.0,
            ..small_config(11)
        };
        let out = generate(&cfg).unwrap();
        for seq in &out.dataset.sequences {
            let truth: Vec<&GroundTruthRecord> = out.ground_truth.for_user(&seq.user_id).collect();
            // the final step is censored to the observation end, so skip it
            for (idx, step) in seq.steps.iter().enumerate().take(seq.steps.len() - 1) {
                if step.kind == StepKind::OffGame {
                    let expected = cfg.logout_link(truth[idx].true_sat);
                    assert_eq!(step.interval_seconds, expected, "user {} step {idx}", seq.user_id);
                    assert_eq!(truth[idx].true_interval, expected);
                }
            }
        }
    }

    #[test]
    fn zero_noise_satisfaction_and_logout_intervals_are_perfectly_anticorrelated() {
        let cfg = SynthConfig {
            noise_t_in: 0.0,
            noise_t_out: 0.0,
            latent_noise: 0.0,
            n_users: 30,
            ..small_config(13)
        };
        let out = generate(&cfg).unwrap();
        let mut sats = Vec::new();
        let mut intervals = Vec::new();
        for seq in &out.dataset.sequences {
            let truth: Vec<&GroundTruthRecord> = out.ground_truth.for_user(&seq.user_id).collect();
            for (idx, step) in seq.steps.iter().enumerate().take(seq.steps.len() - 1) {
                if step.kind == StepKind::OffGame {
                    sats.push(truth[idx].true_sat);
                    intervals.push(step.interval_seconds);
                }
            }
        }
        assert!(sats.len() > 20);
        // distinct satisfactions map to distinct floor(g) values here;
        // with ties Spearman would sit above -1
        let distinct: HashSet<u64> = intervals.iter().map(|v| v.to_bits()).collect();
        assert_eq!(distinct.len(), intervals.len(), "seed produced tied intervals");
        let rho = spearman(&sats, &intervals).unwrap();
        assert!((rho + 1.0).abs() < 1e-12, "spearman {rho}");
    }

    #[test]
    fn battle_users_play_more_matches_than_social_users() {
        let cfg = SynthConfig { n_users: 200, ..SynthConfig::default() };
        let out = generate(&cfg).unwrap();
        let match_set: HashSet<ActionLabel> =
            [ActionLabel::QuickMatch1V1, ActionLabel::QuickMatch2V2].into_iter().collect();
        // recover each user's profile through its match proportion
        let mut proportions: Vec<f64> = Vec::new();
        for seq in &out.dataset.sequences {
            let matches = seq.steps.iter().filter(|s| match_set.contains(&s.action)).count();
            proportions.push(matches as f64 / seq.steps.len() as f64);
        }
        proportions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = proportions[proportions.len() / 4];
        let hi = proportions[3 * proportions.len() / 4];
        assert!(
            hi > lo + 0.1,
            "battle and social users should separate clearly: quartiles {lo} vs {hi}"
        );
    }
}
