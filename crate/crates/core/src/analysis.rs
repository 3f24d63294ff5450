//! Latent-feeling extraction and the statistical analyses over it:
//! 20% cohorts by win rate and by match-behavior proportion,
//! satisfaction vs trailing win rate, satisfaction vs logout time, and
//! the per-action aspiration matrix.

use std::collections::HashSet;
use std::io;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::domain::{ActionLabel, Dataset, EncodedSequence, StepKind, ACTION_DIM};
use crate::error::{Error, Result};
use crate::lafee::{forward_sequence, LaFeeParams, LatentState};

/// How the latent vectors reduce to one scalar per feeling.
///
/// The default projects through the model's own interval readouts and
/// negates them, so that higher scalar satisfaction means a shorter
/// predicted logout (a happier user) and higher scalar aspiration means
/// a quicker next action (a more eager user).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scalarization {
    #[default]
    Readout,
    /// Plain mean over the latent components.
    Mean,
}

/// Scalar and vector latents for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentRecord {
    pub step_index: usize,
    pub kind: StepKind,
    pub sat_scalar: f64,
    pub asp_scalar: f64,
    pub sat: Array1<f64>,
    pub asp: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLatents {
    pub user_id: String,
    pub steps: Vec<LatentRecord>,
}

/// Run the model over every sequence and extract per-step latents.
pub fn extract_latents(
    params: &LaFeeParams,
    sequences: &[EncodedSequence],
    mode: Scalarization,
) -> Result<Vec<SequenceLatents>> {
    let mut out = Vec::with_capacity(sequences.len());
    for seq in sequences {
        let traces = forward_sequence(params, seq, &LatentState::zeros(&params.dims))?;
        let steps = traces
            .into_iter()
            .enumerate()
            .map(|(step_index, tr)| {
                let (sat_scalar, asp_scalar) = match mode {
                    Scalarization::Readout => (
                        -(params.w_st.dot(&tr.after.sat) + params.b_st),
                        -(params.w_at.dot(&tr.after.asp) + params.b_at),
                    ),
                    Scalarization::Mean => (
                        tr.after.sat.sum() / tr.after.sat.len() as f64,
                        tr.after.asp.sum() / tr.after.asp.len() as f64,
                    ),
                };
                LatentRecord {
                    step_index,
                    kind: seq.steps[step_index].kind,
                    sat_scalar,
                    asp_scalar,
                    sat: tr.after.sat,
                    asp: tr.after.asp,
                }
            })
            .collect();
        out.push(SequenceLatents { user_id: seq.user_id.clone(), steps });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Cohorts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortEntry {
    pub user_id: String,
    pub high_win_rate: bool,
    pub low_win_rate: bool,
    pub battle_player: bool,
    pub social_player: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CohortAssignment {
    pub entries: Vec<CohortEntry>,
    /// Users with no win-flagged matches, excluded from win-rate cohorts.
    pub excluded_from_win_rate: Vec<String>,
}

impl CohortAssignment {
    pub fn members(&self, cohort: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| match cohort {
                "high_win_rate" => e.high_win_rate,
                "low_win_rate" => e.low_win_rate,
                "battle_player" => e.battle_player,
                "social_player" => e.social_player,
                _ => true,
            })
            .map(|e| e.user_id.as_str())
            .collect()
    }
}

/// Assign the four 20% cohorts (floor rounding). Both cuts sort users
/// on a single descending key with user_id tie-breaks and take the two
/// ends, so high/low and battle/social never overlap.
pub fn assign_cohorts(
    dataset: &Dataset,
    match_actions: &HashSet<ActionLabel>,
) -> CohortAssignment {
    let mut win_rates: Vec<(String, f64)> = Vec::new();
    let mut excluded = Vec::new();
    let mut behavior: Vec<(String, f64)> = Vec::new();

    for seq in &dataset.sequences {
        let mut matches = 0usize;
        let mut wins = 0usize;
        let mut match_steps = 0usize;
        for step in &seq.steps {
            if match_actions.contains(&step.action) {
                match_steps += 1;
                if let Some(win) = step.win_flag {
                    matches += 1;
                    if win {
                        wins += 1;
                    }
                }
            }
        }
        behavior.push((seq.user_id.clone(), match_steps as f64 / seq.steps.len() as f64));
        if matches > 0 {
            win_rates.push((seq.user_id.clone(), wins as f64 / matches as f64));
        } else {
            excluded.push(seq.user_id.clone());
        }
    }

    let sort_desc = |v: &mut Vec<(String, f64)>| {
        v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    };
    sort_desc(&mut win_rates);
    sort_desc(&mut behavior);

    let k_win = win_rates.len() / 5;
    let k_beh = behavior.len() / 5;
    let high: HashSet<&str> = win_rates[..k_win].iter().map(|(u, _)| u.as_str()).collect();
    let low: HashSet<&str> =
        win_rates[win_rates.len() - k_win..].iter().map(|(u, _)| u.as_str()).collect();
    let battle: HashSet<&str> = behavior[..k_beh].iter().map(|(u, _)| u.as_str()).collect();
    let social: HashSet<&str> =
        behavior[behavior.len() - k_beh..].iter().map(|(u, _)| u.as_str()).collect();

    let entries = dataset
        .sequences
        .iter()
        .map(|seq| CohortEntry {
            user_id: seq.user_id.clone(),
            high_win_rate: high.contains(seq.user_id.as_str()),
            low_win_rate: low.contains(seq.user_id.as_str()),
            battle_player: battle.contains(seq.user_id.as_str()),
            social_player: social.contains(seq.user_id.as_str()),
        })
        .collect();

    CohortAssignment { entries, excluded_from_win_rate: excluded }
}

pub fn write_cohorts_csv<W: io::Write>(cohorts: &CohortAssignment, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "high_win_rate", "low_win_rate", "battle_player", "social_player"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for e in &cohorts.entries {
        w.write_record([
            e.user_id.clone(),
            (e.high_win_rate as u8).to_string(),
            (e.low_win_rate as u8).to_string(),
            (e.battle_player as u8).to_string(),
            (e.social_player as u8).to_string(),
        ])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Binned tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BinnedTable {
    pub bins: Vec<Bin>,
}

impl BinnedTable {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn populated(&self) -> impl Iterator<Item = &Bin> {
        self.bins.iter().filter(|b| b.count > 0)
    }
}

pub fn write_binned_csv<W: io::Write>(table: &BinnedTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin", "mean", "count"]).map_err(|e| Error::Format(format!("csv: {e}")))?;
    for b in &table.bins {
        w.write_record([b.label.clone(), format!("{}", b.mean), b.count.to_string()])
            .map_err(|e| Error::Format(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

struct BinAcc {
    sum: f64,
    count: usize,
}

/// Mean scalar satisfaction per trailing win rate.
///
/// At every match step preceded by at least `window` win-flagged
/// matches, the win rate over those last `window` outcomes pairs with
/// the step's scalar satisfaction. Rates land on the 11 bins
/// {0.0, 0.1, …, 1.0}.
pub fn sat_vs_winrate(
    latents: &[SequenceLatents],
    dataset: &Dataset,
    window: usize,
    match_actions: &HashSet<ActionLabel>,
) -> Result<BinnedTable> {
    if window == 0 {
        return Err(Error::InvalidConfig("win-rate window must be positive".into()));
    }
    let mut acc: Vec<BinAcc> = (0..=10).map(|_| BinAcc { sum: 0.0, count: 0 }).collect();
    for (lat, seq) in latents.iter().zip(&dataset.sequences) {
        if lat.user_id != seq.user_id {
            return Err(Error::Format("latents and dataset are misaligned".into()));
        }
        let mut outcomes: Vec<bool> = Vec::new();
        for (step, rec) in seq.steps.iter().zip(&lat.steps) {
            if match_actions.contains(&step.action) {
                if outcomes.len() >= window {
                    let wins =
                        outcomes[outcomes.len() - window..].iter().filter(|w| **w).count();
                    let rate = wins as f64 / window as f64;
                    let bin = (rate * 10.0).round() as usize;
                    acc[bin.min(10)].sum += rec.sat_scalar;
                    acc[bin.min(10)].count += 1;
                }
                if let Some(win) = step.win_flag {
                    outcomes.push(win);
                }
            }
        }
    }
    let bins = acc
        .into_iter()
        .enumerate()
        .map(|(i, a)| Bin {
            label: format!("{:.1}", i as f64 / 10.0),
            mean: if a.count > 0 { a.sum / a.count as f64 } else { 0.0 },
            count: a.count,
        })
        .collect();
    Ok(BinnedTable { bins })
}

/// Default 3-hour grid over one day for the logout-time analysis.
pub fn default_logout_edges() -> Vec<f64> {
    (0..=8).map(|i| i as f64 * 10_800.0).collect()
}

/// Mean scalar satisfaction per logout-interval bin. Intervals beyond
/// the last edge (one day by default) land in an overflow bin.
pub fn sat_vs_logout(
    latents: &[SequenceLatents],
    dataset: &Dataset,
    edges: &[f64],
) -> Result<BinnedTable> {
    if edges.len() < 2 {
        return Err(Error::InvalidConfig("need at least two bin edges".into()));
    }
    let n_bins = edges.len() - 1;
    let mut acc: Vec<BinAcc> = (0..=n_bins).map(|_| BinAcc { sum: 0.0, count: 0 }).collect();
    for (lat, seq) in latents.iter().zip(&dataset.sequences) {
        if lat.user_id != seq.user_id {
            return Err(Error::Format("latents and dataset are misaligned".into()));
        }
        for (step, rec) in seq.steps.iter().zip(&lat.steps) {
            if step.kind != StepKind::OffGame {
                continue;
            }
            let t = step.interval_seconds;
            let idx = if t >= edges[n_bins] {
                n_bins
            } else {
                (0..n_bins).find(|i| t >= edges[*i] && t < edges[i + 1]).unwrap_or(n_bins)
            };
            acc[idx].sum += rec.sat_scalar;
            acc[idx].count += 1;
        }
    }
    let mut bins: Vec<Bin> = (0..n_bins)
        .map(|i| Bin {
            label: format!("[{},{})", edges[i], edges[i + 1]),
            mean: if acc[i].count > 0 { acc[i].sum / acc[i].count as f64 } else { 0.0 },
            count: acc[i].count,
        })
        .collect();
    bins.push(Bin {
        label: format!("{}+", edges[n_bins]),
        mean: if acc[n_bins].count > 0 { acc[n_bins].sum / acc[n_bins].count as f64 } else { 0.0 },
        count: acc[n_bins].count,
    });
    Ok(BinnedTable { bins })
}

// ---------------------------------------------------------------------------
// Aspiration matrix
// ---------------------------------------------------------------------------

/// Per-action mean aspiration vectors, min-max normalized over the
/// observed rows. Rows for actions never observed are flagged and
/// excluded from the normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct AspirationMatrix {
    pub values: Array2<f64>,
    pub observed: [bool; ACTION_DIM],
}

pub fn aspiration_matrix(
    latents: &[SequenceLatents],
    dataset: &Dataset,
) -> Result<AspirationMatrix> {
    let d_asp = latents
        .iter()
        .flat_map(|l| l.steps.first())
        .map(|r| r.asp.len())
        .next()
        .ok_or(Error::EmptyInput("no latents to aggregate"))?;
    let mut sums = Array2::<f64>::zeros((ACTION_DIM, d_asp));
    let mut counts = [0usize; ACTION_DIM];
    for (lat, seq) in latents.iter().zip(&dataset.sequences) {
        for (step, rec) in seq.steps.iter().zip(&lat.steps) {
            let row = step.action.index();
            counts[row] += 1;
            for (j, v) in rec.asp.iter().enumerate() {
                sums[(row, j)] += v;
            }
        }
    }
    let mut values = Array2::<f64>::zeros((ACTION_DIM, d_asp));
    let mut observed = [false; ACTION_DIM];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in 0..ACTION_DIM {
        if counts[row] == 0 {
            continue;
        }
        observed[row] = true;
        for j in 0..d_asp {
            let mean = sums[(row, j)] / counts[row] as f64;
            values[(row, j)] = mean;
            lo = lo.min(mean);
            hi = hi.max(mean);
        }
    }
    let range = hi - lo;
    for row in 0..ACTION_DIM {
        if !observed[row] {
            continue;
        }
        for j in 0..d_asp {
            // constant matrix maps to all zeros
            values[(row, j)] = if range > 0.0 { (values[(row, j)] - lo) / range } else { 0.0 };
        }
    }
    Ok(AspirationMatrix { values, observed })
}

pub fn write_aspiration_csv<W: io::Write>(matrix: &AspirationMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["action", "component", "value"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for (row, label) in ActionLabel::ALL.iter().enumerate() {
        if !matrix.observed[row] {
            continue;
        }
        for j in 0..matrix.values.ncols() {
            w.write_record([
                label.name().to_string(),
                j.to_string(),
                format!("{}", matrix.values[(row, j)]),
            ])
            .map_err(|e| Error::Format(format!("csv: {e}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-user mean aspiration vectors (the radar-chart reduction).
pub fn user_mean_aspiration(latents: &[SequenceLatents]) -> Vec<(String, Array1<f64>)> {
    latents
        .iter()
        .filter(|l| !l.steps.is_empty())
        .map(|l| {
            let d = l.steps[0].asp.len();
            let mut mean = Array1::<f64>::zeros(d);
            for rec in &l.steps {
                mean += &rec.asp;
            }
            mean /= l.steps.len() as f64;
            (l.user_id.clone(), mean)
        })
        .collect()
}

pub fn write_user_aspiration_csv<W: io::Write>(
    rows: &[(String, Array1<f64>)],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "component", "value"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for (user, mean) in rows {
        for (j, v) in mean.iter().enumerate() {
            w.write_record([user.clone(), j.to_string(), format!("{v}")])
                .map_err(|e| Error::Format(format!("csv: {e}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Scalar latents as CSV: user_id, step_index, kind, satisfaction,
/// aspiration.
pub fn write_latents_csv<W: io::Write>(latents: &[SequenceLatents], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "step_index", "kind", "satisfaction", "aspiration"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for lat in latents {
        for rec in &lat.steps {
            w.write_record([
                lat.user_id.clone(),
                rec.step_index.to_string(),
                rec.kind.as_str().to_string(),
                format!("{}", rec.sat_scalar),
                format!("{}", rec.asp_scalar),
            ])
            .map_err(|e| Error::Format(format!("csv: {e}")))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Latent vectors as CSV: user_id, step_index, block (sat/asp),
/// component, value.
pub fn write_latent_vectors_csv<W: io::Write>(
    latents: &[SequenceLatents],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "step_index", "block", "component", "value"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for lat in latents {
        for rec in &lat.steps {
            for (j, v) in rec.sat.iter().enumerate() {
                w.write_record([
                    lat.user_id.clone(),
                    rec.step_index.to_string(),
                    "sat".to_string(),
                    j.to_string(),
                    format!("{v}"),
                ])
                .map_err(|e| Error::Format(format!("csv: {e}")))?;
            }
            for (j, v) in rec.asp.iter().enumerate() {
                w.write_record([
                    lat.user_id.clone(),
                    rec.step_index.to_string(),
                    "asp".to_string(),
                    j.to_string(),
                    format!("{v}"),
                ])
                .map_err(|e| Error::Format(format!("csv: {e}")))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Rank correlation
// ---------------------------------------------------------------------------

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).expect("finite values"));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // average rank over ties, 1-based
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[order[k]] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::EmptyInput("spearman needs at least two points"));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..xs.len() {
        let dx = rx[i] - mean;
        let dy = ry[i] - mean;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::EmptyInput("spearman over a constant sequence"));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PlaySequence, StateVector, Step};
    use crate::lafee::LaFeeDims;
    use approx::assert_abs_diff_eq;

    fn match_set() -> HashSet<ActionLabel> {
        [ActionLabel::QuickMatch1V1, ActionLabel::QuickMatch2V2].into_iter().collect()
    }

    fn user_with_win_rate(id: &str, wins: usize, losses: usize) -> PlaySequence {
        let mut steps = vec![step(ActionLabel::LoginRole, None)];
        for i in 0..wins + losses {
            steps.push(step(ActionLabel::QuickMatch1V1, Some(i < wins)));
        }
        steps.push(step(ActionLabel::LogoutRole, None));
        PlaySequence { user_id: id.to_string(), steps }
    }

    fn step(action: ActionLabel, win: Option<bool>) -> Step {
        Step {
            state: StateVector::zeros(),
            action,
            interval_seconds: 10.0,
            kind: if action == ActionLabel::LogoutRole {
                crate::domain::StepKind::OffGame
            } else {
                crate::domain::StepKind::InGame
            },
            win_flag: win,
        }
    }

    #[test]
    fn cohorts_take_exactly_20_percent_each() {
        let dataset = Dataset {
            sequences: (0..10).map(|i| user_with_win_rate(&format!("u{i}"), i, 10 - i)).collect(),
        };
        let cohorts = assign_cohorts(&dataset, &match_set());
        assert_eq!(cohorts.members("high_win_rate").len(), 2);
        assert_eq!(cohorts.members("low_win_rate").len(), 2);
        assert_eq!(cohorts.members("battle_player").len(), 2);
        assert_eq!(cohorts.members("social_player").len(), 2);
        // the best records sit in the high cohort
        assert!(cohorts.members("high_win_rate").contains(&"u9"));
        assert!(cohorts.members("low_win_rate").contains(&"u0"));
    }

    #[test]
    fn identical_win_rates_break_ties_deterministically_and_disjointly() {
        let dataset = Dataset {
            sequences: (0..10).map(|i| user_with_win_rate(&format!("u{i}"), 5, 5)).collect(),
        };
        let cohorts = assign_cohorts(&dataset, &match_set());
        let high: HashSet<&str> = cohorts.members("high_win_rate").into_iter().collect();
        let low: HashSet<&str> = cohorts.members("low_win_rate").into_iter().collect();
        assert_eq!(high.len(), 2);
        assert_eq!(low.len(), 2);
        assert!(high.is_disjoint(&low));
        let again = assign_cohorts(&dataset, &match_set());
        assert_eq!(cohorts, again);
    }

    #[test]
    fn zero_match_users_are_excluded_and_reported() {
        let mut sequences: Vec<PlaySequence> =
            (0..5).map(|i| user_with_win_rate(&format!("u{i}"), i + 1, 5 - i)).collect();
        sequences.push(PlaySequence {
            user_id: "idle".into(),
            steps: vec![step(ActionLabel::LoginRole, None), step(ActionLabel::LogoutRole, None)],
        });
        let dataset = Dataset { sequences };
        let cohorts = assign_cohorts(&dataset, &match_set());
        assert_eq!(cohorts.excluded_from_win_rate, vec!["idle".to_string()]);
        // 5 eligible users → floor(0.2·5) = 1 per win-rate cohort
        assert_eq!(cohorts.members("high_win_rate").len(), 1);
        // behavior cohorts include all 6 users → floor(0.2·6) = 1
        assert_eq!(cohorts.members("battle_player").len(), 1);
    }

    #[test]
    fn zero_params_extract_zero_scalars() {
        let dims = LaFeeDims { d_state: 2, d_action: 3, d_sat: 2, d_asp: 3 };
        let params = LaFeeParams::zeros(dims);
        let seq = crate::train::tests_support::sequence_with_out_steps(&dims, 6, 3, true);
        let latents = extract_latents(&params, &[seq], Scalarization::Readout).unwrap();
        for rec in &latents[0].steps {
            assert_eq!(rec.sat_scalar, 0.0);
            assert_eq!(rec.asp_scalar, 0.0);
        }
    }

    #[test]
    fn readout_scalars_are_affine_in_the_latent() {
        let dims = LaFeeDims { d_state: 2, d_action: 3, d_sat: 2, d_asp: 3 };
        let mut params = LaFeeParams::init(dims, 8);
        let seq = crate::train::tests_support::sequence_with_out_steps(&dims, 6, 4, true);
        let a = extract_latents(&params, &[seq.clone()], Scalarization::Readout).unwrap();
        params.w_st *= 2.0;
        params.w_at *= 2.0;
        let b = extract_latents(&params, &[seq], Scalarization::Readout).unwrap();
        // doubling the readout weight doubles (scalar + bias): latents
        // do not depend on the readouts
        for (ra, rb) in a[0].steps.iter().zip(&b[0].steps) {
            assert_abs_diff_eq!(
                2.0 * (ra.sat_scalar + params.b_st),
                rb.sat_scalar + params.b_st,
                epsilon = 1e-12
            );
        }
    }

    fn latents_from_scalars(user_id: &str, sats: &[f64]) -> SequenceLatents {
        SequenceLatents {
            user_id: user_id.to_string(),
            steps: sats
                .iter()
                .enumerate()
                .map(|(i, s)| LatentRecord {
                    step_index: i,
                    kind: crate::domain::StepKind::InGame,
                    sat_scalar: *s,
                    asp_scalar: 0.0,
                    sat: Array1::zeros(1),
                    asp: Array1::from_vec(vec![*s]),
                })
                .collect(),
        }
    }

    #[test]
    fn winrate_bins_quantize_exactly_with_window_10() {
        // 10 wins then 10 losses: the first sampled point sees rate 1.0
        let mut steps = Vec::new();
        for i in 0..20 {
            steps.push(step(ActionLabel::QuickMatch1V1, Some(i < 10)));
        }
        let seq = PlaySequence { user_id: "u".into(), steps };
        let sats: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let latents = vec![latents_from_scalars("u", &sats)];
        let dataset = Dataset { sequences: vec![seq] };
        let table = sat_vs_winrate(&latents, &dataset, 10, &match_set()).unwrap();
        assert_eq!(table.total_count(), 10);
        for bin in &table.bins {
            let rate: f64 = bin.label.parse().unwrap();
            assert!((rate * 10.0).fract() == 0.0);
        }
        // the all-wins window lands in the 1.0 bin
        assert!(table.bins[10].count > 0);
    }

    #[test]
    fn all_win_history_lands_in_the_top_bin_only() {
        let mut steps = Vec::new();
        for _ in 0..15 {
            steps.push(step(ActionLabel::QuickMatch1V1, Some(true)));
        }
        let seq = PlaySequence { user_id: "u".into(), steps };
        let sats = vec![2.0; 15];
        let latents = vec![latents_from_scalars("u", &sats)];
        let dataset = Dataset { sequences: vec![seq] };
        let table = sat_vs_winrate(&latents, &dataset, 10, &match_set()).unwrap();
        let populated: Vec<&Bin> = table.populated().collect();
        assert_eq!(populated.len(), 1);
        assert_eq!(populated[0].label, "1.0");
        assert_eq!(populated[0].mean, 2.0);
    }

    #[test]
    fn logout_bins_cover_one_day_plus_overflow() {
        let edges = default_logout_edges();
        assert_eq!(edges.len(), 9);
        assert_eq!(edges[8], 86_400.0);
        let mut steps = vec![step(ActionLabel::LogoutRole, None)];
        steps[0].interval_seconds = 90_000.0; // overflow
        let seq = PlaySequence { user_id: "u".into(), steps };
        let latents = vec![latents_from_scalars("u", &[1.5])];
        let dataset = Dataset { sequences: vec![seq] };
        let table = sat_vs_logout(&latents, &dataset, &edges).unwrap();
        assert_eq!(table.bins.len(), 9);
        assert_eq!(table.bins[8].count, 1);
        assert_eq!(table.bins[8].mean, 1.5);
        assert_eq!(table.total_count(), 1);
    }

    #[test]
    fn aspiration_matrix_normalizes_and_handles_degenerate_cases() {
        // constant aspiration collapses to all zeros
        let seq = PlaySequence {
            user_id: "u".into(),
            steps: vec![step(ActionLabel::AdsLog, None), step(ActionLabel::GuideInfo, None)],
        };
        let latents = vec![latents_from_scalars("u", &[3.0, 3.0])];
        let dataset = Dataset { sequences: vec![seq.clone()] };
        let m = aspiration_matrix(&latents, &dataset).unwrap();
        assert!(m.values.iter().all(|v| *v == 0.0));
        assert!(m.observed[ActionLabel::AdsLog.index()]);
        assert!(!m.observed[ActionLabel::LoginRole.index()]);

        // two observed actions normalize to 0 and 1
        let latents = vec![latents_from_scalars("u", &[1.0, 5.0])];
        let m = aspiration_matrix(&latents, &dataset).unwrap();
        assert_eq!(m.values[(ActionLabel::AdsLog.index(), 0)], 0.0);
        assert_eq!(m.values[(ActionLabel::GuideInfo.index(), 0)], 1.0);
    }

    #[test]
    fn min_max_is_invariant_to_affine_rescaling() {
        let seq = PlaySequence {
            user_id: "u".into(),
            steps: vec![
                step(ActionLabel::AdsLog, None),
                step(ActionLabel::GuideInfo, None),
                step(ActionLabel::DailySign, None),
            ],
        };
        let dataset = Dataset { sequences: vec![seq] };
        let base = vec![latents_from_scalars("u", &[1.0, 2.0, 7.0])];
        let scaled = vec![latents_from_scalars("u", &[1.0 * 3.0 + 4.0, 2.0 * 3.0 + 4.0, 7.0 * 3.0 + 4.0])];
        let a = aspiration_matrix(&base, &dataset).unwrap();
        let b = aspiration_matrix(&scaled, &dataset).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn spearman_matches_hand_computed_cases() {
        assert_abs_diff_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            spearman(&[1.0, 2.0, 3.0], &[5.0, 3.0, 1.0]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        // monotone transform leaves ranks unchanged
        assert_abs_diff_eq!(
            spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 64.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
