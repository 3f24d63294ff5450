//! Parsing and repair of raw JSON event logs, and derivation of
//! per-user (state, action, interval) sequences.
//!
//! Log files are JSON arrays of `{log_id, raw_info, timestamp}` objects
//! with 1-second timestamp resolution. Four repair classes are applied
//! before derivation: log_id relabels, duplicate-event merges,
//! same-second reordering by an event-priority table, and Login/Logout
//! pair completion.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::domain::{
    ActionLabel, Dataset, PlaySequence, StateVector, Step, StepKind, STATE_DIM, STATE_NAMES,
};
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// One raw log record: event id, detail map, wall-clock time.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLog {
    pub log_id: String,
    pub raw_info: Map<String, Value>,
    pub timestamp: NaiveDateTime,
}

impl RawLog {
    pub fn epoch_seconds(&self) -> i64 {
        self.timestamp.and_utc().timestamp()
    }
}

/// Counts of applied repairs, one per repair class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleaningReport {
    pub relabelled: usize,
    pub merged: usize,
    pub reordered: usize,
    pub pair_repaired: usize,
}

impl CleaningReport {
    pub fn total(&self) -> usize {
        self.relabelled + self.merged + self.reordered + self.pair_repaired
    }
}

/// Rewrite `from` log_ids to `to`, optionally only when a raw_info key
/// is present (used to pick mislabelled events out of a shared id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelRule {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub when_key: Option<String>,
}

/// Merge same-timestamp records whose log_ids all fall in `ids` into a
/// single record labelled `keep`, unioning raw_info (`keep` wins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRule {
    pub ids: Vec<String>,
    pub keep: String,
}

/// Tie-break priorities for same-second events: lower sorts earlier.
/// Session boundaries sit outermost so LoginRole opens the second and
/// LogoutRole closes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityTable {
    pub entries: BTreeMap<String, i32>,
    pub default: i32,
}

impl PriorityTable {
    pub fn priority(&self, log_id: &str) -> i32 {
        self.entries.get(log_id).copied().unwrap_or(self.default)
    }
}

impl Default for PriorityTable {
    fn default() -> PriorityTable {
        let mut entries = BTreeMap::new();
        entries.insert("LoginRole".to_string(), 0);
        entries.insert("LogoutRole".to_string(), 100);
        PriorityTable { entries, default: 50 }
    }
}

/// The configured repair rule set. The defaults carry the known
/// real-log fixes; site-specific corrections are added via config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRules {
    #[serde(default)]
    pub relabels: Vec<RelabelRule>,
    #[serde(default = "default_merges")]
    pub merges: Vec<MergeRule>,
    #[serde(default)]
    pub priority: PriorityTable,
}

fn default_merges() -> Vec<MergeRule> {
    vec![MergeRule {
        ids: vec!["Trade".to_string(), "MatchInfo".to_string()],
        keep: "MatchInfo".to_string(),
    }]
}

impl Default for RepairRules {
    fn default() -> RepairRules {
        RepairRules {
            relabels: Vec::new(),
            merges: default_merges(),
            priority: PriorityTable::default(),
        }
    }
}

/// Parse a JSON log document into records, preserving order and
/// unknown raw_info keys.
pub fn parse_logs(document: &[u8]) -> Result<Vec<RawLog>> {
    let values: Vec<Value> = serde_json::from_slice(document).map_err(|e| {
        let offset = byte_offset(document, e.line(), e.column());
        Error::Json { line: e.line(), column: e.column(), offset, message: e.to_string() }
    })?;
    let mut logs = Vec::with_capacity(values.len());
    for (index, value) in values.into_iter().enumerate() {
        let obj = match value {
            Value::Object(obj) => obj,
            _ => return Err(Error::Format(format!("log record {index} is not an object"))),
        };
        let log_id = obj
            .get("log_id")
            .and_then(Value::as_str)
            .ok_or(Error::MissingField { index, field: "log_id" })?
            .to_string();
        let raw_info = match obj.get("raw_info") {
            Some(Value::Object(m)) => m.clone(),
            Some(_) => {
                return Err(Error::Format(format!("log record {index}: raw_info is not an object")))
            }
            None => return Err(Error::MissingField { index, field: "raw_info" }),
        };
        let ts_str = obj
            .get("timestamp")
            .and_then(Value::as_str)
            .ok_or(Error::MissingField { index, field: "timestamp" })?;
        let timestamp = NaiveDateTime::parse_from_str(ts_str, TIMESTAMP_FORMAT)
            .map_err(|_| Error::BadTimestamp { index, value: ts_str.to_string() })?;
        logs.push(RawLog { log_id, raw_info, timestamp });
    }
    Ok(logs)
}

fn byte_offset(document: &[u8], line: usize, column: usize) -> usize {
    // serde_json reports 1-based line and column.
    let mut remaining = line.saturating_sub(1);
    let mut offset = 0usize;
    for (i, b) in document.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if *b == b'\n' {
            remaining -= 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(document.len())
}

/// Apply the four repair classes to one user's logs.
///
/// The result has nondecreasing timestamps, same-second events ordered
/// by the priority table, and balanced, strictly alternating
/// Login/Logout pairs. Applying `clean_logs` to its own output is a
/// no-op.
pub fn clean_logs(logs: &[RawLog], rules: &RepairRules) -> (Vec<RawLog>, CleaningReport) {
    let mut report = CleaningReport::default();

    // (a) log_id relabels
    let mut logs: Vec<RawLog> = logs.to_vec();
    for log in &mut logs {
        for rule in &rules.relabels {
            let key_ok = rule.when_key.as_deref().map_or(true, |k| log.raw_info.contains_key(k));
            if log.log_id == rule.from && key_ok {
                log.log_id = rule.to.clone();
                report.relabelled += 1;
                break;
            }
        }
    }

    // (b) merge duplicate records of one event (same timestamp)
    let merged = merge_duplicates(logs, rules, &mut report);

    // (c) reorder: stable sort by (timestamp, priority); count the
    // records whose position changed
    let keys: Vec<(i64, i32)> = merged
        .iter()
        .map(|l| (l.epoch_seconds(), rules.priority.priority(&l.log_id)))
        .collect();
    let mut order: Vec<usize> = (0..merged.len()).collect();
    order.sort_by_key(|&i| keys[i]);
    report.reordered = order.iter().enumerate().filter(|(new_pos, &old)| *new_pos != old).count();
    let sorted: Vec<RawLog> = {
        let mut tagged: Vec<(usize, RawLog)> = merged.into_iter().enumerate().collect();
        tagged.sort_by_key(|(i, _)| keys[*i]);
        tagged.into_iter().map(|(_, l)| l).collect()
    };

    // (d) repair unmatched Login/Logout pairs
    let repaired = repair_pairs(sorted, &mut report);

    (repaired, report)
}

fn merge_duplicates(
    logs: Vec<RawLog>,
    rules: &RepairRules,
    report: &mut CleaningReport,
) -> Vec<RawLog> {
    // groups are runs of equal timestamps in input order; out-of-order
    // records start new groups and are handled by the reorder stage
    let mut out: Vec<RawLog> = Vec::with_capacity(logs.len());
    let mut iter = logs.into_iter().peekable();
    while let Some(first) = iter.next() {
        let ts = first.timestamp;
        let mut group = vec![first];
        while iter.peek().is_some_and(|l| l.timestamp == ts) {
            group.push(iter.next().expect("peeked"));
        }
        // exact duplicates (same log_id and raw_info) collapse first
        let mut k = 0;
        while k < group.len() {
            let mut j = k + 1;
            while j < group.len() {
                if group[j].log_id == group[k].log_id && group[j].raw_info == group[k].raw_info {
                    group.remove(j);
                    report.merged += 1;
                } else {
                    j += 1;
                }
            }
            k += 1;
        }
        // configured merge rules: several ids recording one event
        for rule in &rules.merges {
            let members: Vec<usize> = group
                .iter()
                .enumerate()
                .filter(|(_, l)| rule.ids.contains(&l.log_id))
                .map(|(idx, _)| idx)
                .collect();
            if members.len() < 2 {
                continue;
            }
            let keep_idx = members
                .iter()
                .copied()
                .find(|idx| group[*idx].log_id == rule.keep)
                .unwrap_or(members[0]);
            let mut info = group[keep_idx].raw_info.clone();
            for idx in &members {
                if *idx != keep_idx {
                    for (key, value) in &group[*idx].raw_info {
                        info.entry(key.clone()).or_insert_with(|| value.clone());
                    }
                }
            }
            for idx in members.iter().rev() {
                group.remove(*idx);
            }
            report.merged += members.len() - 1;
            group.insert(members[0], RawLog { log_id: rule.keep.clone(), raw_info: info, timestamp: ts });
        }
        out.extend(group);
    }
    out
}

fn synthetic(log_id: &str, timestamp: NaiveDateTime) -> RawLog {
    let mut raw_info = Map::new();
    raw_info.insert("synthetic".to_string(), Value::Bool(true));
    RawLog { log_id: log_id.to_string(), raw_info, timestamp }
}

/// Insert missing Login/Logout counterparts so that per user the two
/// boundary events are balanced and strictly alternating. Runs over the
/// reorder-stage output; inserted timestamps are chosen so a re-sort
/// leaves them in place.
fn repair_pairs(sorted: Vec<RawLog>, report: &mut CleaningReport) -> Vec<RawLog> {
    let mut out: Vec<RawLog> = Vec::with_capacity(sorted.len());
    let mut open = false;
    // first output index of the current out-of-session run
    let mut run_start: Option<usize> = None;
    for log in sorted {
        match log.log_id.as_str() {
            "LoginRole" => {
                if open {
                    match out.last() {
                        Some(prev) if prev.timestamp == log.timestamp => {
                            // same-second duplicate session opening; after the
                            // priority sort the predecessor can only be another
                            // LoginRole, so drop this one
                            report.pair_repaired += 1;
                            continue;
                        }
                        Some(prev) => {
                            let ts = prev.timestamp;
                            out.push(synthetic("LogoutRole", ts));
                            report.pair_repaired += 1;
                        }
                        None => unreachable!("open session implies a previous event"),
                    }
                }
                open = true;
                run_start = None;
                out.push(log);
            }
            "LogoutRole" => {
                if !open {
                    if matches!(out.last(), Some(prev) if prev.log_id == "LogoutRole" && prev.timestamp == log.timestamp)
                    {
                        // same-second duplicate session close
                        report.pair_repaired += 1;
                        continue;
                    }
                    // adopt the out-of-session run as this orphan's session
                    let insert_at = run_start.unwrap_or(out.len());
                    let ts = out.get(insert_at).map_or(log.timestamp, |l| l.timestamp);
                    out.insert(insert_at, synthetic("LoginRole", ts));
                    report.pair_repaired += 1;
                }
                open = false;
                run_start = None;
                out.push(log);
            }
            _ => {
                if !open && run_start.is_none() {
                    run_start = Some(out.len());
                }
                out.push(log);
            }
        }
    }
    if open {
        let ts = out.last().expect("open session implies events").timestamp;
        out.push(synthetic("LogoutRole", ts));
        report.pair_repaired += 1;
    }
    out
}

/// Options controlling sequence derivation.
#[derive(Debug, Clone)]
pub struct DeriveOptions {
    /// Actions treated as matches for win detection.
    pub match_actions: HashSet<ActionLabel>,
}

impl Default for DeriveOptions {
    fn default() -> DeriveOptions {
        DeriveOptions {
            match_actions: [ActionLabel::QuickMatch1V1, ActionLabel::QuickMatch2V2]
                .into_iter()
                .collect(),
        }
    }
}

/// Derive one user's play sequence from cleaned logs.
///
/// Every log whose log_id is one of the 19 action labels becomes a
/// step; other logs only update the state counters. Counters start at
/// zero, accumulate numeric raw_info deltas keyed by the state names,
/// and are floored at zero. OnlineDuration accumulates wall-clock
/// seconds while a session is open. The state attached to a step is the
/// snapshot *before* that event's own deltas apply. The final step's
/// interval runs to `end_of_observation`.
pub fn derive_sequence(
    logs: &[RawLog],
    user_id: &str,
    end_of_observation: NaiveDateTime,
    options: &DeriveOptions,
) -> Result<PlaySequence> {
    let mut counters = [0.0f64; STATE_DIM];
    let state_index: HashMap<&str, usize> =
        STATE_NAMES.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let online_idx = state_index["online_duration"];

    let mut open = false;
    let mut prev_ts: Option<i64> = None;
    let mut events: Vec<(Step, i64)> = Vec::new();

    for log in logs {
        let ts = log.epoch_seconds();
        if let Some(prev) = prev_ts {
            if open {
                counters[online_idx] += (ts - prev) as f64;
            }
        }
        if let Ok(action) = log.log_id.parse::<ActionLabel>() {
            let kind = if action == ActionLabel::LogoutRole {
                StepKind::OffGame
            } else {
                StepKind::InGame
            };
            let win_flag = if options.match_actions.contains(&action) {
                log.raw_info.get("total1").and_then(Value::as_f64).map(|score| score > 0.0)
            } else {
                None
            };
            events.push((
                Step {
                    state: StateVector(counters),
                    action,
                    interval_seconds: 0.0,
                    kind,
                    win_flag,
                },
                ts,
            ));
            match action {
                ActionLabel::LoginRole => open = true,
                ActionLabel::LogoutRole => open = false,
                _ => {}
            }
        }
        for (key, value) in &log.raw_info {
            if let (Some(&dim), Some(delta)) = (state_index.get(key.as_str()), value.as_f64()) {
                if dim != online_idx {
                    counters[dim] = (counters[dim] + delta).max(0.0);
                }
            }
        }
        prev_ts = Some(ts);
    }

    if events.is_empty() {
        return Err(Error::EmptyInput("no action events in cleaned logs"));
    }

    let end = end_of_observation.and_utc().timestamp();
    let mut steps = Vec::with_capacity(events.len());
    for index in 0..events.len() {
        let cur_ts = events[index].1;
        let next_ts = if index + 1 < events.len() { events[index + 1].1 } else { end };
        let delta = next_ts - cur_ts;
        if delta < 0 {
            return Err(Error::NegativeInterval { user: user_id.to_string(), index });
        }
        let mut step = events[index].0.clone();
        step.interval_seconds = delta as f64;
        steps.push(step);
    }

    Ok(PlaySequence { user_id: user_id.to_string(), steps })
}

/// Parse, clean, and derive a batch of per-user documents into one
/// dataset. The observation end is the maximum timestamp across all
/// users; sequences come out in ascending user_id order.
pub fn ingest_documents(
    documents: &[(String, Vec<u8>)],
    rules: &RepairRules,
    options: &DeriveOptions,
) -> Result<(Dataset, Vec<(String, CleaningReport)>)> {
    let mut cleaned: Vec<(String, Vec<RawLog>, CleaningReport)> = Vec::new();
    for (user_id, bytes) in documents {
        let logs = parse_logs(bytes)?;
        let (logs, report) = clean_logs(&logs, rules);
        cleaned.push((user_id.clone(), logs, report));
    }
    cleaned.sort_by(|a, b| a.0.cmp(&b.0));
    let end = cleaned
        .iter()
        .flat_map(|(_, logs, _)| logs.iter().map(|l| l.timestamp))
        .max()
        .ok_or(Error::EmptyInput("no logs in any document"))?;
    let mut dataset = Dataset::default();
    let mut reports = Vec::new();
    for (user_id, logs, report) in cleaned {
        let seq = derive_sequence(&logs, &user_id, end, options)?;
        dataset.sequences.push(seq);
        reports.push((user_id, report));
    }
    dataset.validate()?;
    Ok((dataset, reports))
}
