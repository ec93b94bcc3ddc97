use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::CallLogError;

/// Opaque beneficiary identifier. Ordering is lexicographic on the raw string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeneficiaryId(pub String);

impl BeneficiaryId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BeneficiaryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BeneficiaryId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// One row of the raw call log. Retries of the same scheduled call share an
/// `attempt_group`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub beneficiary_id: BeneficiaryId,
    pub attempt_group: String,
    pub call_date: NaiveDate,
    pub message_id: u32,
    pub duration: f64,
    pub success: bool,
}

/// Strongest class a call reaches: every engagement is a connection and every
/// connection is an attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Attempt,
    Connection,
    Engagement,
}

impl EventKind {
    pub fn is_connection(self) -> bool {
        self >= EventKind::Connection
    }

    pub fn is_engagement(self) -> bool {
        self == EventKind::Engagement
    }
}

/// A deduplicated, classified call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallEvent {
    pub kind: EventKind,
    pub date: NaiveDate,
    pub duration: f64,
    pub message_id: u32,
}

/// Seconds a connected call must strictly exceed to count as an engagement.
pub const ENGAGEMENT_SECONDS: f64 = 30.0;

/// Classify a deduplicated record using the default 30 s engagement threshold.
pub fn classify_call(record: &CallRecord) -> Result<CallEvent, CallLogError> {
    classify_call_with(record, ENGAGEMENT_SECONDS)
}

pub fn classify_call_with(record: &CallRecord, engagement_seconds: f64) -> Result<CallEvent, CallLogError> {
    if !(record.duration >= 0.0) {
        return Err(CallLogError::NegativeDuration {
            beneficiary_id: record.beneficiary_id.clone(),
            attempt_group: record.attempt_group.clone(),
            duration: record.duration,
        });
    }
    let kind = match (record.success, record.duration > engagement_seconds) {
        (false, _) => EventKind::Attempt,
        (true, false) => EventKind::Connection,
        (true, true) => EventKind::Engagement,
    };
    Ok(CallEvent { kind, date: record.call_date, duration: record.duration, message_id: record.message_id })
}

/// Keep one record per `(beneficiary, attempt_group)`: the longest call, ties
/// going to a successful record and then to the earliest one.
///
/// Output order follows the first appearance of each group, which makes the
/// operation idempotent.
pub fn dedup_attempts(records: &[CallRecord]) -> Vec<CallRecord> {
    let mut order: Vec<(&BeneficiaryId, &str)> = Vec::new();
    let mut best: BTreeMap<(&BeneficiaryId, &str), usize> = BTreeMap::new();
    for (idx, record) in records.iter().enumerate() {
        let key = (&record.beneficiary_id, record.attempt_group.as_str());
        match best.get_mut(&key) {
            None => {
                order.push(key);
                best.insert(key, idx);
            }
            Some(kept) => {
                if beats(record, &records[*kept]) {
                    *kept = idx;
                }
            }
        }
    }
    order.into_iter().map(|key| records[best[&key]].clone()).collect()
}

// `candidate` comes later in the input than `current`, so equality keeps `current`.
fn beats(candidate: &CallRecord, current: &CallRecord) -> bool {
    if candidate.duration != current.duration {
        return candidate.duration > current.duration;
    }
    candidate.success && !current.success
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(group: &str, duration: f64, success: bool) -> CallRecord {
        CallRecord {
            beneficiary_id: "b1".into(),
            attempt_group: group.to_string(),
            call_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            message_id: 3,
            duration,
            success,
        }
    }

    #[test]
    fn keeps_longest_retry() {
        let out = dedup_attempts(&[rec("g", 0.0, false), rec("g", 42.0, true)]);
        assert_eq!(out, vec![rec("g", 42.0, true)]);
    }

    #[test]
    fn single_record_unchanged() {
        let r = vec![rec("g", 12.0, true)];
        assert_eq!(dedup_attempts(&r), r);
        assert!(dedup_attempts(&[]).is_empty());
    }

    #[test]
    fn tie_prefers_success_in_either_order() {
        // Both 2-permutations of {success, failure} at equal duration.
        let a = rec("g", 17.0, true);
        let b = rec("g", 17.0, false);
        assert_eq!(dedup_attempts(&[a.clone(), b.clone()]), vec![a.clone()]);
        assert_eq!(dedup_attempts(&[b, a.clone()]), vec![a]);
    }

    #[test]
    fn full_tie_keeps_earliest() {
        let mut first = rec("g", 17.0, true);
        first.message_id = 1;
        let second = rec("g", 17.0, true);
        assert_eq!(dedup_attempts(&[first.clone(), second]), vec![first]);
    }

    #[test]
    fn groups_are_scoped_per_beneficiary() {
        let mut other = rec("g", 5.0, true);
        other.beneficiary_id = "b2".into();
        let out = dedup_attempts(&[rec("g", 1.0, true), other.clone()]);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn classification_boundaries() {
        assert_eq!(classify_call(&rec("g", 45.0, true)).unwrap().kind, EventKind::Engagement);
        assert_eq!(classify_call(&rec("g", 30.0, true)).unwrap().kind, EventKind::Connection);
        assert_eq!(classify_call(&rec("g", 0.0, false)).unwrap().kind, EventKind::Attempt);
        // A long but failed call is still only an attempt.
        assert_eq!(classify_call(&rec("g", 90.0, false)).unwrap().kind, EventKind::Attempt);
        assert!(matches!(classify_call(&rec("g", -1.0, true)), Err(CallLogError::NegativeDuration { .. })));
    }
}
