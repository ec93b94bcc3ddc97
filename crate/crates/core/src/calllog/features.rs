//! Model inputs and labels built from call histories.
//!
//! Per-call dynamic rows use a fixed channel layout:
//!
//! | channel | value                                          |
//! |---------|------------------------------------------------|
//! | 0       | duration in minutes                            |
//! | 1       | 1 if the call connected                        |
//! | 2       | 1 if the call was an engagement                |
//! | 3       | days since window start / window length        |
//! | 4       | message-id bucket, `(message_id / 10) / 15`    |

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::history::{extract_scalar_features, CallHistory, DateWindow, ScalarFeatureConfig};
use super::profile::BeneficiaryProfile;
use super::{CallLogError, ExclusionReason};

/// Calls per feature window: at most two a week over four weeks.
pub const T_MAX: usize = 8;
pub const CALL_CHANNELS: usize = 5;

pub type CallRow = [f64; CALL_CHANNELS];

/// Which prediction task produced a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EngagementLabel {
    ShortTermHighRisk,
    ShortTermLowRisk,
    Llte,
    Hlte,
}

impl EngagementLabel {
    pub fn at_risk(task: Task, at_risk: bool) -> Self {
        match (task, at_risk) {
            (Task::ShortTerm, true) => Self::ShortTermHighRisk,
            (Task::ShortTerm, false) => Self::ShortTermLowRisk,
            (Task::LongTerm, true) => Self::Llte,
            (Task::LongTerm, false) => Self::Hlte,
        }
    }

    /// High risk / LLTE: the class metrics are reported over.
    pub fn is_positive(self) -> bool {
        matches!(self, Self::ShortTermHighRisk | Self::Llte)
    }

    pub fn task(self) -> Task {
        match self {
            Self::ShortTermHighRisk | Self::ShortTermLowRisk => Task::ShortTerm,
            Self::Llte | Self::Hlte => Task::LongTerm,
        }
    }
}

/// Zero-padded call sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSequence {
    pub rows: Vec<CallRow>,
    pub valid_len: usize,
    /// More than [`T_MAX`] calls fell in the window; only the latest were kept.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFeatures {
    pub static_features: Vec<f64>,
    pub dynamic: Vec<CallRow>,
    pub valid_len: usize,
    pub scalar_calls: [f64; 6],
}

impl SequenceFeatures {
    /// Static encoding followed by the scalar call features.
    pub fn flat_static(&self) -> Vec<f64> {
        let mut v = self.static_features.clone();
        v.extend_from_slice(&self.scalar_calls);
        v
    }

    pub fn connections(&self) -> f64 {
        self.scalar_calls[1]
    }

    pub fn engagements(&self) -> f64 {
        self.scalar_calls[2]
    }
}

/// Per-call rows for calls in `window`, oldest first, padded with zero rows to [`T_MAX`].
pub fn build_sequence(history: &CallHistory, window: DateWindow) -> CallSequence {
    let calls: Vec<_> = history.events_in(window).collect();
    let truncated = calls.len() > T_MAX;
    if truncated {
        log::debug!(
            "beneficiary {}: {} calls in a {}-day window, keeping the latest {}",
            history.beneficiary_id,
            calls.len(),
            window.days(),
            T_MAX
        );
    }
    let kept = &calls[calls.len().saturating_sub(T_MAX)..];
    let span = window.days().max(1) as f64;
    let mut rows = vec![[0.0; CALL_CHANNELS]; T_MAX];
    for (row, call) in rows.iter_mut().zip(kept) {
        *row = [
            call.duration / 60.0,
            if call.kind.is_connection() { 1.0 } else { 0.0 },
            if call.kind.is_engagement() { 1.0 } else { 0.0 },
            (call.date - window.start).num_days() as f64 / span,
            f64::from(call.message_id / 10) / 15.0,
        ];
    }
    CallSequence { rows, valid_len: kept.len(), truncated }
}

/// Feature extraction for one window ending at `as_of`.
pub fn features_for_window(
    history: &CallHistory,
    profile: &BeneficiaryProfile,
    as_of: NaiveDate,
    window_days: u32,
    scalar: &ScalarFeatureConfig,
) -> SequenceFeatures {
    let window = DateWindow::ending(as_of, u64::from(window_days));
    let seq = build_sequence(history, window);
    let scalar = ScalarFeatureConfig { window_days, ..*scalar };
    SequenceFeatures {
        static_features: profile.encode(),
        dynamic: seq.rows,
        valid_len: seq.valid_len,
        scalar_calls: extract_scalar_features(history, as_of, &scalar),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShortTermConfig {
    pub feature_days: u32,
    pub label_days: u32,
    /// Anchors are `span.start + k * anchor_step_days`.
    pub anchor_step_days: u32,
    pub missing_gap: Option<u32>,
}

impl Default for ShortTermConfig {
    fn default() -> Self {
        Self { feature_days: 28, label_days: 14, anchor_step_days: 7, missing_gap: None }
    }
}

impl ShortTermConfig {
    fn scalar(&self) -> ScalarFeatureConfig {
        ScalarFeatureConfig { window_days: self.feature_days, missing_gap: self.missing_gap }
    }
}

/// Week-aligned anchors with a full feature and label window inside the span.
pub fn valid_anchors(history: &CallHistory, config: &ShortTermConfig) -> Vec<NaiveDate> {
    let span = history.span();
    let need = i64::from(config.feature_days + config.label_days);
    let step = i64::from(config.anchor_step_days.max(1));
    let last_offset = span.days() - need;
    if last_offset < 0 {
        return Vec::new();
    }
    (0..=last_offset / step).map(|k| span.start + Days::new((k * step) as u64)).collect()
}

pub fn sample_anchor<R: rand::Rng + ?Sized>(
    history: &CallHistory,
    config: &ShortTermConfig,
    rng: &mut R,
) -> Result<NaiveDate, CallLogError> {
    valid_anchors(history, config).choose(rng).copied().ok_or_else(|| CallLogError::SampleUnavailable {
        beneficiary_id: history.beneficiary_id.clone(),
        span_days: history.span().days(),
    })
}

/// Features from the four weeks starting at `anchor`; high risk iff the
/// following two weeks hold no engagement.
pub fn make_short_term_example(
    history: &CallHistory,
    profile: &BeneficiaryProfile,
    anchor: NaiveDate,
    config: &ShortTermConfig,
) -> Result<(SequenceFeatures, EngagementLabel), CallLogError> {
    let span = history.span();
    let as_of = anchor + Days::new(u64::from(config.feature_days));
    let label_window = DateWindow::starting(as_of, u64::from(config.label_days));
    if anchor < span.start || label_window.end > span.end {
        return Err(CallLogError::SampleUnavailable {
            beneficiary_id: history.beneficiary_id.clone(),
            span_days: span.days(),
        });
    }
    let features = features_for_window(history, profile, as_of, config.feature_days, &config.scalar());
    let engaged = history.counts(label_window).engagements > 0;
    Ok((features, EngagementLabel::at_risk(Task::ShortTerm, !engaged)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LongTermConfig {
    pub feature_days: u32,
    pub min_history_days: u32,
    pub min_connections: u32,
    pub e2c_threshold: f64,
    pub missing_gap: Option<u32>,
}

impl Default for LongTermConfig {
    fn default() -> Self {
        Self { feature_days: 30, min_history_days: 240, min_connections: 24, e2c_threshold: 0.5, missing_gap: None }
    }
}

/// Features from the first `feature_days` of the span, without a label.
pub fn long_term_features(
    history: &CallHistory,
    profile: &BeneficiaryProfile,
    config: &LongTermConfig,
) -> SequenceFeatures {
    let as_of = history.span().start + Days::new(u64::from(config.feature_days));
    let scalar = ScalarFeatureConfig { window_days: config.feature_days, missing_gap: config.missing_gap };
    features_for_window(history, profile, as_of, config.feature_days, &scalar)
}

/// First-month features; LLTE iff E2C over the rest of the span is below the threshold.
pub fn make_long_term_example(
    history: &CallHistory,
    profile: &BeneficiaryProfile,
    config: &LongTermConfig,
) -> Result<(SequenceFeatures, EngagementLabel), CallLogError> {
    let excluded = |reason| CallLogError::Excluded { beneficiary_id: history.beneficiary_id.clone(), reason };
    profile.validate().map_err(|msg| excluded(ExclusionReason::InvalidProfile(msg)))?;
    let span = history.span();
    if span.days() < i64::from(config.min_history_days) {
        return Err(excluded(ExclusionReason::ShortHistory { days: span.days() }));
    }
    let prediction = DateWindow::new(span.start + Days::new(u64::from(config.feature_days)), span.end);
    let counts = history.counts(prediction);
    if counts.connections < config.min_connections {
        return Err(excluded(ExclusionReason::TooFewConnections { connections: counts.connections }));
    }
    let e2c = counts.e2c().expect("connections checked above");
    let features = long_term_features(history, profile, config);
    Ok((features, EngagementLabel::at_risk(Task::LongTerm, e2c < config.e2c_threshold)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calllog::profile::{Language, PhoneOwner};
    use crate::calllog::record::{CallEvent, EventKind};
    use rand::SeedableRng;

    fn day(n: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + Days::new(n)
    }

    fn ev(kind: EventKind, d: u64) -> CallEvent {
        let duration = match kind {
            EventKind::Attempt => 0.0,
            EventKind::Connection => 12.0,
            EventKind::Engagement => 90.0,
        };
        CallEvent { kind, date: day(d), duration, message_id: 25 }
    }

    fn profile() -> BeneficiaryProfile {
        BeneficiaryProfile {
            beneficiary_id: "b".into(),
            age: 25,
            education_level: 4,
            income_group: 3,
            phone_owner: PhoneOwner::Woman,
            registration_date: day(0),
            gestation_age: 12,
            language: Language::Hindi,
            call_slot: 2,
        }
    }

    fn history(events: Vec<CallEvent>, span_days: u64) -> CallHistory {
        CallHistory::new("b".into(), events, DateWindow::starting(day(0), span_days))
    }

    #[test]
    fn sequence_padding() {
        let h =
            history(vec![ev(EventKind::Attempt, 1), ev(EventKind::Connection, 8), ev(EventKind::Engagement, 15)], 60);
        let seq = build_sequence(&h, DateWindow::starting(day(0), 28));
        assert_eq!(seq.valid_len, 3);
        assert!(seq.rows[3..].iter().all(|r| r.iter().all(|&x| x == 0.0)));
        assert_eq!(seq.rows[2], [1.5, 1.0, 1.0, 15.0 / 28.0, 2.0 / 15.0]);
        assert_eq!(seq.rows[0][1], 0.0);

        let empty = build_sequence(&history(vec![], 60), DateWindow::starting(day(0), 28));
        assert_eq!(empty.valid_len, 0);
        assert!(empty.rows.iter().flatten().all(|&x| x == 0.0));

        let full = history((0..8).map(|i| ev(EventKind::Connection, i * 3)).collect(), 60);
        let seq = build_sequence(&full, DateWindow::starting(day(0), 28));
        assert_eq!((seq.valid_len, seq.truncated), (8, false));
    }

    #[test]
    fn overfull_window_keeps_latest() {
        let h = history((0..10).map(|i| ev(EventKind::Connection, i * 2)).collect(), 60);
        let seq = build_sequence(&h, DateWindow::starting(day(0), 28));
        assert_eq!(seq.valid_len, 8);
        assert!(seq.truncated);
        assert_eq!(seq.rows[0][3], 4.0 / 28.0);
    }

    #[test]
    fn short_term_labels() {
        let base = vec![ev(EventKind::Engagement, 3)];
        let label = |extra: Vec<CallEvent>| {
            let mut events = base.clone();
            events.extend(extra);
            make_short_term_example(&history(events, 42), &profile(), day(0), &ShortTermConfig::default()).unwrap().1
        };
        assert_eq!(label(vec![ev(EventKind::Engagement, 30)]), EngagementLabel::ShortTermLowRisk);
        assert_eq!(
            label(vec![ev(EventKind::Connection, 30), ev(EventKind::Connection, 35)]),
            EngagementLabel::ShortTermHighRisk
        );
        assert_eq!(label(vec![]), EngagementLabel::ShortTermHighRisk);
        // An engagement on day 42 is outside the label window.
        let err = make_short_term_example(&history(base, 41), &profile(), day(0), &ShortTermConfig::default());
        assert!(matches!(err, Err(CallLogError::SampleUnavailable { .. })));
    }

    #[test]
    fn anchors_are_week_aligned() {
        let h = history(vec![], 56);
        let anchors = valid_anchors(&h, &ShortTermConfig::default());
        assert_eq!(anchors, vec![day(0), day(7), day(14)]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert!(anchors.contains(&sample_anchor(&h, &ShortTermConfig::default(), &mut rng).unwrap()));
        assert!(sample_anchor(&history(vec![], 41), &ShortTermConfig::default(), &mut rng).is_err());
    }

    fn long_history(engaged: u32, connected_only: u32) -> CallHistory {
        let mut events = vec![ev(EventKind::Engagement, 2)];
        let mut d = 31;
        for _ in 0..engaged {
            events.push(ev(EventKind::Engagement, d));
            d += 3;
        }
        for _ in 0..connected_only {
            events.push(ev(EventKind::Connection, d));
            d += 3;
        }
        history(events, 250)
    }

    #[test]
    fn long_term_labels() {
        let cfg = LongTermConfig::default();
        // 8 of 24: E2C 0.33.
        let (_, l) = make_long_term_example(&long_history(8, 16), &profile(), &cfg).unwrap();
        assert_eq!(l, EngagementLabel::Llte);
        let (f, l) = make_long_term_example(&long_history(12, 12), &profile(), &cfg).unwrap();
        assert_eq!(l, EngagementLabel::Hlte);
        assert_eq!(f.valid_len, 1);
        let err = make_long_term_example(&long_history(11, 12), &profile(), &cfg).unwrap_err();
        assert!(matches!(
            err,
            CallLogError::Excluded { reason: ExclusionReason::TooFewConnections { connections: 23 }, .. }
        ));
        let mut bad = profile();
        bad.income_group = 0;
        assert!(matches!(
            make_long_term_example(&long_history(12, 12), &bad, &cfg),
            Err(CallLogError::Excluded { reason: ExclusionReason::InvalidProfile(_), .. })
        ));
        let short = history(vec![ev(EventKind::Engagement, 2)], 100);
        assert!(matches!(
            make_long_term_example(&short, &profile(), &cfg),
            Err(CallLogError::Excluded { reason: ExclusionReason::ShortHistory { .. }, .. })
        ));
    }
}
