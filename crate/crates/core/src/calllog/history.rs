use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::record::{classify_call_with, BeneficiaryId, CallEvent, CallRecord, EventKind};
use super::CallLogError;

/// Half-open calendar window `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    /// `days` days beginning at `start`.
    pub fn starting(start: NaiveDate, days: u64) -> Self {
        Self { start, end: start + Days::new(days) }
    }

    /// `days` days ending (exclusively) at `end`.
    pub fn ending(end: NaiveDate, days: u64) -> Self {
        Self { start: end - Days::new(days), end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date < self.end
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days()
    }
}

/// Attempt / connection / engagement totals over some window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub attempts: u32,
    pub connections: u32,
    pub engagements: u32,
}

impl EventCounts {
    pub fn add(&mut self, kind: EventKind) {
        self.attempts += 1;
        if kind.is_connection() {
            self.connections += 1;
        }
        if kind.is_engagement() {
            self.engagements += 1;
        }
    }

    /// Engagements over connections, `None` when there were no connections.
    pub fn e2c(&self) -> Option<f64> {
        (self.connections > 0).then(|| f64::from(self.engagements) / f64::from(self.connections))
    }
}

/// Time-ordered classified calls of one beneficiary together with the period
/// over which the beneficiary was observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallHistory {
    pub beneficiary_id: BeneficiaryId,
    events: Vec<CallEvent>,
    span: DateWindow,
}

impl CallHistory {
    /// Sorts `events` by date (stable) and records the observation span.
    /// The span is widened if needed so that it covers every event.
    pub fn new(beneficiary_id: BeneficiaryId, mut events: Vec<CallEvent>, span: DateWindow) -> Self {
        events.sort_by_key(|e| e.date);
        let mut span = span;
        if let (Some(first), Some(last)) = (events.first(), events.last()) {
            span.start = span.start.min(first.date);
            span.end = span.end.max(last.date + Days::new(1));
        }
        Self { beneficiary_id, events, span }
    }

    /// Builds a history from already deduplicated records of one beneficiary.
    pub fn from_records(
        beneficiary_id: BeneficiaryId,
        records: &[CallRecord],
        span: DateWindow,
        engagement_seconds: f64,
    ) -> Result<Self, CallLogError> {
        let events =
            records.iter().map(|r| classify_call_with(r, engagement_seconds)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(beneficiary_id, events, span))
    }

    pub fn events(&self) -> &[CallEvent] {
        &self.events
    }

    pub fn span(&self) -> DateWindow {
        self.span
    }

    pub fn events_in(&self, window: DateWindow) -> impl Iterator<Item = &CallEvent> + '_ {
        let lo = self.events.partition_point(|e| e.date < window.start);
        let hi = self.events.partition_point(|e| e.date < window.end);
        self.events[lo..hi.max(lo)].iter()
    }

    pub fn counts(&self, window: DateWindow) -> EventCounts {
        let mut counts = EventCounts::default();
        for e in self.events_in(window) {
            counts.add(e.kind);
        }
        counts
    }

    /// Engagement-to-connection ratio over `window`.
    pub fn e2c_ratio(&self, window: DateWindow) -> Result<f64, CallLogError> {
        self.counts(window)
            .e2c()
            .ok_or(CallLogError::NoConnections { beneficiary_id: self.beneficiary_id.clone(), window })
    }
}

/// Free-function form of [`CallHistory::e2c_ratio`].
pub fn e2c_ratio(history: &CallHistory, window: DateWindow) -> Result<f64, CallLogError> {
    history.e2c_ratio(window)
}

/// Lookback configuration for the six scalar call features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarFeatureConfig {
    pub window_days: u32,
    /// Gap reported when no event of a class exists in the window.
    /// `None` means `window_days + 1`.
    pub missing_gap: Option<u32>,
}

impl ScalarFeatureConfig {
    pub fn new(window_days: u32) -> Self {
        Self { window_days, missing_gap: None }
    }

    pub fn sentinel(&self) -> u32 {
        self.missing_gap.unwrap_or(self.window_days + 1)
    }
}

impl Default for ScalarFeatureConfig {
    fn default() -> Self {
        Self::new(28)
    }
}

/// Attempts, connections, engagements, and the days since the last of each,
/// over the `window_days` strictly before `as_of`.
pub fn extract_scalar_features(history: &CallHistory, as_of: NaiveDate, config: &ScalarFeatureConfig) -> [f64; 6] {
    let window = DateWindow::ending(as_of, u64::from(config.window_days));
    let mut counts = EventCounts::default();
    let mut last: [Option<NaiveDate>; 3] = [None; 3];
    for e in history.events_in(window) {
        counts.add(e.kind);
        last[0] = Some(e.date);
        if e.kind.is_connection() {
            last[1] = Some(e.date);
        }
        if e.kind.is_engagement() {
            last[2] = Some(e.date);
        }
    }
    let sentinel = f64::from(config.sentinel());
    let gap = |d: Option<NaiveDate>| d.map_or(sentinel, |d| (as_of - d).num_days() as f64);
    [
        f64::from(counts.attempts),
        f64::from(counts.connections),
        f64::from(counts.engagements),
        gap(last[0]),
        gap(last[1]),
        gap(last[2]),
    ]
}
