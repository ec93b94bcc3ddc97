use chrono::Days;
use serde::{Deserialize, Serialize};

use crate::calllog::{CallHistory, DateWindow, InterventionKind, InterventionRecord};

/// Monthly engagement state of one beneficiary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BehaviorState {
    /// Engaging: monthly E2C at least 0.5.
    E,
    /// Not engaging.
    NE,
}

impl BehaviorState {
    pub const ALL: [BehaviorState; 2] = [BehaviorState::E, BehaviorState::NE];

    pub fn index(self) -> usize {
        match self {
            BehaviorState::E => 0,
            BehaviorState::NE => 1,
        }
    }

    pub fn reward(self) -> f64 {
        match self {
            BehaviorState::E => 1.0,
            BehaviorState::NE => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorState::E => "E",
            BehaviorState::NE => "NE",
        }
    }
}

/// `Abstain` is the passive arm (A); `Intervene` pulls the arm with a call (I).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Abstain,
    Intervene,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Abstain, Action::Intervene];

    pub fn index(self) -> usize {
        match self {
            Action::Abstain => 0,
            Action::Intervene => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Abstain => "A",
            Action::Intervene => "I",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionTuple {
    pub state: BehaviorState,
    pub action: Action,
    pub next: BehaviorState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StateConfig {
    pub month_days: u32,
    pub e2c_threshold: f64,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self { month_days: 30, e2c_threshold: 0.5 }
    }
}

/// State of a single window: E iff E2C ≥ threshold; no connections means NE.
pub fn window_state(history: &CallHistory, window: DateWindow, e2c_threshold: f64) -> BehaviorState {
    match history.counts(window).e2c() {
        Some(r) if r >= e2c_threshold => BehaviorState::E,
        _ => BehaviorState::NE,
    }
}

/// One state per complete month-long block of the history span.
pub fn monthly_states(history: &CallHistory, config: &StateConfig) -> Vec<BehaviorState> {
    let span = history.span();
    let month = i64::from(config.month_days);
    let months = span.days() / month;
    (0..months)
        .map(|t| {
            let start = span.start + Days::new((t * month) as u64);
            window_state(history, DateWindow::starting(start, month as u64), config.e2c_threshold)
        })
        .collect()
}

/// `Intervene` in every month holding a successful call intervention.
/// SMS interventions and failed calls leave the month passive.
pub fn monthly_actions(
    interventions: &[InterventionRecord],
    span: DateWindow,
    months: usize,
    config: &StateConfig,
) -> Vec<Action> {
    let mut actions = vec![Action::Abstain; months];
    for rec in interventions {
        if rec.kind != InterventionKind::Call || !rec.success || rec.date < span.start {
            continue;
        }
        let month = ((rec.date - span.start).num_days() / i64::from(config.month_days)) as usize;
        if let Some(slot) = actions.get_mut(month) {
            *slot = Action::Intervene;
        }
    }
    actions
}

/// `(s_t, a_t, s_{t+1})` for every consecutive pair of months. Missing
/// actions are treated as passive.
pub fn build_tuples(states: &[BehaviorState], actions: &[Action]) -> Vec<TransitionTuple> {
    states
        .windows(2)
        .enumerate()
        .map(|(t, pair)| TransitionTuple {
            state: pair[0],
            action: actions.get(t).copied().unwrap_or(Action::Abstain),
            next: pair[1],
        })
        .collect()
}

/// Per-cell tallies of observed transitions, indexed `[state][action][next]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub counts: [[[u64; 2]; 2]; 2],
}

impl TransitionCounts {
    pub fn from_tuples<'a>(tuples: impl IntoIterator<Item = &'a TransitionTuple>) -> Self {
        let mut c = Self::default();
        for t in tuples {
            c.add(t);
        }
        c
    }

    pub fn add(&mut self, t: &TransitionTuple) {
        self.counts[t.state.index()][t.action.index()][t.next.index()] += 1;
    }

    pub fn merge(&mut self, other: &TransitionCounts) {
        for s in 0..2 {
            for a in 0..2 {
                for n in 0..2 {
                    self.counts[s][a][n] += other.counts[s][a][n];
                }
            }
        }
    }

    pub fn row_total(&self, state: BehaviorState, action: Action) -> u64 {
        self.counts[state.index()][action.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }
}
