//! The "Berry and the Ghost" storyline as a state machine.
//!
//! ```text
//!            exceeded               exceeded (again)            non-negative comment
//!  Stable ─────────────▶ Darkening ─────────────────▶ GhostPresent ───────────────▶ HeartsBattle
//!    ▲                      │ N below                      │ N below                   │ N below
//!    └──────────────────────┘                              ▼                           │
//!    ▲                                              GhostExpelled ◀────────────────────┘
//!    └──────────── tick after expel_duration_ms ───────────┘
//! ```
//!
//! `N` is `deescalate_windows` consecutive below-threshold windows. Any
//! exceeded window resets that streak, in every state.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotState {
    Stable,
    Darkening,
    GhostPresent,
    HeartsBattle,
    GhostExpelled,
}

impl PlotState {
    pub const ALL: [PlotState; 5] = [
        PlotState::Stable,
        PlotState::Darkening,
        PlotState::GhostPresent,
        PlotState::HeartsBattle,
        PlotState::GhostExpelled,
    ];

    /// Wire token shared with the viewer overlay.
    pub fn token(self) -> &'static str {
        match self {
            PlotState::Stable => "stable",
            PlotState::Darkening => "darkening",
            PlotState::GhostPresent => "ghost_present",
            PlotState::HeartsBattle => "hearts_battle",
            PlotState::GhostExpelled => "ghost_expelled",
        }
    }

    /// The red danger mask is up while the ghost is on stage.
    pub fn mask_on(self) -> bool {
        matches!(self, PlotState::GhostPresent | PlotState::HeartsBattle)
    }
}

impl fmt::Display for PlotState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PlotState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlotState::ALL
            .into_iter()
            .find(|p| p.token() == s)
            .ok_or_else(|| format!("unknown plot state {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    WindowExceeded,
    WindowBelow,
    NonNegativeComment,
    Tick,
}

impl SignalKind {
    pub const ALL: [SignalKind; 4] = [
        SignalKind::WindowExceeded,
        SignalKind::WindowBelow,
        SignalKind::NonNegativeComment,
        SignalKind::Tick,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmSignal {
    pub kind: SignalKind,
    pub at_ms: u64,
}

impl FsmSignal {
    pub fn new(kind: SignalKind, at_ms: u64) -> Self {
        Self { kind, at_ms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StateChanged,
    HeartBurst,
    RedMaskOn,
    RedMaskOff,
    ReturnToBase,
}

impl EventKind {
    pub fn token(self) -> &'static str {
        match self {
            EventKind::StateChanged => "state_changed",
            EventKind::HeartBurst => "heart_burst",
            EventKind::RedMaskOn => "red_mask_on",
            EventKind::RedMaskOff => "red_mask_off",
            EventKind::ReturnToBase => "return_to_base",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeEvent {
    pub kind: EventKind,
    /// State after the step that produced this event.
    pub state: PlotState,
    pub seq: u64,
    pub at_ms: u64,
}

fn default_escalate() -> u32 {
    1
}

fn default_deescalate() -> u32 {
    2
}

fn default_expel_ms() -> u64 {
    3_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmConfig {
    /// Further exceeded windows needed in Darkening before the ghost appears.
    #[serde(default = "default_escalate")]
    pub escalate_windows: u32,
    #[serde(default = "default_deescalate")]
    pub deescalate_windows: u32,
    #[serde(default = "default_expel_ms")]
    pub expel_duration_ms: u64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            escalate_windows: default_escalate(),
            deescalate_windows: default_deescalate(),
            expel_duration_ms: default_expel_ms(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("fsm config: {0} must be positive")]
pub struct FsmConfigError(pub &'static str);

impl FsmConfig {
    pub fn validate(&self) -> Result<(), FsmConfigError> {
        if self.escalate_windows == 0 {
            return Err(FsmConfigError("escalate_windows"));
        }
        if self.deescalate_windows == 0 {
            return Err(FsmConfigError("deescalate_windows"));
        }
        if self.expel_duration_ms == 0 {
            return Err(FsmConfigError("expel_duration_ms"));
        }
        Ok(())
    }
}

/// Current plot point plus the counters the transition table needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NarrativeMachine {
    state: PlotState,
    /// Exceeded windows seen since entering Darkening, including the entering one.
    exceeded_in_darkening: u32,
    below_streak: u32,
    expelled_at: Option<u64>,
    next_seq: u64,
}

impl Default for NarrativeMachine {
    fn default() -> Self {
        Self::new()
    }
}

impl NarrativeMachine {
    pub fn new() -> Self {
        Self {
            state: PlotState::Stable,
            exceeded_in_darkening: 0,
            below_streak: 0,
            expelled_at: None,
            next_seq: 1,
        }
    }

    pub fn state(&self) -> PlotState {
        self.state
    }

    pub fn below_streak(&self) -> u32 {
        self.below_streak
    }

    /// Session time at which GhostExpelled hands back to Stable, if pending.
    pub fn expel_deadline(&self, config: &FsmConfig) -> Option<u64> {
        self.expelled_at.map(|t| t + config.expel_duration_ms)
    }

    fn emit(&mut self, out: &mut Vec<NarrativeEvent>, kind: EventKind, at_ms: u64) {
        out.push(NarrativeEvent {
            kind,
            state: self.state,
            seq: self.next_seq,
            at_ms,
        });
        self.next_seq += 1;
    }

    fn enter(&mut self, state: PlotState, at_ms: u64, out: &mut Vec<NarrativeEvent>) {
        self.state = state;
        self.emit(out, EventKind::StateChanged, at_ms);
    }

    pub fn step(&mut self, signal: FsmSignal, config: &FsmConfig) -> Vec<NarrativeEvent> {
        use PlotState::*;
        use SignalKind::*;

        let mut out = Vec::new();
        let at = signal.at_ms;
        match signal.kind {
            WindowExceeded => {
                self.below_streak = 0;
                match self.state {
                    Stable => {
                        self.exceeded_in_darkening = 1;
                        self.enter(Darkening, at, &mut out);
                    }
                    Darkening => {
                        self.exceeded_in_darkening += 1;
                        if self.exceeded_in_darkening > config.escalate_windows {
                            self.exceeded_in_darkening = 0;
                            self.enter(GhostPresent, at, &mut out);
                            self.emit(&mut out, EventKind::RedMaskOn, at);
                        }
                    }
                    GhostPresent | HeartsBattle | GhostExpelled => {}
                }
            }
            WindowBelow => {
                self.below_streak += 1;
                let streak_done = self.below_streak >= config.deescalate_windows;
                match self.state {
                    Darkening if streak_done => {
                        self.below_streak = 0;
                        self.exceeded_in_darkening = 0;
                        self.enter(Stable, at, &mut out);
                    }
                    GhostPresent | HeartsBattle if streak_done => {
                        self.below_streak = 0;
                        self.expelled_at = Some(at);
                        self.enter(GhostExpelled, at, &mut out);
                        self.emit(&mut out, EventKind::RedMaskOff, at);
                    }
                    _ => {}
                }
            }
            NonNegativeComment => match self.state {
                GhostPresent => {
                    self.enter(HeartsBattle, at, &mut out);
                    self.emit(&mut out, EventKind::HeartBurst, at);
                }
                HeartsBattle => self.emit(&mut out, EventKind::HeartBurst, at),
                _ => {}
            },
            Tick => {
                if self.state == GhostExpelled
                    && self.expel_deadline(config).is_some_and(|d| at >= d)
                {
                    self.expelled_at = None;
                    self.below_streak = 0;
                    self.enter(Stable, at, &mut out);
                    self.emit(&mut out, EventKind::ReturnToBase, at);
                }
            }
        }
        out
    }

    /// Back to Stable with counters cleared. Sequence numbers keep counting,
    /// and a raised mask is lowered so it never outlives the reset.
    pub fn reset(&mut self, at_ms: u64) -> Vec<NarrativeEvent> {
        let mut out = Vec::new();
        let had_mask = self.state.mask_on();
        if self.state != PlotState::Stable {
            self.enter(PlotState::Stable, at_ms, &mut out);
        }
        if had_mask {
            self.emit(&mut out, EventKind::RedMaskOff, at_ms);
        }
        self.exceeded_in_darkening = 0;
        self.below_streak = 0;
        self.expelled_at = None;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SignalKind::*;

    fn run(m: &mut NarrativeMachine, signals: &[(SignalKind, u64)]) -> Vec<NarrativeEvent> {
        let cfg = FsmConfig::default();
        signals
            .iter()
            .flat_map(|&(k, t)| m.step(FsmSignal::new(k, t), &cfg))
            .collect()
    }

    fn kinds(events: &[NarrativeEvent]) -> Vec<EventKind> {
        events.iter().map(|e| e.kind).collect()
    }

    #[test]
    fn stable_darkens_on_exceeded() {
        let mut m = NarrativeMachine::new();
        let ev = run(&mut m, &[(WindowExceeded, 10_000)]);
        assert_eq!(m.state(), PlotState::Darkening);
        assert_eq!(kinds(&ev), vec![EventKind::StateChanged]);
        assert_eq!(ev[0].state, PlotState::Darkening);
    }

    #[test]
    fn stable_ignores_below() {
        let mut m = NarrativeMachine::new();
        assert!(run(&mut m, &[(WindowBelow, 10_000)]).is_empty());
        assert_eq!(m.state(), PlotState::Stable);
    }

    #[test]
    fn second_exceeded_summons_ghost() {
        let mut m = NarrativeMachine::new();
        let ev = run(
            &mut m,
            &[(WindowExceeded, 10_000), (WindowExceeded, 20_000)],
        );
        assert_eq!(m.state(), PlotState::GhostPresent);
        assert_eq!(
            kinds(&ev),
            vec![
                EventKind::StateChanged,
                EventKind::StateChanged,
                EventKind::RedMaskOn
            ]
        );
    }

    #[test]
    fn below_window_between_exceeded_does_not_reset_escalation() {
        let mut m = NarrativeMachine::new();
        run(
            &mut m,
            &[
                (WindowExceeded, 10_000),
                (WindowBelow, 20_000),
                (WindowExceeded, 30_000),
            ],
        );
        assert_eq!(m.state(), PlotState::GhostPresent);
    }

    #[test]
    fn hearts_battle_expels_after_two_below() {
        let mut m = NarrativeMachine::new();
        run(
            &mut m,
            &[
                (WindowExceeded, 10_000),
                (WindowExceeded, 20_000),
                (NonNegativeComment, 21_000),
            ],
        );
        assert_eq!(m.state(), PlotState::HeartsBattle);
        let ev = run(&mut m, &[(WindowBelow, 30_000), (WindowBelow, 40_000)]);
        assert_eq!(m.state(), PlotState::GhostExpelled);
        assert_eq!(
            kinds(&ev),
            vec![EventKind::StateChanged, EventKind::RedMaskOff]
        );
    }

    #[test]
    fn expelled_returns_to_base_after_duration() {
        let mut m = NarrativeMachine::new();
        run(
            &mut m,
            &[
                (WindowExceeded, 10_000),
                (WindowExceeded, 20_000),
                (WindowBelow, 30_000),
                (WindowBelow, 40_000),
            ],
        );
        assert_eq!(m.expel_deadline(&FsmConfig::default()), Some(43_000));
        assert!(run(&mut m, &[(Tick, 42_999)]).is_empty());
        let ev = run(&mut m, &[(Tick, 43_000)]);
        assert_eq!(
            kinds(&ev),
            vec![EventKind::StateChanged, EventKind::ReturnToBase]
        );
        assert_eq!(m.state(), PlotState::Stable);
    }

    #[test]
    fn hearts_repeat_without_state_change() {
        let mut m = NarrativeMachine::new();
        run(
            &mut m,
            &[
                (WindowExceeded, 1),
                (WindowExceeded, 2),
                (NonNegativeComment, 3),
            ],
        );
        let ev = run(&mut m, &[(NonNegativeComment, 4)]);
        assert_eq!(kinds(&ev), vec![EventKind::HeartBurst]);
    }

    #[test]
    fn reset_variants() {
        let mut m = NarrativeMachine::new();
        assert!(m.reset(0).is_empty());
        assert_eq!(m.state(), PlotState::Stable);

        run(&mut m, &[(WindowExceeded, 1), (WindowExceeded, 2)]);
        let ev = m.reset(3);
        assert_eq!(
            kinds(&ev),
            vec![EventKind::StateChanged, EventKind::RedMaskOff]
        );
        let snapshot = m.clone();
        assert!(m.reset(4).is_empty());
        assert_eq!(m, snapshot);
    }

    #[test]
    fn seq_is_strictly_increasing() {
        let mut m = NarrativeMachine::new();
        let mut ev = run(
            &mut m,
            &[
                (WindowExceeded, 1),
                (WindowExceeded, 2),
                (NonNegativeComment, 3),
            ],
        );
        ev.extend(m.reset(4));
        ev.extend(run(&mut m, &[(WindowExceeded, 5)]));
        for w in ev.windows(2) {
            assert!(w[0].seq < w[1].seq);
        }
    }

    #[test]
    fn tokens_round_trip() {
        for s in PlotState::ALL {
            assert_eq!(s.token().parse::<PlotState>().unwrap(), s);
            assert_eq!(
                serde_json::to_string(&s).unwrap(),
                format!("\"{}\"", s.token())
            );
        }
        assert!("haunted".parse::<PlotState>().is_err());
    }
}
