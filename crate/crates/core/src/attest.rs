//! Trace decider and the streaming session monitor used by the proxy.

use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::hbw::{self, Bays, HbwCmd, HbwProtocol, HbwState, HbwTerm, Input};
use crate::protocol::{eval_until_next_com, IntCom, ProtocolDef};

/// Does `spec` generate `trace` (as a prefix of its command stream) when
/// started from `state`? Evaluation restarts from `spec` whenever the
/// current term is used up.
pub fn is_trace<C, P, S>(def: &ProtocolDef<C, P, S>, spec: &IntCom<C, P>, trace: &[C], state: &S) -> bool
where
    C: Clone + PartialEq,
    P: Clone,
    S: Clone + PartialEq,
{
    let mut term: Option<IntCom<C, P>> = None;
    let mut state = state.clone();
    for observed in trace {
        let step = eval_until_next_com(def, term.as_ref().unwrap_or(spec), &state);
        match step.next {
            Some(expected) if expected == *observed && !def.is_wrong(&step.state_after) => {
                term = step.continuation;
                state = step.state_after;
            }
            _ => return false,
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    InputEvent(Input),
    CommandEvent(HbwCmd),
    StateEvent(Bays),
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            TraceEvent::InputEvent(i) => format!("input {i}"),
            TraceEvent::CommandEvent(c) => format!("cmd {c}"),
            TraceEvent::StateEvent(b) => format!("state {b}"),
        };
        f.pad(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Conformant,
    FailSafe(String),
}

impl Verdict {
    pub fn is_conformant(&self) -> bool {
        matches!(self, Verdict::Conformant)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offense {
    /// 1-based index of the offending event among all observed events.
    pub position: usize,
    pub event: TraceEvent,
    pub reason: String,
}

/// Streaming attestation state for one session.
///
/// Once an offense is recorded the monitor is halted and never changes again.
#[derive(Clone, Debug)]
pub struct SessionMonitor {
    def: HbwProtocol,
    spec: HbwTerm,
    state: HbwState,
    continuation: Option<HbwTerm>,
    observed: usize,
    offense: Option<Offense>,
}

impl SessionMonitor {
    pub fn new(initial: HbwState) -> Self {
        Self::with_spec(hbw::protocol(), hbw::spec(), initial)
    }

    pub fn with_spec(def: HbwProtocol, spec: HbwTerm, initial: HbwState) -> Self {
        assert!(!def.is_wrong(&initial), "monitor must start in a valid state");
        SessionMonitor {
            def,
            spec,
            state: initial,
            continuation: None,
            observed: 0,
            offense: None,
        }
    }

    pub fn state(&self) -> &HbwState {
        &self.state
    }

    pub fn continuation(&self) -> Option<&HbwTerm> {
        self.continuation.as_ref()
    }

    pub fn halted(&self) -> bool {
        self.offense.is_some()
    }

    pub fn offense(&self) -> Option<&Offense> {
        self.offense.as_ref()
    }

    /// At a cycle boundary the next command restarts evaluation of the protocol term.
    pub fn at_boundary(&self) -> bool {
        self.continuation.is_none()
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    /// The protocol command the monitor would accept next, if any.
    pub fn expected(&self) -> Option<HbwCmd> {
        if self.halted() {
            return None;
        }
        let term = self.continuation.as_ref().unwrap_or(&self.spec);
        eval_until_next_com(&self.def, term, &self.state).next
    }

    pub fn observe(&mut self, event: TraceEvent) -> Verdict {
        if self.halted() {
            return Verdict::FailSafe("halted".to_string());
        }
        let first = self.observed == 0;
        self.observed += 1;
        match event {
            TraceEvent::StateEvent(bays) => {
                if !first {
                    return self.halt(event, "state snapshot after the session started".to_string());
                }
                self.state = HbwState::sigma(bays, self.state.input());
                Verdict::Conformant
            }
            TraceEvent::InputEvent(input) => {
                if self.continuation.is_some() {
                    return self.halt(event, format!("input `{input}` arrived mid-cycle"));
                }
                if let HbwState::Sigma { bays, .. } = self.state {
                    self.state = HbwState::sigma(bays, Some(input));
                }
                Verdict::Conformant
            }
            TraceEvent::CommandEvent(cmd) => {
                let term = self.continuation.as_ref().unwrap_or(&self.spec);
                let step = eval_until_next_com(&self.def, term, &self.state);
                match step.next {
                    None => self.halt(event, format!("observed `{cmd}` but the protocol expects no command")),
                    Some(expected) if expected != cmd => {
                        self.halt(event, format!("expected `{expected}`, observed `{cmd}`"))
                    }
                    Some(_) if self.def.is_wrong(&step.state_after) => {
                        self.halt(event, format!("`{cmd}` leads to Wrong"))
                    }
                    Some(_) => {
                        self.state = step.state_after;
                        self.continuation = step.continuation;
                        Verdict::Conformant
                    }
                }
            }
        }
    }

    fn halt(&mut self, event: TraceEvent, reason: String) -> Verdict {
        self.offense = Some(Offense {
            position: self.observed,
            event,
            reason: reason.clone(),
        });
        Verdict::FailSafe(reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace file: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] TraceParseError),
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub line: usize,
    pub event: TraceEvent,
}

/// Parse the line-oriented trace format. Keywords are case-insensitive and
/// `#` starts a comment.
pub fn parse_trace(text: &str) -> Result<Vec<TraceLine>, TraceParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words = words_with_columns(content);
        let Some(&(col, keyword)) = words.first() else {
            continue;
        };
        let rest: Vec<&str> = words[1..].iter().map(|(_, w)| *w).collect();
        let err = |column: usize, message: String| TraceParseError { line, column, message };
        let arg_col = words.get(1).map_or(col + keyword.len(), |(c, _)| *c);
        let event = match keyword.to_ascii_lowercase().as_str() {
            "state" => rest
                .join(" ")
                .parse::<Bays>()
                .map(TraceEvent::StateEvent)
                .map_err(|e| err(arg_col, e.to_string()))?,
            "input" => rest
                .join(" ")
                .parse::<Input>()
                .map(TraceEvent::InputEvent)
                .map_err(|e| err(arg_col, e.to_string()))?,
            "cmd" => rest
                .join(" ")
                .parse::<HbwCmd>()
                .map(TraceEvent::CommandEvent)
                .map_err(|e| err(arg_col, e.to_string()))?,
            _ => return Err(err(col, format!("unknown keyword `{keyword}`"))),
        };
        out.push(TraceLine { line, event });
    }
    Ok(out)
}

/// Whitespace-separated words with their 1-based starting columns.
fn words_with_columns(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in s.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(b)) => {
                out.push((s[..b].chars().count() + 1, &s[b..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        out.push((s[..b].chars().count() + 1, &s[b..]));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub line: usize,
    pub event: TraceEvent,
    pub state: HbwState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceReport {
    pub verdict: Verdict,
    /// Source line of the first rejected event.
    pub offending_line: Option<usize>,
    pub final_state: HbwState,
    /// State after every accepted event.
    pub snapshots: Vec<Snapshot>,
    /// The trace ended in the middle of a protocol cycle. Prefixes are
    /// accepted, so this is advisory only.
    pub incomplete_cycle: bool,
}

/// Fold a parsed trace through a fresh monitor starting from empty bays.
pub fn check_trace(lines: &[TraceLine]) -> TraceReport {
    let mut monitor = SessionMonitor::new(HbwState::sigma(Bays::empty(), None));
    let mut snapshots = Vec::new();
    for tl in lines {
        if let Verdict::FailSafe(reason) = monitor.observe(tl.event) {
            return TraceReport {
                verdict: Verdict::FailSafe(reason),
                offending_line: Some(tl.line),
                final_state: *monitor.state(),
                snapshots,
                incomplete_cycle: !monitor.at_boundary(),
            };
        }
        snapshots.push(Snapshot {
            line: tl.line,
            event: tl.event,
            state: *monitor.state(),
        });
    }
    TraceReport {
        verdict: Verdict::Conformant,
        offending_line: None,
        final_state: *monitor.state(),
        snapshots,
        incomplete_cycle: !monitor.at_boundary(),
    }
}

pub fn check_trace_file(path: impl AsRef<Path>, protocol: &str) -> Result<TraceReport, TraceError> {
    if protocol != "hbw" {
        return Err(TraceError::UnknownProtocol(protocol.to_string()));
    }
    let text = fs::read_to_string(path)?;
    let lines = parse_trace(&text)?;
    Ok(check_trace(&lines))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbw::{Color, ItemColor};
    use Color::{Blue as B, Empty as E, Red as R, White as W};

    fn sample_bays() -> Bays {
        Bays([W, B, E, W, R, R, E, E, E])
    }

    #[test]
    fn is_trace_examples() {
        let def = hbw::protocol();
        let s = HbwState::sigma(sample_bays(), Some(Input::StoreRequest(ItemColor::Red)));
        assert!(is_trace(&def, &hbw::spec(), &[], &s));
        assert!(is_trace(
            &def,
            &hbw::spec(),
            &[HbwCmd::NotFull, HbwCmd::Store(ItemColor::Red)],
            &s
        ));
        assert!(!is_trace(
            &def,
            &hbw::spec(),
            &[HbwCmd::NotFull, HbwCmd::Store(ItemColor::Blue)],
            &s
        ));
        // Without input the protocol is silent, so any command is rejected.
        let idle = HbwState::sigma(sample_bays(), None);
        assert!(!is_trace(&def, &hbw::spec(), &[HbwCmd::IsFull], &idle));
    }

    #[test]
    fn store_cycle_on_empty_warehouse() {
        let mut m = SessionMonitor::new(HbwState::sigma(Bays::empty(), None));
        assert!(m.observe(TraceEvent::InputEvent(Input::StoreRequest(ItemColor::Red))).is_conformant());
        assert!(m.observe(TraceEvent::CommandEvent(HbwCmd::NotFull)).is_conformant());
        assert!(!m.at_boundary());
        assert!(m.observe(TraceEvent::CommandEvent(HbwCmd::Store(ItemColor::Red))).is_conformant());
        assert!(m.at_boundary());
        assert_eq!(m.state().bays().unwrap().get(1), R);
    }

    #[test]
    fn notfull_on_full_warehouse_fails_safe() {
        let full = Bays([W, B, W, W, R, R, R, B, B]);
        let mut m = SessionMonitor::new(HbwState::sigma(full, Some(Input::StoreRequest(ItemColor::Red))));
        let v = m.observe(TraceEvent::CommandEvent(HbwCmd::NotFull));
        assert_eq!(v, Verdict::FailSafe("expected `isfull`, observed `notfull`".into()));
        assert_eq!(m.offense().unwrap().position, 1);
    }

    #[test]
    fn hascolor_without_color_fails_safe() {
        let no_red = Bays([W, B, E, W, B, B, E, E, E]);
        let mut m = SessionMonitor::new(HbwState::sigma(no_red, Some(Input::RetrieveRequest(ItemColor::Red))));
        assert!(!m.observe(TraceEvent::CommandEvent(HbwCmd::HasColor)).is_conformant());
    }

    #[test]
    fn halting_is_permanent() {
        let mut m = SessionMonitor::new(HbwState::sigma(Bays::empty(), None));
        assert!(!m.observe(TraceEvent::CommandEvent(HbwCmd::IsFull)).is_conformant());
        let frozen = *m.state();
        for ev in [
            TraceEvent::InputEvent(Input::StoreRequest(ItemColor::Blue)),
            TraceEvent::CommandEvent(HbwCmd::NotFull),
            TraceEvent::StateEvent(sample_bays()),
        ] {
            assert_eq!(m.observe(ev), Verdict::FailSafe("halted".into()));
            assert_eq!(*m.state(), frozen);
        }
        assert_eq!(m.offense().unwrap().position, 1);
    }

    #[test]
    fn input_mid_cycle_fails_safe() {
        let mut m = SessionMonitor::new(HbwState::sigma(Bays::empty(), Some(Input::StoreRequest(ItemColor::Red))));
        assert!(m.observe(TraceEvent::CommandEvent(HbwCmd::NotFull)).is_conformant());
        let v = m.observe(TraceEvent::InputEvent(Input::RetrieveRequest(ItemColor::Red)));
        assert!(!v.is_conformant());
        assert!(m.halted());
    }

    #[test]
    fn boundary_inputs_overwrite() {
        let mut m = SessionMonitor::new(HbwState::sigma(Bays::empty(), None));
        m.observe(TraceEvent::InputEvent(Input::StoreRequest(ItemColor::Red)));
        m.observe(TraceEvent::InputEvent(Input::StoreRequest(ItemColor::Blue)));
        assert_eq!(m.expected(), Some(HbwCmd::NotFull));
        m.observe(TraceEvent::CommandEvent(HbwCmd::NotFull));
        assert_eq!(m.expected(), Some(HbwCmd::Store(ItemColor::Blue)));
    }

    #[test]
    fn state_only_first() {
        let mut m = SessionMonitor::new(HbwState::sigma(Bays::empty(), None));
        assert!(m.observe(TraceEvent::StateEvent(sample_bays())).is_conformant());
        assert_eq!(m.state().bays(), Some(&sample_bays()));
        assert!(!m.observe(TraceEvent::StateEvent(sample_bays())).is_conformant());
    }

    #[test]
    fn parse_reports_position() {
        let err = parse_trace("# header\ninput store red\n  cmd store purple\n").unwrap_err();
        assert_eq!((err.line, err.column), (3, 7));
        let err = parse_trace("frobnicate\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
        let ok = parse_trace("STATE red red red red red red red red empty # comment\nInput Retrieve Red\nCMD HasColor\n").unwrap();
        assert_eq!(ok.len(), 3);
        assert_eq!(ok[2], TraceLine { line: 3, event: TraceEvent::CommandEvent(HbwCmd::HasColor) });
    }

    #[test]
    fn only_state_line_is_conformant() {
        let lines = parse_trace("state white blue empty white red red empty empty empty\n").unwrap();
        let r = check_trace(&lines);
        assert_eq!(r.verdict, Verdict::Conformant);
        assert_eq!(r.final_state, HbwState::sigma(sample_bays(), None));
        assert!(!r.incomplete_cycle);
    }

    #[test]
    fn trailing_partial_cycle_is_flagged_not_rejected() {
        let lines = parse_trace("input store red\ncmd notfull\n").unwrap();
        let r = check_trace(&lines);
        assert!(r.verdict.is_conformant());
        assert!(r.incomplete_cycle);
    }

    #[test]
    fn unknown_protocol() {
        assert!(matches!(
            check_trace_file("/nonexistent", "modbus"),
            Err(TraceError::UnknownProtocol(_))
        ));
    }
}
