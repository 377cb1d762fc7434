//! Exhaustive check of the safety condition: evaluating the protocol term
//! from any valid state never ends in `Wrong`.

use std::fmt::Display;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::hbw::{Bays, Color, HbwState, Input, BAY_COUNT};
use crate::protocol::{eval_ic, IntCom, ProtocolDef};

/// Input slots per bay configuration: absent, then the six requests.
const INPUT_SLOTS: u64 = 1 + Input::ALL.len() as u64;

/// Number of valid HBW states: 4^9 bay configurations times 7 inputs.
pub const HBW_STATE_COUNT: u64 = 4u64.pow(BAY_COUNT as u32) * INPUT_SLOTS;

/// The valid HBW state with enumeration index `index`.
///
/// Bays form a base-4 counter with bay 1 as the least significant digit; the
/// input cycles fastest.
pub fn state_at(index: u64) -> HbwState {
    debug_assert!(index < HBW_STATE_COUNT);
    let input = match index % INPUT_SLOTS {
        0 => None,
        k => Some(Input::ALL[(k - 1) as usize]),
    };
    let mut code = index / INPUT_SLOTS;
    let mut bays = [Color::Empty; BAY_COUNT];
    for slot in bays.iter_mut() {
        *slot = Color::ALL[(code % 4) as usize];
        code /= 4;
    }
    HbwState::sigma(Bays(bays), input)
}

/// Every valid HBW state exactly once, in index order.
pub fn enumerate_states() -> impl Iterator<Item = HbwState> {
    (0..HBW_STATE_COUNT).map(state_at)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation<S> {
    pub state: S,
    pub final_state: S,
}

#[derive(Clone, Debug)]
pub struct SafetyReport<S> {
    pub states_checked: u64,
    pub violations: Vec<Violation<S>>,
    pub elapsed: Duration,
}

impl<S> SafetyReport<S> {
    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "{} states, {} violations",
            self.states_checked,
            self.violations.len()
        )
    }
}

impl<S: Display> SafetyReport<S> {
    /// One violating start state per line.
    pub fn write_violations<W: Write>(&self, mut out: W) -> io::Result<()> {
        for v in &self.violations {
            writeln!(out, "{}", v.state)?;
        }
        Ok(())
    }
}

/// Evaluate `spec` from each of the `count` states produced by `state_at`,
/// in parallel, collecting every start state that ends in `Wrong`.
pub fn check_safety_with<C, P, S, F>(
    def: &ProtocolDef<C, P, S>,
    spec: &IntCom<C, P>,
    count: u64,
    state_at: F,
) -> SafetyReport<S>
where
    C: Sync,
    P: Sync,
    S: Clone + PartialEq + Send + Sync,
    F: Fn(u64) -> S + Sync,
{
    let start = Instant::now();
    let violations = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let state = state_at(i);
            let final_state = eval_ic(def, spec, &state);
            def.is_wrong(&final_state)
                .then_some(Violation { state, final_state })
        })
        .collect();
    SafetyReport {
        states_checked: count,
        violations,
        elapsed: start.elapsed(),
    }
}

/// Check `spec` against every valid HBW state.
pub fn check_safety<C, P>(
    def: &ProtocolDef<C, P, HbwState>,
    spec: &IntCom<C, P>,
) -> SafetyReport<HbwState>
where
    C: Sync,
    P: Sync,
{
    check_safety_with(def, spec, HBW_STATE_COUNT, state_at)
}
