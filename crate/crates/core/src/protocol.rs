//! Generic protocol DSL.
//!
//! A protocol is described by an [`IntCom`] term built from `Skip`, `Seq`,
//! `If` over atomic propositions, and external commands (the RPCs that
//! actually appear on the wire). The meaning of the external commands is
//! supplied by a [`ProtocolDef`]: a precondition, a transition function and
//! a labeling predicate, all over an abstract state type that has one
//! distinguished absorbing `wrong` value.

use std::fmt;

/// Internal command term, parameterized by the external command alphabet `C`
/// and the atomic proposition alphabet `P`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IntCom<C, P> {
    Skip,
    Seq(Box<IntCom<C, P>>, Box<IntCom<C, P>>),
    If(P, Box<IntCom<C, P>>, Box<IntCom<C, P>>),
    Ext(C),
}

impl<C, P> IntCom<C, P> {
    pub fn seq(first: Self, second: Self) -> Self {
        IntCom::Seq(Box::new(first), Box::new(second))
    }

    pub fn if_(prop: P, then: Self, otherwise: Self) -> Self {
        IntCom::If(prop, Box::new(then), Box::new(otherwise))
    }

    pub fn ext(cmd: C) -> Self {
        IntCom::Ext(cmd)
    }

    /// Number of constructors in the tree.
    pub fn node_count(&self) -> usize {
        match self {
            IntCom::Skip | IntCom::Ext(_) => 1,
            IntCom::Seq(a, b) | IntCom::If(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            IntCom::Skip | IntCom::Ext(_) => 1,
            IntCom::Seq(a, b) | IntCom::If(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Every external command mentioned anywhere in the term, in tree order.
    pub fn commands(&self) -> Vec<&C> {
        let mut out = Vec::new();
        self.collect_commands(&mut out);
        out
    }

    fn collect_commands<'a>(&'a self, out: &mut Vec<&'a C>) {
        match self {
            IntCom::Skip => {}
            IntCom::Ext(c) => out.push(c),
            IntCom::Seq(a, b) | IntCom::If(_, a, b) => {
                a.collect_commands(out);
                b.collect_commands(out);
            }
        }
    }
}

impl<C: fmt::Display, P: fmt::Debug> fmt::Display for IntCom<C, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntCom::Skip => write!(f, "Skip"),
            IntCom::Ext(c) => write!(f, "{c}"),
            IntCom::Seq(a, b) => write!(f, "Seq ({a}) ({b})"),
            IntCom::If(p, a, b) => write!(f, "If {p:?} ({a}) ({b})"),
        }
    }
}

/// The protocol-specific semantics: `phi` is the precondition, `step` the
/// semantic function on external commands and `holds` the labeling.
///
/// For every valid state `s` and command `c`,
/// `step(c, s) == wrong` exactly when `!phi(c, s)`, and `step(c, wrong) == wrong`.
pub struct ProtocolDef<C, P, S> {
    pub name: &'static str,
    pub wrong: S,
    pub phi: fn(&C, &S) -> bool,
    pub step: fn(&C, &S) -> S,
    pub holds: fn(&P, &S) -> bool,
}

impl<C, P, S: Clone> Clone for ProtocolDef<C, P, S> {
    fn clone(&self) -> Self {
        ProtocolDef {
            name: self.name,
            wrong: self.wrong.clone(),
            phi: self.phi,
            step: self.step,
            holds: self.holds,
        }
    }
}

impl<C, P, S: fmt::Debug> fmt::Debug for ProtocolDef<C, P, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolDef")
            .field("name", &self.name)
            .field("wrong", &self.wrong)
            .finish_non_exhaustive()
    }
}

impl<C, P, S: PartialEq> ProtocolDef<C, P, S> {
    pub fn is_wrong(&self, state: &S) -> bool {
        *state == self.wrong
    }
}

/// Result of [`eval_until_next_com`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NextCom<C, P, S> {
    pub next: Option<C>,
    pub continuation: Option<IntCom<C, P>>,
    pub state_after: S,
}

/// Big-step evaluation of a single external command.
pub fn eval_ec<C, P, S>(def: &ProtocolDef<C, P, S>, cmd: &C, state: &S) -> S
where
    S: Clone + PartialEq,
{
    if def.is_wrong(state) {
        return def.wrong.clone();
    }
    (def.step)(cmd, state)
}

/// Big-step evaluation of an internal command term.
pub fn eval_ic<C, P, S>(def: &ProtocolDef<C, P, S>, term: &IntCom<C, P>, state: &S) -> S
where
    S: Clone + PartialEq,
{
    if def.is_wrong(state) {
        return def.wrong.clone();
    }
    match term {
        IntCom::Skip => state.clone(),
        IntCom::Ext(cmd) => eval_ec(def, cmd, state),
        IntCom::If(prop, then, otherwise) => {
            if (def.holds)(prop, state) {
                eval_ic(def, then, state)
            } else {
                eval_ic(def, otherwise, state)
            }
        }
        IntCom::Seq(first, second) => {
            let mid = eval_ic(def, first, state);
            if def.is_wrong(&mid) {
                mid
            } else {
                eval_ic(def, second, &mid)
            }
        }
    }
}

/// Locate the leftmost external command reachable from `term` in `state`,
/// along with whatever is left of the term after it. Skip/If are resolved
/// against `state`; no command is executed.
fn split_first<C, P, S>(
    def: &ProtocolDef<C, P, S>,
    term: &IntCom<C, P>,
    state: &S,
) -> Option<(C, Option<IntCom<C, P>>)>
where
    C: Clone,
    P: Clone,
{
    match term {
        IntCom::Skip => None,
        IntCom::Ext(cmd) => Some((cmd.clone(), None)),
        IntCom::If(prop, then, otherwise) => {
            if (def.holds)(prop, state) {
                split_first(def, then, state)
            } else {
                split_first(def, otherwise, state)
            }
        }
        IntCom::Seq(first, second) => match split_first(def, first, state) {
            None => split_first(def, second, state),
            Some((cmd, None)) => Some((cmd, Some((**second).clone()))),
            Some((cmd, Some(rest))) => Some((cmd, Some(IntCom::Seq(Box::new(rest), second.clone())))),
        },
    }
}

/// Run `term` from `state` up to and including its next external command.
///
/// Returns the command, the remaining term and the state after applying the
/// command. The continuation is `None` when nothing left in the term would
/// emit another command from `state_after`. If the term emits nothing the
/// result is `(None, None, state)`.
pub fn eval_until_next_com<C, P, S>(
    def: &ProtocolDef<C, P, S>,
    term: &IntCom<C, P>,
    state: &S,
) -> NextCom<C, P, S>
where
    C: Clone,
    P: Clone,
    S: Clone + PartialEq,
{
    if def.is_wrong(state) {
        return NextCom {
            next: None,
            continuation: None,
            state_after: def.wrong.clone(),
        };
    }
    match split_first(def, term, state) {
        None => NextCom {
            next: None,
            continuation: None,
            state_after: state.clone(),
        },
        Some((cmd, rest)) => {
            let state_after = eval_ec(def, &cmd, state);
            // A remainder that cannot emit anything more is a cycle boundary.
            let continuation = match rest {
                Some(rest) if !def.is_wrong(&state_after) => {
                    split_first(def, &rest, &state_after).map(|_| rest)
                }
                other => other,
            };
            NextCom {
                next: Some(cmd),
                continuation,
                state_after,
            }
        }
    }
}
