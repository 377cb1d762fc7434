//! The high-bay warehouse (HBW) protocol instance.
//!
//! Nine single-item bays, an optional pending HMI request, six external
//! commands and nine atomic propositions. [`spec`] is the protocol term the
//! controller is expected to follow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{IntCom, ProtocolDef};

pub const BAY_COUNT: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Empty,
    Red,
    White,
    Blue,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Empty, Color::Red, Color::White, Color::Blue];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Empty => "empty",
            Color::Red => "red",
            Color::White => "white",
            Color::Blue => "blue",
        }
    }
}

/// A color an item can actually have.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemColor {
    Red,
    White,
    Blue,
}

impl ItemColor {
    pub const ALL: [ItemColor; 3] = [ItemColor::Red, ItemColor::White, ItemColor::Blue];

    pub fn as_str(self) -> &'static str {
        Color::from(self).as_str()
    }
}

impl From<ItemColor> for Color {
    fn from(c: ItemColor) -> Color {
        match c {
            ItemColor::Red => Color::Red,
            ItemColor::White => Color::White,
            ItemColor::Blue => Color::Blue,
        }
    }
}

impl TryFrom<Color> for ItemColor {
    type Error = Color;

    fn try_from(c: Color) -> Result<ItemColor, Color> {
        match c {
            Color::Red => Ok(ItemColor::Red),
            Color::White => Ok(ItemColor::White),
            Color::Blue => Ok(ItemColor::Blue),
            Color::Empty => Err(c),
        }
    }
}

/// The contents of the nine bays. Indices are 1-based at the API surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bays(pub [Color; BAY_COUNT]);

impl Default for Bays {
    fn default() -> Self {
        Bays([Color::Empty; BAY_COUNT])
    }
}

impl Bays {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full_of(c: ItemColor) -> Self {
        Bays([c.into(); BAY_COUNT])
    }

    /// Color in bay `n` (1-based).
    ///
    /// Panics if `n` is outside `1..=9`.
    pub fn get(&self, n: usize) -> Color {
        assert!((1..=BAY_COUNT).contains(&n), "bay index {n} out of range");
        self.0[n - 1]
    }

    pub fn occupied(&self) -> usize {
        self.0.iter().filter(|c| **c != Color::Empty).count()
    }

    pub fn is_full(&self) -> bool {
        find_color(Color::Empty, 1, self).is_none()
    }

    pub fn contains(&self, c: Color) -> bool {
        find_color(c, 1, self).is_some()
    }
}

impl fmt::Display for Bays {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(c.as_str())?;
        }
        Ok(())
    }
}

/// Smallest bay index `i >= start` holding `target`.
///
/// Panics if `start` is outside `1..=9`.
pub fn find_color(target: Color, start: usize, bays: &Bays) -> Option<usize> {
    assert!((1..=BAY_COUNT).contains(&start), "bay index {start} out of range");
    (start..=BAY_COUNT).find(|&i| bays.0[i - 1] == target)
}

/// Copy of `bays` with bay `n` (1-based) set to `c`.
pub fn update_bay(bays: &Bays, n: usize, c: Color) -> Bays {
    assert!((1..=BAY_COUNT).contains(&n), "bay index {n} out of range");
    let mut out = *bays;
    out.0[n - 1] = c;
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Input {
    StoreRequest(ItemColor),
    RetrieveRequest(ItemColor),
}

impl Input {
    pub const ALL: [Input; 6] = [
        Input::StoreRequest(ItemColor::Red),
        Input::StoreRequest(ItemColor::White),
        Input::StoreRequest(ItemColor::Blue),
        Input::RetrieveRequest(ItemColor::Red),
        Input::RetrieveRequest(ItemColor::White),
        Input::RetrieveRequest(ItemColor::Blue),
    ];

    pub fn color(self) -> ItemColor {
        match self {
            Input::StoreRequest(c) | Input::RetrieveRequest(c) => c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HbwState {
    Wrong,
    Sigma { bays: Bays, input: Option<Input> },
}

impl HbwState {
    pub fn sigma(bays: Bays, input: Option<Input>) -> Self {
        HbwState::Sigma { bays, input }
    }

    pub fn bays(&self) -> Option<&Bays> {
        match self {
            HbwState::Sigma { bays, .. } => Some(bays),
            HbwState::Wrong => None,
        }
    }

    pub fn input(&self) -> Option<Input> {
        match self {
            HbwState::Sigma { input, .. } => *input,
            HbwState::Wrong => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HbwCmd {
    IsFull,
    NotFull,
    HasColor,
    /// Also known as `DoesNotHaveColor`.
    NoColor,
    Store(ItemColor),
    Retrieve(ItemColor),
}

impl HbwCmd {
    /// Every command, in a fixed order.
    pub const ALL: [HbwCmd; 10] = [
        HbwCmd::IsFull,
        HbwCmd::NotFull,
        HbwCmd::HasColor,
        HbwCmd::NoColor,
        HbwCmd::Store(ItemColor::Red),
        HbwCmd::Store(ItemColor::White),
        HbwCmd::Store(ItemColor::Blue),
        HbwCmd::Retrieve(ItemColor::Red),
        HbwCmd::Retrieve(ItemColor::White),
        HbwCmd::Retrieve(ItemColor::Blue),
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HbwAp {
    APBaysFull,
    APHasStoreRequest,
    APHasRetrieveRequest,
    APRequestRed,
    APRequestWhite,
    APRequestBlue,
    APContainsRed,
    APContainsWhite,
    APContainsBlue,
}

impl HbwAp {
    pub const ALL: [HbwAp; 9] = [
        HbwAp::APBaysFull,
        HbwAp::APHasStoreRequest,
        HbwAp::APHasRetrieveRequest,
        HbwAp::APRequestRed,
        HbwAp::APRequestWhite,
        HbwAp::APRequestBlue,
        HbwAp::APContainsRed,
        HbwAp::APContainsWhite,
        HbwAp::APContainsBlue,
    ];
}

pub type HbwTerm = IntCom<HbwCmd, HbwAp>;
pub type HbwProtocol = ProtocolDef<HbwCmd, HbwAp, HbwState>;

/// Precondition: is `cmd` valid in the valid state `sigma`? `Wrong` is never valid.
pub fn phi(cmd: &HbwCmd, sigma: &HbwState) -> bool {
    let HbwState::Sigma { bays, input } = sigma else {
        return false;
    };
    let has_empty = find_color(Color::Empty, 1, bays).is_some();
    match *cmd {
        HbwCmd::IsFull => !has_empty,
        HbwCmd::NotFull => has_empty,
        HbwCmd::HasColor => match input {
            Some(Input::RetrieveRequest(c)) => find_color((*c).into(), 1, bays).is_some(),
            _ => false,
        },
        HbwCmd::NoColor => match input {
            Some(Input::RetrieveRequest(c)) => find_color((*c).into(), 1, bays).is_none(),
            _ => false,
        },
        HbwCmd::Store(_) => has_empty,
        HbwCmd::Retrieve(c) => find_color(c.into(), 1, bays).is_some(),
    }
}

/// Semantic function on external commands.
pub fn step(cmd: &HbwCmd, state: &HbwState) -> HbwState {
    let HbwState::Sigma { bays, input } = *state else {
        return HbwState::Wrong;
    };
    let keep = |ok: bool| if ok { *state } else { HbwState::Wrong };
    match *cmd {
        HbwCmd::IsFull => keep(find_color(Color::Empty, 1, &bays).is_none()),
        HbwCmd::NotFull => keep(find_color(Color::Empty, 1, &bays).is_some()),
        HbwCmd::HasColor => match input {
            Some(Input::RetrieveRequest(c)) => keep(find_color(c.into(), 1, &bays).is_some()),
            _ => HbwState::Wrong,
        },
        HbwCmd::NoColor => match input {
            Some(Input::RetrieveRequest(c)) => keep(find_color(c.into(), 1, &bays).is_none()),
            _ => HbwState::Wrong,
        },
        HbwCmd::Store(c) => match find_color(Color::Empty, 1, &bays) {
            Some(n) => HbwState::sigma(update_bay(&bays, n, c.into()), input),
            None => HbwState::Wrong,
        },
        HbwCmd::Retrieve(c) => match find_color(c.into(), 1, &bays) {
            Some(n) => HbwState::sigma(update_bay(&bays, n, Color::Empty), input),
            None => HbwState::Wrong,
        },
    }
}

/// Labeling: does `ap` hold in `sigma`? Nothing holds in `Wrong`.
pub fn holds(ap: &HbwAp, sigma: &HbwState) -> bool {
    let HbwState::Sigma { bays, input } = sigma else {
        return false;
    };
    let requested = |c: ItemColor| input.map(Input::color) == Some(c);
    match ap {
        HbwAp::APBaysFull => find_color(Color::Empty, 1, bays).is_none(),
        HbwAp::APHasStoreRequest => matches!(input, Some(Input::StoreRequest(_))),
        HbwAp::APHasRetrieveRequest => matches!(input, Some(Input::RetrieveRequest(_))),
        HbwAp::APRequestRed => requested(ItemColor::Red),
        HbwAp::APRequestWhite => requested(ItemColor::White),
        HbwAp::APRequestBlue => requested(ItemColor::Blue),
        HbwAp::APContainsRed => find_color(Color::Red, 1, bays).is_some(),
        HbwAp::APContainsWhite => find_color(Color::White, 1, bays).is_some(),
        HbwAp::APContainsBlue => find_color(Color::Blue, 1, bays).is_some(),
    }
}

/// The HBW semantics packaged for the generic evaluator.
pub fn protocol() -> HbwProtocol {
    ProtocolDef {
        name: "hbw",
        wrong: HbwState::Wrong,
        phi,
        step,
        holds,
    }
}

/// The HBW protocol term.
pub fn spec() -> HbwTerm {
    use HbwAp::*;
    use HbwCmd::*;
    type T = HbwTerm;

    let store = T::if_(
        APBaysFull,
        T::ext(IsFull),
        T::seq(
            T::ext(NotFull),
            T::if_(
                APRequestRed,
                T::ext(Store(ItemColor::Red)),
                T::if_(
                    APRequestWhite,
                    T::ext(Store(ItemColor::White)),
                    T::if_(APRequestBlue, T::ext(Store(ItemColor::Blue)), T::Skip),
                ),
            ),
        ),
    );
    let retrieve_one = |contains: HbwAp, c: ItemColor| {
        T::if_(
            contains,
            T::seq(T::ext(HasColor), T::ext(Retrieve(c))),
            T::ext(NoColor),
        )
    };
    let retrieve = T::if_(
        APRequestRed,
        retrieve_one(APContainsRed, ItemColor::Red),
        T::if_(
            APRequestWhite,
            retrieve_one(APContainsWhite, ItemColor::White),
            T::if_(
                APRequestBlue,
                retrieve_one(APContainsBlue, ItemColor::Blue),
                T::Skip,
            ),
        ),
    );
    T::if_(
        APHasStoreRequest,
        store,
        T::if_(APHasRetrieveRequest, retrieve, T::Skip),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {kind} `{token}`")]
pub struct TokenError {
    pub kind: &'static str,
    pub token: String,
}

impl TokenError {
    fn new(kind: &'static str, token: &str) -> Self {
        TokenError {
            kind,
            token: token.to_string(),
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Color {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "empty" => Ok(Color::Empty),
            "red" => Ok(Color::Red),
            "white" => Ok(Color::White),
            "blue" => Ok(Color::Blue),
            _ => Err(TokenError::new("color", s)),
        }
    }
}

impl fmt::Display for ItemColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ItemColor {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Color>()
            .ok()
            .and_then(|c| ItemColor::try_from(c).ok())
            .ok_or_else(|| TokenError::new("item color", s))
    }
}

impl FromStr for Bays {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let colors = s
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Color>, _>>()?;
        let arr: [Color; BAY_COUNT] = colors
            .try_into()
            .map_err(|_| TokenError::new("bay list (need 9 colors)", s))?;
        Ok(Bays(arr))
    }
}

impl fmt::Display for Input {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Input::StoreRequest(c) => write!(f, "store {c}"),
            Input::RetrieveRequest(c) => write!(f, "retrieve {c}"),
        }
    }
}

impl FromStr for Input {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        match words.as_slice() {
            [kind, color] => {
                let c: ItemColor = color.parse()?;
                match kind.to_ascii_lowercase().as_str() {
                    "store" => Ok(Input::StoreRequest(c)),
                    "retrieve" => Ok(Input::RetrieveRequest(c)),
                    _ => Err(TokenError::new("input kind", kind)),
                }
            }
            _ => Err(TokenError::new("input", s)),
        }
    }
}

impl fmt::Display for HbwCmd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HbwCmd::IsFull => f.write_str("isfull"),
            HbwCmd::NotFull => f.write_str("notfull"),
            HbwCmd::HasColor => f.write_str("hascolor"),
            HbwCmd::NoColor => f.write_str("nocolor"),
            HbwCmd::Store(c) => write!(f, "store {c}"),
            HbwCmd::Retrieve(c) => write!(f, "retrieve {c}"),
        }
    }
}

impl FromStr for HbwCmd {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<String> = s.split_whitespace().map(str::to_ascii_lowercase).collect();
        let words: Vec<&str> = words.iter().map(String::as_str).collect();
        match words.as_slice() {
            ["isfull"] => Ok(HbwCmd::IsFull),
            ["notfull"] => Ok(HbwCmd::NotFull),
            ["hascolor"] => Ok(HbwCmd::HasColor),
            ["nocolor"] | ["doesnothavecolor"] => Ok(HbwCmd::NoColor),
            ["store", c] => Ok(HbwCmd::Store(c.parse()?)),
            ["retrieve", c] => Ok(HbwCmd::Retrieve(c.parse()?)),
            _ => Err(TokenError::new("command", s)),
        }
    }
}

impl fmt::Display for HbwState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HbwState::Wrong => f.write_str("wrong"),
            HbwState::Sigma { bays, input: None } => write!(f, "{bays} | none"),
            HbwState::Sigma {
                bays,
                input: Some(i),
            } => write!(f, "{bays} | {i}"),
        }
    }
}

impl FromStr for HbwState {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("wrong") {
            return Ok(HbwState::Wrong);
        }
        let (bays, input) = s
            .split_once('|')
            .ok_or_else(|| TokenError::new("state", s))?;
        let bays: Bays = bays.parse()?;
        let input = match input.trim() {
            i if i.eq_ignore_ascii_case("none") => None,
            i => Some(i.parse()?),
        };
        Ok(HbwState::sigma(bays, input))
    }
}
