//! The protocol machinery is generic. This defines a tiny door controller,
//! checks it exhaustively and decides a couple of traces.

use protoattest::attest::is_trace;
use protoattest::protocol::{eval_ic, IntCom, ProtocolDef};
use protoattest::verifier::check_safety_with;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Door {
    Wrong,
    State { open: bool, locked: bool, wants_open: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cmd {
    Unlock,
    Open,
    Close,
    Lock,
}

#[derive(Clone, Copy, Debug)]
enum Ap {
    Locked,
    WantsOpen,
    IsOpen,
}

fn phi(c: &Cmd, s: &Door) -> bool {
    let Door::State { open, locked, .. } = *s else { return false };
    match c {
        Cmd::Unlock => locked,
        Cmd::Open => !locked && !open,
        Cmd::Close => open,
        Cmd::Lock => !open && !locked,
    }
}

fn step(c: &Cmd, s: &Door) -> Door {
    if !phi(c, s) {
        return Door::Wrong;
    }
    let Door::State { open, locked, wants_open } = *s else { unreachable!() };
    match c {
        Cmd::Unlock => Door::State { open, locked: false, wants_open },
        Cmd::Open => Door::State { open: true, locked, wants_open },
        Cmd::Close => Door::State { open: false, locked, wants_open },
        Cmd::Lock => Door::State { open, locked: true, wants_open },
    }
}

fn holds(p: &Ap, s: &Door) -> bool {
    match (p, s) {
        (_, Door::Wrong) => false,
        (Ap::Locked, Door::State { locked, .. }) => *locked,
        (Ap::WantsOpen, Door::State { wants_open, .. }) => *wants_open,
        (Ap::IsOpen, Door::State { open, .. }) => *open,
    }
}

// A locked door is never open; other states are unreachable.
fn state_at(i: u64) -> Door {
    let (locked, open, wants_open) = match i {
        0 => (true, false, false),
        1 => (true, false, true),
        2 => (false, false, false),
        3 => (false, false, true),
        4 => (false, true, false),
        _ => (false, true, true),
    };
    Door::State { open, locked, wants_open }
}

fn main() {
    let def = ProtocolDef { name: "door", wrong: Door::Wrong, phi, step, holds };
    type T = IntCom<Cmd, Ap>;

    let spec = T::if_(
        Ap::WantsOpen,
        T::if_(
            Ap::IsOpen,
            T::Skip,
            T::seq(T::if_(Ap::Locked, T::ext(Cmd::Unlock), T::Skip), T::ext(Cmd::Open)),
        ),
        T::if_(
            Ap::IsOpen,
            T::seq(T::ext(Cmd::Close), T::ext(Cmd::Lock)),
            T::if_(Ap::Locked, T::Skip, T::ext(Cmd::Lock)),
        ),
    );
    println!("spec: {} nodes", spec.node_count());
    println!("safety: {}", check_safety_with(&def, &spec, 6, state_at).summary());

    let sloppy = T::if_(Ap::WantsOpen, T::ext(Cmd::Open), T::ext(Cmd::Lock));
    let report = check_safety_with(&def, &sloppy, 6, state_at);
    println!("sloppy: {}", report.summary());
    for v in &report.violations {
        println!("  fails from {:?}", v.state);
    }

    let locked = state_at(1);
    println!("after one cycle: {:?}", eval_ic(&def, &spec, &locked));
    println!("unlock, open: {}", is_trace(&def, &spec, &[Cmd::Unlock, Cmd::Open], &locked));
    println!("open:         {}", is_trace(&def, &spec, &[Cmd::Open], &locked));
}
