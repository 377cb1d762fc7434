//! Feed events to a session monitor one at a time, the way the proxy does.

use protoattest::attest::{SessionMonitor, TraceEvent};
use protoattest::hbw::{Bays, Color, HbwCmd, HbwState, Input, ItemColor};

fn main() {
    use Color::*;
    let bays = Bays([White, Blue, Empty, White, Red, Red, Empty, Empty, Empty]);
    let mut monitor = SessionMonitor::new(HbwState::sigma(bays, None));

    let events = [
        TraceEvent::InputEvent(Input::StoreRequest(ItemColor::Red)),
        TraceEvent::CommandEvent(HbwCmd::NotFull),
        TraceEvent::CommandEvent(HbwCmd::Store(ItemColor::Red)),
        TraceEvent::InputEvent(Input::RetrieveRequest(ItemColor::White)),
        TraceEvent::CommandEvent(HbwCmd::HasColor),
        // A compromised controller grabs the wrong item.
        TraceEvent::CommandEvent(HbwCmd::Retrieve(ItemColor::Blue)),
        TraceEvent::CommandEvent(HbwCmd::Retrieve(ItemColor::White)),
    ];
    for event in events {
        let expected = monitor.expected().map(|c| c.to_string()).unwrap_or_else(|| "-".into());
        let verdict = monitor.observe(event);
        println!("{event:<22} expected {expected:<15} {verdict:?}");
    }
    if let Some(o) = monitor.offense() {
        println!("halted at event {}: {}", o.position, o.reason);
    }
}
