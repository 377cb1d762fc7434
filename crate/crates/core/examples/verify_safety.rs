//! Check the warehouse protocol against every state, then show that a
//! broken variant is caught.

use protoattest::hbw::{self, HbwCmd, HbwTerm, ItemColor};
use protoattest::verifier::check_safety;

fn main() {
    let def = hbw::protocol();
    let report = check_safety(&def, &hbw::spec());
    println!("hbw spec:        {} in {:.2?}", report.summary(), report.elapsed);

    // Storing without asking whether the warehouse is full.
    let reckless = HbwTerm::ext(HbwCmd::Store(ItemColor::Red));
    let report = check_safety(&def, &reckless);
    println!("bare store red:  {}", report.summary());
    if let Some(v) = report.violations.first() {
        println!("  e.g. {}", v.state);
    }
}
