//! Short paired latency benchmark. Pass the duration in seconds (default 2).

use std::time::Duration;

use protoattest::bench::Comparison;

fn main() -> anyhow::Result<()> {
    let secs: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2.0);
    let cmp = Comparison::run(Duration::from_secs_f64(secs), 0)?;
    println!("{cmp}");
    Ok(())
}
