//! Decide a trace file: `cargo run --example decide_trace -- <file>`.
//! Defaults to the bundled valid trace.

use std::path::PathBuf;

use protoattest::attest::{check_trace_file, Verdict};

fn main() -> anyhow::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/valid_appendix.trace"));
    let report = check_trace_file(&path, "hbw")?;
    for s in &report.snapshots {
        println!("{:>3}: {:<22} {}", s.line, s.event, s.state);
    }
    match report.verdict {
        Verdict::Conformant => println!("conformant"),
        Verdict::FailSafe(reason) => println!("fail-safe at line {}: {reason}", report.offending_line.unwrap_or(0)),
    }
    Ok(())
}
