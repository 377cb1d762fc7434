use std::path::PathBuf;

use protoattest::attest::{check_trace_file, parse_trace, Verdict};
use protoattest::hbw::HbwCmd;

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

#[test]
fn valid_trace_snapshots() {
    let report = check_trace_file(example("valid_appendix.trace"), "hbw").unwrap();
    assert_eq!(report.verdict, Verdict::Conformant);
    assert!(!report.incomplete_cycle);
    // Bays after each cycle's driver command.
    let after_cycles: Vec<String> = report
        .snapshots
        .iter()
        .filter(|s| s.event.to_string().starts_with("cmd store") || s.event.to_string().starts_with("cmd retrieve"))
        .map(|s| s.state.bays().unwrap().to_string())
        .collect();
    assert_eq!(
        after_cycles,
        [
            "white blue red white red red empty empty empty",
            "white empty red white red red empty empty empty",
            "empty empty red white red red empty empty empty",
            "red empty red white red red empty empty empty",
        ]
    );
    assert_eq!(report.final_state.to_string(), "red empty red white red red empty empty empty | store red");
}

#[test]
fn invalid_traces_stop_at_first_offense() {
    let cases = [
        ("invalid_1_store_wrong_color.trace", 4, "store blue"),
        ("invalid_2_store_with_full.trace", 3, "notfull"),
        ("invalid_3_command_mismatch.trace", 3, "hascolor"),
        ("invalid_4_response_mismatch.trace", 3, "notfull"),
        ("invalid_5_retrieve_with_no_color.trace", 3, "hascolor"),
    ];
    for (file, line, cmd) in cases {
        let report = check_trace_file(example(file), "hbw").unwrap();
        assert!(matches!(report.verdict, Verdict::FailSafe(_)), "{file}");
        assert_eq!(report.offending_line, Some(line), "{file}");
        let text = std::fs::read_to_string(example(file)).unwrap();
        let offending = parse_trace(&text).unwrap().into_iter().find(|l| l.line == line).unwrap();
        assert_eq!(offending.event.to_string(), format!("cmd {}", cmd.parse::<HbwCmd>().unwrap()), "{file}");
    }
}

#[test]
fn parse_errors_carry_positions() {
    let err = parse_trace("state empty empty empty empty empty empty empty empty empty\ninput store red\ncmd fly\n").unwrap_err();
    assert_eq!((err.line, err.column), (3, 5));
    let err = parse_trace("  launch red\n").unwrap_err();
    assert_eq!((err.line, err.column), (1, 3));
}

#[test]
fn unknown_protocol() {
    assert!(check_trace_file(example("valid_appendix.trace"), "elevator").is_err());
}
