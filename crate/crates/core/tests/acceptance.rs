//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use protoattest::attest::{check_trace_file, is_trace, SessionMonitor, TraceEvent, Verdict};
use protoattest::bench::{write_cdf, Comparison};
use protoattest::hbw::{self, find_color, Color, HbwCmd, HbwProtocol, HbwState, HbwTerm, Input, ItemColor};
use protoattest::protocol::{eval_ec, eval_ic, eval_until_next_com, IntCom};
use protoattest::sim::{run_simulation, AttackPattern, SimConfig};
use protoattest::verifier::{check_safety, state_at, HBW_STATE_COUNT};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn manifest(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_exhaustive_safety() -> Outcome {
    let start = Instant::now();
    let report = check_safety(&hbw::protocol(), &hbw::spec());
    let elapsed = start.elapsed();
    ensure(report.states_checked == 1_835_008, || format!("checked {}", report.states_checked))?;
    ensure(report.is_safe(), || report.summary())?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.2?}"))?;
    Ok(format!("{} in {elapsed:.2?}", report.summary()))
}

fn swap_full_responses(t: &HbwTerm) -> HbwTerm {
    match t {
        IntCom::Skip => IntCom::Skip,
        IntCom::Ext(HbwCmd::IsFull) => IntCom::Ext(HbwCmd::NotFull),
        IntCom::Ext(HbwCmd::NotFull) => IntCom::Ext(HbwCmd::IsFull),
        IntCom::Ext(c) => IntCom::Ext(*c),
        IntCom::Seq(a, b) => IntCom::seq(swap_full_responses(a), swap_full_responses(b)),
        IntCom::If(p, a, b) => IntCom::if_(*p, swap_full_responses(a), swap_full_responses(b)),
    }
}

fn c2_mutants_detected() -> Outcome {
    let def = hbw::protocol();
    let mutant = check_safety(&def, &swap_full_responses(&hbw::spec()));
    ensure(!mutant.is_safe(), || "swapped isfull/notfull mutant passed".into())?;
    let bare = check_safety(&def, &HbwTerm::ext(HbwCmd::Store(ItemColor::Red)));
    ensure(bare.violations.len() == 137_781, || format!("bare store: {}", bare.summary()))?;
    ensure(bare.violations.iter().all(|v| v.state.bays().is_some_and(|b| b.is_full())), || {
        "bare store flagged a non-full state".into()
    })?;
    Ok(format!(
        "swapped mutant: {} violations; bare store: {} violations",
        mutant.violations.len(),
        bare.violations.len()
    ))
}

fn c3_trace_fidelity() -> Outcome {
    let report = check_trace_file(manifest("examples/valid_appendix.trace"), "hbw").map_err(|e| e.to_string())?;
    ensure(report.verdict == Verdict::Conformant, || format!("valid trace: {:?}", report.verdict))?;
    let after_cycles: Vec<String> = report
        .snapshots
        .iter()
        .filter(|s| matches!(s.event, TraceEvent::CommandEvent(HbwCmd::Store(_) | HbwCmd::Retrieve(_))))
        .map(|s| s.state.to_string())
        .collect();
    let expected = [
        "white blue red white red red empty empty empty | store red",
        "white empty red white red red empty empty empty | retrieve blue",
        "empty empty red white red red empty empty empty | retrieve white",
        "red empty red white red red empty empty empty | store red",
    ];
    ensure(after_cycles == expected, || format!("snapshots {after_cycles:?}"))?;

    let invalid = [
        ("invalid_1_store_wrong_color.trace", "cmd store blue"),
        ("invalid_2_store_with_full.trace", "cmd notfull"),
        ("invalid_3_command_mismatch.trace", "cmd hascolor"),
        ("invalid_4_response_mismatch.trace", "cmd notfull"),
        ("invalid_5_retrieve_with_no_color.trace", "cmd hascolor"),
    ];
    for (file, offending) in invalid {
        let r = check_trace_file(manifest(&format!("examples/{file}")), "hbw").map_err(|e| e.to_string())?;
        ensure(matches!(r.verdict, Verdict::FailSafe(_)), || format!("{file} accepted"))?;
        let text = fs::read_to_string(manifest(&format!("examples/{file}"))).unwrap();
        let line = r.offending_line.unwrap_or(0);
        let src = text.lines().nth(line.saturating_sub(1)).unwrap_or("").trim();
        ensure(src == offending, || format!("{file}: rejected `{src}`, expected `{offending}`"))?;
        // Every earlier command was accepted.
        ensure(r.snapshots.len() + 1 == line, || format!("{file}: not the first offense"))?;
    }
    Ok("valid trace matches 4 snapshots; 5 invalid patterns rejected at their first offending command".into())
}

/// Independent oracle: plain recursive big-step evaluation that logs every
/// external command and the state it produced.
fn traced(def: &HbwProtocol, t: &HbwTerm, s: HbwState, log: &mut Vec<(HbwCmd, HbwState)>) -> HbwState {
    match t {
        IntCom::Skip => s,
        IntCom::Ext(c) => {
            let next = (def.step)(c, &s);
            log.push((*c, next));
            next
        }
        IntCom::Seq(a, b) => {
            let mid = traced(def, a, s, log);
            if mid == HbwState::Wrong {
                HbwState::Wrong
            } else {
                traced(def, b, mid, log)
            }
        }
        IntCom::If(p, a, b) => {
            if (def.holds)(p, &s) {
                traced(def, a, s, log)
            } else {
                traced(def, b, s, log)
            }
        }
    }
}

fn oracle_accepts(log: &[(HbwCmd, HbwState)], tr: &[HbwCmd]) -> bool {
    log.len() >= tr.len() && log.iter().zip(tr).all(|((c, s), t)| c == t && *s != HbwState::Wrong)
}

fn c4_decider_vs_oracle() -> Outcome {
    let start = Instant::now();
    let def = hbw::protocol();
    let spec = hbw::spec();
    let unfolded = IntCom::seq(spec.clone(), IntCom::seq(spec.clone(), spec.clone()));
    let mut seqs: Vec<Vec<HbwCmd>> = vec![vec![]];
    for a in HbwCmd::ALL {
        seqs.push(vec![a]);
        for b in HbwCmd::ALL {
            seqs.push(vec![a, b]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec1de);
    let states: Vec<HbwState> = (0..10_000).map(|_| state_at(rng.gen_range(0..HBW_STATE_COUNT))).collect();
    let (def, spec, seqs) = (&def, &spec, &seqs);
    let discrepancies: Vec<(HbwState, Vec<HbwCmd>)> = states
        .par_iter()
        .flat_map_iter(|s| {
            let mut log = Vec::new();
            traced(def, &unfolded, *s, &mut log);
            seqs.iter()
                .filter(|tr| is_trace(def, spec, tr, s) != oracle_accepts(&log, tr))
                .map(|tr| (*s, tr.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    let elapsed = start.elapsed();
    ensure(discrepancies.is_empty(), || {
        let (s, tr) = &discrepancies[0];
        format!("{} discrepancies, first at {s} with {tr:?}", discrepancies.len())
    })?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:.2?}"))?;
    Ok(format!(
        "{} states x {} sequences, 0 discrepancies in {elapsed:.2?}",
        states.len(),
        seqs.len()
    ))
}

fn c5_schema_golden() -> Outcome {
    let golden = fs::read_to_string(manifest("tests/golden/hbw.capnp")).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_protoattest"))
        .args(["gen-schema", "--hbw"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("exit {:?}", out.status.code()))?;
    ensure(out.stdout == golden.as_bytes(), || {
        format!("output differs:\n{}", String::from_utf8_lossy(&out.stdout))
    })?;
    Ok(format!("{} bytes identical", golden.len()))
}

fn c6_end_to_end_security() -> Outcome {
    let mut details = Vec::new();
    for attack in AttackPattern::ALL {
        let cfg = |attested| SimConfig {
            requests: 200,
            seed: 7,
            attested,
            compromised: Some(attack),
            ..SimConfig::default()
        };
        let direct = run_simulation(&cfg(false)).map_err(|e| e.to_string())?;
        ensure(direct.damaged() || direct.mirror_diverged(), || format!("{attack}: unattested run unharmed"))?;
        let guarded = run_simulation(&cfg(true)).map_err(|e| e.to_string())?;
        ensure(!guarded.damaged(), || format!("{attack}: attested run damaged"))?;
        let first = guarded
            .failsafes
            .first()
            .ok_or_else(|| format!("{attack}: no fail-safe"))?;
        ensure(Some(first.request) == guarded.first_injection, || {
            format!("{attack}: fail-safe at {} but injection at {:?}", first.request, guarded.first_injection)
        })?;
        details.push(format!("{}@{}", attack.id(), first.request));
    }
    let honest = run_simulation(&SimConfig {
        requests: 1000,
        seed: 11,
        attested: true,
        ..SimConfig::default()
    })
    .map_err(|e| e.to_string())?;
    ensure(honest.failsafes.is_empty(), || format!("honest run: {} fail-safes", honest.failsafes.len()))?;
    ensure(honest.client.ok == 1000, || format!("honest run: {} ok", honest.client.ok))?;
    ensure(!honest.damaged() && !honest.mirror_diverged(), || "honest run incoherent".into())?;
    Ok(format!("fail-safe at first injection [{}]; 1000 honest requests, 0 fail-safes", details.join(" ")))
}

fn cdf_is_valid(samples: &[f64]) -> Result<(), String> {
    let mut buf = Vec::new();
    write_cdf(samples, &mut buf).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    ensure(lines.next() == Some("latency_ms,cumulative_fraction"), || "bad header".into())?;
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    ensure(rows.len() == samples.len(), || "row count".into())?;
    ensure(rows.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1), || "not monotone".into())?;
    ensure(rows.last().map(|r| r.1) == Some(1.0), || "last fraction is not 1.0".into())
}

fn c7_benchmark() -> Outcome {
    let cmp = Comparison::run(Duration::from_secs(5), 0).map_err(|e| e.to_string())?;
    ensure(cmp.attested.mean_latency_ms >= cmp.unattested.mean_latency_ms, || {
        format!(
            "attested {:.4} ms < unattested {:.4} ms",
            cmp.attested.mean_latency_ms, cmp.unattested.mean_latency_ms
        )
    })?;
    cdf_is_valid(&cmp.unattested.samples)?;
    cdf_is_valid(&cmp.attested.samples)?;
    Ok(format!(
        "{:.4} vs {:.4} ms mean, {} vs {} msgs (+{:.1}% latency)",
        cmp.unattested.mean_latency_ms,
        cmp.attested.mean_latency_ms,
        cmp.unattested.messages,
        cmp.attested.messages,
        cmp.latency_overhead_pct()
    ))
}

fn count(bays: &hbw::Bays, c: Color) -> usize {
    bays.0.iter().filter(|b| **b == c).count()
}

fn c8_properties() -> Outcome {
    let def = hbw::protocol();
    let spec = hbw::spec();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    // Precondition/semantics agreement, conservation and minimal index.
    for _ in 0..100_000 {
        let s = state_at(rng.gen_range(0..HBW_STATE_COUNT));
        let c = HbwCmd::ALL[rng.gen_range(0..HbwCmd::ALL.len())];
        let next = hbw::step(&c, &s);
        ensure((next == HbwState::Wrong) == !hbw::phi(&c, &s), || format!("phi/step disagree on {c} at {s}"))?;
        ensure(hbw::step(&c, &HbwState::Wrong) == HbwState::Wrong, || format!("{c} escapes wrong"))?;
        let (Some(before), Some(after)) = (s.bays(), next.bays()) else { continue };
        ensure(s.input() == next.input(), || format!("{c} changed the input"))?;
        let changed: Vec<usize> = (1..=9).filter(|&n| before.get(n) != after.get(n)).collect();
        match c {
            HbwCmd::Store(ic) => {
                let n = find_color(Color::Empty, 1, before).unwrap();
                ensure(changed == [n] && after.get(n) == ic.into(), || format!("store {ic} at {s}"))?;
                ensure((1..n).all(|k| before.get(k) != Color::Empty), || "store skipped an empty bay".into())?;
                ensure(after.occupied() == before.occupied() + 1, || "store conservation".into())?;
                ensure(count(after, ic.into()) == count(before, ic.into()) + 1, || "store color count".into())?;
            }
            HbwCmd::Retrieve(ic) => {
                let n = find_color(ic.into(), 1, before).unwrap();
                ensure(changed == [n] && after.get(n) == Color::Empty, || format!("retrieve {ic} at {s}"))?;
                ensure((1..n).all(|k| before.get(k) != ic.into()), || "retrieve skipped a match".into())?;
                ensure(after.occupied() + 1 == before.occupied(), || "retrieve conservation".into())?;
            }
            _ => ensure(changed.is_empty(), || format!("{c} changed the bays"))?,
        }
    }

    // Absorption for whole terms.
    ensure(eval_ic(&def, &spec, &HbwState::Wrong) == HbwState::Wrong, || "spec escapes wrong".into())?;
    for c in HbwCmd::ALL {
        ensure(eval_ec(&def, &c, &HbwState::Wrong) == HbwState::Wrong, || format!("{c} escapes wrong"))?;
    }

    // Monotone halting of the session monitor.
    for _ in 0..10_000 {
        let bays = *state_at(rng.gen_range(0..HBW_STATE_COUNT)).bays().unwrap();
        let mut m = SessionMonitor::new(HbwState::sigma(bays, None));
        let mut halted = false;
        for _ in 0..20 {
            let event = if rng.gen_bool(0.3) {
                TraceEvent::InputEvent(Input::ALL[rng.gen_range(0..Input::ALL.len())])
            } else {
                TraceEvent::CommandEvent(HbwCmd::ALL[rng.gen_range(0..HbwCmd::ALL.len())])
            };
            let ok = m.observe(event).is_conformant();
            ensure(!(halted && ok), || "monitor resumed after halting".into())?;
            halted |= !ok;
            ensure(halted == m.halted(), || "halted flag out of sync".into())?;
        }
    }

    // Stepping command by command ends where one big step ends, everywhere.
    let bad = (0..HBW_STATE_COUNT).into_par_iter().find_any(|&i| {
        let s0 = state_at(i);
        let mut log = Vec::new();
        let expected = traced(&def, &spec, s0, &mut log);
        let mut emitted = Vec::new();
        let mut term = spec.clone();
        let mut s = s0;
        loop {
            let step = eval_until_next_com(&def, &term, &s);
            let Some(c) = step.next else { break };
            emitted.push(c);
            s = step.state_after;
            match step.continuation {
                Some(rest) => term = rest,
                None => break,
            }
        }
        let cmds: Vec<HbwCmd> = log.iter().map(|(c, _)| *c).collect();
        s != expected || s != eval_ic(&def, &spec, &s0) || emitted != cmds
    });
    ensure(bad.is_none(), || format!("decomposition differs at {}", state_at(bad.unwrap())))?;

    Ok("1e5 phi/step pairs, absorption, conservation, minimal index, monotone halting, decomposition over all states".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("C1 exhaustive safety", c1_exhaustive_safety),
        ("C2 mutants detected", c2_mutants_detected),
        ("C3 trace fidelity", c3_trace_fidelity),
        ("C4 decider vs oracle", c4_decider_vs_oracle),
        ("C5 schema golden", c5_schema_golden),
        ("C6 end-to-end security", c6_end_to_end_security),
        ("C7 benchmark", c7_benchmark),
        ("C8 properties", c8_properties),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
