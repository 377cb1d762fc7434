//! Run every attack pattern with and without the attestation proxy.

use protoattest::sim::{run_simulation, AttackPattern, SimConfig};

fn main() -> anyhow::Result<()> {
    for attack in AttackPattern::ALL {
        for attested in [false, true] {
            let cfg = SimConfig {
                requests: 200,
                seed: 7,
                attested,
                compromised: Some(attack),
                ..SimConfig::default()
            };
            let out = run_simulation(&cfg)?;
            let failsafe = out
                .failsafes
                .first()
                .map(|f| format!("fail-safe at request {} on `{}`", f.request, f.event))
                .unwrap_or_default();
            println!(
                "{attack:<26} {:<10} injected at {:<4} damaged={:<5} diverged={:<5} {failsafe}",
                if attested { "attested" } else { "direct" },
                out.first_injection.map(|n| n.to_string()).unwrap_or("-".into()),
                out.damaged(),
                out.mirror_diverged(),
            );
        }
    }
    Ok(())
}
