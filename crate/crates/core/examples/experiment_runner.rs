//! Runs a configured experiment in-process, as the command-line tool does,
//! and reads back the manifest it writes.

use anderson_lab::experiment::{read_manifest, run, Command, ConfigSource, RunOptions};

const CONFIG: &str = r#"{
  "distribution": { "kind": "uniform", "lo": -1.0, "hi": 1.0 },
  "seed": 7,
  "params": { "points": 9, "n": 500, "m": 50 }
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("anderson-lab-example");
    let outcome = run(&RunOptions::new(Command::Gamma, ConfigSource::Inline(CONFIG.into()), &out))?;
    for check in outcome.checks() {
        println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    print!("{}", std::fs::read_to_string(out.join("gamma.csv"))?);

    let manifest = read_manifest(&out)?;
    for (name, digest) in &manifest.outputs {
        println!("{name}: sha256 {digest}");
    }
    Ok(())
}
