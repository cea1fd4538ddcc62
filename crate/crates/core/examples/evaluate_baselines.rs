//! Train a short PPO run, then evaluate it and every baseline on the test
//! split under the same protocol.
//!
//! `cargo run --release --example evaluate_baselines [EPISODES]`

use std::path::Path;

use promptrl::policy::PolicyKind;
use promptrl::run::{evaluate, load_config, train};
use promptrl::synthetic::{run_config_toml, ExperimentSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: u64 = std::env::args().nth(1).map_or(Ok(400), |s| s.parse())?;
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let work = tempfile::tempdir()?;
    let settings = ExperimentSettings {
        episodes,
        ..ExperimentSettings::default()
    };
    let cfg_path = work.path().join("run.toml");
    std::fs::write(&cfg_path, run_config_toml(&fixtures, &work.path().join("run"), &settings))?;
    let loaded = load_config(&cfg_path)?;
    train(&loaded, None)?;
    for kind in [PolicyKind::Ppo, PolicyKind::Direct, PolicyKind::Ga, PolicyKind::Rewrite, PolicyKind::Random] {
        let out = evaluate(&loaded, kind, None)?;
        println!("{}", out.report.summary());
    }
    Ok(())
}
