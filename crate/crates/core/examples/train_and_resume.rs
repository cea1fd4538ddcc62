//! Train on the curriculum with interval checkpoints, resume from the
//! midpoint, and check the resumed run lands on the same final checkpoint.
//!
//! `cargo run --release --example train_and_resume [EPISODES]`

use std::path::Path;

use promptrl::run::{load_config, train, FINAL_CHECKPOINT};
use promptrl::synthetic::{run_config_toml, ExperimentSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: u64 = std::env::args().nth(1).map_or(Ok(80), |s| s.parse())?;
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let work = tempfile::tempdir()?;
    let settings = ExperimentSettings {
        episodes,
        ..ExperimentSettings::default()
    };
    let mut toml: toml::Table = run_config_toml(&fixtures, &work.path().join("run"), &settings).parse()?;
    let every = (episodes / 2).max(1);
    toml.insert("checkpoint_every".into(), (every as i64).into());
    let cfg_path = work.path().join("run.toml");
    std::fs::write(&cfg_path, toml::to_string(&toml)?)?;
    let loaded = load_config(&cfg_path)?;

    let out = train(&loaded, None)?;
    let solved = out.log.iter().filter(|e| e.solved).count();
    println!("trained {} episodes, {solved} solved", out.log.len());
    for e in out.log.iter().step_by((episodes as usize / 8).max(1)) {
        println!("  episode {:>4} {:<10} return {:+.2} steps {:>2}", e.episode, e.task_id, e.episode_return, e.steps);
    }
    let final_path = loaded.config.train_dir().join(FINAL_CHECKPOINT);
    let straight = std::fs::read(&final_path)?;

    let mid = loaded.config.train_dir().join(format!("checkpoint-{every:06}.json"));
    train(&loaded, Some(&mid))?;
    let resumed = std::fs::read(&final_path)?;
    println!(
        "resumed from {}: final checkpoint {}",
        mid.file_name().unwrap_or_default().to_string_lossy(),
        if straight == resumed { "identical" } else { "DIFFERS" }
    );
    Ok(())
}
