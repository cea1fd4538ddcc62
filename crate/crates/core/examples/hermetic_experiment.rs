//! Train on the synthetic curriculum with shaped and binary rewards, then
//! compare the shaped-reward policy against Random-Hybrid on the test split.
//!
//! `cargo run --release --example hermetic_experiment [SEED] [LR] [TRAIN_STEP_CAP]`

use std::path::Path;
use std::time::Instant;

use promptrl::env::RewardMode;
use promptrl::policy::PolicyKind;
use promptrl::run::{evaluate, load_config, train, EpisodeLog};
use promptrl::synthetic::{run_config_toml, ExperimentSettings};

/// First episode index at which the trailing 50-episode success rate exceeds 0.8.
fn convergence_episode(log: &[EpisodeLog]) -> Option<usize> {
    (49..log.len()).find(|&i| log[i - 49..=i].iter().filter(|e| e.solved).count() as f64 / 50.0 > 0.8)
}

fn quartile_returns(log: &[EpisodeLog]) -> (f64, f64) {
    let q = log.len() / 4;
    let mean = |s: &[EpisodeLog]| s.iter().map(|e| e.episode_return).sum::<f64>() / s.len() as f64;
    (mean(&log[..q]), mean(&log[log.len() - q..]))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut settings = ExperimentSettings::default();
    if let Some(seed) = args.next() {
        settings.master_seed = seed.parse()?;
    }
    if let Some(lr) = args.next() {
        settings.learning_rate = lr.parse()?;
    }
    if let Some(cap) = args.next() {
        settings.max_steps = cap.parse()?;
    }
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let work = tempfile::tempdir()?;

    let mut results = Vec::new();
    for mode in [RewardMode::Shaped, RewardMode::Binary] {
        let start = Instant::now();
        let s = ExperimentSettings {
            reward_mode: mode,
            ..settings.clone()
        };
        let cfg_path = work.path().join(format!("{mode:?}.toml"));
        std::fs::write(&cfg_path, run_config_toml(&fixtures, &work.path().join(format!("{mode:?}")), &s))?;
        let loaded = load_config(&cfg_path)?;
        let out = train(&loaded, None)?;
        let (q1, q4) = quartile_returns(&out.log);
        let conv = convergence_episode(&out.log);
        println!(
            "{mode:?}: {} episodes in {:.1}s, mean return first/last quartile {q1:.3} / {q4:.3}, converged at {conv:?}",
            out.log.len(),
            start.elapsed().as_secs_f64()
        );
        let blocks: Vec<String> = out
            .log
            .chunks(50)
            .map(|c| format!("{:.2}", c.iter().filter(|e| e.solved).count() as f64 / c.len() as f64))
            .collect();
        println!("  solved rate per 50 episodes: {}", blocks.join(" "));
        results.push((mode, loaded, conv));
    }

    let (_, shaped, _) = &results[0];
    let ppo = evaluate(shaped, PolicyKind::Ppo, None)?;
    let random = evaluate(shaped, PolicyKind::Random, None)?;
    for r in [&ppo.report, &random.report] {
        println!("{}", r.summary());
    }
    let ck = promptrl::run::Checkpoint::load(&shaped.config.train_dir().join("checkpoint-final.json"))?;
    let corpus = promptrl::run::load_split_corpus(&shaped.config)?;
    let pipeline = promptrl::run::build_pipeline(&shaped.config)?;
    let mut p_rewrite = Vec::new();
    for t in corpus.split(promptrl::corpus::Split::Test) {
        let s = pipeline.embedder.embed(&t.prompt)?;
        let (probs, _) = promptrl::ppo::policy_forward(&ck.params, &s.values)?;
        p_rewrite.push(probs[2]);
    }
    let min = p_rewrite.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = p_rewrite.iter().sum::<f64>() / p_rewrite.len() as f64;
    println!("P(rewrite | initial test state): mean {mean:.3}, min {min:.3}");
    Ok(())
}
