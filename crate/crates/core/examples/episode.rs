//! Roll out one refinement episode under a baseline policy and print every
//! transition.
//!
//! `cargo run --example episode [POLICY] [TASK_INDEX] [SEED]` where POLICY is
//! one of direct, ga, rewrite, random (default random).

use std::path::Path;

use promptrl::embedding::StateVector;
use promptrl::env::{episode_return, run_episode, EnvError, Environment};
use promptrl::policy::{PolicyKind, RefinementPolicy};
use promptrl::run::{build_pipeline, load_config};
use promptrl::seeds::substream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let kind: PolicyKind = args.next().as_deref().unwrap_or("random").parse()?;
    let index: usize = args.next().map_or(Ok(0), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(1), |s| s.parse())?;
    let policy = RefinementPolicy::baseline(kind).ok_or("PPO needs a checkpoint; see the evaluate_baselines example")?;

    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/hermetic.toml"))?.config;
    let pipeline = build_pipeline(&cfg)?;
    let task = &promptrl::synthetic::tasks()[index];
    let mut env = Environment::new(&pipeline, &cfg.env);
    let mut policy_rng = substream(seed, "example-policy", 0);
    let mut env_rng = substream(seed, "example-env", 0);
    let mut chooser = |s: &StateVector| {
        let c = policy
            .choose_action(s, &mut policy_rng)
            .map_err(|e| EnvError::Config(e.to_string()))?;
        Ok((c.action, c.log_prob, c.value))
    };
    let trace = run_episode(&mut env, task, 0, &mut chooser, &mut env_rng)?;
    for t in &trace.transitions {
        println!(
            "step {} {:?}: reward {:+.3} rho {:.3} done {}\n    {}",
            t.step, t.action, t.reward, t.pass_ratio, t.done, t.prompt_after
        );
    }
    println!("return {:.3}, solved {}", episode_return(&trace)?, trace.solved());
    Ok(())
}
