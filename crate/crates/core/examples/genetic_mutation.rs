//! Run one GeneticMutation call on a curriculum task and list the candidates
//! it scored.
//!
//! `cargo run --example genetic_mutation [TASK_INDEX] [SEED]`

use std::path::Path;

use promptrl::corpus::extract_keywords;
use promptrl::run::{build_pipeline, load_config};
use promptrl::seeds::substream;
use promptrl::transforms::{ga_mutate, TransformContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let index: usize = args.next().map_or(Ok(0), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(7), |s| s.parse())?;
    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/hermetic.toml"))?.config;
    let pipeline = build_pipeline(&cfg)?;
    let task = &promptrl::synthetic::tasks()[index];
    let mut rng = substream(seed, "example-ga", 0);
    let mut ctx = TransformContext {
        task,
        keywords: extract_keywords(task),
        rng: &mut rng,
        generator: pipeline.generator.as_ref(),
        rewriter: pipeline.rewriter.as_ref(),
        executor: pipeline.executor.as_ref(),
        ga: &pipeline.ga,
        rewrite: &pipeline.rewrite,
        decoding: cfg.env.decoding,
        timeout_ms: cfg.env.timeout_ms,
        workers: 1,
    };
    let out = ga_mutate(&task.prompt, &mut ctx)?;
    for (prompt, fitness) in &out.evaluated {
        println!("{fitness:>3}  {prompt}");
    }
    println!(
        "\n{} jobs; fitness {} -> {}\nchosen: {}",
        out.jobs_used, out.initial_fitness, out.fitness, out.prompt
    );
    Ok(())
}
