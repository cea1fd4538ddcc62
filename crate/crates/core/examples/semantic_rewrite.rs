//! Apply SemanticRewrite repeatedly to one curriculum task, showing each
//! rewrite, whether the keyword filter accepted it, and the pass ratio the
//! rewritten prompt earns.
//!
//! `cargo run --example semantic_rewrite [TASK_INDEX]`

use std::path::Path;

use promptrl::corpus::extract_keywords;
use promptrl::env::generate_and_execute;
use promptrl::run::{build_pipeline, load_config};
use promptrl::seeds::substream;
use promptrl::transforms::{semantic_rewrite, TransformContext};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index: usize = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/hermetic.toml"))?.config;
    let pipeline = build_pipeline(&cfg)?;
    let task = &promptrl::synthetic::tasks()[index];
    let keywords = extract_keywords(task);
    println!("keywords that must survive: {keywords:?}");
    let mut rng = substream(1, "example-rewrite", 0);
    let mut prompt = task.prompt.clone();
    for step in 1..=cfg.env.max_steps {
        let mut ctx = TransformContext {
            task,
            keywords: keywords.clone(),
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
        let out = semantic_rewrite(&prompt, &mut ctx)?;
        prompt = out.prompt;
        let (_, verdict) = generate_and_execute(&pipeline, task, &prompt, step as u64, &cfg.env)?;
        println!("{step:>2} accepted={} rho={:.3}  {prompt}", out.accepted, verdict.pass_ratio);
        if verdict.all_passed() {
            break;
        }
    }
    Ok(())
}
