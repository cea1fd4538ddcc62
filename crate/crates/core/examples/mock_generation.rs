//! Ask the scripted mock backends for code and for a rewrite, and show what
//! the extractor keeps.
//!
//! `cargo run --example mock_generation`

use std::path::Path;

use promptrl::gateway::{extract_code, DecodingParams, GenRequest, Role, ScriptedMock, TextBackend};
use promptrl::synthetic;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic");
    let generator = ScriptedMock::load(&dir.join("generator.jsonl"))?;
    let rewriter = ScriptedMock::load(&dir.join("rewriter.jsonl"))?;
    let task = &synthetic::tasks()[0];

    for seed in [1, 2] {
        let req = GenRequest::new(Role::CodeGenerator, task.prompt.clone(), DecodingParams::default(), seed);
        let resp = generator.generate(&req)?;
        println!("seed {seed} raw:\n{}\n", resp.raw_text);
        println!("extracted:\n{}\n", extract_code(&resp.raw_text, task.entry_point.as_deref()));
    }
    let meta = promptrl::transforms::RewriteConfig::default().render(&task.prompt);
    let req = GenRequest::new(Role::Rewriter, meta, DecodingParams::default(), 3);
    println!("rewrite of {:?}:\n{}", task.prompt, rewriter.generate(&req)?.raw_text);
    Ok(())
}
