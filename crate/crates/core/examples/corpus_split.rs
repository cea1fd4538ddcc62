//! Load a JSONL corpus and split it into train/test/validation.
//!
//! `cargo run --example corpus_split [CORPUS] [TRAIN_N] [TEST_N] [SEED]`

use std::path::PathBuf;

use promptrl::corpus::{extract_keywords, load_corpus, split_corpus, CorpusFormat, Split, SplitSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/split/corpus_974.jsonl"));
    let train_n = args.next().map_or(Ok(374), |s| s.parse())?;
    let test_n = args.next().map_or(Ok(500), |s| s.parse())?;
    let seed = args.next().map_or(Ok(974), |s| s.parse())?;

    let corpus = load_corpus(&path, CorpusFormat::JsonLines)?;
    let split = split_corpus(&corpus, SplitSpec::fixed(train_n, test_n, seed))?;
    println!("{:?}", split.counts());
    for which in [Split::Train, Split::Test, Split::Validation] {
        if let Some(t) = split.split(which).next() {
            println!("first {which:?} task {}: {:?}, keywords {:?}", t.id, t.prompt, extract_keywords(t));
        }
    }
    Ok(())
}
