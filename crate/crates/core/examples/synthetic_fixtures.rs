//! Regenerate the hermetic curriculum fixtures.
//!
//! `cargo run --example synthetic_fixtures [DIR]` (default: fixtures/synthetic)

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic"));
    promptrl::synthetic::write_fixtures(&dir)?;
    for (name, body) in promptrl::synthetic::fixture_files() {
        println!("{:>8} bytes  {}", body.len(), dir.join(name).display());
    }
    Ok(())
}
