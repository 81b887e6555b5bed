//! Regenerates the bundled synthetic fixtures:
//! `cargo run --example make_fixtures -- crates/core/fixtures/synthetic`

use std::path::PathBuf;

use chromalign::fixtures::{synthetic_corpus, write_synthetic, SYNTHETIC_SEED};

fn main() -> chromalign::Result<()> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic"));
    for path in write_synthetic(&synthetic_corpus(SYNTHETIC_SEED), &dir)? {
        println!("{}", path.display());
    }
    Ok(())
}
