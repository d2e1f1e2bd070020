//! Regenerates the synthetic media corpus under `fixtures/media`.
//!
//!     cargo run --example generate_fixtures [-- <out-dir>]

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/media"));
    let written = privhub::corpus::generate(&out)?;
    for set in privhub::corpus::load_all(&out)? {
        let annotated = set.annotations.files.len();
        println!("{:<10} {:>2} files, {annotated} annotated", set.name, set.files.len());
    }
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}
