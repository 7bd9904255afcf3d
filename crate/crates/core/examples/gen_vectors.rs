//! Builds the fixture word vectors from `fixtures/vectors/topics.txt`.
//!
//! Every topic gets a pseudo-random direction; a word is the weighted sum of
//! its topics' directions plus word-specific noise, rescaled. All randomness
//! is seeded from SHA-256 of the topic or word name, so the output depends
//! only on the topics file.
//!
//! cargo run -p qrewrite --example gen_vectors [-- --check]

use std::path::PathBuf;

#[path = "../tests/support/vectors.rs"]
mod vectors;

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/vectors");
    let topics = std::fs::read_to_string(root.join("topics.txt")).expect("topics.txt");
    let rendered = vectors::render(&topics);
    let out = root.join("words.txt");
    if std::env::args().any(|a| a == "--check") {
        let current = std::fs::read_to_string(&out).unwrap_or_default();
        if current != rendered {
            eprintln!("{} is stale", out.display());
            std::process::exit(1);
        }
        println!("{} is up to date", out.display());
    } else {
        std::fs::write(&out, rendered).expect("write words.txt");
        println!("wrote {}", out.display());
    }
}
