//! Print the golden prompt cases, or rewrite every fixture with `--write`.
//!
//!     cargo run --example golden_fixtures -- --write

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use textgrid::golden::{load_cases, reference_exchange, reference_worker};
use textgrid::policy::PolicyMode;
use textgrid::service::write_transcript;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let write = std::env::args().any(|a| a == "--write");
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let prompts = data.join("prompts");
    for case in load_cases(&prompts.join("cases.json"))? {
        let text = case.render()?;
        if write {
            std::fs::write(case.fixture_path(&prompts), &text)?;
        } else {
            println!("== {}\n{text}\n", case.name);
        }
    }
    for (name, mode) in [("tokens", PolicyMode::TokenScoring), ("heads", PolicyMode::ActionHeads)] {
        let entries = reference_exchange(&reference_worker(mode));
        if write {
            let path = data.join("transcripts").join(format!("{name}.jsonl"));
            write_transcript(&mut BufWriter::new(File::create(path)?), &entries)?;
        } else {
            println!("{name}: {} exchanges", entries.len());
        }
    }
    Ok(())
}
