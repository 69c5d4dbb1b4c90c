//! Rebuild the integer count fixture from the printed percentage table.
//!
//! cargo run -p gatework-stats --example derive_counts -- fixtures/published/quality_printed.json > fixtures/published/quality_counts.json

use gatework_stats::{derive_counts, PrintedTable};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "fixtures/published/quality_printed.json".into());
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let table: PrintedTable = serde_json::from_str(&text).expect("printed table parses");
    match derive_counts(&table) {
        Ok(counts) => println!("{}", serde_json::to_string_pretty(&counts).expect("serializes")),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
}
