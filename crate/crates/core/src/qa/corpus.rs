//! Seeded-fault corpus: pairs of clean and faulty deliverables with a manifest
//! of the faults injected into the faulty twin.
//!
//! On disk each fixture is a directory `NN/` holding `clean.json`,
//! `faulty.json` and `manifest.json`.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Location, Span, CIT_FABRICATED, CIT_QUOTE_MISMATCH, SUM_MISMATCH};
use crate::deliverable::{Citation, Deliverable, NamedTable, SourceText, TabularData};
use crate::task::Actor;

pub const CORPUS_SEED: u64 = 20_251_015;
pub const CORPUS_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFault {
    pub code: String,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultManifest {
    pub fixture: String,
    pub faults: Vec<ExpectedFault>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFixture {
    pub clean: Deliverable,
    pub faulty: Deliverable,
    pub manifest: FaultManifest,
}

const TOPICS: &[(&str, &str)] = &[
    ("Acme Corp", "headcount"),
    ("Borealis Ltd", "revenue"),
    ("Cobalt Labs", "churn"),
    ("Dune Retail", "stores"),
    ("Evergreen Co", "customers"),
];

const WORDS: &[&str] = &["north", "south", "east", "west", "central", "online", "partner", "direct"];

fn source_text(company: &str, metric: &str, value: u32, year: u32) -> String {
    format!(
        "In its {year} annual report, {company} disclosed that {metric}  reached {value} by year end.\n\
         Management attributed the change to regional expansion.  Figures are unaudited."
    )
}

fn build(index: usize, rng: &mut ChaCha8Rng) -> CorpusFixture {
    let name = format!("{:02}", index + 1);
    let real = index % 3 == 2;
    let rows = rng.random_range(3..=8);
    let mut table = TabularData::new(["segment", "units", "amount"]);
    let mut units_total: i64 = 0;
    let mut cents_total: i64 = 0;
    for r in 0..rows {
        let units = rng.random_range(1..500) as i64;
        let cents = rng.random_range(100..100_000) as i64;
        units_total += units;
        cents_total += cents;
        let amount = if real {
            format!("{}.{:02}", cents / 100, cents % 100)
        } else {
            (cents / 100).to_string()
        };
        if !real {
            cents_total -= cents % 100;
        }
        table.push_row([format!("{} {r}", WORDS[(index + r) % WORDS.len()]), units.to_string(), amount]);
    }
    let amount_total = if real {
        format!("{}.{:02}", cents_total / 100, cents_total % 100)
    } else {
        (cents_total / 100).to_string()
    };
    table.push_row(["TOTAL".to_string(), units_total.to_string(), amount_total]);
    let total_row = table.rows.len() - 1;

    let mut clean = Deliverable::empty(Actor::AiWorker, 0);
    clean.summary = format!("fixture {name}");
    let file = format!("table_{name}.csv");
    clean.tables.push(NamedTable { name: file.clone(), table });
    let n_sources = rng.random_range(2..=3);
    for s in 0..n_sources {
        let (company, metric) = TOPICS[(index + s) % TOPICS.len()];
        let value = rng.random_range(10..10_000);
        let year = 2019 + rng.random_range(0..6);
        let id = format!("src-{name}-{s}");
        clean.sources.push(SourceText { id: id.clone(), text: source_text(company, metric, value, year) });
        // Quote with different case and spacing than the source.
        clean.citations.push(Citation {
            claim_span: format!("{}   REACHED {value}", metric.to_uppercase()),
            source_ref: id,
        });
    }
    clean.answer_samples = vec![units_total.to_string(); 3];

    let mut faulty = clean.clone();
    let mut faults = Vec::new();
    let kind = index % 4;
    if kind == 0 || kind == 3 {
        let col = 1 + rng.random_range(0..2usize);
        let cell = &mut faulty.tables[0].table.rows[total_row][col];
        let bumped = if col == 1 || !real {
            let v: i64 = cell.parse().expect("integer total");
            (v + rng.random_range(1..50) as i64).to_string()
        } else {
            let v: f64 = cell.parse().expect("real total");
            format!("{:.2}", v + 0.01 * rng.random_range(100..900) as f64)
        };
        *cell = bumped;
        faults.push(ExpectedFault {
            code: SUM_MISMATCH.into(),
            location: Location::new(&file, Span::Cell { row: total_row, column: col }),
        });
    }
    if kind == 1 || kind == 3 {
        let c = rng.random_range(0..faulty.citations.len());
        let reference = format!("https://example.invalid/{name}/{c}");
        faulty.citations[c].source_ref = reference.clone();
        faults.push(ExpectedFault {
            code: CIT_FABRICATED.into(),
            location: Location::new(reference, Span::Citation { index: c }),
        });
    }
    if kind == 2 {
        let c = rng.random_range(0..faulty.citations.len());
        let citation = &mut faulty.citations[c];
        citation.claim_span = citation.claim_span.replace("REACHED", "REACHED ALMOST");
        faults.push(ExpectedFault {
            code: CIT_QUOTE_MISMATCH.into(),
            location: Location::new(&citation.source_ref, Span::Citation { index: c }),
        });
    }
    CorpusFixture {
        clean,
        faulty,
        manifest: FaultManifest { fixture: name, faults },
    }
}

/// The corpus is a pure function of the seed.
pub fn generate(seed: u64) -> Vec<CorpusFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..CORPUS_SIZE).map(|i| build(i, &mut rng)).collect()
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("fixture serializes");
    s.push('\n');
    s
}

pub fn write(dir: &Path, fixtures: &[CorpusFixture]) -> io::Result<()> {
    for f in fixtures {
        let d = dir.join(&f.manifest.fixture);
        fs::create_dir_all(&d)?;
        fs::write(d.join("clean.json"), pretty(&f.clean))?;
        fs::write(d.join("faulty.json"), pretty(&f.faulty))?;
        fs::write(d.join("manifest.json"), pretty(&f.manifest))?;
    }
    Ok(())
}

pub fn load(dir: &Path) -> io::Result<Vec<CorpusFixture>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let read = |p: &Path| -> io::Result<String> { fs::read_to_string(p) };
    let parse = |e: serde_json::Error| io::Error::new(io::ErrorKind::InvalidData, e);
    names
        .into_iter()
        .map(|n| {
            let d = dir.join(&n);
            Ok(CorpusFixture {
                clean: serde_json::from_str(&read(&d.join("clean.json"))?).map_err(parse)?,
                faulty: serde_json::from_str(&read(&d.join("faulty.json"))?).map_err(parse)?,
                manifest: serde_json::from_str(&read(&d.join("manifest.json"))?).map_err(parse)?,
            })
        })
        .collect()
}
