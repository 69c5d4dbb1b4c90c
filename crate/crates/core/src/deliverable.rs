//! Work products handed between workers, QA and the client.

use serde::{Deserialize, Serialize};

use crate::sha256_hex;
use crate::task::Actor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Spreadsheet,
    Document,
    Link,
    Other,
}

/// A file or reference attached to a brief or produced by a step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttachmentRef {
    pub name: String,
    pub media_kind: MediaKind,
    /// Hex SHA-256 of the attachment bytes.
    pub content_hash: String,
    pub uri: String,
}

impl AttachmentRef {
    pub fn from_bytes(name: &str, media_kind: MediaKind, uri: &str, bytes: &[u8]) -> Self {
        AttachmentRef {
            name: name.to_string(),
            media_kind,
            content_hash: sha256_hex(bytes),
            uri: uri.to_string(),
        }
    }

    /// File extension of `name`, lowercased, if any.
    pub fn extension(&self) -> Option<String> {
        let (stem, ext) = self.name.rsplit_once('.')?;
        (!stem.is_empty()).then(|| ext.to_ascii_lowercase())
    }

    /// Name without its extension.
    pub fn stem(&self) -> &str {
        match self.name.rsplit_once('.') {
            Some((stem, _)) if !stem.is_empty() => stem,
            _ => &self.name,
        }
    }

    /// True when `reference` names this attachment by name, stem, uri or hash.
    pub fn answers_to(&self, reference: &str) -> bool {
        reference == self.name
            || reference == self.stem()
            || reference == self.uri
            || reference == self.content_hash
    }
}

/// A claim in the deliverable bound to the source it quotes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    /// Quoted text the claim relies on; must appear in the cited source.
    pub claim_span: String,
    pub source_ref: String,
}

/// Text of a recorded external source (web page, PDF extract, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceText {
    pub id: String,
    pub text: String,
}

/// Rectangular table of string cells. The first column holds row labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TabularData {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        TabularData {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    /// Parse simple comma-separated text: first line is the header, no quoting.
    pub fn from_csv(text: &str) -> Self {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let split = |l: &str| l.split(',').map(|c| c.trim().to_string()).collect::<Vec<_>>();
        let columns = lines.next().map(split).unwrap_or_default();
        let rows = lines.map(split).collect();
        TabularData { columns, rows }
    }

    pub fn is_total_label(cell: &str) -> bool {
        cell.trim().eq_ignore_ascii_case("total")
    }

    pub fn is_total_row(row: &[String]) -> bool {
        row.first().is_some_and(|c| Self::is_total_label(c))
    }

    /// Rows that are not declared totals.
    pub fn data_row_count(&self) -> usize {
        self.rows.iter().filter(|r| !Self::is_total_row(r)).count()
    }

    pub fn has_total(&self) -> bool {
        self.rows.iter().any(|r| Self::is_total_row(r))
    }
}

/// A table carried by a deliverable, keyed by the file it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedTable {
    pub name: String,
    pub table: TabularData,
}

/// Output of one step, or the assembled output of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deliverable {
    pub files: Vec<AttachmentRef>,
    pub summary: String,
    #[serde(default)]
    pub citations: Vec<Citation>,
    pub produced_by: Actor,
    pub step_index: u32,
    #[serde(default)]
    pub tables: Vec<NamedTable>,
    /// Extracted answers of redundant runs, for self-consistency.
    #[serde(default)]
    pub answer_samples: Vec<String>,
    /// Recorded external sources the citations may point to.
    #[serde(default)]
    pub sources: Vec<SourceText>,
}

impl Deliverable {
    pub fn empty(produced_by: Actor, step_index: u32) -> Self {
        Deliverable {
            files: Vec::new(),
            summary: String::new(),
            citations: Vec::new(),
            produced_by,
            step_index,
            tables: Vec::new(),
            answer_samples: Vec::new(),
            sources: Vec::new(),
        }
    }

    /// Fold step outputs into one task-level deliverable. Later steps win on
    /// file-name collisions; answer samples come from the last step that has any.
    pub fn assemble<'a>(parts: impl IntoIterator<Item = &'a Deliverable>) -> Option<Deliverable> {
        let mut out: Option<Deliverable> = None;
        for part in parts {
            let acc = out.get_or_insert_with(|| Deliverable::empty(part.produced_by, part.step_index));
            acc.produced_by = part.produced_by;
            acc.step_index = part.step_index;
            for f in &part.files {
                acc.files.retain(|g| g.name != f.name);
                acc.files.push(f.clone());
            }
            for t in &part.tables {
                acc.tables.retain(|u| u.name != t.name);
                acc.tables.push(t.clone());
            }
            if !part.summary.is_empty() {
                if !acc.summary.is_empty() {
                    acc.summary.push('\n');
                }
                acc.summary.push_str(&part.summary);
            }
            acc.citations.extend(part.citations.iter().cloned());
            for s in &part.sources {
                if !acc.sources.iter().any(|x| x.id == s.id) {
                    acc.sources.push(s.clone());
                }
            }
            if !part.answer_samples.is_empty() {
                acc.answer_samples = part.answer_samples.clone();
            }
        }
        out
    }

    pub fn table(&self, name: &str) -> Option<&TabularData> {
        self.tables
            .iter()
            .find(|t| t.name == name || t.name.rsplit_once('.').is_some_and(|(s, _)| s == name))
            .map(|t| &t.table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_hash_stable_for_identical_bytes() {
        let a = AttachmentRef::from_bytes("a.csv", MediaKind::Spreadsheet, "file://a", b"x,y\n1,2\n");
        let b = AttachmentRef::from_bytes("b.csv", MediaKind::Spreadsheet, "file://b", b"x,y\n1,2\n");
        assert_eq!(a.content_hash, b.content_hash);
        let c = AttachmentRef::from_bytes("a.csv", MediaKind::Spreadsheet, "file://a", b"x,y\n1,3\n");
        assert_ne!(a.content_hash, c.content_hash);
    }

    #[test]
    fn csv_parse_and_totals() {
        let t = TabularData::from_csv("item,qty\na,2\nb,3\nTotal,5\n");
        assert_eq!(t.columns, vec!["item", "qty"]);
        assert_eq!(t.data_row_count(), 2);
        assert!(t.has_total());
    }

    #[test]
    fn assemble_merges_parts() {
        let mut a = Deliverable::empty(Actor::AiWorker, 0);
        a.summary = "first".into();
        a.answer_samples = vec!["x".into(), "x".into()];
        let mut b = Deliverable::empty(Actor::Expert, 1);
        b.summary = "second".into();
        let merged = Deliverable::assemble([&a, &b]).unwrap();
        assert_eq!(merged.summary, "first\nsecond");
        assert_eq!(merged.step_index, 1);
        assert_eq!(merged.answer_samples.len(), 2);
    }
}
