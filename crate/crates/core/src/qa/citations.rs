use std::collections::BTreeMap;

use unicode_normalization::UnicodeNormalization;

use super::{
    CheckKind, CheckReport, Finding, Location, Span, CIT_CONFLICT, CIT_FABRICATED, CIT_NO_TEXT, CIT_QUOTE_MISMATCH,
};
use crate::deliverable::{AttachmentRef, Deliverable, SourceText};

/// NFC, whitespace runs collapsed to one space, lowercased, trimmed.
pub fn normalize_text(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

enum Resolved<'a> {
    Text(&'a str),
    NoText,
    Missing,
}

fn resolve<'a>(reference: &str, attachments: &[AttachmentRef], sources: &'a [SourceText]) -> Resolved<'a> {
    if let Some(s) = sources.iter().find(|s| s.id == reference) {
        return Resolved::Text(&s.text);
    }
    match attachments.iter().find(|a| a.answers_to(reference)) {
        Some(a) => sources
            .iter()
            .find(|s| a.answers_to(&s.id))
            .map(|s| Resolved::Text(&s.text))
            .unwrap_or(Resolved::NoText),
        None => Resolved::Missing,
    }
}

/// `label: value` claims, for conflict detection.
fn labelled(span: &str) -> Option<(String, String)> {
    let (label, value) = span.split_once(':')?;
    let (label, value) = (normalize_text(label), normalize_text(value));
    (!label.is_empty() && !value.is_empty()).then_some((label, value))
}

/// Check that every citation resolves and quotes its source.
pub fn match_citations(deliverable: &Deliverable, attachments: &[AttachmentRef], sources: &[SourceText]) -> CheckReport {
    let mut findings = Vec::new();
    let mut claims: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut conflicted = std::collections::BTreeSet::new();
    for (index, c) in deliverable.citations.iter().enumerate() {
        let at = Some(Location::new(&c.source_ref, Span::Citation { index }));
        match resolve(&c.source_ref, attachments, sources) {
            Resolved::Missing => findings.push(Finding::new(
                CIT_FABRICATED,
                format!("citation {index} points to unknown source `{}`", c.source_ref),
                at,
            )),
            Resolved::NoText => findings.push(Finding::new(
                CIT_NO_TEXT,
                format!("citation {index}: no recorded text for `{}`", c.source_ref),
                at,
            )),
            Resolved::Text(text) => {
                if !normalize_text(text).contains(&normalize_text(&c.claim_span)) {
                    findings.push(Finding::new(
                        CIT_QUOTE_MISMATCH,
                        format!("citation {index}: quote not found in `{}`", c.source_ref),
                        at,
                    ));
                } else if let Some((label, value)) = labelled(&c.claim_span) {
                    match claims.get(&label) {
                        Some((first, first_index)) if *first != value && conflicted.insert(label.clone()) => {
                            findings.push(Finding::new(
                                CIT_CONFLICT,
                                format!("`{label}` cited as `{first}` (citation {first_index}) and `{value}` (citation {index})"),
                                at,
                            ));
                        }
                        Some(_) => {}
                        None => {
                            claims.insert(label, (value, index));
                        }
                    }
                }
            }
        }
    }
    CheckReport::from_findings(CheckKind::CitationMatch, deliverable.step_index, findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deliverable::{Citation, MediaKind};
    use crate::qa::CheckStatus;
    use crate::task::Actor;

    fn cite(span: &str, source: &str) -> Citation {
        Citation { claim_span: span.into(), source_ref: source.into() }
    }

    fn src(id: &str, text: &str) -> SourceText {
        SourceText { id: id.into(), text: text.into() }
    }

    fn with(citations: Vec<Citation>) -> Deliverable {
        let mut d = Deliverable::empty(Actor::AiWorker, 1);
        d.citations = citations;
        d
    }

    #[test]
    fn attached_source_with_quote_passes() {
        let att = AttachmentRef::from_bytes("pricing.pdf", MediaKind::Document, "file://pricing.pdf", b"...");
        let sources = [src("pricing.pdf", "The  Basic plan costs\n$20 per month.")];
        let d = with(vec![cite("basic plan costs $20", "pricing")]);
        assert_eq!(match_citations(&d, &[att], &sources).status, CheckStatus::Pass);
    }

    #[test]
    fn unknown_source_is_fabricated() {
        let d = with(vec![cite("anything", "https://nowhere.example")]);
        let r = match_citations(&d, &[], &[src("s1", "text")]);
        assert_eq!(r.status, CheckStatus::Fail);
        assert_eq!(r.findings[0].code, CIT_FABRICATED);
    }

    #[test]
    fn absent_quote_is_mismatch() {
        let d = with(vec![cite("revenue grew 40%", "s1")]);
        let r = match_citations(&d, &[], &[src("s1", "Revenue grew 14% year over year.")]);
        assert_eq!(r.findings[0].code, CIT_QUOTE_MISMATCH);
    }

    #[test]
    fn normalization_is_nfc_whitespace_case() {
        assert_eq!(normalize_text("Cafe\u{301}  LATTE\n"), normalize_text("café latte"));
    }

    #[test]
    fn conflicting_values_are_uncertain() {
        let sources = [src("a", "Founded: 1998"), src("b", "founded: 2001")];
        let d = with(vec![cite("Founded: 1998", "a"), cite("founded: 2001", "b")]);
        let r = match_citations(&d, &[], &sources);
        assert_eq!(r.status, CheckStatus::Uncertain);
        assert_eq!(r.findings[0].code, CIT_CONFLICT);
    }

    #[test]
    fn attachment_without_text() {
        let att = AttachmentRef::from_bytes("deck.pptx", MediaKind::Other, "file://deck", b"...");
        let d = with(vec![cite("slide 3", "deck.pptx")]);
        assert_eq!(match_citations(&d, &[att], &[]).status, CheckStatus::Uncertain);
    }
}
