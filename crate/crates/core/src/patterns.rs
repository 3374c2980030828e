//! Morphosyntactic patterns and term-candidate extraction.
//!
//! A pattern is a comma-separated list of one to four slot expressions, each
//! a regular expression matched against a token's full MSD string, e.g.
//! `Nc.*,S.*,Nc.*,Nc.*g.*`. A within-sentence token window matches a pattern
//! iff every token's MSD fully matches the corresponding slot.

use std::collections::HashMap;

use regex::Regex;
use thiserror::Error;

use crate::corpus::{join_lemmas, Corpus, Document, Token};

pub const MAX_SLOTS: usize = 4;
pub const DEFAULT_MIN_FREQ: u32 = 3;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("line {line}: empty slot {slot}")]
    EmptySlot { line: usize, slot: usize },
    #[error("line {line}: pattern has {count} slots, at most {MAX_SLOTS} allowed")]
    TooManySlots { line: usize, count: usize },
    #[error("line {line}: pattern has no slots")]
    NoSlots { line: usize },
    #[error("line {line} slot {slot}: disallowed construct '{what}'")]
    Disallowed {
        line: usize,
        slot: usize,
        what: char,
    },
    #[error("line {line} slot {slot}: invalid regex: {message}")]
    InvalidRegex {
        line: usize,
        slot: usize,
        message: String,
    },
}

/// A compiled pattern; slot regexes are anchored at both ends.
#[derive(Debug, Clone)]
pub struct MsdPattern {
    /// Source line reference, e.g. `p7` for a pattern read from line 7.
    pub id: String,
    /// The original comma-separated pattern text.
    pub source: String,
    slots: Vec<Regex>,
}

impl MsdPattern {
    /// Compile a single pattern line. `line` is the 1-based source line used
    /// for the id and error reporting.
    pub fn parse(line: usize, text: &str) -> Result<MsdPattern, PatternError> {
        let slot_texts: Vec<&str> = text.split(',').map(str::trim).collect();
        if slot_texts.len() > MAX_SLOTS {
            return Err(PatternError::TooManySlots {
                line,
                count: slot_texts.len(),
            });
        }
        let mut slots = Vec::with_capacity(slot_texts.len());
        for (i, slot) in slot_texts.iter().enumerate() {
            if slot.is_empty() {
                return Err(PatternError::EmptySlot { line, slot: i + 1 });
            }
            check_subset(slot, line, i + 1)?;
            let anchored = format!("^(?:{slot})$");
            let re = Regex::new(&anchored).map_err(|e| PatternError::InvalidRegex {
                line,
                slot: i + 1,
                message: e.to_string(),
            })?;
            slots.push(re);
        }
        if slots.is_empty() {
            return Err(PatternError::NoSlots { line });
        }
        Ok(MsdPattern {
            id: format!("p{line}"),
            source: slot_texts.join(","),
            slots,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// True iff the window has the same length as the pattern and every
    /// token's MSD fully matches its slot.
    pub fn matches(&self, window: &[Token]) -> bool {
        self.slots.len() == window.len()
            && self
                .slots
                .iter()
                .zip(window)
                .all(|(re, tok)| re.is_match(&tok.msd))
    }
}

/// Reject anything outside the supported regex subset: literals, `.`, `*`,
/// `+`, `?`, character classes, alternation and grouping.
fn check_subset(slot: &str, line: usize, slot_no: usize) -> Result<(), PatternError> {
    let mut in_class = false;
    for ch in slot.chars() {
        let ok = if in_class {
            if ch == ']' {
                in_class = false;
                true
            } else {
                ch.is_alphanumeric() || ch == '-' || ch == '^' || ch == '_'
            }
        } else {
            match ch {
                '[' => {
                    in_class = true;
                    true
                }
                '.' | '*' | '+' | '?' | '|' | '(' | ')' => true,
                c if c.is_alphanumeric() || c == '-' || c == '_' => true,
                _ => false,
            }
        };
        if !ok {
            return Err(PatternError::Disallowed {
                line,
                slot: slot_no,
                what: ch,
            });
        }
    }
    if in_class {
        return Err(PatternError::InvalidRegex {
            line,
            slot: slot_no,
            message: "unclosed character class".into(),
        });
    }
    Ok(())
}

/// Parse a pattern file: one pattern per line, `#` starts a comment, blank
/// lines are ignored. Patterns are returned in file order.
pub fn parse_pattern_file(text: &str) -> Result<Vec<MsdPattern>, PatternError> {
    let mut patterns = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        patterns.push(MsdPattern::parse(idx + 1, line)?);
    }
    Ok(patterns)
}

/// A term candidate: a lemma sequence extracted from one document under one
/// pattern, with its most frequent surface form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub lemma_seq: String,
    pub surface_seq: String,
    pub doc_id: String,
    pub pattern_id: String,
    pub length: usize,
    pub freq: u32,
}

/// Extract candidates from one document. Matches are grouped per
/// (lemma sequence, pattern); groups below `min_freq` are dropped. The
/// result is sorted alphabetically by lemma sequence (byte-wise UTF-8),
/// then by pattern id for a total order.
pub fn extract_candidates(
    doc: &Document,
    patterns: &[MsdPattern],
    min_freq: u32,
) -> Vec<Candidate> {
    assert!(min_freq >= 1, "min_freq must be at least 1");

    struct Group {
        freq: u32,
        surfaces: HashMap<String, u32>,
    }
    let mut groups: HashMap<(String, usize), Group> = HashMap::new();

    for sentence in &doc.sentences {
        for (pat_idx, pattern) in patterns.iter().enumerate() {
            let k = pattern.len();
            if sentence.len() < k {
                continue;
            }
            for window in sentence.windows(k) {
                if !pattern.matches(window) {
                    continue;
                }
                let lemma_seq = join_lemmas(window);
                let surface = window
                    .iter()
                    .map(|t| t.form.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                let group = groups.entry((lemma_seq, pat_idx)).or_insert(Group {
                    freq: 0,
                    surfaces: HashMap::new(),
                });
                group.freq += 1;
                *group.surfaces.entry(surface).or_insert(0) += 1;
            }
        }
    }

    let mut candidates: Vec<Candidate> = groups
        .into_iter()
        .filter(|(_, g)| g.freq >= min_freq)
        .map(|((lemma_seq, pat_idx), group)| {
            // Most frequent surface form, ties broken lexicographically.
            let surface_seq = group
                .surfaces
                .iter()
                .max_by(|(sa, ca), (sb, cb)| ca.cmp(cb).then_with(|| sb.cmp(sa)))
                .map(|(s, _)| s.clone())
                .expect("non-empty group");
            Candidate {
                length: patterns[pat_idx].len(),
                lemma_seq,
                surface_seq,
                doc_id: doc.id.clone(),
                pattern_id: patterns[pat_idx].id.clone(),
                freq: group.freq,
            }
        })
        .collect();

    candidates.sort_by(|a, b| {
        a.lemma_seq
            .cmp(&b.lemma_seq)
            .then_with(|| a.pattern_id.cmp(&b.pattern_id))
    });
    candidates
}

/// Extract candidates from every document of a corpus, one document at a
/// time (documents are processed in parallel when the `parallel` feature is
/// enabled). Candidate order: document order, alphabetic within a document.
pub fn extract_corpus(
    corpus: &Corpus,
    patterns: &[MsdPattern],
    min_freq: u32,
) -> Vec<Candidate> {
    let per_doc = crate::exec::map(&corpus.documents, |doc| {
        extract_candidates(doc, patterns, min_freq)
    });
    per_doc.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    fn doc_of(msd_lemmas: &[&[(&str, &str, &str)]]) -> Document {
        Document {
            id: "d1".into(),
            area: "x".into(),
            sentences: msd_lemmas
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|&(form, lemma, msd)| Token::new(form, lemma, msd))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn four_slot_pattern_parses() {
        let patterns = parse_pattern_file("Nc.*,S.*,Nc.*,Nc.*g.*\n").unwrap();
        assert_eq!(patterns.len(), 1);
        assert_eq!(patterns[0].len(), 4);
        assert_eq!(patterns[0].id, "p1");
        assert_eq!(patterns[0].source, "Nc.*,S.*,Nc.*,Nc.*g.*");
    }

    #[test]
    fn single_slot_pattern_parses() {
        let patterns = parse_pattern_file("N.*\n").unwrap();
        assert_eq!(patterns.len(), 1);
        assert_eq!(patterns[0].len(), 1);
    }

    #[test]
    fn empty_slot_is_rejected() {
        match parse_pattern_file("N.*,,A.*\n") {
            Err(PatternError::EmptySlot { line: 1, slot: 2 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn five_slots_are_rejected() {
        assert!(matches!(
            parse_pattern_file("A,B,C,D,E\n"),
            Err(PatternError::TooManySlots { line: 1, count: 5 })
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# nominal patterns\n\nNc.*   # single noun\nNc.*,Nc.*\n";
        let patterns = parse_pattern_file(text).unwrap();
        assert_eq!(patterns.len(), 2);
        assert_eq!(patterns[0].id, "p3");
        assert_eq!(patterns[1].id, "p4");
    }

    #[test]
    fn disallowed_constructs_are_rejected() {
        assert!(matches!(
            parse_pattern_file("N{2}\n"),
            Err(PatternError::Disallowed { what: '{', .. })
        ));
        assert!(matches!(
            parse_pattern_file("\\d.*\n"),
            Err(PatternError::Disallowed { what: '\\', .. })
        ));
    }

    #[test]
    fn slots_are_anchored() {
        let patterns = parse_pattern_file("N\n").unwrap();
        let tok = |msd: &str| Token::new("x", "x", msd);
        assert!(patterns[0].matches(&[tok("N")]));
        assert!(!patterns[0].matches(&[tok("Nc")]));
        assert!(!patterns[0].matches(&[tok("aN")]));
    }

    #[test]
    fn frequency_threshold_is_applied() {
        let patterns = parse_pattern_file("Nc.*\n").unwrap();
        let three = doc_of(&[&[
            ("sistem", "sistem", "Ncmsn"),
            ("je", "biti", "Va"),
            ("sistem", "sistem", "Ncmsn"),
            ("sistema", "sistem", "Ncmsg"),
        ]]);
        let cands = extract_candidates(&three, &patterns, 3);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].lemma_seq, "sistem");
        assert_eq!(cands[0].freq, 3);

        let two = doc_of(&[&[
            ("sistem", "sistem", "Ncmsn"),
            ("sistem", "sistem", "Ncmsn"),
        ]]);
        assert!(extract_candidates(&two, &patterns, 3).is_empty());
    }

    #[test]
    fn most_frequent_surface_wins_with_lexicographic_ties() {
        let patterns = parse_pattern_file("Nc.*\n").unwrap();
        let doc = doc_of(&[&[
            ("sistema", "sistem", "Ncmsg"),
            ("sistem", "sistem", "Ncmsn"),
            ("sistema", "sistem", "Ncmsg"),
        ]]);
        let cands = extract_candidates(&doc, &patterns, 1);
        assert_eq!(cands[0].surface_seq, "sistema");

        // Tie between two surfaces: lexicographically smaller one wins.
        let tied = doc_of(&[&[
            ("sistemu", "sistem", "Ncmsd"),
            ("sistema", "sistem", "Ncmsg"),
        ]]);
        let cands = extract_candidates(&tied, &patterns, 1);
        assert_eq!(cands[0].surface_seq, "sistema");
    }

    #[test]
    fn output_is_alphabetic_by_lemma_sequence() {
        let patterns = parse_pattern_file("Nc.*\n").unwrap();
        let doc = doc_of(&[&[
            ("zadnji", "zadnji", "Ncmsn"),
            ("zadnji", "zadnji", "Ncmsn"),
            ("zadnji", "zadnji", "Ncmsn"),
            ("prvi", "prvi", "Ncmsn"),
        ]]);
        let cands = extract_candidates(&doc, &patterns, 1);
        let seqs: Vec<&str> = cands.iter().map(|c| c.lemma_seq.as_str()).collect();
        assert_eq!(seqs, vec!["prvi", "zadnji"]);
    }

    #[test]
    fn lemma_sequence_matching_two_patterns_yields_two_candidates() {
        let patterns = parse_pattern_file("Nc.*\nN.*\n").unwrap();
        let doc = doc_of(&[&[("sistem", "sistem", "Ncmsn")]]);
        let cands = extract_candidates(&doc, &patterns, 1);
        assert_eq!(cands.len(), 2);
        assert_eq!(cands[0].pattern_id, "p1");
        assert_eq!(cands[1].pattern_id, "p2");
        assert!(cands.iter().all(|c| c.lemma_seq == "sistem"));
    }

    #[test]
    fn freq_matches_brute_force_window_count() {
        let patterns = parse_pattern_file("Nc.*,Nc.*\n").unwrap();
        let doc = doc_of(&[
            &[
                ("velik", "velik", "Ncmsn"),
                ("sistem", "sistem", "Ncmsn"),
                ("velik", "velik", "Ncmsn"),
                ("sistem", "sistem", "Ncmsg"),
            ],
            &[("velik", "velik", "Ncmsn"), ("sistem", "sistem", "Ncmsn")],
        ]);
        let cands = extract_candidates(&doc, &patterns, 1);

        // Oracle: enumerate every window and re-apply the slot regexes.
        let mut expected: HashMap<String, u32> = HashMap::new();
        for sentence in &doc.sentences {
            for window in sentence.windows(2) {
                let all_match = window
                    .iter()
                    .all(|t| Regex::new("^(?:Nc.*)$").unwrap().is_match(&t.msd));
                if all_match {
                    *expected.entry(join_lemmas(window)).or_insert(0) += 1;
                }
            }
        }
        for cand in &cands {
            assert_eq!(cand.freq, expected[&cand.lemma_seq]);
        }
        assert_eq!(cands.len(), expected.len());
    }

    #[test]
    fn corpus_extraction_keeps_document_order() {
        let text = "<doc id=\"a\" area=\"x\">\ns\ts\tN\n</doc>\n<doc id=\"b\" area=\"x\">\nt\tt\tN\n</doc>\n";
        let corpus = Corpus::parse_vertical(text).unwrap();
        let patterns = parse_pattern_file("N\n").unwrap();
        let cands = extract_corpus(&corpus, &patterns, 1);
        let docs: Vec<&str> = cands.iter().map(|c| c.doc_id.as_str()).collect();
        assert_eq!(docs, vec!["a", "b"]);
    }
}
