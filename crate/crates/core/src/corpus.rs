//! Tagged corpora in a vertical (one-token-per-line) format.
//!
//! A corpus file contains one or more documents delimited by
//! `<doc id="..." area="...">` / `</doc>` lines. Inside a document every
//! line is either a TAB-separated `form<TAB>lemma<TAB>msd` token or a blank
//! line marking a sentence boundary.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed doc tag")]
    MalformedDocTag { line: usize },
    #[error("line {line}: token line has {fields} fields, expected 3")]
    BadTokenLine { line: usize, fields: usize },
    #[error("line {line}: empty {field} field")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: token line outside doc tags")]
    OutsideDoc { line: usize },
    #[error("line {line}: duplicate document id \"{id}\"")]
    DuplicateDocId { line: usize, id: String },
    #[error("line {line}: doc tag opened inside another document")]
    NestedDoc { line: usize },
    #[error("line {line}: </doc> without a matching <doc>")]
    UnmatchedClose { line: usize },
    #[error("line {line}: document not closed before end of input")]
    UnclosedDoc { line: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One corpus position: surface form, lemma and morphosyntactic descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub lemma: String,
    pub msd: String,
}

impl Token {
    pub fn new(
        form: impl Into<String>,
        lemma: impl Into<String>,
        msd: impl Into<String>,
    ) -> Self {
        Token {
            form: form.into(),
            lemma: lemma.into(),
            msd: msd.into(),
        }
    }
}

/// A single document (one thesis in the original setting): sentences of tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub area: String,
    pub sentences: Vec<Vec<Token>>,
}

impl Document {
    /// Counts of all within-sentence contiguous lemma n-grams.
    ///
    /// Windows never cross sentence boundaries, so a sentence of length `l`
    /// contributes `max(0, l - n + 1)` windows.
    pub fn ngram_counts(&self, n: usize) -> NgramCounts {
        assert!(n >= 1, "n-gram order must be at least 1");
        let mut counts: HashMap<String, u32> = HashMap::new();
        let mut total = 0u64;
        for sentence in &self.sentences {
            if sentence.len() < n {
                continue;
            }
            for window in sentence.windows(n) {
                let key = join_lemmas(window);
                *counts.entry(key).or_insert(0) += 1;
                total += 1;
            }
        }
        NgramCounts {
            counts,
            total_windows: total,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// Space-joined lemma sequence of a token window; the canonical key used for
/// n-gram counting, candidates and dataset rows alike.
pub fn join_lemmas(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&t.lemma);
    }
    s
}

/// Lemma n-gram counts of one document for a fixed n, plus the total number
/// of windows `N_n`.
#[derive(Debug, Clone)]
pub struct NgramCounts {
    counts: HashMap<String, u32>,
    pub total_windows: u64,
}

impl NgramCounts {
    pub fn get(&self, lemma_seq: &str) -> u32 {
        self.counts.get(lemma_seq).copied().unwrap_or(0)
    }

    pub fn contains(&self, lemma_seq: &str) -> bool {
        self.counts.contains_key(lemma_seq)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// An ordered collection of documents with pairwise distinct ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Parse a corpus from vertical-format text.
    pub fn parse_vertical(text: &str) -> Result<Corpus, CorpusError> {
        let mut documents: Vec<Document> = Vec::new();
        let mut seen_ids: HashSet<String> = HashSet::new();
        let mut open: Option<(Document, usize)> = None;
        let mut sentence: Vec<Token> = Vec::new();

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);

            if line.starts_with("<doc") {
                if open.is_some() {
                    return Err(CorpusError::NestedDoc { line: line_no });
                }
                let (id, area) = parse_doc_tag(line, line_no)?;
                if !seen_ids.insert(id.clone()) {
                    return Err(CorpusError::DuplicateDocId { line: line_no, id });
                }
                open = Some((
                    Document {
                        id,
                        area,
                        sentences: Vec::new(),
                    },
                    line_no,
                ));
                continue;
            }

            if line.trim() == "</doc>" {
                let (mut doc, _) = open
                    .take()
                    .ok_or(CorpusError::UnmatchedClose { line: line_no })?;
                if !sentence.is_empty() {
                    doc.sentences.push(std::mem::take(&mut sentence));
                }
                documents.push(doc);
                continue;
            }

            if line.trim().is_empty() {
                // Sentence boundary. Runs of blank lines carry no extra
                // information, and neither do blanks outside a document.
                if let Some((doc, _)) = open.as_mut() {
                    if !sentence.is_empty() {
                        doc.sentences.push(std::mem::take(&mut sentence));
                    }
                }
                continue;
            }

            if open.is_none() {
                return Err(CorpusError::OutsideDoc { line: line_no });
            }

            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(CorpusError::BadTokenLine {
                    line: line_no,
                    fields: fields.len(),
                });
            }
            for (value, name) in fields.iter().zip(["form", "lemma", "msd"]) {
                if value.is_empty() {
                    return Err(CorpusError::EmptyField {
                        line: line_no,
                        field: name,
                    });
                }
            }
            sentence.push(Token::new(fields[0], fields[1], fields[2]));
        }

        if let Some((_, opened_at)) = open {
            return Err(CorpusError::UnclosedDoc { line: opened_at });
        }
        Ok(Corpus { documents })
    }

    /// Read a vertical file; gzip-compressed input is accepted when the file
    /// name ends in `.gz`.
    pub fn from_path(path: &Path) -> Result<Corpus, CorpusError> {
        let wrap_io = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = File::open(path).map_err(wrap_io)?;
        let mut text = String::new();
        if path.extension().is_some_and(|e| e == "gz") {
            let mut decoder = flate2::read::GzDecoder::new(file);
            decoder.read_to_string(&mut text).map_err(wrap_io)?;
        } else {
            file.read_to_string(&mut text).map_err(wrap_io)?;
        }
        Corpus::parse_vertical(&text)
    }

    /// Serialize back to vertical format (LF line endings, UTF-8).
    pub fn to_vertical(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            out.push_str(&format!("<doc id=\"{}\" area=\"{}\">\n", doc.id, doc.area));
            for (i, sentence) in doc.sentences.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                for token in sentence {
                    out.push_str(&token.form);
                    out.push('\t');
                    out.push_str(&token.lemma);
                    out.push('\t');
                    out.push_str(&token.msd);
                    out.push('\n');
                }
            }
            out.push_str("</doc>\n");
        }
        out
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }
}

fn parse_doc_tag(line: &str, line_no: usize) -> Result<(String, String), CorpusError> {
    let err = || CorpusError::MalformedDocTag { line: line_no };
    let inner = line
        .trim()
        .strip_prefix("<doc")
        .and_then(|s| s.strip_suffix('>'))
        .ok_or_else(err)?;

    let mut id = None;
    let mut area = None;
    let mut rest = inner.trim_start();
    while !rest.is_empty() {
        let eq = rest.find('=').ok_or_else(err)?;
        let key = rest[..eq].trim();
        let after = &rest[eq + 1..];
        if !after.starts_with('"') {
            return Err(err());
        }
        let close = after[1..].find('"').ok_or_else(err)? + 1;
        let value = &after[1..close];
        match key {
            "id" if id.is_none() => id = Some(value.to_string()),
            "area" if area.is_none() => area = Some(value.to_string()),
            _ => return Err(err()),
        }
        rest = after[close + 1..].trim_start();
    }
    match (id, area) {
        (Some(id), Some(area)) => Ok((id, area)),
        _ => Err(err()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(text: &str) -> Document {
        let corpus = Corpus::parse_vertical(text).unwrap();
        corpus.documents.into_iter().next().unwrap()
    }

    fn lines(tokens: &[(&str, &str, &str)]) -> String {
        tokens
            .iter()
            .map(|(f, l, m)| format!("{f}\t{l}\t{m}\n"))
            .collect()
    }

    #[test]
    fn single_doc_without_blank_lines_is_one_sentence() {
        let text = "<doc id=\"d1\" area=\"chem\">\nsistem\tsistem\tNcmsn\nje\tbiti\tVa\nhiter\thiter\tAgp\n</doc>\n";
        let corpus = Corpus::parse_vertical(text).unwrap();
        assert_eq!(corpus.documents.len(), 1);
        let d = &corpus.documents[0];
        assert_eq!(d.id, "d1");
        assert_eq!(d.area, "chem");
        assert_eq!(d.sentences.len(), 1);
        assert_eq!(d.sentences[0].len(), 3);
        assert_eq!(d.sentences[0][1].lemma, "biti");
    }

    #[test]
    fn blank_line_splits_sentences() {
        let text = "<doc id=\"d1\" area=\"x\">\na\ta\tN\n\nb\tb\tN\n</doc>\n";
        let d = doc(text);
        assert_eq!(d.sentences.len(), 2);
    }

    #[test]
    fn duplicate_doc_id_is_rejected() {
        let text = "<doc id=\"d1\" area=\"x\">\na\ta\tN\n</doc>\n<doc id=\"d1\" area=\"y\">\nb\tb\tN\n</doc>\n";
        match Corpus::parse_vertical(text) {
            Err(CorpusError::DuplicateDocId { line, id }) => {
                assert_eq!(line, 4);
                assert_eq!(id, "d1");
            }
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn token_line_with_wrong_field_count_is_rejected() {
        let text = "<doc id=\"d1\" area=\"x\">\na\ta\n</doc>\n";
        match Corpus::parse_vertical(text) {
            Err(CorpusError::BadTokenLine { line, fields }) => {
                assert_eq!(line, 2);
                assert_eq!(fields, 2);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn text_outside_doc_is_rejected() {
        match Corpus::parse_vertical("a\ta\tN\n") {
            Err(CorpusError::OutsideDoc { line: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn malformed_doc_tag_is_rejected() {
        for bad in [
            "<doc id=\"d1\">\n</doc>\n",
            "<doc id=d1 area=\"x\">\n</doc>\n",
            "<doc id=\"d1\" area=\"x\" extra=\"y\">\n</doc>\n",
        ] {
            assert!(
                matches!(
                    Corpus::parse_vertical(bad),
                    Err(CorpusError::MalformedDocTag { line: 1 })
                ),
                "expected malformed tag for {bad:?}"
            );
        }
    }

    #[test]
    fn unclosed_doc_reports_opening_line() {
        let text = "<doc id=\"d1\" area=\"x\">\na\ta\tN\n";
        assert!(matches!(
            Corpus::parse_vertical(text),
            Err(CorpusError::UnclosedDoc { line: 1 })
        ));
    }

    #[test]
    fn empty_lemma_field_is_rejected() {
        let text = "<doc id=\"d1\" area=\"x\">\na\t\tN\n</doc>\n";
        assert!(matches!(
            Corpus::parse_vertical(text),
            Err(CorpusError::EmptyField { line: 2, field: "lemma" })
        ));
    }

    #[test]
    fn window_count_for_five_token_sentence() {
        let text = format!(
            "<doc id=\"d\" area=\"x\">\n{}</doc>\n",
            lines(&[("a", "a", "N"); 5])
        );
        let counts = doc(&text).ngram_counts(2);
        assert_eq!(counts.total_windows, 4);
    }

    #[test]
    fn repeated_bigram_is_counted() {
        let text = format!(
            "<doc id=\"d\" area=\"x\">\n{}</doc>\n",
            lines(&[("a", "a", "N"), ("b", "b", "N"), ("a", "a", "N"), ("b", "b", "N")])
        );
        let counts = doc(&text).ngram_counts(2);
        assert_eq!(counts.get("a b"), 2);
        assert_eq!(counts.get("b a"), 1);
        assert_eq!(counts.total_windows, 3);
    }

    #[test]
    fn short_sentences_contribute_no_windows() {
        let text = format!(
            "<doc id=\"d\" area=\"x\">\n{}\n{}</doc>\n",
            lines(&[("a", "a", "N"), ("b", "b", "N"), ("c", "c", "N")]),
            lines(&[("d", "d", "N")])
        );
        let counts = doc(&text).ngram_counts(3);
        assert_eq!(counts.total_windows, 1);
        assert_eq!(counts.get("a b c"), 1);
    }

    proptest! {
        #[test]
        fn ngram_counts_sum_to_total_windows(
            sentences in prop::collection::vec(
                prop::collection::vec(0usize..4, 1..12), 1..6),
            n in 1usize..5,
        ) {
            let lemmas = ["a", "b", "c", "d"];
            let doc = Document {
                id: "d".into(),
                area: "x".into(),
                sentences: sentences
                    .iter()
                    .map(|s| s.iter().map(|&i| Token::new(lemmas[i], lemmas[i], "N")).collect())
                    .collect(),
            };
            let counts = doc.ngram_counts(n);
            let sum: u64 = counts.iter().map(|(_, c)| c as u64).sum();
            prop_assert_eq!(sum, counts.total_windows);
            let expected: u64 = sentences
                .iter()
                .map(|s| s.len().saturating_sub(n - 1) as u64)
                .sum();
            prop_assert_eq!(counts.total_windows, expected);
        }

        #[test]
        fn vertical_round_trip_preserves_structure(
            docs in prop::collection::vec(
                prop::collection::vec(
                    prop::collection::vec((0usize..3, 0usize..3), 1..5),
                    0..4),
                1..4),
        ) {
            let forms = ["alpha", "beta", "gama"];
            let msds = ["Ncmsn", "Agpfsn", "Va"];
            let corpus = Corpus {
                documents: docs
                    .iter()
                    .enumerate()
                    .map(|(i, sents)| Document {
                        id: format!("doc{i}"),
                        area: "area".into(),
                        sentences: sents
                            .iter()
                            .map(|s| {
                                s.iter()
                                    .map(|&(f, m)| Token::new(forms[f], forms[f], msds[m]))
                                    .collect()
                            })
                            .collect(),
                    })
                    .collect(),
            };
            let reparsed = Corpus::parse_vertical(&corpus.to_vertical()).unwrap();
            prop_assert_eq!(reparsed, corpus);
        }
    }
}
