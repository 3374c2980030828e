//! Termhood statistics: contingency-table association measures, tf-idf and
//! C-value.
//!
//! For an n-gram candidate `w1..wn` the 2x2 table is built over the
//! document's n-gram windows by splitting each window into its first n-1
//! lemmas and its last lemma: `o11` counts windows equal to the candidate,
//! `R1` windows sharing the candidate's prefix, `C1` windows sharing its
//! final lemma. Association measures for single-word candidates are
//! undefined; only frequency and tf-idf apply there.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::corpus::{Corpus, Document};
use crate::patterns::Candidate;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("association statistics are undefined for single-word candidates")]
    UnigramCandidate,
    #[error("candidate \"{lemma_seq}\" was not extracted from document \"{doc_id}\"")]
    ForeignCandidate { lemma_seq: String, doc_id: String },
}

/// A 2x2 contingency table of window counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyTable {
    pub o11: u64,
    pub o12: u64,
    pub o21: u64,
    pub o22: u64,
}

impl ContingencyTable {
    pub fn new(o11: u64, o12: u64, o21: u64, o22: u64) -> Self {
        ContingencyTable { o11, o12, o21, o22 }
    }

    pub fn r1(&self) -> u64 {
        self.o11 + self.o12
    }

    pub fn r2(&self) -> u64 {
        self.o21 + self.o22
    }

    pub fn c1(&self) -> u64 {
        self.o11 + self.o21
    }

    pub fn c2(&self) -> u64 {
        self.o12 + self.o22
    }

    pub fn n(&self) -> u64 {
        self.o11 + self.o12 + self.o21 + self.o22
    }

    /// A table with a zero marginal has a zero expected cell; chi-square and
    /// log-likelihood are reported as 0 for such tables instead of failing.
    pub fn is_degenerate(&self) -> bool {
        self.r1() == 0 || self.r2() == 0 || self.c1() == 0 || self.c2() == 0
    }

    /// Pearson chi-square without continuity correction, via the product
    /// form N(o11*o22 - o12*o21)^2 / (R1*R2*C1*C2).
    pub fn chi_square(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let (o11, o12, o21, o22) = self.cells_f64();
        let num = (self.n() as f64) * (o11 * o22 - o12 * o21).powi(2);
        let den =
            self.r1() as f64 * self.r2() as f64 * self.c1() as f64 * self.c2() as f64;
        num / den
    }

    /// Log-likelihood ratio 2 * sum O*ln(O/E) with 0*ln0 := 0 (natural log).
    pub fn log_likelihood(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let n = self.n() as f64;
        let rows = [self.r1() as f64, self.r2() as f64];
        let cols = [self.c1() as f64, self.c2() as f64];
        let observed = [
            [self.o11 as f64, self.o12 as f64],
            [self.o21 as f64, self.o22 as f64],
        ];
        let mut sum = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let o = observed[i][j];
                if o > 0.0 {
                    let e = rows[i] * cols[j] / n;
                    sum += o * (o / e).ln();
                }
            }
        }
        // The likelihood ratio is nonnegative; clamp the rounding noise that
        // can push tiny sums slightly below zero.
        (2.0 * sum).max(0.0)
    }

    /// Dice coefficient 2*o11 / (R1 + C1).
    pub fn dice(&self) -> f64 {
        let den = (self.r1() + self.c1()) as f64;
        if den == 0.0 {
            return 0.0;
        }
        2.0 * self.o11 as f64 / den
    }

    /// Pointwise mutual information log2(o11*N / (R1*C1)).
    pub fn pmi(&self) -> f64 {
        if self.o11 == 0 || self.r1() == 0 || self.c1() == 0 {
            return 0.0;
        }
        let num = self.o11 as f64 * self.n() as f64;
        let den = self.r1() as f64 * self.c1() as f64;
        (num / den).log2()
    }

    /// t-score (o11 - E11) / sqrt(o11) with E11 = R1*C1/N.
    pub fn t_score(&self) -> f64 {
        if self.o11 == 0 {
            return 0.0;
        }
        let e11 = self.r1() as f64 * self.c1() as f64 / self.n() as f64;
        (self.o11 as f64 - e11) / (self.o11 as f64).sqrt()
    }

    fn cells_f64(&self) -> (f64, f64, f64, f64) {
        (
            self.o11 as f64,
            self.o12 as f64,
            self.o21 as f64,
            self.o22 as f64,
        )
    }
}

/// Per-document window tallies for one n: n-gram counts plus prefix
/// (first n-1 lemmas) and final-lemma counts over the same windows.
#[derive(Debug, Default)]
struct WindowIndex {
    ngram: HashMap<String, u32>,
    prefix: HashMap<String, u32>,
    last: HashMap<String, u32>,
    total: u64,
}

impl WindowIndex {
    fn build(doc: &Document, n: usize) -> WindowIndex {
        let mut index = WindowIndex::default();
        for sentence in &doc.sentences {
            if sentence.len() < n {
                continue;
            }
            for window in sentence.windows(n) {
                let lemmas: Vec<&str> = window.iter().map(|t| t.lemma.as_str()).collect();
                *index.ngram.entry(lemmas.join(" ")).or_insert(0) += 1;
                if n >= 2 {
                    *index
                        .prefix
                        .entry(lemmas[..n - 1].join(" "))
                        .or_insert(0) += 1;
                    *index
                        .last
                        .entry(lemmas[n - 1].to_string())
                        .or_insert(0) += 1;
                }
                index.total += 1;
            }
        }
        index
    }

    fn table_for(&self, lemma_seq: &str) -> ContingencyTable {
        let (prefix, last) = split_prefix_last(lemma_seq);
        let o11 = u64::from(self.ngram.get(lemma_seq).copied().unwrap_or(0));
        let r1 = u64::from(self.prefix.get(prefix).copied().unwrap_or(0));
        let c1 = u64::from(self.last.get(last).copied().unwrap_or(0));
        let n = self.total;
        ContingencyTable {
            o11,
            o12: r1 - o11,
            o21: c1 - o11,
            // n + o11 >= r1 + c1 by inclusion-exclusion over the window sets
            o22: n + o11 - r1 - c1,
        }
    }
}

fn split_prefix_last(lemma_seq: &str) -> (&str, &str) {
    match lemma_seq.rfind(' ') {
        Some(pos) => (&lemma_seq[..pos], &lemma_seq[pos + 1..]),
        None => ("", lemma_seq),
    }
}

/// Build the contingency table for a multi-word candidate over its document.
pub fn build_table(
    candidate: &Candidate,
    doc: &Document,
) -> Result<ContingencyTable, StatsError> {
    if candidate.length < 2 {
        return Err(StatsError::UnigramCandidate);
    }
    let index = WindowIndex::build(doc, candidate.length);
    Ok(index.table_for(&candidate.lemma_seq))
}

/// tf-idf with tf = the candidate's raw in-document frequency and
/// idf = ln(D / df) over the documents of `corpus`.
pub fn tf_idf(candidate: &Candidate, corpus: &Corpus) -> Result<f64, StatsError> {
    let d = corpus.documents.len() as f64;
    let df = corpus
        .documents
        .iter()
        .filter(|doc| doc.ngram_counts(candidate.length).contains(&candidate.lemma_seq))
        .count();
    if df == 0 {
        return Err(StatsError::ForeignCandidate {
            lemma_seq: candidate.lemma_seq.clone(),
            doc_id: candidate.doc_id.clone(),
        });
    }
    Ok(candidate.freq as f64 * (d / df as f64).ln())
}

/// True iff `needle`'s tokens occur as a proper contiguous sub-sequence of
/// `hay`'s tokens (hay strictly longer).
pub fn is_proper_subsequence(needle: &str, hay: &str) -> bool {
    let a: Vec<&str> = needle.split(' ').collect();
    let b: Vec<&str> = hay.split(' ').collect();
    b.len() > a.len() && b.windows(a.len()).any(|w| w == a.as_slice())
}

/// The C-value core formula given the frequencies of the candidate's
/// containers (raw, non-recursive variant; base-2 log of the length).
pub fn c_value_from_nested(length: usize, freq: f64, container_freqs: &[f64]) -> f64 {
    let weight = (length as f64).log2();
    if container_freqs.is_empty() {
        weight * freq
    } else {
        let mean = container_freqs.iter().sum::<f64>() / container_freqs.len() as f64;
        weight * (freq - mean)
    }
}

/// C-value of a multi-word candidate against the other candidates of the
/// same document.
pub fn c_value(candidate: &Candidate, all_candidates: &[Candidate]) -> Result<f64, StatsError> {
    if candidate.length < 2 {
        return Err(StatsError::UnigramCandidate);
    }
    let containers: Vec<f64> = all_candidates
        .iter()
        .filter(|b| is_proper_subsequence(&candidate.lemma_seq, &b.lemma_seq))
        .map(|b| b.freq as f64)
        .collect();
    Ok(c_value_from_nested(
        candidate.length,
        candidate.freq as f64,
        &containers,
    ))
}

/// Association measures of a multi-word candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocStats {
    pub chisq: f64,
    pub dice: f64,
    pub mi: f64,
    pub tscore: f64,
    pub ll: f64,
    pub cvalue: f64,
    /// Set when the contingency table had a zero marginal and the
    /// chi-square / log-likelihood values were defined as 0.
    pub degenerate: bool,
}

/// All statistics of one candidate. Association measures are absent for
/// single-word candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStats {
    pub freq: u32,
    pub tfidf: f64,
    pub assoc: Option<AssocStats>,
}

/// Precomputed per-corpus tallies shared by all candidates: window indexes
/// per (document, n), document frequencies per n, and the candidate groups
/// per document used for C-value nesting.
pub struct ScoringIndex<'a> {
    corpus: &'a Corpus,
    doc_pos: HashMap<&'a str, usize>,
    // windows[doc][n] for every n-gram order needed by the candidates
    windows: Vec<HashMap<usize, WindowIndex>>,
    df: HashMap<usize, HashMap<String, u32>>,
    doc_candidates: HashMap<&'a str, Vec<&'a Candidate>>,
}

impl<'a> ScoringIndex<'a> {
    pub fn build(corpus: &'a Corpus, candidates: &'a [Candidate]) -> ScoringIndex<'a> {
        let orders: BTreeSet<usize> = candidates.iter().map(|c| c.length).collect();
        let orders: Vec<usize> = orders.into_iter().collect();

        let windows: Vec<HashMap<usize, WindowIndex>> =
            crate::exec::map(&corpus.documents, |doc| {
                orders
                    .iter()
                    .map(|&n| (n, WindowIndex::build(doc, n)))
                    .collect()
            });

        let mut df: HashMap<usize, HashMap<String, u32>> = HashMap::new();
        for &n in &orders {
            let per_n = df.entry(n).or_default();
            for doc_windows in &windows {
                for key in doc_windows[&n].ngram.keys() {
                    *per_n.entry(key.clone()).or_insert(0) += 1;
                }
            }
        }

        let mut doc_pos = HashMap::new();
        for (i, doc) in corpus.documents.iter().enumerate() {
            doc_pos.insert(doc.id.as_str(), i);
        }

        let mut doc_candidates: HashMap<&str, Vec<&Candidate>> = HashMap::new();
        for cand in candidates {
            doc_candidates.entry(cand.doc_id.as_str()).or_default().push(cand);
        }

        ScoringIndex {
            corpus,
            doc_pos,
            windows,
            df,
            doc_candidates,
        }
    }

    /// Score one candidate against the prebuilt tallies.
    pub fn score(&self, candidate: &Candidate) -> Result<CandidateStats, StatsError> {
        let foreign = || StatsError::ForeignCandidate {
            lemma_seq: candidate.lemma_seq.clone(),
            doc_id: candidate.doc_id.clone(),
        };
        let doc_idx = *self.doc_pos.get(candidate.doc_id.as_str()).ok_or_else(foreign)?;
        let df = self
            .df
            .get(&candidate.length)
            .and_then(|m| m.get(&candidate.lemma_seq))
            .copied()
            .ok_or_else(foreign)?;
        let d = self.corpus.documents.len() as f64;
        let tfidf = candidate.freq as f64 * (d / f64::from(df)).ln();

        let assoc = if candidate.length >= 2 {
            let table = self.windows[doc_idx][&candidate.length].table_for(&candidate.lemma_seq);
            let cvalue = {
                let siblings = &self.doc_candidates[candidate.doc_id.as_str()];
                let containers: Vec<f64> = siblings
                    .iter()
                    .filter(|b| is_proper_subsequence(&candidate.lemma_seq, &b.lemma_seq))
                    .map(|b| b.freq as f64)
                    .collect();
                c_value_from_nested(candidate.length, candidate.freq as f64, &containers)
            };
            Some(AssocStats {
                chisq: table.chi_square(),
                dice: table.dice(),
                mi: table.pmi(),
                tscore: table.t_score(),
                ll: table.log_likelihood(),
                cvalue,
                degenerate: table.is_degenerate(),
            })
        } else {
            None
        };

        Ok(CandidateStats {
            freq: candidate.freq,
            tfidf,
            assoc,
        })
    }
}

/// Score every candidate; the result is aligned with the input order.
/// Single-word candidates carry frequency and tf-idf only.
pub fn score_all(
    corpus: &Corpus,
    candidates: &[Candidate],
) -> Result<Vec<CandidateStats>, StatsError> {
    let index = ScoringIndex::build(corpus, candidates);
    crate::exec::map(candidates, |c| index.score(c))
        .into_iter()
        .collect()
}
