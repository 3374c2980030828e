//! The context classifier: a linear-kernel SVM over frequencies of lemmas
//! occurring in a fixed window around a candidate's occurrences in its
//! thesis. Its raw decision value becomes the `context` feature.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::dataset::{Instance, Mapping};
use crate::learner::svm::{smo_solve, SmoConfig};
use crate::learner::LearnerError;

pub const DEFAULT_WINDOW: usize = 3;

type SparseVec = Vec<(u32, f64)>;

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let mut sum = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

/// Count lemmas within `window` tokens of every occurrence of the candidate
/// lemma sequence in the document. Windows are clipped at sentence
/// boundaries; the occurrence's own tokens are not context.
fn context_counts(lemma_seq: &str, doc: &Document, window: usize) -> HashMap<String, f64> {
    let needle: Vec<&str> = lemma_seq.split(' ').collect();
    let mut counts: HashMap<String, f64> = HashMap::new();
    for sentence in &doc.sentences {
        if sentence.len() < needle.len() {
            continue;
        }
        for start in 0..=sentence.len() - needle.len() {
            let window_matches = sentence[start..start + needle.len()]
                .iter()
                .zip(&needle)
                .all(|(tok, lemma)| tok.lemma == *lemma);
            if !window_matches {
                continue;
            }
            let end = start + needle.len();
            let left = start.saturating_sub(window);
            for tok in &sentence[left..start] {
                *counts.entry(tok.lemma.clone()).or_insert(0.0) += 1.0;
            }
            let right = (end + window).min(sentence.len());
            for tok in &sentence[end..right] {
                *counts.entry(tok.lemma.clone()).or_insert(0.0) += 1.0;
            }
        }
    }
    counts
}

/// Trained context classifier. Because the kernel is linear, the dual
/// solution collapses to a dense weight vector over the context vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextModel {
    pub vocab: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub window: usize,
}

impl ContextModel {
    /// Train on the given (training-fold) instances. Labels are the
    /// mapped gold; the published setup uses the inclusive mapping.
    pub fn train(
        train: &[&Instance],
        corpus: &Corpus,
        mapping: Mapping,
        window: usize,
        cfg: &SmoConfig,
    ) -> Result<ContextModel, LearnerError> {
        let mut per_instance: Vec<HashMap<String, f64>> = Vec::with_capacity(train.len());
        for inst in train {
            let doc = corpus
                .document(&inst.thesis_id)
                .ok_or_else(|| LearnerError::MissingDocument {
                    thesis_id: inst.thesis_id.clone(),
                })?;
            per_instance.push(context_counts(&inst.lemma_seq, doc, window));
        }

        let mut vocab: Vec<String> = per_instance
            .iter()
            .flat_map(|c| c.keys().cloned())
            .collect();
        vocab.sort_unstable();
        vocab.dedup();
        let index: HashMap<&str, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();

        let rows: Vec<SparseVec> = per_instance
            .iter()
            .map(|counts| {
                let mut row: SparseVec = counts
                    .iter()
                    .map(|(lemma, &c)| (index[lemma.as_str()], c))
                    .collect();
                row.sort_unstable_by_key(|&(i, _)| i);
                row
            })
            .collect();

        let labels: Vec<bool> = train.iter().map(|i| i.gold_binary(mapping)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            return Err(LearnerError::Svm(
                crate::learner::svm::SvmError::SingleClass,
            ));
        }
        let signs: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let p = vec![-1.0; rows.len()];
        let solution = smo_solve(
            &p,
            &signs,
            cfg.c,
            cfg.tol,
            cfg.max_iter,
            cfg.cache_rows,
            |i| {
                (0..rows.len())
                    .map(|t| signs[i] * signs[t] * sparse_dot(&rows[i], &rows[t]))
                    .collect()
            },
            None,
        );

        let mut weights = vec![0.0; vocab.len()];
        for (i, &alpha) in solution.alphas.iter().enumerate() {
            if alpha > 0.0 {
                for &(idx, value) in &rows[i] {
                    weights[idx as usize] += alpha * signs[i] * value;
                }
            }
        }
        Ok(ContextModel {
            vocab,
            weights,
            bias: solution.bias,
            window,
        })
    }

    /// Raw decision value for an instance's context vector; lemmas outside
    /// the training vocabulary are ignored. A candidate without occurrences
    /// gets the bias term.
    pub fn certainty(&self, inst: &Instance, corpus: &Corpus) -> Result<f64, LearnerError> {
        let doc = corpus
            .document(&inst.thesis_id)
            .ok_or_else(|| LearnerError::MissingDocument {
                thesis_id: inst.thesis_id.clone(),
            })?;
        let counts = context_counts(&inst.lemma_seq, doc, self.window);
        let mut sum = self.bias;
        for (lemma, count) in counts {
            if let Ok(pos) = self.vocab.binary_search(&lemma) {
                sum += self.weights[pos] * count;
            }
        }
        Ok(sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AnnotationLabel::{InDomain, Irrelevant};
    use crate::dataset::InstanceStats;

    fn inst(thesis: &str, lemma_seq: &str, positive: bool) -> Instance {
        Instance {
            thesis_id: thesis.into(),
            area: "a".into(),
            round: 1,
            lemma_seq: lemma_seq.into(),
            surface_seq: lemma_seq.into(),
            pattern: "N".into(),
            length: lemma_seq.split(' ').count(),
            labels: if positive { [InDomain; 4] } else { [Irrelevant; 4] },
            stats: InstanceStats {
                freq: 1.0,
                tfidf: 0.0,
                chisq: None,
                dice: None,
                mi: None,
                tscore: None,
                ll: None,
            },
        }
    }

    fn marker_corpus() -> Corpus {
        // positives ("termX") always appear next to the marker lemma,
        // negatives ("nonX") never do
        let mut text = String::from("<doc id=\"t1\" area=\"x\">\n");
        for i in 0..4 {
            text.push_str(&format!("term{i}\tterm{i}\tN\nmarker\tmarker\tN\nfiller\tfiller\tN\n\n"));
            text.push_str(&format!("non{i}\tnon{i}\tN\nplain\tplain\tN\nfiller\tfiller\tN\n\n"));
        }
        text.push_str("</doc>\n");
        Corpus::parse_vertical(&text).unwrap()
    }

    #[test]
    fn marker_separated_corpus_is_learned_perfectly() {
        let corpus = marker_corpus();
        let mut instances = Vec::new();
        for i in 0..4 {
            instances.push(inst("t1", &format!("term{i}"), true));
            instances.push(inst("t1", &format!("non{i}"), false));
        }
        let refs: Vec<&Instance> = instances.iter().collect();
        let model = ContextModel::train(
            &refs,
            &corpus,
            Mapping::Inclusive,
            3,
            &SmoConfig { c: 10.0, ..Default::default() },
        )
        .unwrap();
        for inst in &instances {
            let certainty = model.certainty(inst, &corpus).unwrap();
            assert_eq!(
                certainty > 0.0,
                inst.gold_binary(Mapping::Inclusive),
                "wrong side for {}",
                inst.lemma_seq
            );
        }
    }

    #[test]
    fn zero_occurrences_fall_back_to_bias() {
        let corpus = marker_corpus();
        let mut instances = Vec::new();
        for i in 0..4 {
            instances.push(inst("t1", &format!("term{i}"), true));
            instances.push(inst("t1", &format!("non{i}"), false));
        }
        let refs: Vec<&Instance> = instances.iter().collect();
        let model =
            ContextModel::train(&refs, &corpus, Mapping::Inclusive, 3, &SmoConfig::default())
                .unwrap();
        let ghost = inst("t1", "nepojavljen", true);
        let certainty = model.certainty(&ghost, &corpus).unwrap();
        assert_eq!(certainty, model.bias);
    }

    #[test]
    fn identical_context_vectors_get_identical_certainty() {
        let corpus = marker_corpus();
        let mut instances = Vec::new();
        for i in 0..4 {
            instances.push(inst("t1", &format!("term{i}"), true));
            instances.push(inst("t1", &format!("non{i}"), false));
        }
        let refs: Vec<&Instance> = instances.iter().collect();
        let model =
            ContextModel::train(&refs, &corpus, Mapping::Inclusive, 3, &SmoConfig::default())
                .unwrap();
        // term0 and term1 have identical contexts (marker + filler)
        let a = model.certainty(&instances[0], &corpus).unwrap();
        let b = model.certainty(&instances[2], &corpus).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn window_clips_at_sentence_boundaries() {
        let text = "<doc id=\"t1\" area=\"x\">\nlevo\tlevo\tN\n\ncilj\tcilj\tN\n\ndesno\tdesno\tN\n</doc>\n";
        let corpus = Corpus::parse_vertical(text).unwrap();
        let counts = context_counts("cilj", &corpus.documents[0], 3);
        assert!(counts.is_empty(), "context must not cross sentences: {counts:?}");
    }

    #[test]
    fn missing_document_is_an_error() {
        let corpus = marker_corpus();
        let stray = inst("neznan", "term0", true);
        let refs: Vec<&Instance> = vec![&stray, &stray];
        assert!(matches!(
            ContextModel::train(&refs, &corpus, Mapping::Inclusive, 3, &SmoConfig::default()),
            Err(LearnerError::MissingDocument { .. })
        ));
    }
}
