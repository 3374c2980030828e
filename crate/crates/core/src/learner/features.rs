//! Feature assembly and standardization for the term classifiers/rankers.
//!
//! Everything derived from data (pattern vocabularies, the context model,
//! standardizer parameters) is fitted on training folds only; test
//! instances are transformed with the fitted artifacts.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dataset::{Instance, Mapping, Subset};
use crate::learner::context::ContextModel;
use crate::learner::LearnerError;

/// Which features to assemble on top of the per-subset base statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FeatureFlags {
    /// Add C-value to the MWT base statistics.
    pub cvalue: bool,
    /// Add raw frequency to the SWT base (tf-idf alone by default).
    pub freq: bool,
    /// One-hot candidate length over 2-4.
    pub candidate_length: bool,
    /// Mean character count of the surface tokens.
    pub avg_token_length: bool,
    /// One-hot morphosyntactic pattern over the training-fold vocabulary.
    pub pattern: bool,
    /// Certainty of the context classifier.
    pub context: bool,
}

impl FeatureFlags {
    /// Parse a comma-separated flag list such as `base,pattern`. `base` is
    /// always implied; unknown names are errors.
    pub fn parse_list(list: &str) -> Result<FeatureFlags, LearnerError> {
        let mut flags = FeatureFlags::default();
        for raw in list.split(',') {
            let name = raw.trim().to_lowercase().replace('_', "-");
            match name.as_str() {
                "" | "base" | "base-stats" => {}
                "cvalue" | "c-value" => flags.cvalue = true,
                "freq" | "frequency" => flags.freq = true,
                "candidate-length" | "length" => flags.candidate_length = true,
                "avg-token-length" => flags.avg_token_length = true,
                "pattern" => flags.pattern = true,
                "context" => flags.context = true,
                _ => {
                    return Err(LearnerError::UnknownFlag {
                        flag: raw.trim().to_string(),
                    })
                }
            }
        }
        Ok(flags)
    }
}

/// Training-fold artifacts needed to assemble features for any instance.
#[derive(Debug, Default)]
pub struct FoldContext {
    /// Sorted distinct pattern strings seen in the training fold.
    pub pattern_vocab: Vec<String>,
    pub context_model: Option<ContextModel>,
}

impl FoldContext {
    /// Fit fold artifacts from training instances only. `corpus` is needed
    /// iff the context feature is enabled; the context classifier always
    /// trains against inclusive-mapped gold.
    pub fn fit(
        train: &[&Instance],
        flags: FeatureFlags,
        corpus: Option<&Corpus>,
        window: usize,
        svm_cfg: &crate::learner::svm::SmoConfig,
    ) -> Result<FoldContext, LearnerError> {
        let mut pattern_vocab = Vec::new();
        if flags.pattern {
            for inst in train {
                if !pattern_vocab.contains(&inst.pattern) {
                    pattern_vocab.push(inst.pattern.clone());
                }
            }
            pattern_vocab.sort_unstable();
        }
        let context_model = if flags.context {
            let corpus = corpus.ok_or(LearnerError::MissingCorpus)?;
            Some(ContextModel::train(
                train,
                corpus,
                Mapping::Inclusive,
                window,
                svm_cfg,
            )?)
        } else {
            None
        };
        Ok(FoldContext {
            pattern_vocab,
            context_model,
        })
    }
}

/// Mean character count of the whitespace-split surface tokens.
pub fn avg_token_length(surface_seq: &str) -> f64 {
    let tokens: Vec<&str> = surface_seq.split_whitespace().collect();
    if tokens.is_empty() {
        return 0.0;
    }
    let total: usize = tokens.iter().map(|t| t.chars().count()).sum();
    total as f64 / tokens.len() as f64
}

/// Feature names in assembly order, for model serialization and reports.
pub fn schema(subset: Subset, flags: FeatureFlags, ctx: &FoldContext) -> Vec<String> {
    let mut names: Vec<String> = match subset {
        Subset::Mwt => ["freq", "chisq", "dice", "ll", "mi", "tfidf", "tscore"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Subset::Swt => vec!["tfidf".to_string()],
    };
    if subset == Subset::Mwt && flags.cvalue {
        names.push("cvalue".into());
    }
    if subset == Subset::Swt && flags.freq {
        names.push("freq".into());
    }
    if flags.candidate_length {
        for len in 2..=4 {
            names.push(format!("len={len}"));
        }
    }
    if flags.avg_token_length {
        names.push("avg_token_length".into());
    }
    if flags.pattern {
        for p in &ctx.pattern_vocab {
            names.push(format!("pattern={p}"));
        }
    }
    if flags.context {
        names.push("context".into());
    }
    names
}

/// Assemble one instance's feature vector. `cvalue` is the instance's
/// precomputed C-value (dataset-level, label-free); `corpus` is required
/// iff the context feature is enabled.
pub fn assemble(
    inst: &Instance,
    subset: Subset,
    flags: FeatureFlags,
    ctx: &FoldContext,
    cvalue: Option<f64>,
    corpus: Option<&Corpus>,
) -> Result<Vec<f64>, LearnerError> {
    let missing = |statistic: &str| LearnerError::MissingStatistic {
        lemma_seq: inst.lemma_seq.clone(),
        statistic: statistic.to_string(),
    };
    let mut v = Vec::new();
    match subset {
        Subset::Mwt => {
            v.push(inst.stats.freq);
            v.push(inst.stats.chisq.ok_or_else(|| missing("chisq"))?);
            v.push(inst.stats.dice.ok_or_else(|| missing("dice"))?);
            v.push(inst.stats.ll.ok_or_else(|| missing("ll"))?);
            v.push(inst.stats.mi.ok_or_else(|| missing("mi"))?);
            v.push(inst.stats.tfidf);
            v.push(inst.stats.tscore.ok_or_else(|| missing("tscore"))?);
            if flags.cvalue {
                v.push(cvalue.ok_or_else(|| missing("cvalue"))?);
            }
        }
        Subset::Swt => {
            v.push(inst.stats.tfidf);
            if flags.freq {
                v.push(inst.stats.freq);
            }
        }
    }
    if flags.candidate_length {
        for len in 2..=4 {
            v.push(if inst.length == len { 1.0 } else { 0.0 });
        }
    }
    if flags.avg_token_length {
        v.push(avg_token_length(&inst.surface_seq));
    }
    if flags.pattern {
        // unseen test-fold patterns map to the all-zero encoding
        for p in &ctx.pattern_vocab {
            v.push(if *p == inst.pattern { 1.0 } else { 0.0 });
        }
    }
    if flags.context {
        let model = ctx
            .context_model
            .as_ref()
            .expect("context model fitted when the flag is on");
        let corpus = corpus.ok_or(LearnerError::MissingCorpus)?;
        v.push(model.certainty(inst, corpus)?);
    }
    Ok(v)
}

/// Per-feature z-scoring fitted on training data. Constant features get a
/// clamped standard deviation of 1, mapping them to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; d];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Standardizer { means, stds }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// Duplicate items whose annotators were unanimous (all four binarized
/// labels equal) once; originals first, copies after, both in input order.
pub fn oversample_by<T: Clone>(items: &[T], unanimous: impl Fn(&T) -> bool) -> Vec<T> {
    let mut out: Vec<T> = items.to_vec();
    out.extend(items.iter().filter(|i| unanimous(i)).cloned());
    out
}

/// Oversampling over instances under a mapping.
pub fn oversample<'a>(train: &[&'a Instance], mapping: Mapping) -> Vec<&'a Instance> {
    oversample_by(train, |inst| {
        let b = inst.binarized(mapping);
        b.iter().all(|&x| x) || b.iter().all(|&x| !x)
    })
}
