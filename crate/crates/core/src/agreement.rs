//! Inter-annotator agreement: Fleiss kappa and pairwise observed agreement.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dataset::{Instance, Mapping};

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("rating matrix is empty")]
    Empty,
    #[error("item {item} has {found} ratings, expected {expected}")]
    InconsistentRaters {
        item: usize,
        found: u64,
        expected: u64,
    },
    #[error("need at least 2 raters, got {0}")]
    TooFewRaters(u64),
    #[error("need at least 2 categories, got {0}")]
    TooFewCategories(usize),
    #[error("kappa undefined: expected agreement is 1 while observed is below 1")]
    Undefined,
}

/// Items x categories rating counts; every row sums to the rater count.
#[derive(Debug, Clone)]
pub struct RatingMatrix {
    rows: Vec<Vec<u64>>,
    raters: u64,
    categories: usize,
}

impl RatingMatrix {
    pub fn new(rows: Vec<Vec<u64>>) -> Result<RatingMatrix, AgreementError> {
        let first = rows.first().ok_or(AgreementError::Empty)?;
        let categories = first.len();
        if categories < 2 {
            return Err(AgreementError::TooFewCategories(categories));
        }
        let raters: u64 = first.iter().sum();
        if raters < 2 {
            return Err(AgreementError::TooFewRaters(raters));
        }
        for (i, row) in rows.iter().enumerate() {
            let sum: u64 = row.iter().sum();
            if row.len() != categories || sum != raters {
                return Err(AgreementError::InconsistentRaters {
                    item: i,
                    found: if row.len() != categories {
                        row.len() as u64
                    } else {
                        sum
                    },
                    expected: raters,
                });
            }
        }
        Ok(RatingMatrix {
            rows,
            raters,
            categories,
        })
    }

    /// Build from per-item label lists (all items rated by the same number
    /// of raters). Categories are the sorted distinct labels.
    pub fn from_labels<T: Ord + Clone>(items: &[Vec<T>]) -> Result<RatingMatrix, AgreementError> {
        let mut categories: Vec<T> = Vec::new();
        for item in items {
            for label in item {
                if !categories.contains(label) {
                    categories.push(label.clone());
                }
            }
        }
        categories.sort_unstable();
        let rows = items
            .iter()
            .map(|item| {
                let mut row = vec![0u64; categories.len()];
                for label in item {
                    let pos = categories.binary_search(label).unwrap();
                    row[pos] += 1;
                }
                row
            })
            .collect();
        RatingMatrix::new(rows)
    }

    pub fn items(&self) -> usize {
        self.rows.len()
    }

    pub fn raters(&self) -> u64 {
        self.raters
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    /// Fleiss kappa. Exactly 1.0 under perfect agreement.
    pub fn fleiss_kappa(&self) -> Result<f64, AgreementError> {
        let n = self.rows.len() as f64;
        let r = self.raters as f64;

        let mut p_bar = 0.0;
        for row in &self.rows {
            let sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            p_bar += (sq - r) / (r * (r - 1.0));
        }
        p_bar /= n;

        let mut pe = 0.0;
        for j in 0..self.categories {
            let col: f64 = self.rows.iter().map(|row| row[j] as f64).sum();
            let p_j = col / (n * r);
            pe += p_j * p_j;
        }

        if p_bar >= 1.0 {
            return Ok(1.0);
        }
        if (1.0 - pe).abs() < f64::EPSILON {
            return Err(AgreementError::Undefined);
        }
        Ok((p_bar - pe) / (1.0 - pe))
    }
}

/// Summary of per-pair observed agreement over all rater pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseAgreement {
    pub average: f64,
    pub min: f64,
    pub max: f64,
}

/// Fraction of items with identical labels, for each of the r(r-1)/2 rater
/// pairs; returns the average, minimum and maximum over pairs.
pub fn pairwise_observed<T: PartialEq>(items: &[Vec<T>]) -> Result<PairwiseAgreement, AgreementError> {
    let first = items.first().ok_or(AgreementError::Empty)?;
    let r = first.len();
    if r < 2 {
        return Err(AgreementError::TooFewRaters(r as u64));
    }
    for (i, item) in items.iter().enumerate() {
        if item.len() != r {
            return Err(AgreementError::InconsistentRaters {
                item: i,
                found: item.len() as u64,
                expected: r as u64,
            });
        }
    }

    let mut average = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    for a in 0..r {
        for b in a + 1..r {
            let agree = items.iter().filter(|item| item[a] == item[b]).count();
            let fraction = agree as f64 / items.len() as f64;
            average += fraction;
            min = min.min(fraction);
            max = max.max(fraction);
            pairs += 1;
        }
    }
    Ok(PairwiseAgreement {
        average: average / pairs as f64,
        min,
        max,
    })
}

/// One row of the per-area agreement table.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    /// Area name, or "Overall" for the pooled row.
    pub scope: String,
    /// Annotation round, or `None` for the all-rounds row.
    pub round: Option<u32>,
    pub kappa: f64,
    pub pairwise: PairwiseAgreement,
    pub items: usize,
}

/// Agreement per area plus a pooled Overall row, computed over the four
/// categories, or over binarized labels when `mapping` is given. With
/// `by_round`, per-round rows are emitted before each scope's all-rounds row.
pub fn agreement_report(
    instances: &[Instance],
    mapping: Option<Mapping>,
    by_round: bool,
) -> Result<Vec<AgreementRow>, AgreementError> {
    // label lists per item, binarized if requested
    let labels_of = |inst: &Instance| -> Vec<u8> {
        match mapping {
            // distinct codes per category, stable order
            None => inst
                .labels
                .iter()
                .map(|l| {
                    crate::dataset::AnnotationLabel::ALL
                        .iter()
                        .position(|a| a == l)
                        .unwrap() as u8
                })
                .collect(),
            Some(m) => inst.binarized(m).iter().map(|&b| u8::from(b)).collect(),
        }
    };

    let mut areas: Vec<&str> = Vec::new();
    for inst in instances {
        if !areas.contains(&inst.area.as_str()) {
            areas.push(&inst.area);
        }
    }
    areas.sort_unstable();

    let mut rows = Vec::new();
    let mut scope_row = |scope: &str,
                         round: Option<u32>,
                         items: Vec<Vec<u8>>|
     -> Result<(), AgreementError> {
        if items.is_empty() {
            return Ok(());
        }
        let kappa = RatingMatrix::from_labels(&items)?.fleiss_kappa()?;
        let pairwise = pairwise_observed(&items)?;
        rows.push(AgreementRow {
            scope: scope.to_string(),
            round,
            kappa,
            pairwise,
            items: items.len(),
        });
        Ok(())
    };

    for area in &areas {
        let of_area: Vec<&Instance> = instances.iter().filter(|i| i.area == *area).collect();
        if by_round {
            let mut rounds: BTreeMap<u32, Vec<Vec<u8>>> = BTreeMap::new();
            for inst in &of_area {
                rounds.entry(inst.round).or_default().push(labels_of(inst));
            }
            for (round, items) in rounds {
                scope_row(area, Some(round), items)?;
            }
        }
        scope_row(area, None, of_area.iter().map(|i| labels_of(i)).collect())?;
    }
    scope_row(
        "Overall",
        None,
        instances.iter().map(labels_of).collect(),
    )?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AnnotationLabel::{Academic, InDomain, Irrelevant, OutOfDomain};
    use crate::dataset::{Instance, InstanceStats};
    use proptest::prelude::*;

    #[test]
    fn perfect_agreement_is_exactly_one() {
        let m = RatingMatrix::new(vec![vec![4, 0], vec![0, 4], vec![4, 0]]).unwrap();
        assert_eq!(m.fleiss_kappa().unwrap(), 1.0);
    }

    #[test]
    fn hand_built_matrix_matches_direct_formula() {
        // 3 items, 4 raters, 2 categories
        let m = RatingMatrix::new(vec![vec![4, 0], vec![2, 2], vec![3, 1]]).unwrap();
        // P = [1, 1/3, 1/2], P_bar = 11/18; p = [3/4, 1/4], Pe = 5/8
        // kappa = (11/18 - 5/8) / (3/8) = -1/27
        let expected = -1.0 / 27.0;
        assert!((m.fleiss_kappa().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn rows_must_sum_to_rater_count() {
        assert!(matches!(
            RatingMatrix::new(vec![vec![4, 0], vec![2, 1]]),
            Err(AgreementError::InconsistentRaters { item: 1, .. })
        ));
    }

    #[test]
    fn from_labels_counts_categories() {
        let items = vec![
            vec!["a", "a", "b"],
            vec!["b", "b", "b"],
        ];
        let m = RatingMatrix::from_labels(&items).unwrap();
        assert_eq!(m.categories(), 2);
        assert_eq!(m.raters(), 3);
        assert_eq!(m.items(), 2);
    }

    #[test]
    fn identical_annotators_agree_fully() {
        let items = vec![vec!["a", "a"], vec!["b", "b"]];
        let p = pairwise_observed(&items).unwrap();
        assert_eq!(p, PairwiseAgreement { average: 1.0, min: 1.0, max: 1.0 });
    }

    #[test]
    fn two_rater_pairwise_example() {
        let items = vec![vec!["A", "B"], vec!["A", "A"]];
        let p = pairwise_observed(&items).unwrap();
        assert!((p.average - 0.5).abs() < 1e-12);
    }

    fn inst(area: &str, round: u32, labels: [crate::dataset::AnnotationLabel; 4]) -> Instance {
        Instance {
            thesis_id: format!("t-{area}"),
            area: area.into(),
            round,
            lemma_seq: "x".into(),
            surface_seq: "x".into(),
            pattern: "p1".into(),
            length: 1,
            labels,
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

    #[test]
    fn report_has_per_area_and_overall_rows() {
        let instances = vec![
            inst("chem", 1, [InDomain, InDomain, InDomain, OutOfDomain]),
            inst("chem", 2, [Academic, Academic, Irrelevant, Irrelevant]),
            inst("cs", 1, [Irrelevant; 4]),
            inst("cs", 1, [InDomain, Irrelevant, Irrelevant, Irrelevant]),
        ];
        let rows = agreement_report(&instances, None, false).unwrap();
        let scopes: Vec<&str> = rows.iter().map(|r| r.scope.as_str()).collect();
        assert_eq!(scopes, vec!["chem", "cs", "Overall"]);
        assert_eq!(rows[2].items, 4);

        let by_round = agreement_report(&instances, None, true).unwrap();
        assert!(by_round.iter().any(|r| r.round == Some(2)));
    }

    #[test]
    fn mapped_report_binarizes_labels() {
        let instances = vec![
            inst("chem", 1, [InDomain, OutOfDomain, Academic, Irrelevant]),
            inst("chem", 1, [InDomain, InDomain, InDomain, InDomain]),
        ];
        // Inclusive: row 1 -> 3 positive 1 negative, row 2 -> unanimous
        let rows = agreement_report(&instances, Some(Mapping::Inclusive), false).unwrap();
        let overall = rows.last().unwrap();
        let direct = RatingMatrix::new(vec![vec![1, 3], vec![0, 4]])
            .unwrap()
            .fleiss_kappa()
            .unwrap();
        assert!((overall.kappa - direct).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kappa_at_most_one_and_permutation_invariant(
            items in prop::collection::vec(
                prop::collection::vec(0u8..3, 6), 2..20),
            seed in 0u64..1000,
        ) {
            let rows: Vec<Vec<u64>> = items
                .iter()
                .map(|labels| {
                    let mut row = vec![0u64; 3];
                    for &l in labels {
                        row[l as usize] += 1;
                    }
                    row
                })
                .collect();
            let kappa = RatingMatrix::new(rows.clone()).unwrap().fleiss_kappa();
            prop_assume!(kappa.is_ok());
            let kappa = kappa.unwrap();
            prop_assert!(kappa <= 1.0 + 1e-12);

            // permuting items leaves kappa unchanged
            let mut permuted = rows.clone();
            let n = permuted.len();
            permuted.swap(seed as usize % n, (seed / 7) as usize % n);
            let k2 = RatingMatrix::new(permuted).unwrap().fleiss_kappa().unwrap();
            prop_assert!((kappa - k2).abs() < 1e-12);

            // relabeling categories leaves kappa unchanged
            let relabeled: Vec<Vec<u64>> = rows.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
            let k3 = RatingMatrix::new(relabeled).unwrap().fleiss_kappa().unwrap();
            prop_assert!((kappa - k3).abs() < 1e-12);
        }
    }
}
