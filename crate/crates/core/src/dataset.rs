//! The annotated term-candidate dataset: reading/writing CSV and JSON,
//! label mappings, and annotation aggregation.
//!
//! One instance is a term candidate from one thesis together with its
//! metadata, the four annotator labels and the precomputed statistics.
//! Association statistics are absent for single-word candidates.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::fmt_num;
use crate::stats::{c_value_from_nested, is_proper_subsequence};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("row {row}, column \"{column}\": unknown label \"{value}\"")]
    UnknownLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing mandatory column \"{column}\"")]
    MissingColumn { column: String },
    #[error("row {row}, column \"{column}\": expected a number, got \"{value}\"")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("thesis \"{thesis_id}\" appears with areas \"{first}\" and \"{second}\"")]
    InconsistentArea {
        thesis_id: String,
        first: String,
        second: String,
    },
    #[error("header map line {line}: expected key=value")]
    BadHeaderMap { line: usize },
    #[error("unknown header map key \"{key}\"")]
    UnknownHeaderKey { key: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// The four annotation categories after referee resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnnotationLabel {
    InDomain,
    OutOfDomain,
    Academic,
    Irrelevant,
}

impl AnnotationLabel {
    pub const ALL: [AnnotationLabel; 4] = [
        AnnotationLabel::InDomain,
        AnnotationLabel::OutOfDomain,
        AnnotationLabel::Academic,
        AnnotationLabel::Irrelevant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationLabel::InDomain => "in-domain",
            AnnotationLabel::OutOfDomain => "out-of-domain",
            AnnotationLabel::Academic => "academic",
            AnnotationLabel::Irrelevant => "irrelevant",
        }
    }

    /// Accepts the canonical short names plus the long descriptions used in
    /// annotation guidelines ("in-domain term", "irrelevant sequence", ...).
    pub fn parse(s: &str) -> Option<AnnotationLabel> {
        let norm: String = s
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == '_' || c == ' ' { '-' } else { c })
            .collect();
        match norm.as_str() {
            "in-domain" | "in-domain-term" | "indomain" | "term-in-domain" => {
                Some(AnnotationLabel::InDomain)
            }
            "out-of-domain" | "out-of-domain-term" | "outdomain" | "out-domain" => {
                Some(AnnotationLabel::OutOfDomain)
            }
            "academic" | "academic-vocabulary" => Some(AnnotationLabel::Academic),
            "irrelevant" | "irrelevant-sequence" | "non-term" | "nonterm" => {
                Some(AnnotationLabel::Irrelevant)
            }
            _ => None,
        }
    }
}

impl fmt::Display for AnnotationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binarization of the four categories.
///
/// Exclusive: positive iff in-domain. Inclusive: negative iff irrelevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    Exclusive,
    Inclusive,
}

impl Mapping {
    pub fn is_positive(self, label: AnnotationLabel) -> bool {
        match self {
            Mapping::Exclusive => label == AnnotationLabel::InDomain,
            Mapping::Inclusive => label != AnnotationLabel::Irrelevant,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mapping::Exclusive => "exclusive",
            Mapping::Inclusive => "inclusive",
        }
    }
}

impl FromStr for Mapping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "exclusive" => Ok(Mapping::Exclusive),
            "inclusive" => Ok(Mapping::Inclusive),
            other => Err(format!("unknown mapping \"{other}\"")),
        }
    }
}

/// Multi-word (length >= 2) vs single-word (length 1) candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Mwt,
    Swt,
}

impl Subset {
    pub fn contains(self, length: usize) -> bool {
        match self {
            Subset::Mwt => length >= 2,
            Subset::Swt => length == 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Mwt => "MWT",
            Subset::Swt => "SWT",
        }
    }
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "mwt" => Ok(Subset::Mwt),
            "swt" => Ok(Subset::Swt),
            other => Err(format!("unknown subset \"{other}\" (expected mwt or swt)")),
        }
    }
}

/// One of the precomputed per-instance statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Freq,
    Tfidf,
    Chisq,
    Dice,
    Mi,
    Tscore,
    Ll,
    Cvalue,
}

impl Statistic {
    pub const ALL: [Statistic; 8] = [
        Statistic::Freq,
        Statistic::Tfidf,
        Statistic::Chisq,
        Statistic::Dice,
        Statistic::Mi,
        Statistic::Tscore,
        Statistic::Ll,
        Statistic::Cvalue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Freq => "freq",
            Statistic::Tfidf => "tfidf",
            Statistic::Chisq => "chisq",
            Statistic::Dice => "dice",
            Statistic::Mi => "mi",
            Statistic::Tscore => "tscore",
            Statistic::Ll => "ll",
            Statistic::Cvalue => "cvalue",
        }
    }
}

impl FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Statistic::ALL
            .iter()
            .find(|st| st.as_str() == s.to_lowercase())
            .copied()
            .ok_or_else(|| format!("unknown statistic \"{s}\""))
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The precomputed statistics of one instance. Association measures are
/// `None` for single-word candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub freq: f64,
    pub tfidf: f64,
    pub chisq: Option<f64>,
    pub dice: Option<f64>,
    pub mi: Option<f64>,
    pub tscore: Option<f64>,
    pub ll: Option<f64>,
}

/// One dataset row: candidate metadata, four annotator labels and the
/// precomputed statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub thesis_id: String,
    pub area: String,
    pub round: u32,
    pub lemma_seq: String,
    pub surface_seq: String,
    pub pattern: String,
    pub length: usize,
    pub labels: [AnnotationLabel; 4],
    pub stats: InstanceStats,
}

impl Instance {
    /// Per-annotator binarization under the given mapping.
    pub fn binarized(&self, mapping: Mapping) -> [bool; 4] {
        self.labels.map(|l| mapping.is_positive(l))
    }

    /// Arithmetic mean of the four binarized labels; the regression target.
    pub fn average_annotation(&self, mapping: Mapping) -> f64 {
        let positives = self.binarized(mapping).iter().filter(|&&b| b).count();
        positives as f64 / 4.0
    }

    /// Majority gold with ties positive: 1 iff at least 2 of 4 binarized
    /// labels are positive.
    pub fn gold_binary(&self, mapping: Mapping) -> bool {
        self.binarized(mapping).iter().filter(|&&b| b).count() >= 2
    }

    /// The value of a precomputed statistic, `None` when absent. C-value is
    /// not stored per instance; see [`Dataset::cvalues`].
    pub fn statistic(&self, stat: Statistic) -> Option<f64> {
        match stat {
            Statistic::Freq => Some(self.stats.freq),
            Statistic::Tfidf => Some(self.stats.tfidf),
            Statistic::Chisq => self.stats.chisq,
            Statistic::Dice => self.stats.dice,
            Statistic::Mi => self.stats.mi,
            Statistic::Tscore => self.stats.tscore,
            Statistic::Ll => self.stats.ll,
            Statistic::Cvalue => None,
        }
    }
}

/// Canonical column names. A header map translates a published file's
/// column names onto these.
pub const CANONICAL_COLUMNS: [&str; 18] = [
    "thesis_id",
    "area",
    "round",
    "lemma_seq",
    "surface_seq",
    "pattern",
    "length",
    "annotator1",
    "annotator2",
    "annotator3",
    "annotator4",
    "freq",
    "tfidf",
    "chisq",
    "dice",
    "mi",
    "tscore",
    "ll",
];

/// Maps canonical field names onto the column names used by an input file.
/// Parsed from a simple `key=value` file, one entry per line, `#` comments.
#[derive(Debug, Clone, Default)]
pub struct HeaderMap {
    map: HashMap<String, String>,
}

impl HeaderMap {
    /// Identity map: the file uses the canonical column names.
    pub fn identity() -> HeaderMap {
        HeaderMap::default()
    }

    pub fn parse(text: &str) -> Result<HeaderMap, DatasetError> {
        let mut map = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(DatasetError::BadHeaderMap { line: idx + 1 })?;
            let key = key.trim();
            if !CANONICAL_COLUMNS.contains(&key) {
                return Err(DatasetError::UnknownHeaderKey { key: key.into() });
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(HeaderMap { map })
    }

    pub fn from_path(path: &Path) -> Result<HeaderMap, DatasetError> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        HeaderMap::parse(&text)
    }

    /// The file column name for a canonical field.
    pub fn column<'a>(&'a self, ours: &'a str) -> &'a str {
        self.map.get(ours).map(String::as_str).unwrap_or(ours)
    }
}

/// Per-area absolute and relative label counts, pooled over annotators.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaDistribution {
    pub area: String,
    pub instances: u64,
    /// Counts in [`AnnotationLabel::ALL`] order.
    pub counts: [u64; 4],
    pub proportions: [f64; 4],
}

/// The full dataset. Duplicate candidates across theses are legal and kept.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>) -> Result<Dataset, DatasetError> {
        let ds = Dataset { instances };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let mut areas: HashMap<&str, &str> = HashMap::new();
        for inst in &self.instances {
            if let Some(&prev) = areas.get(inst.thesis_id.as_str()) {
                if prev != inst.area {
                    return Err(DatasetError::InconsistentArea {
                        thesis_id: inst.thesis_id.clone(),
                        first: prev.to_string(),
                        second: inst.area.clone(),
                    });
                }
            } else {
                areas.insert(&inst.thesis_id, &inst.area);
            }
        }
        Ok(())
    }

    pub fn read_csv_path(path: &Path, header_map: &HeaderMap) -> Result<Dataset, DatasetError> {
        Dataset::read_csv(BufReader::new(File::open(path)?), header_map)
    }

    pub fn read_csv<R: Read>(reader: R, header_map: &HeaderMap) -> Result<Dataset, DatasetError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = csv_reader.headers()?.clone();
        let col = |ours: &str| -> Result<usize, DatasetError> {
            let name = header_map.column(ours);
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DatasetError::MissingColumn {
                    column: name.to_string(),
                })
        };

        let idx_thesis = col("thesis_id")?;
        let idx_area = col("area")?;
        let idx_round = col("round")?;
        let idx_lemma = col("lemma_seq")?;
        let idx_surface = col("surface_seq")?;
        let idx_pattern = col("pattern")?;
        let idx_length = col("length")?;
        let idx_ann: Vec<usize> = (1..=4)
            .map(|i| col(&format!("annotator{i}")))
            .collect::<Result<_, _>>()?;
        let idx_freq = col("freq")?;
        let idx_tfidf = col("tfidf")?;
        let idx_assoc: Vec<usize> = ["chisq", "dice", "mi", "tscore", "ll"]
            .iter()
            .map(|c| col(c))
            .collect::<Result<_, _>>()?;

        let mut instances = Vec::new();
        for (row_idx, record) in csv_reader.records().enumerate() {
            let record = record?;
            let row = row_idx + 2; // header is line 1
            let field = |i: usize| record.get(i).unwrap_or("").trim();

            let number = |i: usize, name: &str| -> Result<f64, DatasetError> {
                field(i).parse::<f64>().map_err(|_| DatasetError::BadNumber {
                    row,
                    column: header_map.column(name).to_string(),
                    value: field(i).to_string(),
                })
            };
            let opt_number = |i: usize, name: &str| -> Result<Option<f64>, DatasetError> {
                if field(i).is_empty() {
                    Ok(None)
                } else {
                    number(i, name).map(Some)
                }
            };

            let mut labels = [AnnotationLabel::Irrelevant; 4];
            for (slot, &i) in labels.iter_mut().zip(&idx_ann) {
                *slot = AnnotationLabel::parse(field(i)).ok_or_else(|| {
                    DatasetError::UnknownLabel {
                        row,
                        column: headers.get(i).unwrap_or("").to_string(),
                        value: field(i).to_string(),
                    }
                })?;
            }

            instances.push(Instance {
                thesis_id: field(idx_thesis).to_string(),
                area: field(idx_area).to_string(),
                round: number(idx_round, "round")? as u32,
                lemma_seq: field(idx_lemma).to_string(),
                surface_seq: field(idx_surface).to_string(),
                pattern: field(idx_pattern).to_string(),
                length: number(idx_length, "length")? as usize,
                labels,
                stats: InstanceStats {
                    freq: number(idx_freq, "freq")?,
                    tfidf: number(idx_tfidf, "tfidf")?,
                    chisq: opt_number(idx_assoc[0], "chisq")?,
                    dice: opt_number(idx_assoc[1], "dice")?,
                    mi: opt_number(idx_assoc[2], "mi")?,
                    tscore: opt_number(idx_assoc[3], "tscore")?,
                    ll: opt_number(idx_assoc[4], "ll")?,
                },
            });
        }
        Dataset::new(instances)
    }

    pub fn read_json_path(path: &Path, header_map: &HeaderMap) -> Result<Dataset, DatasetError> {
        Dataset::read_json(BufReader::new(File::open(path)?), header_map)
    }

    /// JSON form: an array of flat objects keyed like the CSV columns.
    pub fn read_json<R: Read>(reader: R, header_map: &HeaderMap) -> Result<Dataset, DatasetError> {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> =
            serde_json::from_reader(reader)?;
        let mut instances = Vec::new();
        for (row_idx, obj) in rows.iter().enumerate() {
            let row = row_idx + 1;
            let get = |ours: &str| -> Result<&serde_json::Value, DatasetError> {
                let name = header_map.column(ours);
                obj.get(name).ok_or_else(|| DatasetError::MissingColumn {
                    column: name.to_string(),
                })
            };
            let string = |ours: &str| -> Result<String, DatasetError> {
                let v = get(ours)?;
                Ok(v.as_str()
                    .map(str::to_string)
                    .unwrap_or_else(|| v.to_string()))
            };
            let number = |ours: &str| -> Result<f64, DatasetError> {
                let v = get(ours)?;
                v.as_f64()
                    .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
                    .ok_or_else(|| DatasetError::BadNumber {
                        row,
                        column: header_map.column(ours).to_string(),
                        value: v.to_string(),
                    })
            };
            let opt_number = |ours: &str| -> Result<Option<f64>, DatasetError> {
                let name = header_map.column(ours);
                match obj.get(name) {
                    None | Some(serde_json::Value::Null) => Ok(None),
                    Some(serde_json::Value::String(s)) if s.trim().is_empty() => Ok(None),
                    Some(_) => number(ours).map(Some),
                }
            };

            let mut labels = [AnnotationLabel::Irrelevant; 4];
            for (i, slot) in labels.iter_mut().enumerate() {
                let ours = format!("annotator{}", i + 1);
                let value = string(&ours)?;
                *slot = AnnotationLabel::parse(&value).ok_or_else(|| {
                    DatasetError::UnknownLabel {
                        row,
                        column: header_map.column(&ours).to_string(),
                        value,
                    }
                })?;
            }

            instances.push(Instance {
                thesis_id: string("thesis_id")?,
                area: string("area")?,
                round: number("round")? as u32,
                lemma_seq: string("lemma_seq")?,
                surface_seq: string("surface_seq")?,
                pattern: string("pattern")?,
                length: number("length")? as usize,
                labels,
                stats: InstanceStats {
                    freq: number("freq")?,
                    tfidf: number("tfidf")?,
                    chisq: opt_number("chisq")?,
                    dice: opt_number("dice")?,
                    mi: opt_number("mi")?,
                    tscore: opt_number("tscore")?,
                    ll: opt_number("ll")?,
                },
            });
        }
        Dataset::new(instances)
    }

    /// Read either format, dispatching on the file extension (`.json` vs
    /// anything else treated as CSV).
    pub fn read_path(path: &Path, header_map: &HeaderMap) -> Result<Dataset, DatasetError> {
        if path.extension().is_some_and(|e| e == "json") {
            Dataset::read_json_path(path, header_map)
        } else {
            Dataset::read_csv_path(path, header_map)
        }
    }

    /// Write canonical CSV: UTF-8, comma-delimited, header row, absent
    /// values as empty fields, floats with six significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CANONICAL_COLUMNS)?;
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        for inst in &self.instances {
            w.write_record([
                inst.thesis_id.as_str(),
                inst.area.as_str(),
                &inst.round.to_string(),
                inst.lemma_seq.as_str(),
                inst.surface_seq.as_str(),
                inst.pattern.as_str(),
                &inst.length.to_string(),
                inst.labels[0].as_str(),
                inst.labels[1].as_str(),
                inst.labels[2].as_str(),
                inst.labels[3].as_str(),
                &fmt_num(inst.stats.freq),
                &fmt_num(inst.stats.tfidf),
                &opt(inst.stats.chisq),
                &opt(inst.stats.dice),
                &opt(inst.stats.mi),
                &opt(inst.stats.tscore),
                &opt(inst.stats.ll),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write the JSON form: an array of flat objects with canonical keys and
    /// `null` for absent statistics.
    pub fn write_json<W: Write>(&self, mut writer: W) -> Result<(), DatasetError> {
        let rows: Vec<serde_json::Value> = self
            .instances
            .iter()
            .map(|inst| {
                serde_json::json!({
                    "thesis_id": inst.thesis_id,
                    "area": inst.area,
                    "round": inst.round,
                    "lemma_seq": inst.lemma_seq,
                    "surface_seq": inst.surface_seq,
                    "pattern": inst.pattern,
                    "length": inst.length,
                    "annotator1": inst.labels[0].as_str(),
                    "annotator2": inst.labels[1].as_str(),
                    "annotator3": inst.labels[2].as_str(),
                    "annotator4": inst.labels[3].as_str(),
                    "freq": inst.stats.freq,
                    "tfidf": inst.stats.tfidf,
                    "chisq": inst.stats.chisq,
                    "dice": inst.stats.dice,
                    "mi": inst.stats.mi,
                    "tscore": inst.stats.tscore,
                    "ll": inst.stats.ll,
                })
            })
            .collect();
        serde_json::to_writer_pretty(&mut writer, &rows)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    /// Distinct thesis ids in first-appearance order.
    pub fn thesis_ids(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for inst in &self.instances {
            if !seen.contains(&inst.thesis_id.as_str()) {
                seen.push(&inst.thesis_id);
            }
        }
        seen
    }

    /// Distinct areas, sorted.
    pub fn areas(&self) -> Vec<&str> {
        let mut areas: Vec<&str> = Vec::new();
        for inst in &self.instances {
            if !areas.contains(&inst.area.as_str()) {
                areas.push(&inst.area);
            }
        }
        areas.sort_unstable();
        areas
    }

    /// Indices of the instances belonging to a subset.
    pub fn subset_indices(&self, subset: Subset) -> Vec<usize> {
        self.instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| subset.contains(inst.length))
            .map(|(i, _)| i)
            .collect()
    }

    /// Per-area label counts pooled over the four annotators, in sorted
    /// area order.
    pub fn label_distribution(&self) -> Vec<AreaDistribution> {
        let mut per_area: HashMap<&str, ([u64; 4], u64)> = HashMap::new();
        for inst in &self.instances {
            let entry = per_area.entry(&inst.area).or_insert(([0; 4], 0));
            entry.1 += 1;
            for label in inst.labels {
                let pos = AnnotationLabel::ALL.iter().position(|&l| l == label).unwrap();
                entry.0[pos] += 1;
            }
        }
        let mut areas: Vec<&str> = per_area.keys().copied().collect();
        areas.sort_unstable();
        areas
            .into_iter()
            .map(|area| {
                let (counts, instances) = per_area[area];
                let total = (instances * 4) as f64;
                AreaDistribution {
                    area: area.to_string(),
                    instances,
                    counts,
                    proportions: counts.map(|c| c as f64 / total),
                }
            })
            .collect()
    }

    /// C-value per instance, computed from per-thesis candidate nesting.
    /// `None` for single-word candidates.
    pub fn cvalues(&self) -> Vec<Option<f64>> {
        let mut by_thesis: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, inst) in self.instances.iter().enumerate() {
            by_thesis.entry(&inst.thesis_id).or_default().push(i);
        }
        let mut out = vec![None; self.instances.len()];
        for indices in by_thesis.values() {
            for &i in indices {
                let inst = &self.instances[i];
                if inst.length < 2 {
                    continue;
                }
                let containers: Vec<f64> = indices
                    .iter()
                    .map(|&j| &self.instances[j])
                    .filter(|other| is_proper_subsequence(&inst.lemma_seq, &other.lemma_seq))
                    .map(|other| other.stats.freq)
                    .collect();
                out[i] = Some(c_value_from_nested(
                    inst.length,
                    inst.stats.freq,
                    &containers,
                ));
            }
        }
        out
    }
}
