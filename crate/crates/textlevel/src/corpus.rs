//! Difficulty-annotated corpora.
//!
//! A corpus is an ordered list of passages, each carrying per-rater scores
//! and a consensus label on the numeric 1-6 CEFR scale. This module covers
//! the nine-point rating scale, JSONL ingestion with validation, canonical
//! serialization, deterministic train/test splitting, and level-distribution
//! tooling (floor histogram, balanced subsampling).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::tokenize;
use crate::seeding;
use crate::{Error, Result, SCALE_MAX, SCALE_MIN};

/// The nine admissible rating points. "+" variants exist only for A2-B2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CefrLevel {
    A1,
    A2,
    A2Plus,
    B1,
    B1Plus,
    B2,
    B2Plus,
    C1,
    C2,
}

impl CefrLevel {
    /// All levels in ascending numeric order.
    pub const ALL: [CefrLevel; 9] = [
        CefrLevel::A1,
        CefrLevel::A2,
        CefrLevel::A2Plus,
        CefrLevel::B1,
        CefrLevel::B1Plus,
        CefrLevel::B2,
        CefrLevel::B2Plus,
        CefrLevel::C1,
        CefrLevel::C2,
    ];

    /// Numeric value on the 1-6 scale.
    pub fn value(self) -> f64 {
        match self {
            CefrLevel::A1 => 1.0,
            CefrLevel::A2 => 2.0,
            CefrLevel::A2Plus => 2.5,
            CefrLevel::B1 => 3.0,
            CefrLevel::B1Plus => 3.5,
            CefrLevel::B2 => 4.0,
            CefrLevel::B2Plus => 4.5,
            CefrLevel::C1 => 5.0,
            CefrLevel::C2 => 6.0,
        }
    }

    /// Display name ("A2+", "C1", ...).
    pub fn name(self) -> &'static str {
        match self {
            CefrLevel::A1 => "A1",
            CefrLevel::A2 => "A2",
            CefrLevel::A2Plus => "A2+",
            CefrLevel::B1 => "B1",
            CefrLevel::B1Plus => "B1+",
            CefrLevel::B2 => "B2",
            CefrLevel::B2Plus => "B2+",
            CefrLevel::C1 => "C1",
            CefrLevel::C2 => "C2",
        }
    }

    /// Parse a display name, case-insensitively, ignoring surrounding
    /// whitespace.
    pub fn parse(name: &str) -> Result<CefrLevel> {
        let canon = name.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|lvl| lvl.name() == canon)
            .ok_or_else(|| Error::UnknownLevel(name.trim().to_string()))
    }

    /// Class index 0..=8 in ascending order, as used by the QWK weights.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|l| *l == self).expect("in ALL")
    }
}

impl fmt::Display for CefrLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Numeric value of a CEFR label string ("A2+" -> 2.5).
pub fn parse_level(name: &str) -> Result<f64> {
    CefrLevel::parse(name).map(CefrLevel::value)
}

/// The admissible rating point nearest to a score in [1, 6]. Exact midpoints
/// round up to the higher level.
pub fn level_from_score(score: f64) -> Result<CefrLevel> {
    if !(SCALE_MIN..=SCALE_MAX).contains(&score) {
        return Err(Error::ScoreOutOfRange(score));
    }
    let mut best = CefrLevel::A1;
    let mut best_dist = f64::INFINITY;
    for lvl in CefrLevel::ALL {
        let dist = (score - lvl.value()).abs();
        // `<=` lets the later, higher level win exact ties.
        if dist <= best_dist {
            best = lvl;
            best_dist = dist;
        }
    }
    Ok(best)
}

/// Arithmetic mean of a non-empty rating list.
pub fn consensus(ratings: &[f64]) -> Result<f64> {
    if ratings.is_empty() {
        return Err(Error::EmptyRatings);
    }
    Ok(ratings.iter().sum::<f64>() / ratings.len() as f64)
}

/// Which half of the train/test split a passage belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One annotated text passage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ratings: Vec<f64>,
    /// Consensus difficulty in [1, 6]; equals the mean of `ratings` when any
    /// are present.
    pub label: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Passage {
    /// Token count of the passage text.
    pub fn word_count(&self) -> usize {
        tokenize(&self.text).len()
    }
}

/// Wire format of one dataset line. `ratings` and `label` are both optional
/// in the file; at least one must be present.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    text: String,
    #[serde(default)]
    ratings: Vec<f64>,
    label: Option<f64>,
    split: Option<Split>,
    source: Option<String>,
}

/// Where a corpus came from. Not part of corpus equality and never
/// serialized.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub path: PathBuf,
    pub loaded_at: SystemTime,
}

/// An ordered, validated collection of passages. Immutable after
/// construction, so shared references are safe across threads.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    passages: Vec<Passage>,
    provenance: Option<Provenance>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.passages == other.passages
    }
}

impl Corpus {
    /// Build a corpus from passages, enforcing the type invariants: unique
    /// ids, labels in range and consistent with ratings, tokenizable text.
    pub fn from_passages(passages: Vec<Passage>) -> Result<Corpus> {
        let mut seen = HashSet::new();
        for p in &passages {
            if !seen.insert(p.id.clone()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
            for &r in &p.ratings {
                if !(SCALE_MIN..=SCALE_MAX).contains(&r) {
                    return Err(Error::RatingOutOfRange {
                        id: p.id.clone(),
                        value: r,
                    });
                }
            }
            if !(SCALE_MIN..=SCALE_MAX).contains(&p.label) {
                return Err(Error::LabelOutOfRange {
                    id: p.id.clone(),
                    value: p.label,
                });
            }
            if !p.ratings.is_empty() {
                let mean = consensus(&p.ratings)?;
                if (mean - p.label).abs() > 1e-9 {
                    return Err(Error::LabelMismatch {
                        id: p.id.clone(),
                        stored: p.label,
                        computed: mean,
                    });
                }
            }
            if tokenize(&p.text).is_empty() {
                return Err(Error::NoTokens { id: p.id.clone() });
            }
        }
        Ok(Corpus {
            passages,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn into_passages(self) -> Vec<Passage> {
        self.passages
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Consensus labels in passage order.
    pub fn labels(&self) -> Vec<f64> {
        self.passages.iter().map(|p| p.label).collect()
    }

    fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            passages: indices.iter().map(|&i| self.passages[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Parse a newline-delimited corpus from a reader. Labels are recomputed
/// from ratings when ratings are present; a stored label that disagrees with
/// the recomputed mean by more than 1e-6 is rejected.
pub fn read_corpus<R: Read>(reader: R) -> Result<Vec<Passage>> {
    let mut passages = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: lineno,
                message: e.to_string(),
            })?;
        for &r in &raw.ratings {
            if !(SCALE_MIN..=SCALE_MAX).contains(&r) {
                return Err(Error::RatingOutOfRange {
                    id: raw.id,
                    value: r,
                });
            }
        }
        let label = if raw.ratings.is_empty() {
            let label = raw.label.ok_or(Error::MissingLabel {
                id: raw.id.clone(),
            })?;
            if !(SCALE_MIN..=SCALE_MAX).contains(&label) {
                return Err(Error::LabelOutOfRange {
                    id: raw.id,
                    value: label,
                });
            }
            label
        } else {
            let computed = consensus(&raw.ratings)?;
            if let Some(stored) = raw.label {
                if (stored - computed).abs() > 1e-6 {
                    return Err(Error::LabelMismatch {
                        id: raw.id,
                        stored,
                        computed,
                    });
                }
            }
            computed
        };
        if tokenize(&raw.text).is_empty() {
            return Err(Error::NoTokens { id: raw.id });
        }
        passages.push(Passage {
            id: raw.id,
            text: raw.text,
            ratings: raw.ratings,
            label,
            split: raw.split,
            source: raw.source,
        });
    }
    Ok(passages)
}

/// Load and validate a corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    let passages = read_corpus(file)?;
    let mut corpus = Corpus::from_passages(passages)?;
    corpus.provenance = Some(Provenance {
        path: path.to_path_buf(),
        loaded_at: SystemTime::now(),
    });
    Ok(corpus)
}

/// Canonical serialization of one passage: fixed field order, optional
/// fields omitted when absent, shortest-round-trip floats.
pub fn passage_to_line(passage: &Passage) -> Result<String> {
    serde_json::to_string(passage).map_err(|e| Error::MalformedRecord {
        line: 0,
        message: e.to_string(),
    })
}

/// Write a corpus in the dataset file format. `load(save(c))` reproduces the
/// same passages byte-for-byte on re-save.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for p in corpus.passages() {
        out.push_str(&passage_to_line(p)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Split a corpus into train and test halves.
///
/// When every passage carries a split tag the tags are honored and the seed
/// is ignored. Otherwise the passages are shuffled with the seed and split
/// evenly, an odd count putting the extra passage in train.
pub fn split_corpus(corpus: &Corpus, seed: u64) -> Result<(Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let all_tagged = corpus.passages().iter().all(|p| p.split.is_some());
    if all_tagged {
        let train: Vec<usize> = (0..corpus.len())
            .filter(|&i| corpus.passages[i].split == Some(Split::Train))
            .collect();
        let test: Vec<usize> = (0..corpus.len())
            .filter(|&i| corpus.passages[i].split == Some(Split::Test))
            .collect();
        return Ok((corpus.subset(&train), corpus.subset(&test)));
    }
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = seeding::derived_rng(seed, "split", 0);
    indices.shuffle(&mut rng);
    let train_len = corpus.len().div_ceil(2);
    Ok((
        corpus.subset(&indices[..train_len]),
        corpus.subset(&indices[train_len..]),
    ))
}

/// Count passages per floor(label). Keys run 1..=6; a label of exactly 6
/// lands in the C2 bucket.
pub fn floor_histogram(corpus: &Corpus) -> BTreeMap<u8, usize> {
    let mut hist = BTreeMap::new();
    for p in corpus.passages() {
        *hist.entry(p.label.floor() as u8).or_insert(0) += 1;
    }
    hist
}

/// Downsample every floor-level bucket to the size of the smallest, giving a
/// perfectly balanced level distribution. All six floor levels must be
/// present. Passage order is preserved.
pub fn balanced_subsample(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let mut buckets: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, p) in corpus.passages().iter().enumerate() {
        buckets.entry(p.label.floor() as u8).or_default().push(i);
    }
    let missing: Vec<u8> = (1..=6).filter(|l| !buckets.contains_key(l)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingBuckets { missing });
    }
    let target = buckets.values().map(Vec::len).min().expect("six buckets");
    let mut keep = Vec::new();
    for (level, mut indices) in buckets {
        let mut rng = seeding::derived_rng(seed, "balance", u64::from(level));
        indices.shuffle(&mut rng);
        keep.extend_from_slice(&indices[..target]);
    }
    keep.sort_unstable();
    Ok(corpus.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn passage(id: &str, text: &str, label: f64) -> Passage {
        Passage {
            id: id.to_string(),
            text: text.to_string(),
            ratings: Vec::new(),
            label,
            split: None,
            source: None,
        }
    }

    fn corpus_with_labels(labels: &[f64]) -> Corpus {
        let passages = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| passage(&format!("p{i}"), "Some text here.", l))
            .collect();
        Corpus::from_passages(passages).unwrap()
    }

    #[test]
    fn level_mapping_matches_the_nine_point_scale() {
        let expected = [
            ("A1", 1.0),
            ("A2", 2.0),
            ("A2+", 2.5),
            ("B1", 3.0),
            ("B1+", 3.5),
            ("B2", 4.0),
            ("B2+", 4.5),
            ("C1", 5.0),
            ("C2", 6.0),
        ];
        for (name, value) in expected {
            assert_eq!(parse_level(name).unwrap(), value, "{name}");
        }
        assert_eq!(parse_level(" b1+ ").unwrap(), 3.5);
        assert!(matches!(parse_level("C1+"), Err(Error::UnknownLevel(_))));
        assert!(matches!(parse_level("A0"), Err(Error::UnknownLevel(_))));
    }

    #[test]
    fn score_to_level_rounds_to_nearest_and_ties_up() {
        assert_eq!(level_from_score(3.5).unwrap(), CefrLevel::B1Plus);
        // 2.75 is the exact midpoint of 2.5 and 3.0: round up.
        assert_eq!(level_from_score(2.75).unwrap(), CefrLevel::B1);
        assert_eq!(level_from_score(5.4).unwrap(), CefrLevel::C1);
        assert_eq!(level_from_score(5.5).unwrap(), CefrLevel::C2);
        assert!(level_from_score(0.99).is_err());
        assert!(level_from_score(6.01).is_err());
        assert!(level_from_score(f64::NAN).is_err());
    }

    #[test]
    fn parse_and_display_are_inverse_on_admissible_points() {
        for lvl in CefrLevel::ALL {
            assert_eq!(CefrLevel::parse(lvl.name()).unwrap(), lvl);
            assert_eq!(level_from_score(lvl.value()).unwrap(), lvl);
        }
    }

    #[test]
    fn consensus_is_the_mean() {
        assert_eq!(consensus(&[2.5, 3.0]).unwrap(), 2.75);
        assert_eq!(consensus(&[4.0]).unwrap(), 4.0);
        assert_eq!(consensus(&[1.0, 6.0]).unwrap(), 3.5);
        assert!(matches!(consensus(&[]), Err(Error::EmptyRatings)));
    }

    #[test]
    fn load_recomputes_label_from_ratings() {
        let data = r#"{"id":"p1","text":"Hello.","ratings":[1,1]}"#;
        let passages = read_corpus(data.as_bytes()).unwrap();
        assert_eq!(passages[0].label, 1.0);
    }

    #[test]
    fn load_rejects_bad_records() {
        let out_of_range = r#"{"id":"p1","text":"Hello.","label":7}"#;
        assert!(matches!(
            read_corpus(out_of_range.as_bytes()),
            Err(Error::LabelOutOfRange { .. })
        ));

        let mismatch = r#"{"id":"p1","text":"Hello.","ratings":[1,2],"label":2.0}"#;
        assert!(matches!(
            read_corpus(mismatch.as_bytes()),
            Err(Error::LabelMismatch { .. })
        ));

        let no_label = r#"{"id":"p1","text":"Hello."}"#;
        assert!(matches!(
            read_corpus(no_label.as_bytes()),
            Err(Error::MissingLabel { .. })
        ));

        let bad_rating = r#"{"id":"p1","text":"Hello.","ratings":[0.5]}"#;
        assert!(matches!(
            read_corpus(bad_rating.as_bytes()),
            Err(Error::RatingOutOfRange { .. })
        ));

        let no_tokens = r#"{"id":"p1","text":"!!!","label":2}"#;
        assert!(matches!(
            read_corpus(no_tokens.as_bytes()),
            Err(Error::NoTokens { .. })
        ));

        let malformed = r#"{"id":"p1","#;
        assert!(matches!(
            read_corpus(malformed.as_bytes()),
            Err(Error::MalformedRecord { line: 1, .. })
        ));

        let dup = concat!(
            r#"{"id":"p1","text":"Hello.","label":2}"#,
            "\n",
            r#"{"id":"p1","text":"Bye.","label":3}"#
        );
        assert!(matches!(
            Corpus::from_passages(read_corpus(dup.as_bytes()).unwrap()),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn stored_label_within_tolerance_is_accepted() {
        let data = r#"{"id":"p1","text":"Hello.","ratings":[2.5,3.0],"label":2.75}"#;
        let passages = read_corpus(data.as_bytes()).unwrap();
        assert_eq!(passages[0].label, 2.75);
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut p1 = passage("a", "One two three.", 2.75);
        p1.ratings = vec![2.5, 3.0];
        let mut p2 = passage("b", "hobby", 1.0);
        p2.split = Some(Split::Test);
        p2.source = Some("authored".to_string());
        let corpus = Corpus::from_passages(vec![p1, p2]).unwrap();

        save_corpus(&corpus, &path).unwrap();
        let reloaded = load_corpus(&path).unwrap();
        assert_eq!(reloaded, corpus);

        let first = fs::read(&path).unwrap();
        save_corpus(&reloaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn split_is_even_and_deterministic() {
        let corpus = corpus_with_labels(&[1.0, 2.0, 3.0]);
        let (train, test) = split_corpus(&corpus, 7).unwrap();
        assert_eq!((train.len(), test.len()), (2, 1));

        let (train2, test2) = split_corpus(&corpus, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);

        assert!(split_corpus(&Corpus::default(), 7).is_err());
    }

    #[test]
    fn split_honors_tags_when_all_present() {
        let mut passages = vec![
            passage("a", "Text one.", 1.0),
            passage("b", "Text two.", 2.0),
            passage("c", "Text three.", 3.0),
        ];
        passages[0].split = Some(Split::Test);
        passages[1].split = Some(Split::Train);
        passages[2].split = Some(Split::Test);
        let corpus = Corpus::from_passages(passages).unwrap();
        let (train, test) = split_corpus(&corpus, 0).unwrap();
        assert_eq!(train.passages()[0].id, "b");
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn histogram_floors_labels() {
        let corpus = corpus_with_labels(&[2.5, 2.0]);
        assert_eq!(floor_histogram(&corpus), BTreeMap::from([(2, 2)]));
        assert!(floor_histogram(&Corpus::default()).is_empty());
        // Exactly 6 counts as C2.
        let c2 = corpus_with_labels(&[6.0, 5.5]);
        assert_eq!(floor_histogram(&c2), BTreeMap::from([(5, 1), (6, 1)]));
    }

    #[test]
    fn balanced_subsample_downsamples_to_min_bucket() {
        // Bucket sizes 3,5,4,6,3,5 -> every bucket trimmed to 3.
        let mut labels = Vec::new();
        for (level, count) in [(1, 3), (2, 5), (3, 4), (4, 6), (5, 3), (6, 5)] {
            for _ in 0..count {
                labels.push(level as f64 + if level < 6 { 0.25 } else { 0.0 });
            }
        }
        let corpus = corpus_with_labels(&labels);
        let balanced = balanced_subsample(&corpus, 11).unwrap();
        let hist = floor_histogram(&balanced);
        assert_eq!(hist.len(), 6);
        assert!(hist.values().all(|&n| n == 3));
    }

    #[test]
    fn balanced_subsample_keeps_already_balanced_corpus() {
        let labels: Vec<f64> = (1..=6).map(|l| l as f64).collect();
        let corpus = corpus_with_labels(&labels);
        let balanced = balanced_subsample(&corpus, 3).unwrap();
        assert_eq!(balanced, corpus);
    }

    #[test]
    fn balanced_subsample_reports_missing_levels() {
        let corpus = corpus_with_labels(&[1.0, 2.0]);
        match balanced_subsample(&corpus, 0) {
            Err(Error::MissingBuckets { missing }) => {
                assert_eq!(missing, vec![3, 4, 5, 6]);
            }
            other => panic!("expected MissingBuckets, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn consensus_is_permutation_invariant_and_bounded(
            mut ratings in proptest::collection::vec(1f64..=6.0, 1..12),
        ) {
            let mean = consensus(&ratings).unwrap();
            let min = ratings.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = ratings.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(mean >= min - 1e-12 && mean <= max + 1e-12);

            ratings.reverse();
            let reversed = consensus(&ratings).unwrap();
            prop_assert!((mean - reversed).abs() < 1e-12);
        }

        #[test]
        fn split_partitions_the_corpus(n in 1usize..40, seed in 0u64..1000) {
            let labels: Vec<f64> = (0..n).map(|i| 1.0 + (i % 6) as f64 * 0.9).collect();
            let corpus = corpus_with_labels(&labels);
            let (train, test) = split_corpus(&corpus, seed).unwrap();
            prop_assert_eq!(train.len(), n.div_ceil(2));
            prop_assert_eq!(train.len() + test.len(), n);

            let mut ids: Vec<&str> = train
                .passages()
                .iter()
                .chain(test.passages())
                .map(|p| p.id.as_str())
                .collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }
    }
}
