//! Linear stacking of base difficulty models.
//!
//! Base models contribute per-passage prediction files; a held-out tuning
//! slice of the test set fits one weight per base (plus intercept) by the
//! same least-squares solver the linear model uses. Externally produced
//! predictions (a separately trained encoder model, an LLM labeling pass)
//! join the stack through the prediction file format without this crate
//! training them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::linear_model::TrainingMeta;
use crate::seeding;
use crate::solver;
use crate::{clamp_score, metrics, Error, Result};

/// Current stacked-model file schema version.
pub const STACK_SCHEMA_VERSION: u32 = 1;

/// A fitted linear combination of base models.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    pub base_ids: Vec<String>,
    pub intercept: f64,
    /// One weight per base, in `base_ids` order.
    pub weights: Vec<f64>,
    pub training_meta: TrainingMeta,
}

/// A fit plus its tuning-set diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StackFit {
    pub model: StackedModel,
    /// Tuning MSE of each base on its own.
    pub per_base_tune_mse: Vec<f64>,
    /// Tuning MSE of the combination, before clamping. Never worse than the
    /// best base: each base is a feasible point of the least-squares
    /// objective.
    pub combined_tune_mse: f64,
}

#[derive(Serialize)]
struct StackFile<'a> {
    schema_version: u32,
    base_ids: &'a [String],
    intercept: f64,
    weights: &'a [f64],
    training_meta: &'a TrainingMeta,
}

#[derive(Deserialize)]
struct RawStackFile {
    schema_version: u32,
    base_ids: Vec<String>,
    intercept: f64,
    weights: Vec<f64>,
    training_meta: TrainingMeta,
}

impl StackedModel {
    /// Unclamped affine combination of base scores.
    pub fn raw_score(&self, base_scores: &[f64]) -> Result<f64> {
        if base_scores.len() != self.weights.len() {
            return Err(Error::ArityMismatch {
                expected: self.weights.len(),
                got: base_scores.len(),
            });
        }
        Ok(self.intercept
            + self
                .weights
                .iter()
                .zip(base_scores)
                .map(|(w, s)| w * s)
                .sum::<f64>())
    }

    /// Combined score, clamped to [1, 6].
    pub fn predict(&self, base_scores: &[f64]) -> Result<f64> {
        Ok(clamp_score(self.raw_score(base_scores)?))
    }

    /// Write the model as a single canonical JSON record.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let record = StackFile {
            schema_version: STACK_SCHEMA_VERSION,
            base_ids: &self.base_ids,
            intercept: self.intercept,
            weights: &self.weights,
            training_meta: &self.training_meta,
        };
        let mut line = serde_json::to_string(&record)
            .map_err(|e| Error::MalformedModel(e.to_string()))?;
        line.push('\n');
        fs::write(path, line)?;
        Ok(())
    }

    /// Load a stacked-model file, verifying version and shape.
    pub fn load(path: impl AsRef<Path>) -> Result<StackedModel> {
        let content = fs::read_to_string(path)?;
        let raw: RawStackFile = serde_json::from_str(content.trim())
            .map_err(|e| Error::MalformedModel(e.to_string()))?;
        if raw.schema_version != STACK_SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: raw.schema_version,
                expected: STACK_SCHEMA_VERSION,
            });
        }
        if raw.weights.len() != raw.base_ids.len() {
            return Err(Error::MalformedModel(format!(
                "{} base ids but {} weights",
                raw.base_ids.len(),
                raw.weights.len()
            )));
        }
        Ok(StackedModel {
            base_ids: raw.base_ids,
            intercept: raw.intercept,
            weights: raw.weights,
            training_meta: raw.training_meta,
        })
    }
}

/// Split a test corpus into a tuning slice and an evaluation remainder:
/// seeded, disjoint, exhaustive. Sizes are `(n_tune, len - n_tune)`.
pub fn tune_eval_split(test: &Corpus, n_tune: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    if n_tune == 0 || n_tune >= test.len() {
        return Err(Error::BadTuneSize {
            n_tune,
            len: test.len(),
        });
    }
    let mut indices: Vec<usize> = (0..test.len()).collect();
    let mut rng = seeding::derived_rng(seed, "tune-split", 0);
    indices.shuffle(&mut rng);
    let tune: Vec<usize> = indices[..n_tune].to_vec();
    let eval: Vec<usize> = indices[n_tune..].to_vec();
    let subset = |idx: &[usize]| {
        Corpus::from_passages(idx.iter().map(|&i| test.passages()[i].clone()).collect())
            .expect("subset of a valid corpus")
    };
    Ok((subset(&tune), subset(&eval)))
}

/// Fit stacking weights on tuning-set base predictions (one row per
/// passage, one column per base). Requires more rows than bases plus
/// intercept; rank-deficient prediction matrices fall back to the solver's
/// ridge path.
pub fn fit_stack(
    base_ids: &[String],
    base_predictions: &[Vec<f64>],
    labels: &[f64],
    seed: u64,
) -> Result<StackFit> {
    let m = base_ids.len();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    let n = base_predictions.len();
    if n != labels.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if n <= m + 1 {
        return Err(Error::InsufficientData {
            needed: m + 2,
            got: n,
        });
    }
    for row in base_predictions {
        if row.len() != m {
            return Err(Error::ArityMismatch {
                expected: m,
                got: row.len(),
            });
        }
    }

    let solution = solver::ols_with_intercept(base_predictions, labels)?;
    let model = StackedModel {
        base_ids: base_ids.to_vec(),
        intercept: solution.intercept,
        weights: solution.weights,
        training_meta: TrainingMeta {
            samples: n,
            seed,
            ridge_fallback: solution.ridge_fallback,
        },
    };

    let mut per_base_tune_mse = Vec::with_capacity(m);
    for col in 0..m {
        let preds: Vec<f64> = base_predictions.iter().map(|row| row[col]).collect();
        per_base_tune_mse.push(metrics::mse(&preds, labels)?);
    }
    let combined: Vec<f64> = base_predictions
        .iter()
        .map(|row| model.raw_score(row))
        .collect::<Result<_>>()?;
    let combined_tune_mse = metrics::mse(&combined, labels)?;

    Ok(StackFit {
        model,
        per_base_tune_mse,
        combined_tune_mse,
    })
}

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    id: String,
    score: f64,
}

/// Write a base-prediction file: one `{id, score}` record per line.
pub fn save_predictions(path: impl AsRef<Path>, entries: &[(String, f64)]) -> Result<()> {
    let mut out = String::new();
    for (id, score) in entries {
        let record = PredictionRecord {
            id: id.clone(),
            score: *score,
        };
        out.push_str(&serde_json::to_string(&record).map_err(|e| Error::MalformedRecord {
            line: 0,
            message: e.to_string(),
        })?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Load a base-prediction file into an id-keyed map.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let content = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if map.insert(record.id.clone(), record.score).is_some() {
            return Err(Error::DuplicateId(record.id));
        }
    }
    Ok(map)
}

/// Base scores for every passage of a corpus, in passage order. Every
/// passage must be covered.
pub fn align_predictions(corpus: &Corpus, scores: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    corpus
        .passages()
        .iter()
        .map(|p| {
            scores
                .get(&p.id)
                .copied()
                .ok_or_else(|| Error::MissingPrediction(p.id.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;
    use rand::Rng;

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn test_corpus(n: usize) -> Corpus {
        let passages = (0..n)
            .map(|i| Passage {
                id: format!("p{i}"),
                text: format!("Passage number {i} text."),
                ratings: Vec::new(),
                label: 1.0 + (i % 6) as f64,
                split: None,
                source: None,
            })
            .collect();
        Corpus::from_passages(passages).unwrap()
    }

    #[test]
    fn tune_eval_split_is_seeded_disjoint_exhaustive() {
        let corpus = test_corpus(10);
        let (tune, eval) = tune_eval_split(&corpus, 3, 5).unwrap();
        assert_eq!((tune.len(), eval.len()), (3, 7));
        let (tune2, eval2) = tune_eval_split(&corpus, 3, 5).unwrap();
        assert_eq!(tune, tune2);
        assert_eq!(eval, eval2);

        let mut all: Vec<&str> = tune
            .passages()
            .iter()
            .chain(eval.passages())
            .map(|p| p.id.as_str())
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 10);

        assert!(matches!(
            tune_eval_split(&corpus, 0, 5),
            Err(Error::BadTuneSize { .. })
        ));
        assert!(matches!(
            tune_eval_split(&corpus, 10, 5),
            Err(Error::BadTuneSize { .. })
        ));
    }

    #[test]
    fn perfect_base_yields_zero_tuning_mse() {
        let labels: Vec<f64> = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 2.5, 3.5];
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| vec![l, 3.0 + (i as f64 * 0.73).sin()])
            .collect();
        let fit = fit_stack(&ids(&["oracle", "noise"]), &rows, &labels, 0).unwrap();
        assert!(fit.combined_tune_mse < 1e-12, "{}", fit.combined_tune_mse);
    }

    #[test]
    fn duplicate_base_columns_take_the_ridge_path() {
        let labels = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l + 0.1, l + 0.1]).collect();
        let fit = fit_stack(&ids(&["a", "b"]), &rows, &labels, 0).unwrap();
        assert!(fit.model.training_meta.ridge_fallback);
        let combined = fit.model.predict(&[2.1, 2.1]).unwrap();
        assert!(combined.is_finite());
        let best_base = fit
            .per_base_tune_mse
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(fit.combined_tune_mse <= best_base + 1e-9);
    }

    #[test]
    fn combination_never_loses_to_the_best_base() {
        let mut rng = seeding::rng_from_seed(123);
        for _ in 0..20 {
            let n = 40;
            let labels: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..=6.0)).collect();
            let rows: Vec<Vec<f64>> = labels
                .iter()
                .map(|&l| {
                    vec![
                        (l + rng.random_range(-1.0..1.0)).clamp(1.0, 6.0),
                        (l + rng.random_range(-0.5..0.5)).clamp(1.0, 6.0),
                        rng.random_range(1.0..=6.0),
                    ]
                })
                .collect();
            let fit = fit_stack(&ids(&["a", "b", "junk"]), &rows, &labels, 0).unwrap();
            let best_base = fit
                .per_base_tune_mse
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!(
                fit.combined_tune_mse <= best_base + 1e-9,
                "combined {} vs best base {best_base}",
                fit.combined_tune_mse
            );
        }
    }

    #[test]
    fn unbiased_single_base_recalibrates_to_identity() {
        let mut rng = seeding::rng_from_seed(7);
        let labels: Vec<f64> = (0..200).map(|_| rng.random_range(1.0..=6.0)).collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| vec![l + rng.random_range(-0.05..0.05)])
            .collect();
        let fit = fit_stack(&ids(&["base"]), &rows, &labels, 0).unwrap();
        assert!((fit.model.weights[0] - 1.0).abs() < 0.05, "{:?}", fit.model);
        assert!(fit.model.intercept.abs() < 0.2, "{:?}", fit.model);
    }

    #[test]
    fn fitting_ignores_anything_but_the_tuning_data() {
        let labels = vec![1.0, 3.0, 2.0, 4.5, 5.0, 2.5];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l * 0.9 + 0.3]).collect();
        let a = fit_stack(&ids(&["b"]), &rows, &labels, 42).unwrap();
        let b = fit_stack(&ids(&["b"]), &rows, &labels, 42).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn predict_checks_arity_blends_and_clamps() {
        let meta = TrainingMeta {
            samples: 0,
            seed: 0,
            ridge_fallback: false,
        };
        let identity = StackedModel {
            base_ids: ids(&["one"]),
            intercept: 0.0,
            weights: vec![1.0],
            training_meta: meta.clone(),
        };
        assert_eq!(identity.predict(&[3.2]).unwrap(), 3.2);
        assert!(matches!(
            identity.predict(&[1.0, 2.0]),
            Err(Error::ArityMismatch {
                expected: 1,
                got: 2
            })
        ));

        let blend = StackedModel {
            base_ids: ids(&["a", "b"]),
            intercept: 0.0,
            weights: vec![0.5, 0.5],
            training_meta: meta.clone(),
        };
        assert_eq!(blend.predict(&[2.0, 4.0]).unwrap(), 3.0);

        let hot = StackedModel {
            base_ids: ids(&["a"]),
            intercept: 0.4,
            weights: vec![1.0],
            training_meta: meta,
        };
        assert_eq!(hot.predict(&[6.0]).unwrap(), 6.0);
    }

    #[test]
    fn stacked_model_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stack.json");
        let labels = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&l| vec![l, 7.0 - l]).collect();
        let fit = fit_stack(&ids(&["a", "b"]), &rows, &labels, 3).unwrap();
        fit.model.save(&path).unwrap();
        assert_eq!(StackedModel::load(&path).unwrap(), fit.model);

        let bad = dir.path().join("bad.json");
        fs::write(
            &bad,
            r#"{"schema_version":1,"base_ids":["a"],"intercept":0.0,"weights":[0.5,0.5],"training_meta":{"samples":6,"seed":3}}"#,
        )
        .unwrap();
        assert!(matches!(
            StackedModel::load(&bad),
            Err(Error::MalformedModel(_))
        ));
    }

    #[test]
    fn prediction_files_round_trip_and_align() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.jsonl");
        let entries = vec![("p0".to_string(), 2.5), ("p1".to_string(), 3.75)];
        save_predictions(&path, &entries).unwrap();
        let map = load_predictions(&path).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["p1"], 3.75);

        let corpus = test_corpus(2);
        assert_eq!(align_predictions(&corpus, &map).unwrap(), vec![2.5, 3.75]);

        let short = test_corpus(3);
        assert!(matches!(
            align_predictions(&short, &map),
            Err(Error::MissingPrediction(_))
        ));

        fs::write(&path, "{\"id\":\"x\",\"score\":1.0}\n{\"id\":\"x\",\"score\":2.0}\n").unwrap();
        assert!(matches!(
            load_predictions(&path),
            Err(Error::DuplicateId(_))
        ));
    }
}
