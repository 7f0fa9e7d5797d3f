//! The three-feature linear difficulty model.
//!
//! A fitted model is an intercept plus one weight per surface feature, in
//! the order (avg_word_len_chars, ln_sent_len_chars, ln_sent_len_words).
//! Fitting is closed-form ordinary least squares; predictions are clamped
//! onto the 1-6 scale. The fitted model is immutable, so prediction is safe
//! for unlimited concurrent callers and runs in microseconds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::features::{self, SurfaceFeatures};
use crate::solver;
use crate::{clamp_score, Error, Result};

/// Current model file schema version.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// How the model was fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Number of training samples.
    pub samples: usize,
    /// Seed the caller used to assemble the training set.
    pub seed: u64,
    /// True when the normal equations were singular and the 1e-8 ridge
    /// fallback produced the coefficients.
    #[serde(default)]
    pub ridge_fallback: bool,
}

/// A fitted linear difficulty model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    /// Ordered (avg_word_len_chars, ln_sent_len_chars, ln_sent_len_words).
    pub weights: [f64; 3],
    pub training_meta: TrainingMeta,
}

#[derive(Serialize)]
struct ModelFile<'a> {
    schema_version: u32,
    feature_schema_version: u32,
    intercept: f64,
    weights: &'a [f64],
    training_meta: &'a TrainingMeta,
}

#[derive(Deserialize)]
struct RawModelFile {
    schema_version: u32,
    feature_schema_version: u32,
    intercept: f64,
    weights: Vec<f64>,
    training_meta: TrainingMeta,
}

impl LinearModel {
    /// Fit by ordinary least squares with intercept over an n x 3 feature
    /// matrix. Requires at least 4 samples. A singular system falls back to
    /// a 1e-8 ridge and records that in the training metadata.
    pub fn fit(features: &[[f64; 3]], labels: &[f64], seed: u64) -> Result<LinearModel> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: labels.len(),
            });
        }
        if features.len() < 4 {
            return Err(Error::InsufficientData {
                needed: 4,
                got: features.len(),
            });
        }
        let rows: Vec<Vec<f64>> = features.iter().map(|f| f.to_vec()).collect();
        let sol = solver::ols_with_intercept(&rows, labels)?;
        Ok(LinearModel {
            intercept: sol.intercept,
            weights: [sol.weights[0], sol.weights[1], sol.weights[2]],
            training_meta: TrainingMeta {
                samples: features.len(),
                seed,
                ridge_fallback: sol.ridge_fallback,
            },
        })
    }

    /// Unclamped affine score for a feature vector.
    pub fn raw_score(&self, v: &[f64; 3]) -> f64 {
        self.intercept
            + self.weights[0] * v[0]
            + self.weights[1] * v[1]
            + self.weights[2] * v[2]
    }

    /// Score for a feature vector, clamped to [1, 6].
    pub fn predict_vector(&self, v: &[f64; 3]) -> f64 {
        clamp_score(self.raw_score(v))
    }

    /// Score for an extracted feature set.
    pub fn predict_features(&self, f: &SurfaceFeatures) -> f64 {
        self.predict_vector(&f.model_vector())
    }

    /// Extract features from a text and score it.
    pub fn predict(&self, text: &str) -> Result<f64> {
        Ok(self.predict_features(&features::extract(text)?))
    }

    /// Write the model as a single canonical JSON record.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let record = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            feature_schema_version: SurfaceFeatures::SCHEMA_VERSION,
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

    /// Load a model file, verifying schema versions and shape. Round-trips
    /// coefficients exactly.
    pub fn load(path: impl AsRef<Path>) -> Result<LinearModel> {
        let content = fs::read_to_string(path)?;
        let raw: RawModelFile = serde_json::from_str(content.trim())
            .map_err(|e| Error::MalformedModel(e.to_string()))?;
        if raw.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: raw.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        if raw.feature_schema_version != SurfaceFeatures::SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: raw.feature_schema_version,
                expected: SurfaceFeatures::SCHEMA_VERSION,
            });
        }
        let weights: [f64; 3] = raw.weights.as_slice().try_into().map_err(|_| {
            Error::MalformedModel(format!("expected 3 weights, got {}", raw.weights.len()))
        })?;
        Ok(LinearModel {
            intercept: raw.intercept,
            weights,
            training_meta: raw.training_meta,
        })
    }
}

/// Feature matrix and label vector for a set of passages, in order.
pub fn design_from(passages: &[Passage]) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let mut x = Vec::with_capacity(passages.len());
    let mut y = Vec::with_capacity(passages.len());
    for p in passages {
        x.push(features::extract(&p.text)?.model_vector());
        y.push(p.label);
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> TrainingMeta {
        TrainingMeta {
            samples: 0,
            seed: 0,
            ridge_fallback: false,
        }
    }

    /// Deterministic synthetic design with all three features varying.
    fn synthetic(n: usize, seed: u64) -> (Vec<[f64; 3]>, Vec<f64>) {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let f = [
                rng.random_range(1.0..10.0),
                rng.random_range(0.0..5.0),
                rng.random_range(0.0..4.0),
            ];
            let noise: f64 = rng.random_range(-0.5..0.5);
            y.push(1.0 + 0.3 * f[0] + 0.5 * f[1] + 0.2 * f[2] + noise);
            x.push(f);
        }
        (x, y)
    }

    #[test]
    fn degenerate_columns_interpolate_via_ridge() {
        // f2 = f3 = 0 throughout: the normal equations are singular, the
        // ridge fallback must still recover label = 2 + 0.5 f1.
        let x: Vec<[f64; 3]> = (1..=5).map(|i| [i as f64, 0.0, 0.0]).collect();
        let y: Vec<f64> = x.iter().map(|f| 2.0 + 0.5 * f[0]).collect();
        let model = LinearModel::fit(&x, &y, 0).unwrap();
        assert!(model.training_meta.ridge_fallback);
        assert!((model.intercept - 2.0).abs() < 1e-6);
        assert!((model.weights[0] - 0.5).abs() < 1e-6);
        assert!(model.weights[1].abs() < 1e-6);
        assert!(model.weights[2].abs() < 1e-6);
        for (f, label) in x.iter().zip(&y) {
            assert!((model.raw_score(f) - label).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_requires_four_finite_samples() {
        let x: Vec<[f64; 3]> = (0..3).map(|i| [i as f64, 1.0, 1.0]).collect();
        let y = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            LinearModel::fit(&x, &y, 0),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
        let x = vec![[1.0, 1.0, f64::INFINITY]; 4];
        let y = vec![1.0; 4];
        assert!(matches!(
            LinearModel::fit(&x, &y, 0),
            Err(Error::NonFiniteInput)
        ));
    }

    #[test]
    fn predictions_clamp_to_scale() {
        let high = LinearModel {
            intercept: 7.2,
            weights: [0.0; 3],
            training_meta: meta(),
        };
        assert_eq!(high.predict_vector(&[1.0, 1.0, 1.0]), 6.0);
        let low = LinearModel {
            intercept: 0.3,
            weights: [0.0; 3],
            training_meta: meta(),
        };
        assert_eq!(low.predict_vector(&[1.0, 1.0, 1.0]), 1.0);
    }

    #[test]
    fn predict_composes_with_feature_extraction() {
        let model = LinearModel {
            intercept: 1.0,
            weights: [0.5, 0.0, 0.0],
            training_meta: meta(),
        };
        // avg word length of "The cat is here." is 3.0.
        assert_eq!(model.predict("The cat is here.").unwrap(), 2.5);
        assert!(matches!(model.predict("?!"), Err(Error::EmptyText)));
    }

    #[test]
    fn residuals_are_orthogonal_to_design_columns() {
        let (x, y) = synthetic(50, 9);
        let model = LinearModel::fit(&x, &y, 9).unwrap();
        let residuals: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(f, label)| label - model.raw_score(f))
            .collect();
        let ones_dot: f64 = residuals.iter().sum();
        assert!(ones_dot.abs() < 1e-8, "ones column: {ones_dot}");
        for col in 0..3 {
            let dot: f64 = x.iter().zip(&residuals).map(|(f, r)| f[col] * r).sum();
            assert!(dot.abs() < 1e-8, "column {col}: {dot}");
        }
    }

    #[test]
    fn label_shift_moves_only_the_intercept() {
        let (x, y) = synthetic(40, 4);
        let shifted: Vec<f64> = y.iter().map(|v| v + 2.5).collect();
        let base = LinearModel::fit(&x, &y, 4).unwrap();
        let moved = LinearModel::fit(&x, &shifted, 4).unwrap();
        assert!((moved.intercept - base.intercept - 2.5).abs() < 1e-8);
        for col in 0..3 {
            assert!((moved.weights[col] - base.weights[col]).abs() < 1e-8);
        }
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let (x, y) = synthetic(20, 17);
        let model = LinearModel::fit(&x, &y, 17).unwrap();
        model.save(&path).unwrap();
        let loaded = LinearModel::load(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded.intercept.to_bits(), model.intercept.to_bits());
        for col in 0..3 {
            assert_eq!(loaded.weights[col].to_bits(), model.weights[col].to_bits());
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();

        let two_weights = dir.path().join("two.json");
        fs::write(
            &two_weights,
            r#"{"schema_version":1,"feature_schema_version":1,"intercept":1.0,"weights":[0.1,0.2],"training_meta":{"samples":4,"seed":0}}"#,
        )
        .unwrap();
        assert!(matches!(
            LinearModel::load(&two_weights),
            Err(Error::MalformedModel(_))
        ));

        let old_version = dir.path().join("old.json");
        fs::write(
            &old_version,
            r#"{"schema_version":0,"feature_schema_version":1,"intercept":1.0,"weights":[0.1,0.2,0.3],"training_meta":{"samples":4,"seed":0}}"#,
        )
        .unwrap();
        assert!(matches!(
            LinearModel::load(&old_version),
            Err(Error::VersionMismatch {
                found: 0,
                expected: 1
            })
        ));

        let garbage = dir.path().join("garbage.json");
        fs::write(&garbage, "not a model").unwrap();
        assert!(matches!(
            LinearModel::load(&garbage),
            Err(Error::MalformedModel(_))
        ));
    }

    proptest! {
        #[test]
        fn prediction_is_monotone_in_positive_weight_features(
            base in 1.0f64..8.0,
            bump in 0.01f64..3.0,
            col in 0usize..3,
        ) {
            let model = LinearModel {
                intercept: 0.5,
                weights: [0.4, 0.3, 0.2],
                training_meta: meta(),
            };
            let mut v = [base, base / 2.0, base / 3.0];
            let before = model.predict_vector(&v);
            v[col] += bump;
            prop_assert!(model.predict_vector(&v) >= before);
        }
    }
}
