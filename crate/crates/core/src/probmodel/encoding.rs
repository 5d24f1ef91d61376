use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::FloatScalar;
use crate::shotlog::ShotRecord;

pub const NUMERIC_FEATURES: [&str; 4] = ["dist_basket", "defender_dist", "touch_time", "dribbles"];
pub const CATEGORICAL_FEATURES: [&str; 3] = ["shot_type", "shooter_id", "defender_id"];

fn numeric_values(record: &ShotRecord) -> [Option<f64>; 4] {
    [
        record.dist_basket,
        record.defender_dist,
        record.touch_time,
        record.dribbles.map(f64::from),
    ]
}

fn categorical_values(record: &ShotRecord) -> [Option<&str>; 3] {
    [
        record.shot_type.as_deref(),
        Some(record.player_id.as_str()),
        record.defender_id.as_deref(),
    ]
}

/// Standardization constants for one numeric feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub name: String,
    pub mean: f64,
    pub scale: f64,
}

/// Sorted vocabulary for one categorical feature. Index `len()` is the
/// slot for values unseen at training time (or missing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub name: String,
    pub values: Vec<String>,
}

impl Vocabulary {
    fn slot(&self, value: Option<&str>) -> usize {
        value
            .and_then(|v| self.values.binary_search_by(|probe| probe.as_str().cmp(v)).ok())
            .unwrap_or(self.values.len())
    }

    fn width(&self) -> usize {
        self.values.len() + 1
    }
}

/// Feature encoding frozen at training time: standardized numerics followed
/// by one-hot categoricals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub numeric: Vec<Standardizer>,
    pub categorical: Vec<Vocabulary>,
}

impl FeatureEncoder {
    pub fn fit<'a, I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ShotRecord>,
    {
        let records: Vec<&ShotRecord> = records.into_iter().collect();
        if records.is_empty() {
            return Err(Error::Training("no training records".into()));
        }
        let mut numeric = Vec::with_capacity(NUMERIC_FEATURES.len());
        for (j, name) in NUMERIC_FEATURES.iter().enumerate() {
            let values = records
                .iter()
                .map(|r| {
                    numeric_values(r)[j].ok_or_else(|| {
                        Error::Validation(format!(
                            "shot (player {}, game {}, order {}) lacks `{name}`",
                            r.player_id, r.game_id, r.order_in_game
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            numeric.push(Standardizer {
                name: name.to_string(),
                mean,
                scale,
            });
        }
        let categorical = CATEGORICAL_FEATURES
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let mut values: Vec<String> = records
                    .iter()
                    .filter_map(|r| categorical_values(r)[j].map(String::from))
                    .collect();
                values.sort_unstable();
                values.dedup();
                Vocabulary {
                    name: name.to_string(),
                    values,
                }
            })
            .collect();
        Ok(FeatureEncoder { numeric, categorical })
    }

    pub fn width(&self) -> usize {
        self.numeric.len() + self.categorical.iter().map(Vocabulary::width).sum::<usize>()
    }

    pub fn encode<T: FloatScalar>(&self, record: &ShotRecord) -> Result<Vec<T>> {
        let mut row = vec![T::zero(); self.width()];
        let raw = numeric_values(record);
        for (j, standardizer) in self.numeric.iter().enumerate() {
            let value = raw[j].ok_or_else(|| {
                Error::Validation(format!(
                    "shot (player {}, game {}, order {}) lacks `{}`",
                    record.player_id, record.game_id, record.order_in_game, standardizer.name
                ))
            })?;
            let z = (value - standardizer.mean) / standardizer.scale;
            if !z.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite encoded `{}` for shot (player {}, game {}, order {})",
                    standardizer.name, record.player_id, record.game_id, record.order_in_game
                )));
            }
            row[j] = T::from_real(z);
        }
        let mut offset = self.numeric.len();
        let cats = categorical_values(record);
        for (j, vocab) in self.categorical.iter().enumerate() {
            row[offset + vocab.slot(cats[j])] = T::one();
            offset += vocab.width();
        }
        debug_assert!(row.iter().all(|v| Float::is_finite(*v)));
        Ok(row)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shotlog::Outcome;

    fn record(player: &str, dist: f64, shot_type: &str) -> ShotRecord {
        ShotRecord {
            dist_basket: Some(dist),
            defender_dist: Some(4.0),
            touch_time: Some(1.0),
            dribbles: Some(2),
            shot_type: Some(shot_type.into()),
            defender_id: None,
            ..ShotRecord::bare("2014", "G1", player, 0, Outcome::Make)
        }
    }

    #[test]
    fn standardizes_and_one_hot_encodes() {
        let train = [record("A", 10.0, "jump"), record("B", 20.0, "layup")];
        let encoder = FeatureEncoder::fit(&train).unwrap();
        // 4 numerics + (2+1) shot types + (2+1) shooters + (0+1) defenders
        assert_eq!(encoder.width(), 11);
        let row: Vec<f64> = encoder.encode(&train[0]).unwrap();
        assert_eq!(row[0], -1.0);
        assert_eq!(row[1], 0.0); // constant column
        assert_eq!(&row[4..7], &[1.0, 0.0, 0.0]);
        assert_eq!(&row[7..10], &[1.0, 0.0, 0.0]);
        assert_eq!(row[10], 1.0); // missing defender goes to the unknown slot
    }

    #[test]
    fn unseen_category_maps_to_unknown() {
        let encoder = FeatureEncoder::fit(&[record("A", 10.0, "jump")]).unwrap();
        let row: Vec<f64> = encoder.encode(&record("Z", 10.0, "hook")).unwrap();
        assert_eq!(&row[4..6], &[0.0, 1.0]);
        assert_eq!(&row[6..8], &[0.0, 1.0]);
    }

    #[test]
    fn missing_numeric_is_rejected() {
        let encoder = FeatureEncoder::fit(&[record("A", 10.0, "jump")]).unwrap();
        let mut bad = record("A", 10.0, "jump");
        bad.touch_time = None;
        assert!(encoder.encode::<f64>(&bad).is_err());
        assert!(FeatureEncoder::fit(&[bad]).is_err());
    }
}
