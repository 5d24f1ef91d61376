use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use super::logistic::{train, Hyperparameters};
use crate::error::{Error, Result};
use crate::scalar::FloatScalar;
use crate::shotlog::{PlayerDataset, ShotKey, ShotRecord};

/// Where a probability came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Predicted by a model trained on these seasons.
    Trained { seasons: Arc<[String]> },
    /// Supplied from outside (e.g. a probabilities file).
    External,
}

/// Per-shot make probabilities aligned one-to-one with a shot sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T> {
    pub values: Vec<T>,
    pub provenance: Vec<Provenance>,
}

impl<T: FloatScalar> ProbabilityVector<T> {
    pub fn external(values: Vec<T>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(v.real() >= 0.0 && v.real() <= 1.0)) {
            return Err(Error::Validation(format!("probability {} outside [0, 1]", bad.real())));
        }
        let provenance = vec![Provenance::External; values.len()];
        Ok(ProbabilityVector { values, provenance })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Leave-one-season-out predictions: every record of season `s` is scored by
/// a model trained on all other seasons. Output is aligned with `records`.
pub fn predict_loso<T: FloatScalar>(records: &[ShotRecord], hyper: &Hyperparameters) -> Result<ProbabilityVector<T>> {
    let seasons: BTreeSet<&str> = records.iter().map(|r| r.season.as_str()).collect();
    if seasons.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-season-out needs at least 2 seasons, found {}; use a plain train/test split instead",
            seasons.len()
        )));
    }
    let mut values = vec![T::zero(); records.len()];
    let mut provenance = vec![Provenance::External; records.len()];
    for &season in &seasons {
        let training: Vec<ShotRecord> = records.iter().filter(|r| r.season != season).cloned().collect();
        let model = train::<T>(&training, hyper)?;
        let tag = Provenance::Trained {
            seasons: model.training_seasons.clone().into(),
        };
        for (i, record) in records.iter().enumerate().filter(|(_, r)| r.season == season) {
            values[i] = model.predict(record)?;
            provenance[i] = tag.clone();
        }
    }
    Ok(ProbabilityVector { values, provenance })
}

/// Splits a record-aligned probability vector into per-player vectors in
/// each dataset's shot order.
pub fn align_to_players<T: FloatScalar>(
    datasets: &[PlayerDataset],
    lookup: &HashMap<ShotKey, T>,
) -> Result<Vec<Vec<T>>> {
    datasets
        .iter()
        .map(|d| {
            d.records()
                .map(|r| {
                    lookup.get(&r.key()).copied().ok_or_else(|| Error::MissingProbability {
                        player_id: r.player_id.clone(),
                        game_id: r.game_id.clone(),
                        order: r.order_in_game,
                    })
                })
                .collect()
        })
        .collect()
}

/// Keyed view of `(record, probability)` pairs for [`align_to_players`].
pub fn probability_lookup<T: Copy>(records: &[ShotRecord], values: &[T]) -> Result<HashMap<ShotKey, T>> {
    if records.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: records.len(),
            actual: values.len(),
        });
    }
    Ok(records.iter().map(ShotRecord::key).zip(values.iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shotlog::{group_by_player, Outcome};

    fn shot(season: &str, game: &str, order: u32, dist: f64, make: bool) -> ShotRecord {
        ShotRecord {
            dist_basket: Some(dist),
            defender_dist: Some(3.0),
            touch_time: Some(2.0),
            dribbles: Some(1),
            shot_type: Some("jump".into()),
            defender_id: Some("D".into()),
            ..ShotRecord::bare(season, game, "P", order, Outcome::from(make))
        }
    }

    fn fixture(seasons: &[&str]) -> Vec<ShotRecord> {
        let mut records = Vec::new();
        for (s, season) in seasons.iter().enumerate() {
            for i in 0..40u32 {
                let dist = (i % 20) as f64 + s as f64;
                records.push(shot(season, &format!("{season}-G{}", i / 10), i % 10, dist, dist < 8.0 || i % 7 == 0));
            }
        }
        records
    }

    #[test]
    fn single_season_is_rejected() {
        let err = predict_loso::<f64>(&fixture(&["2014"]), &Hyperparameters::default()).unwrap_err();
        assert!(err.to_string().contains("train/test split"));
    }

    #[test]
    fn two_seasons_cross_fit() {
        let records = fixture(&["A", "B"]);
        let hyper = Hyperparameters { max_epochs: 30, ..Default::default() };
        let probs = predict_loso::<f64>(&records, &hyper).unwrap();
        let model_b = train::<f64>(&records.iter().filter(|r| r.season == "B").cloned().collect::<Vec<_>>(), &hyper).unwrap();
        for (i, r) in records.iter().enumerate() {
            let Provenance::Trained { seasons } = &probs.provenance[i] else { panic!("untagged") };
            assert_eq!(seasons.len(), 1);
            assert_ne!(seasons[0], r.season);
            if r.season == "A" {
                assert_eq!(probs.values[i], model_b.predict(r).unwrap());
            }
        }
    }

    #[test]
    fn external_probabilities_are_validated() {
        assert!(ProbabilityVector::external(vec![0.2f64, 1.2]).is_err());
        let v = ProbabilityVector::external(vec![0.2f64, 1.0]).unwrap();
        assert_eq!(v.provenance, vec![Provenance::External; 2]);
    }

    #[test]
    fn alignment_reports_missing_shot() {
        let records = fixture(&["A"]);
        let datasets = group_by_player(records.clone()).unwrap();
        let values = vec![0.5f64; records.len()];
        let lookup = probability_lookup(&records, &values).unwrap();
        let aligned = align_to_players(&datasets, &lookup).unwrap();
        assert_eq!(aligned[0].len(), records.len());
        let partial = probability_lookup(&records[1..], &values[1..]).unwrap();
        match align_to_players(&datasets, &partial) {
            Err(Error::MissingProbability { game_id, order, .. }) => {
                assert_eq!((game_id.as_str(), order), ("A-G0", 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
