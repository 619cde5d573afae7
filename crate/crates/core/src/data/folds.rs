use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, PropertyRecord};

/// Assignment of records to folds plus the rotating role map. Under rotation
/// `k`, fold `k` is the test fold, fold `k+1 (mod n)` validation, fold
/// `k+2 (mod n)` tuning, and the rest training, so across the `n` rotations
/// every fold serves each role exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub n_folds: usize,
    /// `assignments[i]` is the fold id of record `i`.
    pub assignments: Vec<usize>,
}

/// Record indices for each role under one rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSplit {
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
    pub tuning: Vec<usize>,
    pub training: Vec<usize>,
}

impl FoldPlan {
    pub fn n_records(&self) -> usize {
        self.assignments.len()
    }

    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Role assignment for rotation `k`.
    pub fn rotation(&self, k: usize) -> RoleSplit {
        let n = self.n_folds;
        let test_fold = k % n;
        let val_fold = (k + 1) % n;
        let tune_fold = (k + 2) % n;
        let mut split = RoleSplit {
            test: Vec::new(),
            validation: Vec::new(),
            tuning: Vec::new(),
            training: Vec::new(),
        };
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == test_fold {
                split.test.push(i);
            } else if f == val_fold {
                split.validation.push(i);
            } else if f == tune_fold {
                split.tuning.push(i);
            } else {
                split.training.push(i);
            }
        }
        split
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serializes")
    }

    /// Parses and validates a plan exported by [`FoldPlan::to_json`].
    pub fn from_json(json: &str) -> Result<Self, DataError> {
        let plan: FoldPlan = serde_json::from_str(json)
            .map_err(|e| DataError::InvalidFoldPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_folds < 3 {
            return Err(DataError::TooFewFolds(self.n_folds));
        }
        let mut sizes = vec![0usize; self.n_folds];
        for &f in &self.assignments {
            if f >= self.n_folds {
                return Err(DataError::InvalidFoldPlan(format!(
                    "fold id {f} out of range"
                )));
            }
            sizes[f] += 1;
        }
        let (min, max) = (
            sizes.iter().copied().min().unwrap_or(0),
            sizes.iter().copied().max().unwrap_or(0),
        );
        if max - min > 1 {
            return Err(DataError::InvalidFoldPlan(format!(
                "fold sizes differ by more than 1 (min {min}, max {max})"
            )));
        }
        Ok(())
    }
}

/// Partitions records into `n_folds` folds of near-equal size (sizes differ
/// by at most one). With `stratify = Some(label)`, the label must be binary
/// and present on every record, and positives are spread so each fold's
/// positive count also differs by at most one.
pub fn make_fold_plan(
    records: &[PropertyRecord],
    n_folds: usize,
    stratify: Option<usize>,
    seed: u64,
) -> Result<FoldPlan, DataError> {
    if n_folds < 3 {
        return Err(DataError::TooFewFolds(n_folds));
    }
    if records.len() < n_folds {
        return Err(DataError::TooManyFolds {
            records: records.len(),
            folds: n_folds,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; records.len()];

    match stratify {
        None => {
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.shuffle(&mut rng);
            for (pos, &record) in order.iter().enumerate() {
                assignments[record] = pos % n_folds;
            }
        }
        Some(label) => {
            let mut positives = Vec::new();
            let mut negatives = Vec::new();
            for (i, record) in records.iter().enumerate() {
                let value = record.labels.get(label).copied().ok_or(
                    DataError::StratifyIndexOutOfRange {
                        index: label,
                        tasks: record.labels.len(),
                    },
                )?;
                match value {
                    Some(v) if v == 0.0 => negatives.push(i),
                    Some(v) if v == 1.0 => positives.push(i),
                    Some(v) => {
                        return Err(DataError::BadStratifyLabel {
                            record: i,
                            found: v.to_string(),
                        })
                    }
                    None => {
                        return Err(DataError::BadStratifyLabel {
                            record: i,
                            found: "missing".to_string(),
                        })
                    }
                }
            }
            positives.shuffle(&mut rng);
            negatives.shuffle(&mut rng);
            // Interleave the two classes round-robin over folds; starting the
            // negatives where the positives left off keeps total sizes within
            // one of each other.
            for (pos, &record) in positives.iter().enumerate() {
                assignments[record] = pos % n_folds;
            }
            let offset = positives.len();
            for (pos, &record) in negatives.iter().enumerate() {
                assignments[record] = (offset + pos) % n_folds;
            }
        }
    }

    let plan = FoldPlan {
        seed,
        n_folds,
        assignments,
    };
    plan.validate()?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(n: usize) -> Vec<PropertyRecord> {
        (0..n)
            .map(|i| PropertyRecord {
                smiles: format!("{}C", "C".repeat(i % 5)),
                labels: vec![Some(i as f64)],
            })
            .collect()
    }

    fn binary_records(n: usize, positives: usize) -> Vec<PropertyRecord> {
        (0..n)
            .map(|i| PropertyRecord {
                smiles: "C".into(),
                labels: vec![Some(if i < positives { 1.0 } else { 0.0 })],
            })
            .collect()
    }

    #[test]
    fn hundred_records_ten_folds() {
        let plan = make_fold_plan(&records(100), 10, None, 3).unwrap();
        for f in 0..10 {
            assert_eq!(plan.fold_members(f).len(), 10);
        }
        let split = plan.rotation(0);
        assert_eq!(split.test, plan.fold_members(0));
        assert_eq!(split.validation, plan.fold_members(1));
        assert_eq!(split.tuning, plan.fold_members(2));
        assert_eq!(split.training.len(), 70);
        for f in 3..10 {
            for m in plan.fold_members(f) {
                assert!(split.training.contains(&m));
            }
        }
    }

    #[test]
    fn stratified_divisible_case_is_exact() {
        let plan = make_fold_plan(&binary_records(20, 10), 10, Some(0), 7).unwrap();
        let recs = binary_records(20, 10);
        for f in 0..10 {
            let members = plan.fold_members(f);
            assert_eq!(members.len(), 2);
            let pos = members
                .iter()
                .filter(|&&i| recs[i].labels[0] == Some(1.0))
                .count();
            assert_eq!(pos, 1, "fold {f} should hold exactly one positive");
        }
    }

    #[test]
    fn two_folds_is_an_error() {
        let err = make_fold_plan(&records(10), 2, None, 0).unwrap_err();
        assert!(matches!(err, DataError::TooFewFolds(2)));
    }

    #[test]
    fn stratify_requires_binary_present_labels() {
        let mut recs = binary_records(10, 5);
        recs[3].labels[0] = Some(0.5);
        let err = make_fold_plan(&recs, 3, Some(0), 0).unwrap_err();
        assert!(matches!(err, DataError::BadStratifyLabel { record: 3, .. }));

        let mut recs = binary_records(10, 5);
        recs[6].labels[0] = None;
        let err = make_fold_plan(&recs, 3, Some(0), 0).unwrap_err();
        assert!(matches!(err, DataError::BadStratifyLabel { record: 6, .. }));
    }

    #[test]
    fn each_fold_serves_each_role_once() {
        let plan = make_fold_plan(&records(23), 5, None, 9).unwrap();
        let mut test_seen = vec![0; 5];
        let mut val_seen = vec![0; 5];
        let mut tune_seen = vec![0; 5];
        for k in 0..5 {
            let split = plan.rotation(k);
            for f in 0..5 {
                let members = plan.fold_members(f);
                if members.iter().all(|m| split.test.contains(m)) && split.test.len() == members.len() {
                    test_seen[f] += 1;
                }
                if members.iter().all(|m| split.validation.contains(m))
                    && split.validation.len() == members.len()
                {
                    val_seen[f] += 1;
                }
                if members.iter().all(|m| split.tuning.contains(m))
                    && split.tuning.len() == members.len()
                {
                    tune_seen[f] += 1;
                }
            }
        }
        assert_eq!(test_seen, vec![1; 5]);
        assert_eq!(val_seen, vec![1; 5]);
        assert_eq!(tune_seen, vec![1; 5]);
    }

    #[test]
    fn json_round_trip_validates() {
        let plan = make_fold_plan(&records(10), 3, None, 1).unwrap();
        let json = plan.to_json();
        let back = FoldPlan::from_json(&json).unwrap();
        assert_eq!(plan, back);

        let bad = r#"{"seed":0,"n_folds":3,"assignments":[0,0,0,1]}"#;
        assert!(FoldPlan::from_json(bad).is_err());
    }
}
