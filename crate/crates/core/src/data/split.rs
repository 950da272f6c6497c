use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.75,
            val_frac: 0.15,
            test_frac: 0.10,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|&v| !(v > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be positive and sum to 1, got {f:?}"
            )));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_frac, self.val_frac, self.test_frac]
    }
}

/// Row indices of each split, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub(crate) const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

impl Split {
    /// Split name for each of `n` rows (`None` if a row is unassigned).
    pub fn assignment(&self, n: usize) -> Vec<Option<&'static str>> {
        let mut out = vec![None; n];
        for (rows, name) in [&self.train, &self.val, &self.test]
            .into_iter()
            .zip(SPLIT_NAMES)
        {
            for &r in rows {
                if r < n {
                    out[r] = Some(name);
                }
            }
        }
        out
    }
}

#[derive(Debug)]
struct Group {
    rows: Vec<usize>,
    minority: usize,
}

/// Assigns whole groups to train/val/test.
///
/// Groups are shuffled with the seed (to break size ties), stably sorted by
/// size descending, and each is given to the split with the largest combined
/// relative deficit: `size_deficit / N`, plus `minority_deficit / N_minority`
/// when the group carries minority rows. Once the number of remaining groups
/// equals the number of still-empty splits, groups go to empty splits only.
pub fn stratified_group_split(data: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut by_key: BTreeMap<&str, Group> = BTreeMap::new();
    for (i, key) in data.group_keys().iter().enumerate() {
        let g = by_key.entry(key.as_str()).or_insert_with(|| Group {
            rows: Vec::new(),
            minority: 0,
        });
        g.rows.push(i);
        g.minority += usize::from(data.label(i) == 1);
    }
    if by_key.len() < 3 {
        return Err(Error::TooFewGroups {
            needed: 3,
            found: by_key.len(),
        });
    }

    let mut groups: Vec<Group> = by_key.into_values().collect();
    groups.shuffle(&mut rng::seeded(spec.seed));
    groups.sort_by_key(|g| std::cmp::Reverse(g.rows.len()));

    let n = data.len() as f64;
    let n_min = data.minority_count() as f64;
    let fracs = spec.fractions();
    let mut sizes = [0usize; 3];
    let mut mins = [0usize; 3];
    let mut out: [Vec<usize>; 3] = Default::default();

    let total = groups.len();
    for (k, g) in groups.iter().enumerate() {
        let remaining = total - k;
        let empty: Vec<usize> = (0..3).filter(|&s| sizes[s] == 0).collect();
        let candidates: Vec<usize> = if remaining <= empty.len() {
            empty
        } else {
            (0..3).collect()
        };
        let score = |s: usize| {
            let mut v = (fracs[s] * n - sizes[s] as f64) / n;
            if g.minority > 0 && n_min > 0.0 {
                v += (fracs[s] * n_min - mins[s] as f64) / n_min;
            }
            v
        };
        let mut best = candidates[0];
        for &s in &candidates[1..] {
            if score(s) > score(best) {
                best = s;
            }
        }
        sizes[best] += g.rows.len();
        mins[best] += g.minority;
        out[best].extend_from_slice(&g.rows);
    }

    let [mut train, mut val, mut test] = out;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}
