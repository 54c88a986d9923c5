use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::QAInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<QAInstance>,
    pub dev: Vec<QAInstance>,
    pub test: Vec<QAInstance>,
    pub seed: u64,
}

/// Ids per split plus the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }

    pub fn manifest(&self) -> SplitManifest {
        let ids = |v: &[QAInstance]| v.iter().map(|i| i.id.clone()).collect();
        SplitManifest { seed: self.seed, train: ids(&self.train), dev: ids(&self.dev), test: ids(&self.test) }
    }
}

impl SplitManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("split manifest", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Seeded shuffle followed by an 80/10/10 cut. Train takes the floor of
/// 80%; the remainder is halved with any odd item going to test.
pub fn split_dataset(mut instances: Vec<QAInstance>, seed: u64) -> Result<DatasetSplit> {
    let n = instances.len();
    if n < 10 {
        return Err(Error::Invalid(format!("need at least 10 instances to split, got {n}")));
    }
    let mut seen = HashSet::with_capacity(n);
    if let Some(dup) = instances.iter().find(|i| !seen.insert(i.id.as_str())) {
        return Err(Error::Data(format!("duplicate instance id `{}`", dup.id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instances.shuffle(&mut rng);
    let n_train = n * 8 / 10;
    let n_dev = (n - n_train) / 2;
    let test = instances.split_off(n_train + n_dev);
    let dev = instances.split_off(n_train);
    Ok(DatasetSplit { train: instances, dev, test, seed })
}
