//! Seeded train/validation/test split.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio(pub u32, pub u32, pub u32);

impl Default for Ratio {
    fn default() -> Self {
        Ratio(3, 1, 2)
    }
}

impl FromStr for Ratio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("ratio must look like 3:1:2, got {:?}", s));
        };
        let num = |x: &str| x.trim().parse::<u32>().map_err(|_| format!("bad ratio part {:?}", x));
        let r = Ratio(num(a)?, num(b)?, num(c)?);
        if r.0 + r.1 + r.2 == 0 {
            return Err("ratio parts sum to zero".into());
        }
        Ok(r)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.0, self.1, self.2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub ratio: Ratio,
    pub rng_seed: u64,
}

/// Validation and test sizes rounded to nearest; train takes the rest.
pub fn split_sizes(n: usize, ratio: Ratio) -> (usize, usize, usize) {
    let total = u64::from(ratio.0 + ratio.1 + ratio.2);
    let share = |part: u32| ((n as u64 * u64::from(part) * 2 + total) / (2 * total)) as usize;
    let validation = share(ratio.1).min(n);
    let test = share(ratio.2).min(n - validation);
    (n - validation - test, validation, test)
}

/// Shuffle indices with the seed, cut by size, then restore input order
/// inside each part.
pub fn split_indices(n: usize, ratio: Ratio, seed: u64) -> [Vec<usize>; 3] {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (tr, va, _) = split_sizes(n, ratio);
    let mut parts = [idx[..tr].to_vec(), idx[tr..tr + va].to_vec(), idx[tr + va..].to_vec()];
    for p in &mut parts {
        p.sort_unstable();
    }
    parts
}

pub fn split_ids(ids: &[String], ratio: Ratio, seed: u64) -> DatasetSplit {
    let [tr, va, te] = split_indices(ids.len(), ratio, seed);
    let pick = |v: &[usize]| v.iter().map(|&i| ids[i].clone()).collect();
    DatasetSplit {
        train: pick(&tr),
        validation: pick(&va),
        test: pick(&te),
        ratio,
        rng_seed: seed,
    }
}
