use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::util::largest_remainder;

/// Train/validation/test fractions; must sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "bad split fractions {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "split fractions {parts:?} do not sum to 1"
            )));
        }
        Ok(())
    }
}

/// Three disjoint node masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Masks {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.len() != n || self.val.len() != n || self.test.len() != n {
            return Err(Error::ShapeMismatch(format!("masks must have length {n}")));
        }
        for i in 0..n {
            let hits = self.train[i] as u8 + self.val[i] as u8 + self.test[i] as u8;
            if hits > 1 {
                return Err(Error::InvalidDataset(format!(
                    "node {i} is in more than one mask"
                )));
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }

    /// Re-indexes onto a node subset: entry `k` of the result is entry `nodes[k]` here.
    pub fn select(&self, nodes: &[usize]) -> Masks {
        let pick = |m: &[bool]| nodes.iter().map(|&i| m[i]).collect();
        Masks {
            train: pick(&self.train),
            val: pick(&self.val),
            test: pick(&self.test),
        }
    }
}

/// Random train/val/test split over all nodes.
///
/// Stratified per class when every present class has at least three nodes,
/// otherwise a uniform shuffle of all nodes. Counts use largest-remainder rounding.
pub fn split_masks(labels: &[usize], fractions: SplitFractions, seed: u64) -> Result<Masks> {
    fractions.validate()?;
    if labels.is_empty() {
        return Err(Error::Empty("cannot split an empty label set".into()));
    }
    let n = labels.len();
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class.retain(|members| !members.is_empty());
    let stratified = by_class.iter().all(|members| members.len() >= 3);
    let groups = if stratified {
        by_class
    } else {
        vec![(0..n).collect()]
    };

    let weights = [fractions.train, fractions.val, fractions.test];
    let mut rng = rng_for(seed, &[stream::SPLIT]);
    let mut masks = Masks::empty(n);
    for mut members in groups {
        members.shuffle(&mut rng);
        let counts = largest_remainder(members.len(), &weights);
        let (train, rest) = members.split_at(counts[0]);
        let (val, test) = rest.split_at(counts[1]);
        train.iter().for_each(|&i| masks.train[i] = true);
        val.iter().for_each(|&i| masks.val[i] = true);
        test.iter().for_each(|&i| masks.test[i] = true);
    }
    Ok(masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_proportions_on_divisible_counts() {
        let masks = split_masks(&[0; 10], SplitFractions::default(), 1).unwrap();
        assert_eq!(masks.counts(), (6, 2, 2));
        masks.validate(10).unwrap();
    }

    #[test]
    fn all_train() {
        let labels = [0, 1, 2, 0, 1];
        let f = SplitFractions::new(1.0, 0.0, 0.0).unwrap();
        let masks = split_masks(&labels, f, 3).unwrap();
        assert!(masks.train.iter().all(|&b| b));
        assert_eq!(masks.counts(), (5, 0, 0));
    }

    #[test]
    fn stratified_shares() {
        let labels: Vec<usize> = (0..150).map(|i| i / 50).collect();
        let masks = split_masks(&labels, SplitFractions::default(), 11).unwrap();
        for c in 0..3 {
            let train = (0..150)
                .filter(|&i| labels[i] == c && masks.train[i])
                .count();
            assert!((train as i64 - 30).abs() <= 1, "class {c}: {train}");
        }
        assert_eq!(masks.counts(), (90, 30, 30));
    }

    #[test]
    fn exhaustive_and_deterministic() {
        let labels: Vec<usize> = (0..37).map(|i| i % 4).collect();
        let a = split_masks(&labels, SplitFractions::default(), 5).unwrap();
        let b = split_masks(&labels, SplitFractions::default(), 5).unwrap();
        assert_eq!(a, b);
        let (tr, va, te) = a.counts();
        assert_eq!(tr + va + te, 37);
        assert_ne!(
            a,
            split_masks(&labels, SplitFractions::default(), 6).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(
            split_masks(&[], SplitFractions::default(), 0),
            Err(Error::Empty(_))
        ));
        assert!(SplitFractions::new(0.5, 0.2, 0.2).is_err());
    }
}
