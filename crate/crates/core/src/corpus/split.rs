use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
            return Err(Error::usage(format!("split ratios {parts:?} outside [0, 1]")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!("split ratios {parts:?} do not sum to 1")));
        }
        Ok(())
    }
}

/// Stratified assignment: each class is shuffled on its own stream and cut
/// at the rounded ratio boundaries, so every split holds each class within
/// one sample of its exact share.
pub fn stratified_split(labels: &[usize], num_classes: usize, ratios: SplitRatios, seed: u64) -> Result<Vec<Split>> {
    ratios.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::data(format!(
                "label {l} of sample {i} is not below {num_classes}"
            )));
        }
        by_class[l].push(i);
    }
    let base = Rng::new(seed);
    let mut out = vec![Split::Train; labels.len()];
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < 3 {
            return Err(Error::usage(format!(
                "class {class} has {} samples; at least 3 are needed to stratify",
                members.len()
            )));
        }
        base.substream(class as u64).shuffle(members);
        let n = members.len() as f64;
        let n_train = (ratios.train * n).round() as usize;
        let n_val = ((ratios.train + ratios.validation) * n).round() as usize - n_train;
        for (k, &i) in members.iter().enumerate() {
            out[i] = if k < n_train {
                Split::Train
            } else if k < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            };
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn count(splits: &[Split], labels: &[usize], class: usize, which: Split) -> usize {
        splits
            .iter()
            .zip(labels)
            .filter(|&(&s, &l)| s == which && l == class)
            .count()
    }

    #[test]
    fn hundred_per_class() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let s = stratified_split(&labels, 3, SplitRatios::default(), 4).unwrap();
        for c in 0..3 {
            assert_eq!(count(&s, &labels, c, Split::Train), 80);
            assert_eq!(count(&s, &labels, c, Split::Validation), 10);
            assert_eq!(count(&s, &labels, c, Split::Test), 10);
        }
        assert_eq!(s, stratified_split(&labels, 3, SplitRatios::default(), 4).unwrap());
        assert_ne!(s, stratified_split(&labels, 3, SplitRatios::default(), 5).unwrap());
    }

    #[test]
    fn errors() {
        assert!(stratified_split(&[0, 0, 1, 1, 1], 2, SplitRatios::default(), 0).is_err());
        let bad = SplitRatios {
            train: 0.5,
            validation: 0.1,
            test: 0.1,
        };
        assert!(stratified_split(&[0, 0, 0], 1, bad, 0).is_err());
        assert!(stratified_split(&[0, 0, 5], 2, SplitRatios::default(), 0).is_err());
    }

    proptest! {
        #[test]
        fn proportions_within_one(counts in prop::collection::vec(3usize..200, 1..5), seed in any::<u64>()) {
            let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
            let r = SplitRatios::default();
            let s = stratified_split(&labels, counts.len(), r, seed).unwrap();
            for (c, &n) in counts.iter().enumerate() {
                for (which, ratio) in [(Split::Train, r.train), (Split::Validation, r.validation), (Split::Test, r.test)] {
                    let got = count(&s, &labels, c, which) as f64;
                    prop_assert!((got - ratio * n as f64).abs() <= 1.0);
                }
            }
        }
    }
}
