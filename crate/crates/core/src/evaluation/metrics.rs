use std::fmt;

/// `K × K` counts; rows are true classes, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_pairs(classes: usize, truth: &[usize], predicted: &[usize]) -> Self {
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.add(t, p);
        }
        cm
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    fn predicted_as(&self, class: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, class)).sum()
    }

    fn actually(&self, class: usize) -> u64 {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "true\\pred")?;
        for p in 0..self.classes {
            write!(f, "\t{p}")?;
        }
        for t in 0..self.classes {
            write!(f, "\n{t}")?;
            for p in 0..self.classes {
                write!(f, "\t{}", self.get(t, p))?;
            }
        }
        Ok(())
    }
}

/// Precision, recall and F1 of one class.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Class whose scores are the headline P/R/F1, or `None` for macro averages.
    pub positive_class: Option<usize>,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    /// Derives every score from a confusion matrix. With `positive_class`
    /// set, the headline P/R/F1 are that class's; otherwise the macro means.
    pub fn from_confusion(confusion: ConfusionMatrix, positive_class: Option<usize>) -> Self {
        let k = confusion.classes();
        let per_class: Vec<ClassScores> = (0..k)
            .map(|c| {
                let tp = confusion.get(c, c);
                let precision = ratio(tp, confusion.predicted_as(c));
                let recall = ratio(tp, confusion.actually(c));
                ClassScores {
                    precision,
                    recall,
                    f1: f1_score(precision, recall),
                }
            })
            .collect();
        let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(f).sum::<f64>() / k.max(1) as f64;
        Metrics {
            accuracy: ratio(confusion.correct(), confusion.total()),
            macro_precision: mean(|s| s.precision),
            macro_recall: mean(|s| s.recall),
            macro_f1: mean(|s| s.f1),
            per_class,
            positive_class,
            confusion,
        }
    }

    fn headline(&self) -> ClassScores {
        match self.positive_class {
            Some(c) => self.per_class[c],
            None => ClassScores {
                precision: self.macro_precision,
                recall: self.macro_recall,
                f1: self.macro_f1,
            },
        }
    }

    pub fn precision(&self) -> f64 {
        self.headline().precision
    }

    pub fn recall(&self) -> f64 {
        self.headline().recall
    }

    pub fn f1(&self) -> f64 {
        self.headline().f1
    }

    pub fn samples(&self) -> u64 {
        self.confusion.total()
    }
}
