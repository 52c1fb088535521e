//! Sampling regime, train/test split and classification reports.

use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::label::Label;
use crate::matrix::FeatureMatrix;
use crate::svm::{SvmError, SvmModel};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("truth has {truth} labels but predictions have {predicted}")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("no {0} samples")]
    EmptyClass(Label),
    #[error("fraction {0} outside its allowed range")]
    InvalidFraction(f64),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// Anything carrying a class label.
pub trait Labeled {
    fn label(&self) -> Label;
}

impl Labeled for FeatureMatrix {
    fn label(&self) -> Label {
        self.label
    }
}

impl Labeled for Label {
    fn label(&self) -> Label {
        *self
    }
}

impl<T: Labeled> Labeled for &T {
    fn label(&self) -> Label {
        (*self).label()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion counts with bad as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_bad: usize,
    pub false_bad: usize,
    pub true_good: usize,
    pub false_good: usize,
}

impl Confusion {
    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self, EvalError> {
        if truth.len() != predicted.len() {
            return Err(EvalError::LengthMismatch {
                truth: truth.len(),
                predicted: predicted.len(),
            });
        }
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (Label::Bad, Label::Bad) => c.true_bad += 1,
                (Label::Good, Label::Bad) => c.false_bad += 1,
                (Label::Good, Label::Good) => c.true_good += 1,
                (Label::Bad, Label::Good) => c.false_good += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.true_bad + self.false_bad + self.true_good + self.false_good
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub good: ClassMetrics,
    pub bad: ClassMetrics,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total_support: usize,
    pub confusion: Confusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn metrics(tp: usize, fp: usize, fneg: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    ClassMetrics {
        precision,
        recall,
        f1: f1(precision, recall),
        support: tp + fneg,
    }
}

impl ClassReport {
    pub fn from_confusion(c: Confusion) -> Result<Self, EvalError> {
        let total = c.total();
        if total == 0 {
            return Err(EvalError::Empty);
        }
        let bad = metrics(c.true_bad, c.false_bad, c.false_good);
        let good = metrics(c.true_good, c.false_good, c.false_bad);
        let avg = |f: fn(&ClassMetrics) -> f64| (f(&good) + f(&bad)) / 2.0;
        let wavg = |f: fn(&ClassMetrics) -> f64| {
            (f(&good) * good.support as f64 + f(&bad) * bad.support as f64) / total as f64
        };
        Ok(ClassReport {
            good,
            bad,
            accuracy: ratio(c.true_bad + c.true_good, total),
            macro_avg: Averages {
                precision: avg(|m| m.precision),
                recall: avg(|m| m.recall),
                f1: avg(|m| m.f1),
            },
            weighted_avg: Averages {
                precision: wavg(|m| m.precision),
                recall: wavg(|m| m.recall),
                f1: wavg(|m| m.f1),
            },
            total_support: total,
            confusion: c,
        })
    }

    pub fn class(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::Good => &self.good,
            Label::Bad => &self.bad,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn classification_report(
    truth: &[Label],
    predicted: &[Label],
) -> Result<ClassReport, EvalError> {
    ClassReport::from_confusion(Confusion::from_labels(truth, predicted)?)
}

/// Classify `matrices` and report against their labels.
pub fn evaluate(
    model: &SvmModel,
    matrices: &[FeatureMatrix],
    exec: Execution,
) -> Result<ClassReport, EvalError> {
    let xs: Vec<&[f64]> = matrices.iter().map(|m| m.as_vector()).collect();
    let predicted = model.predict_batch(&xs, exec)?;
    let truth: Vec<Label> = matrices.iter().map(|m| m.label).collect();
    classification_report(&truth, &predicted)
}

/// Two decimals, halves rounded away from zero.
pub fn two_decimals(v: f64) -> String {
    let hundredths = (v * 100.0).round() as i64;
    let sign = if hundredths < 0 { "-" } else { "" };
    let h = hundredths.abs();
    format!("{sign}{}.{:02}", h / 100, h % 100)
}

pub fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Fixed-width text table: one row per class, then accuracy, macro and
/// weighted averages.
pub fn render_report(report: &ClassReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14}{:>10}{:>10}{:>10}{:>10}",
        "", "Precision", "Recall", "F1-score", "Support"
    );
    for (name, m) in [("Good", &report.good), ("Bad", &report.bad)] {
        let _ = writeln!(
            s,
            "{:<14}{:>10}{:>10}{:>10}{:>10}",
            name,
            two_decimals(m.precision),
            two_decimals(m.recall),
            two_decimals(m.f1),
            thousands(m.support)
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<14}{:>10}{:>10}{:>10}{:>10}",
        "Accuracy",
        "",
        "",
        two_decimals(report.accuracy),
        thousands(report.total_support)
    );
    for (name, a) in [
        ("Macro Avg.", &report.macro_avg),
        ("Weighted Avg.", &report.weighted_avg),
    ] {
        let _ = writeln!(
            s,
            "{:<14}{:>10}{:>10}{:>10}{:>10}",
            name,
            two_decimals(a.precision),
            two_decimals(a.recall),
            two_decimals(a.f1),
            thousands(report.total_support)
        );
    }
    s
}

/// Positions (into the good and bad inputs) of the training pool and of the
/// untouched holdout. Each list is in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegimeIndices {
    pub good_pool: Vec<usize>,
    pub bad_pool: Vec<usize>,
    pub good_holdout: Vec<usize>,
    pub bad_holdout: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Regime<T> {
    pub pool: Vec<T>,
    pub holdout: Vec<T>,
    pub indices: RegimeIndices,
}

/// `floor(frac * n)`, tolerant of representation error in `frac * n`.
fn fraction_of(frac: f64, n: usize) -> usize {
    ((frac * n as f64) + 1e-9).floor() as usize
}

fn sample_sorted(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> (Vec<usize>, Vec<usize>) {
    let mut chosen = index::sample(rng, len, amount).into_vec();
    chosen.sort_unstable();
    let mut taken = vec![false; len];
    chosen.iter().for_each(|&i| taken[i] = true);
    let rest = (0..len).filter(|&i| !taken[i]).collect();
    (chosen, rest)
}

/// Choose which matrices are sampled for training and testing.
///
/// `n_good` good matrices (all of them if fewer exist) and
/// `floor(bad_frac * |bad|)` bad matrices are drawn uniformly without
/// replacement; everything else is holdout.
pub fn sample_regime_indices(
    n_good_total: usize,
    n_bad_total: usize,
    n_good: usize,
    bad_frac: f64,
    seed: u64,
) -> Result<RegimeIndices, EvalError> {
    if n_good_total == 0 {
        return Err(EvalError::EmptyClass(Label::Good));
    }
    if n_bad_total == 0 {
        return Err(EvalError::EmptyClass(Label::Bad));
    }
    if !(bad_frac > 0.0 && bad_frac <= 1.0) {
        return Err(EvalError::InvalidFraction(bad_frac));
    }
    if n_good_total < n_good {
        log::warn!("only {n_good_total} good matrices available, {n_good} requested; taking all");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (good_pool, good_holdout) = sample_sorted(&mut rng, n_good_total, n_good.min(n_good_total));
    let (bad_pool, bad_holdout) =
        sample_sorted(&mut rng, n_bad_total, fraction_of(bad_frac, n_bad_total));
    Ok(RegimeIndices {
        good_pool,
        bad_pool,
        good_holdout,
        bad_holdout,
    })
}

pub fn sample_regime<T: Clone>(
    good: &[T],
    bad: &[T],
    n_good: usize,
    bad_frac: f64,
    seed: u64,
) -> Result<Regime<T>, EvalError> {
    let indices = sample_regime_indices(good.len(), bad.len(), n_good, bad_frac, seed)?;
    let pick = |src: &[T], idx: &[usize]| idx.iter().map(|&i| src[i].clone()).collect::<Vec<_>>();
    let mut pool = pick(good, &indices.good_pool);
    pool.extend(pick(bad, &indices.bad_pool));
    let mut holdout = pick(good, &indices.good_holdout);
    holdout.extend(pick(bad, &indices.bad_holdout));
    Ok(Regime {
        pool,
        holdout,
        indices,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMode {
    /// Each class is split at `train_frac` separately.
    Stratified,
    /// One shuffle over the whole pool.
    Unstratified,
}

/// Indices of the train and test parts of `labels`, each ascending.
pub fn split_indices(
    labels: &[Label],
    train_frac: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(EvalError::InvalidFraction(train_frac));
    }
    for class in Label::ALL {
        if !labels.contains(&class) {
            return Err(EvalError::EmptyClass(class));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = match mode {
        SplitMode::Stratified => Label::ALL
            .iter()
            .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
            .collect(),
        SplitMode::Unstratified => vec![(0..labels.len()).collect()],
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut members in groups {
        members.shuffle(&mut rng);
        let cut = fraction_of(train_frac, members.len());
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split<T: Clone + Labeled>(
    pool: &[T],
    train_frac: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Vec<T>, Vec<T>), EvalError> {
    let labels: Vec<Label> = pool.iter().map(Labeled::label).collect();
    let (train, test) = split_indices(&labels, train_frac, seed, mode)?;
    Ok((
        train.iter().map(|&i| pool[i].clone()).collect(),
        test.iter().map(|&i| pool[i].clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Bad, Good};

    #[test]
    fn all_correct_is_perfect() {
        let t = [Good, Bad, Bad, Good, Good];
        let r = classification_report(&t, &t).unwrap();
        for m in [r.good, r.bad] {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(
            r.macro_avg,
            Averages {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        assert_eq!(r.total_support, 5);
    }

    #[test]
    fn one_false_positive() {
        let r = classification_report(&[Bad, Good], &[Bad, Bad]).unwrap();
        assert_eq!((r.bad.precision, r.bad.recall), (0.5, 1.0));
        assert!((r.bad.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            (r.good.precision, r.good.recall, r.good.f1),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(r.accuracy, 0.5);
        assert_eq!((r.good.support, r.bad.support), (1, 1));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            classification_report(&[Bad], &[Bad, Good]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            classification_report(&[], &[]),
            Err(EvalError::Empty)
        ));
    }

    #[test]
    fn rounding_and_separators() {
        assert_eq!(two_decimals(0.125), "0.13");
        assert_eq!(two_decimals(0.994), "0.99");
        assert_eq!(two_decimals(0.995), "1.00");
        assert_eq!(two_decimals(1.0), "1.00");
        assert_eq!(two_decimals(0.0), "0.00");
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(984), "984");
        assert_eq!(thousands(4977), "4,977");
        assert_eq!(thousands(308_928), "308,928");
        assert_eq!(thousands(1_234_567), "1,234,567");
    }

    #[test]
    fn regime_arithmetic() {
        let good: Vec<usize> = (0..28).collect();
        let bad: Vec<usize> = (100..110).collect();
        let r = sample_regime(&good, &bad, 20, 0.8, 3).unwrap();
        assert_eq!(
            (r.indices.good_pool.len(), r.indices.bad_pool.len()),
            (20, 8)
        );
        assert_eq!(
            (r.indices.good_holdout.len(), r.indices.bad_holdout.len()),
            (8, 2)
        );
        assert_eq!(r.pool.len() + r.holdout.len(), 38);
        let again = sample_regime(&good, &bad, 20, 0.8, 3).unwrap();
        assert_eq!(r, again);
        let mut all: Vec<usize> = r.pool.iter().chain(&r.holdout).copied().collect();
        all.sort_unstable();
        let mut expected: Vec<usize> = good.iter().chain(&bad).copied().collect();
        expected.sort_unstable();
        assert_eq!(all, expected);
    }

    #[test]
    fn regime_at_published_scale() {
        let r = sample_regime_indices(323_269, 28_291, 20_000, 0.8, 1).unwrap();
        assert_eq!(r.bad_pool.len(), 22_632);
        assert_eq!(r.good_pool.len(), 20_000);
        assert_eq!(r.good_holdout.len(), 303_269);
        assert_eq!(r.bad_holdout.len(), 5_659);
    }

    #[test]
    fn regime_errors_and_shortfall() {
        assert!(matches!(
            sample_regime_indices(0, 3, 1, 0.8, 0),
            Err(EvalError::EmptyClass(Good))
        ));
        assert!(matches!(
            sample_regime_indices(3, 0, 1, 0.8, 0),
            Err(EvalError::EmptyClass(Bad))
        ));
        assert!(sample_regime_indices(3, 3, 1, 0.0, 0).is_err());
        let r = sample_regime_indices(5, 3, 100, 1.0, 0).unwrap();
        assert_eq!(
            (r.good_pool.len(), r.good_holdout.len(), r.bad_pool.len()),
            (5, 0, 3)
        );
    }

    #[test]
    fn stratified_split_counts() {
        let labels = [Good, Good, Bad, Bad];
        let (train, test) = split_indices(&labels, 0.5, 4, SplitMode::Stratified).unwrap();
        for part in [&train, &test] {
            assert_eq!(part.iter().filter(|&&i| labels[i] == Good).count(), 1);
            assert_eq!(part.iter().filter(|&&i| labels[i] == Bad).count(), 1);
        }
        assert_eq!(
            split_indices(&labels, 0.5, 4, SplitMode::Stratified).unwrap(),
            (train, test)
        );

        let mut big = vec![Good; 20_000];
        big.extend(vec![Bad; 22_632]);
        let (train, test) = split_indices(&big, 0.8, 1, SplitMode::Stratified).unwrap();
        let test_good = test.iter().filter(|&&i| big[i] == Good).count();
        assert_eq!((test_good, test.len() - test_good), (4_000, 4_527));
        assert_eq!(train.len(), 16_000 + 18_105);
    }

    #[test]
    fn unstratified_split_total_only() {
        let mut labels = vec![Good; 60];
        labels.extend(vec![Bad; 40]);
        let (train, test) = split_indices(&labels, 0.8, 7, SplitMode::Unstratified).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        assert!(split_indices(&[Good, Good], 0.5, 0, SplitMode::Stratified).is_err());
        assert!(split_indices(&labels, 1.0, 0, SplitMode::Stratified).is_err());
    }

    fn labels_strategy() -> impl Strategy<Value = Vec<(Label, Label)>> {
        proptest::collection::vec(
            (prop::bool::ANY, prop::bool::ANY)
                .prop_map(|(a, b)| (if a { Bad } else { Good }, if b { Bad } else { Good })),
            1..200,
        )
    }

    proptest! {
        #[test]
        fn report_identities(pairs in labels_strategy(), seed in any::<u64>()) {
            let (t, p): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let r = classification_report(&t, &p).unwrap();
            // Two-class accuracy equals support-weighted recall.
            prop_assert!((r.accuracy - r.weighted_avg.recall).abs() < 1e-12);
            prop_assert_eq!(r.total_support, r.good.support + r.bad.support);
            for m in [r.good, r.bad] {
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (t2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            prop_assert_eq!(classification_report(&t2, &p2).unwrap(), r);
        }
    }
}
