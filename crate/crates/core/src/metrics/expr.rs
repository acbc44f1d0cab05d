//! Expression recognition: global and local macro F1, Equality of
//! Opportunity (EOP) and Statistical Parity (SP).

use crate::data_model::{Attribute, ConfusionMatrix, Task, TaskLabel};
use crate::error::{Error, Result};
use crate::metrics::{mean, mean_pairwise, EvalSet};

/// Counts `(truth, pred)` pairs into a `classes`×`classes` matrix.
pub fn confusion_matrix(
    truth: &[usize],
    pred: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&t, &p) in truth.iter().zip(pred) {
        for index in [t, p] {
            if index >= classes {
                return Err(Error::ClassOutOfRange { index, classes });
            }
        }
        cm.increment(t, p);
    }
    Ok(cm)
}

/// Per-class F1 = 2TP / (2TP + FP + FN). `None` for a class that appears
/// neither in the truth nor in the predictions.
pub fn f1_per_class(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    let n = cm.classes();
    (0..n)
        .map(|c| {
            let tp = cm.get(c, c);
            let fn_: u64 = cm.row(c).iter().sum::<u64>() - tp;
            let fp: u64 = (0..n).map(|r| cm.get(r, c)).sum::<u64>() - tp;
            let denom = 2 * tp + fp + fn_;
            (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
        })
        .collect()
}

/// Mean of the present per-class F1 scores.
pub fn macro_f1(cm: &ConfusionMatrix) -> Option<f64> {
    let present: Vec<f64> = f1_per_class(cm).into_iter().flatten().collect();
    mean(&present)
}

/// Row-normalized confusion matrix. Rows without support are all-zero and
/// flagged undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRateMatrix {
    classes: usize,
    rates: Vec<f64>,
    defined: Vec<bool>,
}

impl ErrorRateMatrix {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> f64 {
        self.rates[truth * self.classes + pred]
    }

    pub fn row(&self, truth: usize) -> &[f64] {
        &self.rates[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn is_defined(&self, truth: usize) -> bool {
        self.defined[truth]
    }
}

pub fn normalize_confusion(cm: &ConfusionMatrix) -> ErrorRateMatrix {
    let n = cm.classes();
    let mut rates = vec![0.0; n * n];
    let mut defined = vec![false; n];
    for i in 0..n {
        let support: u64 = cm.row(i).iter().sum();
        if support == 0 {
            continue;
        }
        defined[i] = true;
        for j in 0..n {
            rates[i * n + j] = cm.get(i, j) as f64 / support as f64;
        }
    }
    ErrorRateMatrix {
        classes: n,
        rates,
        defined,
    }
}

/// Σ|A − B| / C². Rows undefined in either matrix add nothing to the sum;
/// the C² divisor is kept regardless.
pub fn mad_matrices(a: &ErrorRateMatrix, b: &ErrorRateMatrix) -> Result<f64> {
    if a.classes != b.classes {
        return Err(Error::DimensionMismatch {
            expected: a.classes,
            found: b.classes,
        });
    }
    let n = a.classes;
    if n == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in (0..n).filter(|&i| a.defined[i] && b.defined[i]) {
        for (x, y) in a.row(i).iter().zip(b.row(i)) {
            sum += (x - y).abs();
        }
    }
    Ok(sum / (n * n) as f64)
}

/// Fraction of a subgroup's samples predicted as each class.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRateVector {
    pub rates: Vec<f64>,
}

pub fn success_rates(predictions: &[usize], classes: usize) -> Result<SuccessRateVector> {
    if predictions.is_empty() {
        return Err(Error::EmptyScope);
    }
    let mut counts = vec![0u64; classes];
    for &p in predictions {
        if p >= classes {
            return Err(Error::ClassOutOfRange { index: p, classes });
        }
        counts[p] += 1;
    }
    let n = predictions.len() as f64;
    Ok(SuccessRateVector {
        rates: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Σ_c |a_c − b_c| / C.
pub fn mad_vectors(a: &SuccessRateVector, b: &SuccessRateVector) -> Result<f64> {
    if a.rates.len() != b.rates.len() {
        return Err(Error::DimensionMismatch {
            expected: a.rates.len(),
            found: b.rates.len(),
        });
    }
    if a.rates.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a
        .rates
        .iter()
        .zip(&b.rates)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / a.rates.len() as f64)
}

fn class_pairs(set: &EvalSet<'_>) -> (Vec<usize>, Vec<usize>) {
    set.items()
        .iter()
        .map(|item| match (&item.sample.label, item.pred) {
            (TaskLabel::Expr(t), TaskLabel::Expr(p)) => (*t, *p),
            _ => unreachable!("EvalSet guarantees expression labels"),
        })
        .unzip()
}

/// Confusion matrix of an evaluation scope.
pub fn scope_confusion(set: &EvalSet<'_>) -> Result<ConfusionMatrix> {
    set.require_task(Task::Expr)?;
    let (truth, pred) = class_pairs(set);
    confusion_matrix(&truth, &pred, set.cardinality())
}

/// Macro F1 over the scope, averaging only present classes.
pub fn global_f1(set: &EvalSet<'_>) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyScope);
    }
    let cm = scope_confusion(set)?;
    macro_f1(&cm).ok_or(Error::EmptyScope)
}

/// Two-level mean: macro F1 within each subgroup, then the mean over
/// subgroups.
pub fn local_f1(set: &EvalSet<'_>, attribute: Attribute) -> Result<f64> {
    set.require_task(Task::Expr)?;
    let groups = set.require_subgroups(attribute, 1)?;
    let scores = groups
        .values()
        .map(global_f1)
        .collect::<Result<Vec<f64>>>()?;
    mean(&scores).ok_or(Error::EmptyScope)
}

/// Mean pairwise MAD between the subgroups' error-rate matrices.
pub fn eop(set: &EvalSet<'_>, attribute: Attribute) -> Result<f64> {
    set.require_task(Task::Expr)?;
    let groups = set.require_subgroups(attribute, 2)?;
    let matrices = groups
        .values()
        .map(|g| scope_confusion(g).map(|cm| normalize_confusion(&cm)))
        .collect::<Result<Vec<_>>>()?;
    mean_pairwise(&matrices, |a, b| {
        mad_matrices(a, b).expect("matrices share the dataset's class count")
    })
    .ok_or(Error::EmptyScope)
}

/// Mean pairwise MAD between the subgroups' success-rate vectors.
pub fn sp(set: &EvalSet<'_>, attribute: Attribute) -> Result<f64> {
    set.require_task(Task::Expr)?;
    let groups = set.require_subgroups(attribute, 2)?;
    let vectors = groups
        .values()
        .map(|g| success_rates(&class_pairs(g).1, set.cardinality()))
        .collect::<Result<Vec<_>>>()?;
    mean_pairwise(&vectors, |a, b| {
        mad_vectors(a, b).expect("vectors share the dataset's class count")
    })
    .ok_or(Error::EmptyScope)
}
