//! Action unit detection: global and local F1 over binary AUs, Equal
//! Opportunity Difference (EOD) and Demographic Parity Difference (DPD).

use crate::data_model::{Attribute, Task, TaskLabel};
use crate::error::{Error, Result};
use crate::metrics::{mean, EvalSet, Measured};

/// Per-AU 2×2 tallies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuConfusion {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub tn: Vec<u64>,
}

impl AuConfusion {
    pub fn units(&self) -> usize {
        self.tp.len()
    }

    /// Binary F1 of one AU with activation as the positive class; `None`
    /// when the AU is inactive in both truth and predictions.
    pub fn f1(&self, au: usize) -> Option<f64> {
        let denom = 2 * self.tp[au] + self.fp[au] + self.fn_[au];
        (denom > 0).then(|| 2.0 * self.tp[au] as f64 / denom as f64)
    }

    /// Mean F1 over the AUs that have any activation.
    pub fn mean_f1(&self) -> Option<f64> {
        let present: Vec<f64> = (0..self.units()).filter_map(|au| self.f1(au)).collect();
        mean(&present)
    }
}

pub fn au_confusion<T, P>(truth: &[T], pred: &[P]) -> Result<AuConfusion>
where
    T: AsRef<[bool]>,
    P: AsRef<[bool]>,
{
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    let m = truth.first().map_or(0, |t| t.as_ref().len());
    let mut c = AuConfusion {
        tp: vec![0; m],
        fp: vec![0; m],
        fn_: vec![0; m],
        tn: vec![0; m],
    };
    for (t, p) in truth.iter().zip(pred) {
        let (t, p) = (t.as_ref(), p.as_ref());
        for found in [t.len(), p.len()] {
            if found != m {
                return Err(Error::DimensionMismatch { expected: m, found });
            }
        }
        for au in 0..m {
            match (t[au], p[au]) {
                (true, true) => c.tp[au] += 1,
                (false, true) => c.fp[au] += 1,
                (true, false) => c.fn_[au] += 1,
                (false, false) => c.tn[au] += 1,
            }
        }
    }
    Ok(c)
}

/// TP / (TP + FN); `None` without positive ground truth.
pub fn tpr(confusion: &AuConfusion, au: usize) -> Option<f64> {
    let pos = confusion.tp[au] + confusion.fn_[au];
    (pos > 0).then(|| confusion.tp[au] as f64 / pos as f64)
}

/// Fraction of `predictions` with `au` active.
pub fn selection_rate<P: AsRef<[bool]>>(predictions: &[P], au: usize) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyScope);
    }
    let mut active = 0usize;
    for p in predictions {
        let bits = p.as_ref();
        if au >= bits.len() {
            return Err(Error::DimensionMismatch {
                expected: au + 1,
                found: bits.len(),
            });
        }
        active += bits[au] as usize;
    }
    Ok(active as f64 / predictions.len() as f64)
}

/// Binarizes a 0–5 AU intensity: active iff intensity > 0.
pub fn intensity_to_activation(intensity: i64) -> Result<bool> {
    if !(0..=5).contains(&intensity) {
        return Err(Error::OutOfRange(format!(
            "AU intensity {intensity} outside 0..=5"
        )));
    }
    Ok(intensity > 0)
}

fn bit_pairs<'s>(set: &'s EvalSet<'_>) -> (Vec<&'s [bool]>, Vec<&'s [bool]>) {
    set.items()
        .iter()
        .map(|item| match (&item.sample.label, item.pred) {
            (TaskLabel::Au(t), TaskLabel::Au(p)) => (t.as_slice(), p.as_slice()),
            _ => unreachable!("EvalSet guarantees AU labels"),
        })
        .unzip()
}

pub fn scope_confusion(set: &EvalSet<'_>) -> Result<AuConfusion> {
    set.require_task(Task::Au)?;
    let (truth, pred) = bit_pairs(set);
    let mut c = au_confusion(&truth, &pred)?;
    if truth.is_empty() {
        let m = set.cardinality();
        c = AuConfusion {
            tp: vec![0; m],
            fp: vec![0; m],
            fn_: vec![0; m],
            tn: vec![0; m],
        };
    }
    Ok(c)
}

/// Mean binary F1 over the AUs present in the scope.
pub fn global_f1(set: &EvalSet<'_>) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyScope);
    }
    scope_confusion(set)?
        .mean_f1()
        .ok_or_else(|| Error::NoScorableAu("no AU is active in truth or predictions".into()))
}

/// Per-subgroup mean AU F1, averaged over subgroups. Subgroups without any
/// scorable AU are skipped.
pub fn local_f1(set: &EvalSet<'_>, attribute: Attribute) -> Result<Measured> {
    set.require_task(Task::Au)?;
    let groups = set.require_subgroups(attribute, 1)?;
    let mut scores = Vec::with_capacity(groups.len());
    let mut skipped = Vec::new();
    for (g, sub) in &groups {
        match scope_confusion(sub)?.mean_f1() {
            Some(f) => scores.push(f),
            None => skipped.push(format!("{g}: no scorable AU")),
        }
    }
    let value = mean(&scores).ok_or_else(|| {
        Error::NoScorableAu(format!("no subgroup of {attribute} has a scorable AU"))
    })?;
    Ok(Measured { value, skipped })
}

/// Mean over AUs of the spread between the largest and smallest subgroup
/// TPR. Subgroups without positives for an AU are left out of that AU's
/// spread; AUs with fewer than two defined TPRs are skipped and excluded from
/// the divisor.
pub fn eod(set: &EvalSet<'_>, attribute: Attribute) -> Result<Measured> {
    set.require_task(Task::Au)?;
    let groups = set.require_subgroups(attribute, 2)?;
    let confusions = groups
        .values()
        .map(scope_confusion)
        .collect::<Result<Vec<_>>>()?;
    let mut spreads = Vec::new();
    let mut skipped = Vec::new();
    for au in 0..set.cardinality() {
        let rates: Vec<f64> = confusions.iter().filter_map(|c| tpr(c, au)).collect();
        if rates.len() < 2 {
            skipped.push(format!(
                "AU {}: {} subgroup(s) with positive ground truth",
                au + 1,
                rates.len()
            ));
            continue;
        }
        spreads.push(spread(&rates));
    }
    let value = mean(&spreads).ok_or_else(|| {
        Error::NoScorableAu(format!(
            "no AU has a defined TPR in two or more {attribute} subgroups"
        ))
    })?;
    Ok(Measured { value, skipped })
}

/// Mean over all M AUs of the spread between the largest and smallest
/// subgroup selection rate.
pub fn dpd(set: &EvalSet<'_>, attribute: Attribute) -> Result<f64> {
    set.require_task(Task::Au)?;
    let groups = set.require_subgroups(attribute, 2)?;
    let preds: Vec<Vec<&[bool]>> = groups.values().map(|g| bit_pairs(g).1).collect();
    let m = set.cardinality();
    let mut spreads = Vec::with_capacity(m);
    for au in 0..m {
        let rates = preds
            .iter()
            .map(|p| selection_rate(p, au))
            .collect::<Result<Vec<f64>>>()?;
        spreads.push(spread(&rates));
    }
    mean(&spreads).ok_or_else(|| Error::NoScorableAu("dataset declares no AUs".into()))
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}
