//! Valence–arousal estimation: concordance correlation coefficient (CCC)
//! per dimension, global and local.

use crate::data_model::{Attribute, Task, TaskLabel};
use crate::error::{Error, Result};
use crate::metrics::{compensated_sum, EvalSet};

/// Annotations and predictions of one affect dimension.
#[derive(Debug, Clone, Copy)]
pub struct SeriesPair<'a> {
    truth: &'a [f64],
    pred: &'a [f64],
}

impl<'a> SeriesPair<'a> {
    pub fn new(truth: &'a [f64], pred: &'a [f64]) -> Result<SeriesPair<'a>> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: pred.len(),
            });
        }
        if truth.len() < 2 {
            return Err(Error::Degenerate(format!(
                "{} value(s); CCC needs at least 2",
                truth.len()
            )));
        }
        if let Some(v) = truth
            .iter()
            .chain(pred)
            .find(|v| !(-1.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange(format!("value {v} outside [-1, 1]")));
        }
        Ok(SeriesPair { truth, pred })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

/// CCC = 2·s_xy / (s_x² + s_y² + (x̄ − ȳ)²) with population moments.
pub fn ccc(pair: &SeriesPair<'_>) -> Result<f64> {
    let n = pair.len() as f64;
    let mx = compensated_sum(pair.truth.iter().copied()) / n;
    let my = compensated_sum(pair.pred.iter().copied()) / n;
    let var_x = compensated_sum(pair.truth.iter().map(|x| (x - mx) * (x - mx))) / n;
    let var_y = compensated_sum(pair.pred.iter().map(|y| (y - my) * (y - my))) / n;
    let cov = compensated_sum(
        pair.truth
            .iter()
            .zip(pair.pred)
            .map(|(x, y)| (x - mx) * (y - my)),
    ) / n;
    let denom = var_x + var_y + (mx - my) * (mx - my);
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "both series constant with equal means".into(),
        ));
    }
    Ok((2.0 * cov / denom).clamp(-1.0, 1.0))
}

/// Per-dimension CCC and their mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CccScores {
    pub valence: f64,
    pub arousal: f64,
    pub mean: f64,
}

/// Local CCC with the subgroups skipped as degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCcc {
    pub scores: CccScores,
    pub skipped: Vec<String>,
}

struct Series {
    truth_v: Vec<f64>,
    truth_a: Vec<f64>,
    pred_v: Vec<f64>,
    pred_a: Vec<f64>,
}

fn series(set: &EvalSet<'_>) -> Series {
    let n = set.len();
    let mut s = Series {
        truth_v: Vec::with_capacity(n),
        truth_a: Vec::with_capacity(n),
        pred_v: Vec::with_capacity(n),
        pred_a: Vec::with_capacity(n),
    };
    for item in set.items() {
        match (&item.sample.label, item.pred) {
            (
                TaskLabel::Va { valence, arousal },
                TaskLabel::Va {
                    valence: pv,
                    arousal: pa,
                },
            ) => {
                s.truth_v.push(*valence);
                s.truth_a.push(*arousal);
                s.pred_v.push(*pv);
                s.pred_a.push(*pa);
            }
            _ => unreachable!("EvalSet guarantees VA labels"),
        }
    }
    s
}

/// CCC of valence and arousal over the whole scope.
pub fn global_ccc(set: &EvalSet<'_>) -> Result<CccScores> {
    set.require_task(Task::Va)?;
    if set.is_empty() {
        return Err(Error::EmptyScope);
    }
    let s = series(set);
    let valence = ccc(&SeriesPair::new(&s.truth_v, &s.pred_v)?)
        .map_err(|e| Error::Degenerate(format!("valence: {e}")))?;
    let arousal = ccc(&SeriesPair::new(&s.truth_a, &s.pred_a)?)
        .map_err(|e| Error::Degenerate(format!("arousal: {e}")))?;
    Ok(CccScores {
        valence,
        arousal,
        mean: 0.5 * (valence + arousal),
    })
}

/// Per-subgroup CCC averaged over subgroups, per dimension and jointly.
/// A subgroup degenerate in either dimension is skipped entirely.
pub fn local_ccc(set: &EvalSet<'_>, attribute: Attribute) -> Result<LocalCcc> {
    set.require_task(Task::Va)?;
    let groups = set.require_subgroups(attribute, 1)?;
    let mut per_group = Vec::with_capacity(groups.len());
    let mut skipped = Vec::new();
    for (g, sub) in &groups {
        match global_ccc(sub) {
            Ok(scores) => per_group.push(scores),
            Err(e) => skipped.push(format!("{g}: {e}")),
        }
    }
    if per_group.is_empty() {
        return Err(Error::Degenerate(format!(
            "every {attribute} subgroup is degenerate"
        )));
    }
    let k = per_group.len() as f64;
    let valence = compensated_sum(per_group.iter().map(|s| s.valence)) / k;
    let arousal = compensated_sum(per_group.iter().map(|s| s.arousal)) / k;
    let mean = compensated_sum(per_group.iter().map(|s| s.valence + s.arousal)) / (2.0 * k);
    Ok(LocalCcc {
        scores: CccScores {
            valence,
            arousal,
            mean,
        },
        skipped,
    })
}
