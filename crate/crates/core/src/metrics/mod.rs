//! Global, local and fairness metrics for the three affect tasks.
//!
//! Every metric works on an [`EvalSet`]: the samples of one evaluation scope
//! (usually a train/valid/test set) paired with their predictions. Values are
//! fractions in `[0, 1]` (CCC in `[-1, 1]`); percent conversion happens in
//! the report layer.

pub mod au;
pub mod expr;
pub mod va;

use std::collections::{BTreeMap, HashSet};

use crate::data_model::{Attribute, Dataset, PredictionSet, Sample, Subgroup, Task, TaskLabel};
use crate::error::{Error, Result};

/// A scored sample: ground truth with the model's prediction.
#[derive(Debug, Clone, Copy)]
pub struct Scored<'a> {
    pub sample: &'a Sample,
    pub pred: &'a TaskLabel,
}

/// Samples of one evaluation scope aligned with their predictions.
#[derive(Debug, Clone)]
pub struct EvalSet<'a> {
    task: Task,
    cardinality: usize,
    items: Vec<Scored<'a>>,
}

impl<'a> EvalSet<'a> {
    /// Aligns `predictions` with the samples in `scope`, or with the whole
    /// dataset when `scope` is `None`. Fails listing every scoped sample that
    /// has no prediction.
    pub fn new(
        dataset: &'a Dataset,
        predictions: &'a PredictionSet,
        scope: Option<&[&str]>,
    ) -> Result<EvalSet<'a>> {
        if predictions.task() != dataset.task() {
            return Err(Error::TaskMismatch {
                expected: dataset.task(),
                found: predictions.task(),
            });
        }
        let samples: Vec<&Sample> = match scope {
            None => dataset.samples().iter().collect(),
            Some(ids) => {
                let mut seen = HashSet::with_capacity(ids.len());
                let mut out = Vec::with_capacity(ids.len());
                for id in ids {
                    let s = dataset
                        .get(id)
                        .ok_or_else(|| Error::UnknownSample(id.to_string()))?;
                    if seen.insert(*id) {
                        out.push(s);
                    }
                }
                out
            }
        };
        let mut missing = Vec::new();
        let mut items = Vec::with_capacity(samples.len());
        for sample in samples {
            match predictions.get(&sample.sample_id) {
                Some(pred) => {
                    pred.check(dataset.task(), dataset.cardinality())
                        .map_err(|e| {
                            Error::OutOfRange(format!("prediction for `{}`: {e}", sample.sample_id))
                        })?;
                    items.push(Scored { sample, pred });
                }
                None => missing.push(sample.sample_id.clone()),
            }
        }
        if !missing.is_empty() {
            missing.sort();
            return Err(Error::MissingPredictions(missing));
        }
        Ok(EvalSet {
            task: dataset.task(),
            cardinality: dataset.cardinality(),
            items,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// C for expressions, M for action units.
    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn items(&self) -> &[Scored<'a>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Non-empty subgroups of `attribute`, each as its own `EvalSet`, in
    /// subgroup order.
    pub fn subgroups(&self, attribute: Attribute) -> BTreeMap<Subgroup, EvalSet<'a>> {
        let mut out: BTreeMap<Subgroup, EvalSet<'a>> = BTreeMap::new();
        for item in &self.items {
            if let Some(g) = attribute.subgroup_of(&item.sample.demographics) {
                out.entry(g)
                    .or_insert_with(|| EvalSet {
                        task: self.task,
                        cardinality: self.cardinality,
                        items: Vec::new(),
                    })
                    .items
                    .push(*item);
            }
        }
        out
    }

    fn require_task(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(Error::TaskMismatch {
                expected: task,
                found: self.task,
            });
        }
        Ok(())
    }

    fn require_subgroups(
        &self,
        attribute: Attribute,
        needed: usize,
    ) -> Result<BTreeMap<Subgroup, EvalSet<'a>>> {
        let groups = self.subgroups(attribute);
        if groups.len() < needed {
            return Err(Error::TooFewSubgroups {
                attribute,
                found: groups.len(),
                needed,
            });
        }
        Ok(groups)
    }
}

/// A metric value together with the subgroups or units skipped while
/// computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub skipped: Vec<String>,
}

/// Neumaier-compensated sum; summation order is the iteration order.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(compensated_sum(values.iter().copied()) / values.len() as f64)
    }
}

/// Mean of `dist` over all unordered pairs of `items`, enumerated in order.
pub(crate) fn mean_pairwise<T>(items: &[T], mut dist: impl FnMut(&T, &T) -> f64) -> Option<f64> {
    let mut values = Vec::with_capacity(items.len() * items.len().saturating_sub(1) / 2);
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            values.push(dist(&items[i], &items[j]));
        }
    }
    mean(&values)
}
