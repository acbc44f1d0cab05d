//! Subject-independent train/valid/test partitioning with distribution
//! matching.
//!
//! Subjects are atomic: every sample of a subject lands in the same set.
//! Within that hard constraint the search minimizes
//!
//! ```text
//! Σ_sets Σ_dims w_d · L1(set marginal_d, global marginal_d)
//!   + λ · Σ_sets |set fraction − target ratio|
//! ```
//!
//! over the label stratum, race, age and gender marginals. An empty set has
//! divergence 2 (the L1 maximum) in every dimension.
//!
//! The search seeds greedily (largest subjects first, each into the set with
//! the lowest objective over the subjects placed so far) and then runs
//! steepest descent: the best single-subject move is applied while one
//! improves the objective, otherwise the best two-subject swap, until neither
//! improves or the move budget is spent.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{AgeGroup, Dataset, Gender, Partition, Race, SplitSet, TaskLabel};
use crate::error::{Error, Result};

const IMPROVEMENT_EPS: f64 = 1e-12;

/// A cell of the valence–arousal grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VaRegion {
    pub valence: u32,
    pub arousal: u32,
}

fn grid_bins(width: f64) -> Result<u32> {
    let bins = 2.0 / width;
    if !(width > 0.0 && width <= 2.0) || (bins - bins.round()).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!(
            "bin width {width} must lie in (0, 2] and divide 2 evenly"
        )));
    }
    Ok(bins.round() as u32)
}

fn bin_of(x: f64, width: f64, bins: u32) -> u32 {
    let pos = (x + 1.0) / width;
    let nearest = pos.round();
    // values on a bin edge belong to the bin starting there
    let bin = if (pos - nearest).abs() < 1e-9 {
        nearest
    } else {
        pos.floor()
    };
    (bin.max(0.0) as u32).min(bins - 1)
}

/// Maps a valence–arousal point to its grid cell. Bins are half-open
/// `[lo, lo + w)`, except the top bin which also takes 1.0.
pub fn va_region(valence: f64, arousal: f64, width: f64) -> Result<VaRegion> {
    let bins = grid_bins(width)?;
    for (name, v) in [("valence", valence), ("arousal", arousal)] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange(format!("{name} {v} outside [-1, 1]")));
        }
    }
    Ok(VaRegion {
        valence: bin_of(valence, width, bins),
        arousal: bin_of(arousal, width, bins),
    })
}

/// The task-label component of a stratification cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stratum {
    Class(usize),
    Region(VaRegion),
    /// AU activation pattern, most significant character = first AU.
    Pattern(String),
    /// AU patterns rarer than the configured floor.
    Other,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stratum::Class(c) => write!(f, "class {c}"),
            Stratum::Region(r) => write!(f, "va cell ({}, {})", r.valence, r.arousal),
            Stratum::Pattern(p) => write!(f, "0b{p}"),
            Stratum::Other => f.write_str("other"),
        }
    }
}

fn pattern_key(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Maps task labels to strata. For AU data the frequent activation
/// patterns are learned from the dataset.
#[derive(Debug, Clone)]
pub struct Stratifier {
    bin_width: f64,
    frequent_patterns: BTreeSet<String>,
}

impl Stratifier {
    /// `rare_pattern_floor` is the minimum share of samples an AU pattern
    /// needs to keep its own stratum.
    pub fn fit(dataset: &Dataset, bin_width: f64, rare_pattern_floor: f64) -> Result<Stratifier> {
        grid_bins(bin_width)?;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for s in dataset.samples() {
            if let TaskLabel::Au(bits) = &s.label {
                *counts.entry(pattern_key(bits)).or_default() += 1;
            }
        }
        let n = dataset.len().max(1) as f64;
        let frequent_patterns = counts
            .into_iter()
            .filter(|(_, c)| *c as f64 / n >= rare_pattern_floor)
            .map(|(p, _)| p)
            .collect();
        Ok(Stratifier {
            bin_width,
            frequent_patterns,
        })
    }

    /// Stratifier with an explicit set of frequent AU patterns.
    pub fn with_patterns<I, S>(bin_width: f64, patterns: I) -> Result<Stratifier>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        grid_bins(bin_width)?;
        Ok(Stratifier {
            bin_width,
            frequent_patterns: patterns.into_iter().map(Into::into).collect(),
        })
    }

    pub fn stratum(&self, label: &TaskLabel) -> Result<Stratum> {
        Ok(match label {
            TaskLabel::Expr(c) => Stratum::Class(*c),
            TaskLabel::Va { valence, arousal } => {
                Stratum::Region(va_region(*valence, *arousal, self.bin_width)?)
            }
            TaskLabel::Au(bits) => {
                let key = pattern_key(bits);
                if self.frequent_patterns.contains(&key) {
                    Stratum::Pattern(key)
                } else {
                    Stratum::Other
                }
            }
        })
    }
}

/// Joint stratification cell: (task stratum, race, age, gender).
pub type Cell = (Stratum, Race, AgeGroup, Gender);

/// Per-subject histogram over joint cells.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StratProfile {
    pub cells: BTreeMap<Cell, usize>,
}

impl StratProfile {
    pub fn total(&self) -> usize {
        self.cells.values().sum()
    }
}

pub fn build_profiles(
    dataset: &Dataset,
    stratifier: &Stratifier,
) -> Result<BTreeMap<String, StratProfile>> {
    let mut profiles: BTreeMap<String, StratProfile> = BTreeMap::new();
    for s in dataset.samples() {
        let d = s.demographics;
        let cell = (stratifier.stratum(&s.label)?, d.race, d.age, d.gender);
        *profiles
            .entry(s.subject_id.clone())
            .or_default()
            .cells
            .entry(cell)
            .or_default() += 1;
    }
    Ok(profiles)
}

/// A marginal along which sets are matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Label,
    Race,
    Age,
    Gender,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Label,
        Dimension::Race,
        Dimension::Age,
        Dimension::Gender,
    ];
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Label => "label",
            Dimension::Race => "race",
            Dimension::Age => "age",
            Dimension::Gender => "gender",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    /// Target (train, valid, test) shares.
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Weight per [`Dimension`], in `Dimension::ALL` order.
    pub weights: [f64; 4],
    /// Allowed |fraction − ratio| per set.
    pub tolerance: f64,
    /// Valence–arousal grid bin width.
    pub bin_width: f64,
    /// Minimum sample share for an AU pattern to form its own stratum.
    pub rare_pattern_floor: f64,
    /// λ, the weight of the ratio term.
    pub ratio_penalty: f64,
    /// Maximum number of refinement moves or swaps per start.
    pub max_moves: usize,
    /// Upper bound on extra greedy-plus-refinement runs over seeded random
    /// subject orders; the best objective over all starts wins.
    pub restarts: usize,
    /// Restarts actually run are `min(restarts, restart_budget / subjects)`,
    /// at least one, so large datasets do few of them.
    pub restart_budget: usize,
}

impl PartitionSpec {
    /// Number of extra starts for a dataset with `subjects` subjects.
    pub fn effective_restarts(&self, subjects: usize) -> usize {
        if self.restarts == 0 {
            return 0;
        }
        (self.restart_budget / subjects.max(1)).clamp(1, self.restarts)
    }
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            ratios: [0.55, 0.15, 0.30],
            seed: 0,
            weights: [1.0; 4],
            tolerance: 0.02,
            bin_width: 0.2,
            rare_pattern_floor: 0.01,
            ratio_penalty: 10.0,
            max_moves: 20_000,
            restarts: 32,
            restart_budget: 2_000,
        }
    }
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidSpec("ratios must be positive".into()));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("ratios sum to {sum}, not 1")));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidSpec("weights must be non-negative".into()));
        }
        if !(self.tolerance >= 0.0) || !(self.ratio_penalty >= 0.0) {
            return Err(Error::InvalidSpec(
                "tolerance and ratio penalty must be non-negative".into(),
            ));
        }
        grid_bins(self.bin_width)?;
        Ok(())
    }

    fn stratifier(&self, dataset: &Dataset) -> Result<Stratifier> {
        Stratifier::fit(dataset, self.bin_width, self.rare_pattern_floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetQuality {
    pub set: SplitSet,
    pub samples: usize,
    pub subjects: usize,
    pub fraction: f64,
    /// |fraction − target ratio|.
    pub ratio_error: f64,
    /// L1 distance between the set's marginal and the global marginal.
    pub divergence: BTreeMap<Dimension, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionQuality {
    pub sets: Vec<SetQuality>,
    pub subject_independent: bool,
    pub straddling_subjects: Vec<String>,
    pub objective: f64,
    pub warnings: Vec<String>,
}

impl PartitionQuality {
    pub fn set(&self, set: SplitSet) -> &SetQuality {
        &self.sets[set.index()]
    }

    pub fn max_ratio_error(&self) -> f64 {
        self.sets.iter().map(|s| s.ratio_error).fold(0.0, f64::max)
    }

    pub fn max_divergence(&self) -> f64 {
        self.sets
            .iter()
            .flat_map(|s| s.divergence.values().copied())
            .fold(0.0, f64::max)
    }

    /// Independence holds and every ratio error is within `tolerance`.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.subject_independent && self.sets.iter().all(|s| s.ratio_error <= tolerance + 1e-12)
    }
}

impl fmt::Display for PartitionQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "subject independence: {}",
            if self.subject_independent {
                "yes"
            } else {
                "NO"
            }
        )?;
        for s in &self.sets {
            write!(
                f,
                "{:<5} samples={:<8} subjects={:<6} fraction={:.4} ratio_error={:.4}",
                s.set.as_str(),
                s.samples,
                s.subjects,
                s.fraction,
                s.ratio_error
            )?;
            for (d, v) in &s.divergence {
                write!(f, " L1[{d}]={v:.4}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "objective: {:.6}", self.objective)?;
        for s in &self.straddling_subjects {
            writeln!(f, "straddling subject: {s}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Output of [`partition`].
#[derive(Debug, Clone)]
pub struct Partitioned {
    pub partition: Partition,
    pub quality: PartitionQuality,
    /// Objective after greedy seeding and after every applied refinement step.
    pub trace: Vec<f64>,
}

/// Per-dimension category index of every sample, plus category counts.
struct Encoded {
    /// `categories[d]` = number of categories in dimension d.
    categories: [usize; 4],
    /// sample index -> category per dimension
    codes: Vec<[usize; 4]>,
}

fn encode(dataset: &Dataset, stratifier: &Stratifier) -> Result<Encoded> {
    let strata: Vec<Stratum> = dataset
        .samples()
        .iter()
        .map(|s| stratifier.stratum(&s.label))
        .collect::<Result<_>>()?;
    let distinct: BTreeSet<&Stratum> = strata.iter().collect();
    let stratum_index: HashMap<&Stratum, usize> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let codes = dataset
        .samples()
        .iter()
        .zip(&strata)
        .map(|(s, st)| {
            [
                stratum_index[st],
                s.demographics.race.index(),
                s.demographics.age.index(),
                s.demographics.gender.index(),
            ]
        })
        .collect();
    Ok(Encoded {
        categories: [
            stratum_index.len(),
            Race::ALL.len(),
            AgeGroup::ALL.len(),
            Gender::ALL.len(),
        ],
        codes,
    })
}

/// Subject histograms per dimension, as sparse (category, count) lists.
struct SubjectProfile {
    total: f64,
    dims: [Vec<(usize, f64)>; 4],
}

struct Search<'a> {
    spec: &'a PartitionSpec,
    categories: [usize; 4],
    global: [Vec<f64>; 4],
    total: f64,
    subjects: Vec<SubjectProfile>,
    /// counts[set][dim][category]
    counts: [[Vec<f64>; 4]; 3],
    totals: [f64; 3],
    members: [usize; 3],
    assignment: Vec<Option<usize>>,
    scratch: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(spec: &'a PartitionSpec, encoded: &Encoded, subjects: Vec<SubjectProfile>) -> Self {
        let mut global: [Vec<f64>; 4] = std::array::from_fn(|d| vec![0.0; encoded.categories[d]]);
        for codes in &encoded.codes {
            for d in 0..4 {
                global[d][codes[d]] += 1.0;
            }
        }
        let total = encoded.codes.len() as f64;
        for g in global.iter_mut() {
            for v in g.iter_mut() {
                *v /= total;
            }
        }
        let empty =
            || -> [Vec<f64>; 4] { std::array::from_fn(|d| vec![0.0; encoded.categories[d]]) };
        let n = subjects.len();
        let max_k = encoded.categories.iter().copied().max().unwrap_or(0);
        Search {
            spec,
            categories: encoded.categories,
            global,
            total,
            subjects,
            counts: [empty(), empty(), empty()],
            totals: [0.0; 3],
            members: [0; 3],
            assignment: vec![None; n],
            scratch: vec![0.0; max_k],
        }
    }

    /// Divergence of one set in one dimension with `delta` applied to its
    /// counts (sign +1 adds, −1 removes).
    fn divergence_with(&mut self, set: usize, d: usize, delta: &[(&SubjectProfile, f64)]) -> f64 {
        let mut total = self.totals[set];
        for (p, sign) in delta {
            total += sign * p.total;
        }
        if total <= 0.0 {
            return 2.0;
        }
        let k = self.categories[d];
        let buf = &mut self.scratch[..k];
        buf.copy_from_slice(&self.counts[set][d]);
        for (p, sign) in delta {
            for &(c, v) in &p.dims[d] {
                buf[c] += sign * v;
            }
        }
        buf.iter()
            .zip(&self.global[d])
            .map(|(c, g)| (c / total - g).abs())
            .sum()
    }

    /// Weighted divergence plus ratio penalty of one set, where
    /// `normalizer` is the sample count the ratio is measured against.
    fn set_cost(&mut self, set: usize, delta: &[(&SubjectProfile, f64)], normalizer: f64) -> f64 {
        let mut cost = 0.0;
        for d in 0..4 {
            let w = self.spec.weights[d];
            if w != 0.0 {
                cost += w * self.divergence_with(set, d, delta);
            }
        }
        let mut total = self.totals[set];
        for (p, sign) in delta {
            total += sign * p.total;
        }
        cost + self.spec.ratio_penalty * (total / normalizer - self.spec.ratios[set]).abs()
    }

    fn objective(&mut self, normalizer: f64) -> f64 {
        (0..3).map(|s| self.set_cost(s, &[], normalizer)).sum()
    }

    fn apply(&mut self, subject: usize, set: usize, sign: f64) {
        let p = &self.subjects[subject];
        for d in 0..4 {
            for &(c, v) in &p.dims[d] {
                self.counts[set][d][c] += sign * v;
            }
        }
        self.totals[set] += sign * p.total;
        if sign > 0.0 {
            self.members[set] += 1;
        } else {
            self.members[set] -= 1;
        }
    }

    fn place(&mut self, subject: usize, set: usize) {
        if let Some(from) = self.assignment[subject] {
            self.apply(subject, from, -1.0);
        }
        self.apply(subject, set, 1.0);
        self.assignment[subject] = Some(set);
    }

    fn clear(&mut self) {
        for set in self.counts.iter_mut() {
            for dim in set.iter_mut() {
                dim.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        self.totals = [0.0; 3];
        self.members = [0; 3];
        self.assignment.iter_mut().for_each(|a| *a = None);
    }

    fn restore(&mut self, assignment: &[Option<usize>]) {
        self.clear();
        for (i, a) in assignment.iter().enumerate() {
            self.place(i, a.expect("restoring a complete assignment"));
        }
    }

    fn greedy(&mut self, order: &[usize]) {
        let mut assigned = 0.0;
        for &i in order {
            let after = assigned + self.subjects[i].total;
            let mut best = (f64::INFINITY, 0);
            for s in 0..3 {
                self.place(i, s);
                let cost = self.objective(after);
                self.apply(i, s, -1.0);
                self.assignment[i] = None;
                if cost < best.0 {
                    best = (cost, s);
                }
            }
            self.place(i, best.1);
            assigned = after;
        }
    }

    /// Best improving single-subject move, scanning subjects in `order`.
    fn best_move(&mut self, order: &[usize]) -> Option<(f64, usize, usize)> {
        let n = self.total;
        let base: [f64; 3] = std::array::from_fn(|s| self.set_cost(s, &[], n));
        let subjects = std::mem::take(&mut self.subjects);
        let mut best: Option<(f64, usize, usize)> = None;
        for &i in order {
            let from = self.assignment[i].expect("all subjects placed");
            if self.members[from] == 1 {
                continue;
            }
            let p = &subjects[i];
            let leave = self.set_cost(from, &[(p, -1.0)], n) - base[from];
            for to in (0..3).filter(|&t| t != from) {
                let delta = leave + self.set_cost(to, &[(p, 1.0)], n) - base[to];
                if delta < -IMPROVEMENT_EPS && best.is_none_or(|b| delta < b.0) {
                    best = Some((delta, i, to));
                }
            }
        }
        self.subjects = subjects;
        best
    }

    /// Best improving swap of two subjects in different sets.
    fn best_swap(&mut self, order: &[usize]) -> Option<(f64, usize, usize)> {
        let n = self.total;
        let base: [f64; 3] = std::array::from_fn(|s| self.set_cost(s, &[], n));
        let subjects = std::mem::take(&mut self.subjects);
        let mut best: Option<(f64, usize, usize)> = None;
        for (a, &i) in order.iter().enumerate() {
            let si = self.assignment[i].expect("all subjects placed");
            for &j in &order[a + 1..] {
                let sj = self.assignment[j].expect("all subjects placed");
                if si == sj {
                    continue;
                }
                let (pi, pj) = (&subjects[i], &subjects[j]);
                let delta = self.set_cost(si, &[(pi, -1.0), (pj, 1.0)], n) - base[si]
                    + self.set_cost(sj, &[(pj, -1.0), (pi, 1.0)], n)
                    - base[sj];
                if delta < -IMPROVEMENT_EPS && best.is_none_or(|b| delta < b.0) {
                    best = Some((delta, i, j));
                }
            }
        }
        self.subjects = subjects;
        best
    }

    fn refine(&mut self, order: &[usize], trace: &mut Vec<f64>) {
        for _ in 0..self.spec.max_moves {
            if let Some((_, i, to)) = self.best_move(order) {
                self.place(i, to);
            } else if let Some((_, i, j)) = self.best_swap(order) {
                let (si, sj) = (self.assignment[i].unwrap(), self.assignment[j].unwrap());
                self.place(i, sj);
                self.place(j, si);
            } else {
                return;
            }
            let n = self.total;
            trace.push(self.objective(n));
        }
    }
}

/// Splits `dataset` into train/valid/test at subject granularity.
pub fn partition(dataset: &Dataset, spec: &PartitionSpec) -> Result<Partitioned> {
    spec.validate()?;
    let stratifier = spec.stratifier(dataset)?;
    let encoded = encode(dataset, &stratifier)?;

    // canonical subject order: lexicographic id
    let mut subject_ids: Vec<&str> = Vec::new();
    let mut subject_of: HashMap<&str, usize> = HashMap::new();
    {
        let ids: BTreeSet<&str> = dataset
            .samples()
            .iter()
            .map(|s| s.subject_id.as_str())
            .collect();
        for (i, id) in ids.into_iter().enumerate() {
            subject_ids.push(id);
            subject_of.insert(id, i);
        }
    }
    if subject_ids.len() < 3 {
        return Err(Error::TooFewSubjects(subject_ids.len()));
    }

    let mut dense: Vec<[BTreeMap<usize, f64>; 4]> =
        (0..subject_ids.len()).map(|_| Default::default()).collect();
    let mut sizes = vec![0usize; subject_ids.len()];
    for (s, codes) in dataset.samples().iter().zip(&encoded.codes) {
        let i = subject_of[s.subject_id.as_str()];
        sizes[i] += 1;
        for d in 0..4 {
            *dense[i][d].entry(codes[d]).or_default() += 1.0;
        }
    }
    let profiles: Vec<SubjectProfile> = dense
        .into_iter()
        .zip(&sizes)
        .map(|(dims, &n)| SubjectProfile {
            total: n as f64,
            dims: dims.map(|m| m.into_iter().collect()),
        })
        .collect();

    // seeded shuffle of the canonical order breaks every tie
    let mut shuffled: Vec<usize> = (0..subject_ids.len()).collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut by_size = shuffled.clone();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));

    let mut search = Search::new(spec, &encoded, profiles);
    search.greedy(&by_size);
    let mut trace = vec![search.objective(search.total)];
    search.refine(&shuffled, &mut trace);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    for _ in 0..spec.effective_restarts(subject_ids.len()) {
        let best = search.assignment.clone();
        let best_objective = *trace.last().expect("trace starts non-empty");
        let mut order = shuffled.clone();
        order.shuffle(&mut rng);
        search.clear();
        search.greedy(&order);
        let mut restart_trace = vec![search.objective(search.total)];
        search.refine(&shuffled, &mut restart_trace);
        let objective = *restart_trace.last().expect("trace starts non-empty");
        if objective < best_objective - IMPROVEMENT_EPS {
            trace.push(objective);
        } else {
            search.restore(&best);
        }
    }

    let mut partition = Partition::new();
    for s in dataset.samples() {
        let set =
            search.assignment[subject_of[s.subject_id.as_str()]].expect("all subjects placed");
        partition.assign(s.sample_id.clone(), SplitSet::ALL[set]);
    }
    let quality = validate_partition(dataset, &partition, spec)?;
    Ok(Partitioned {
        partition,
        quality,
        trace,
    })
}

/// Recomputes every quality field of `partition` from the raw samples.
pub fn validate_partition(
    dataset: &Dataset,
    partition: &Partition,
    spec: &PartitionSpec,
) -> Result<PartitionQuality> {
    spec.validate()?;
    for (id, _) in partition.iter() {
        if !dataset.contains(id) {
            return Err(Error::UnknownSample(id.to_string()));
        }
    }
    let unassigned: Vec<&str> = dataset
        .samples()
        .iter()
        .filter(|s| partition.get(&s.sample_id).is_none())
        .map(|s| s.sample_id.as_str())
        .collect();
    if !unassigned.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "partition does not cover {} sample(s), first `{}`",
            unassigned.len(),
            unassigned[0]
        )));
    }

    let stratifier = spec.stratifier(dataset)?;
    let mut global: [BTreeMap<String, usize>; 4] = Default::default();
    let mut per_set: [[BTreeMap<String, usize>; 4]; 3] = Default::default();
    let mut subjects_in: BTreeMap<&str, BTreeSet<SplitSet>> = BTreeMap::new();
    let mut set_samples = [0usize; 3];
    for s in dataset.samples() {
        let set = partition.get(&s.sample_id).expect("checked above");
        set_samples[set.index()] += 1;
        subjects_in.entry(&s.subject_id).or_default().insert(set);
        let d = s.demographics;
        let keys = [
            stratifier.stratum(&s.label)?.to_string(),
            d.race.to_string(),
            d.age.to_string(),
            d.gender.to_string(),
        ];
        for (dim, key) in keys.into_iter().enumerate() {
            *global[dim].entry(key.clone()).or_default() += 1;
            *per_set[set.index()][dim].entry(key).or_default() += 1;
        }
    }

    let n = dataset.len() as f64;
    let straddling: Vec<String> = subjects_in
        .iter()
        .filter(|(_, sets)| sets.len() > 1)
        .map(|(s, _)| s.to_string())
        .collect();
    let mut warnings = Vec::new();
    let mut sets = Vec::with_capacity(3);
    let mut objective = 0.0;
    for set in SplitSet::ALL {
        let k = set.index();
        let size = set_samples[k];
        let fraction = if n > 0.0 { size as f64 / n } else { 0.0 };
        let ratio_error = (fraction - spec.ratios[k]).abs();
        let mut divergence = BTreeMap::new();
        for (dim, name) in Dimension::ALL.into_iter().enumerate() {
            let l1 = if size == 0 {
                2.0
            } else {
                global[dim]
                    .iter()
                    .map(|(key, &g)| {
                        let c = per_set[k][dim].get(key).copied().unwrap_or(0);
                        (c as f64 / size as f64 - g as f64 / n).abs()
                    })
                    .sum()
            };
            objective += spec.weights[dim] * l1;
            divergence.insert(name, l1);
            if dim > 0 && size > 0 {
                for key in global[dim].keys() {
                    if !per_set[k][dim].contains_key(key) {
                        warnings.push(format!("{set}: no samples with {name} {key}"));
                    }
                }
            }
        }
        objective += spec.ratio_penalty * ratio_error;
        if size == 0 {
            warnings.push(format!("{set}: empty set"));
        }
        if ratio_error > spec.tolerance + 1e-12 {
            warnings.push(format!(
                "{set}: fraction {fraction:.4} misses target {:.4} by more than {}",
                spec.ratios[k], spec.tolerance
            ));
        }
        let subjects = subjects_in
            .values()
            .filter(|sets| sets.contains(&set))
            .count();
        sets.push(SetQuality {
            set,
            samples: size,
            subjects,
            fraction,
            ratio_error,
            divergence,
        });
    }

    let mut subject_sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for s in dataset.samples() {
        *subject_sizes.entry(&s.subject_id).or_default() += 1;
    }
    for (subject, size) in subject_sizes {
        let share = size as f64 / n;
        if let Some(set) = subjects_in[subject].iter().next() {
            let cap = spec.ratios[set.index()] + spec.tolerance;
            if share > cap {
                warnings.push(format!(
                    "subject {subject} holds {share:.4} of the data, above {set} capacity {cap:.4}"
                ));
            }
        }
    }

    Ok(PartitionQuality {
        sets,
        subject_independent: straddling.is_empty(),
        straddling_subjects: straddling,
        objective,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Demographics, Sample, Task};

    fn region(v: u32, a: u32) -> VaRegion {
        VaRegion {
            valence: v,
            arousal: a,
        }
    }

    #[test]
    fn va_region_examples() {
        assert_eq!(va_region(-1.0, -0.8, 0.2).unwrap(), region(0, 1));
        assert_eq!(va_region(1.0, 1.0, 0.2).unwrap(), region(9, 9));
        assert_eq!(va_region(0.0, 0.0, 0.2).unwrap(), region(5, 5));
        assert_eq!(va_region(-0.9, -0.7, 0.2).unwrap(), region(0, 1));
        assert_eq!(va_region(-0.6, 0.6, 0.2).unwrap(), region(2, 8));
    }

    #[test]
    fn va_region_errors() {
        assert!(va_region(1.01, 0.0, 0.2).is_err());
        assert!(va_region(0.0, -1.5, 0.2).is_err());
        assert!(va_region(0.0, 0.0, 0.3).is_err());
        assert!(va_region(0.0, 0.0, 0.0).is_err());
        assert!(va_region(0.0, 0.0, 2.5).is_err());
        assert_eq!(va_region(0.3, -0.3, 2.0).unwrap(), region(0, 0));
    }

    #[test]
    fn strata() {
        let st = Stratifier::with_patterns(0.2, ["101"]).unwrap();
        assert_eq!(st.stratum(&TaskLabel::Expr(3)).unwrap(), Stratum::Class(3));
        assert_eq!(
            st.stratum(&TaskLabel::Va {
                valence: -0.9,
                arousal: -0.7
            })
            .unwrap(),
            Stratum::Region(region(0, 1))
        );
        let p = st.stratum(&TaskLabel::Au(vec![true, false, true])).unwrap();
        assert_eq!(p, Stratum::Pattern("101".into()));
        assert_eq!(p.to_string(), "0b101");
        assert_eq!(
            st.stratum(&TaskLabel::Au(vec![true, true, true])).unwrap(),
            Stratum::Other
        );
    }

    fn sample(id: &str, subject: &str, class: usize, race: Race) -> Sample {
        Sample {
            sample_id: id.into(),
            subject_id: subject.into(),
            demographics: Demographics {
                age: AgeGroup::From20To29,
                gender: Gender::Female,
                race,
            },
            label: TaskLabel::Expr(class),
        }
    }

    #[test]
    fn rare_au_patterns_merge() {
        let mut samples = Vec::new();
        for i in 0..99 {
            samples.push(Sample {
                label: TaskLabel::Au(vec![true, false]),
                ..sample(&format!("a{i}"), "s", 0, Race::Asian)
            });
        }
        samples.push(Sample {
            label: TaskLabel::Au(vec![false, true]),
            ..sample("rare", "s", 0, Race::Asian)
        });
        let ds = Dataset::with_cardinality(Task::Au, 2, samples).unwrap();
        let st = Stratifier::fit(&ds, 0.2, 0.02).unwrap();
        assert_eq!(
            st.stratum(&TaskLabel::Au(vec![false, true])).unwrap(),
            Stratum::Other
        );
        assert_eq!(
            st.stratum(&TaskLabel::Au(vec![true, false])).unwrap(),
            Stratum::Pattern("10".into())
        );
    }

    #[test]
    fn profiles() {
        let ds = Dataset::with_cardinality(
            Task::Expr,
            3,
            vec![
                sample("a", "s1", 0, Race::Asian),
                sample("b", "s1", 0, Race::Asian),
                sample("c", "s2", 1, Race::White),
                sample("d", "s2", 2, Race::White),
                sample("e", "s2", 1, Race::White),
            ],
        )
        .unwrap();
        let st = Stratifier::fit(&ds, 0.2, 0.01).unwrap();
        let p = build_profiles(&ds, &st).unwrap();
        let a = (
            Stratum::Class(0),
            Race::Asian,
            AgeGroup::From20To29,
            Gender::Female,
        );
        assert_eq!(p["s1"].cells, BTreeMap::from([(a, 2)]));
        let w1 = (
            Stratum::Class(1),
            Race::White,
            AgeGroup::From20To29,
            Gender::Female,
        );
        let w2 = (
            Stratum::Class(2),
            Race::White,
            AgeGroup::From20To29,
            Gender::Female,
        );
        assert_eq!(p["s2"].cells, BTreeMap::from([(w1, 2), (w2, 1)]));
        assert_eq!(p["s2"].total(), 3);
    }

    #[test]
    fn three_subjects_hit_exact_ratios() {
        let mut samples = Vec::new();
        for (subject, n) in [("a", 55), ("b", 15), ("c", 30)] {
            for i in 0..n {
                samples.push(sample(&format!("{subject}{i}"), subject, 0, Race::Asian));
            }
        }
        let ds = Dataset::with_cardinality(Task::Expr, 1, samples).unwrap();
        let out = partition(&ds, &PartitionSpec::default()).unwrap();
        assert_eq!(out.partition.get("a0"), Some(SplitSet::Train));
        assert_eq!(out.partition.get("b0"), Some(SplitSet::Valid));
        assert_eq!(out.partition.get("c0"), Some(SplitSet::Test));
        assert!(out.quality.max_ratio_error() < 1e-12);
        assert!(out.quality.objective.abs() < 1e-12);
    }

    #[test]
    fn uniform_single_cell_subjects() {
        let samples = (0..100)
            .map(|i| sample(&format!("x{i}"), &format!("s{i:03}"), 0, Race::Asian))
            .collect();
        let ds = Dataset::with_cardinality(Task::Expr, 1, samples).unwrap();
        let out = partition(&ds, &PartitionSpec::default()).unwrap();
        assert!(out.quality.max_ratio_error() <= 0.01);
        assert_eq!(out.quality.max_divergence(), 0.0);
        assert!(out.quality.subject_independent);
    }

    #[test]
    fn too_few_subjects() {
        let ds = Dataset::with_cardinality(
            Task::Expr,
            1,
            vec![
                sample("a", "s1", 0, Race::Asian),
                sample("b", "s2", 0, Race::Asian),
            ],
        )
        .unwrap();
        let err = partition(&ds, &PartitionSpec::default()).unwrap_err();
        assert!(err.to_string().contains("fewer than 3 subjects"));
    }

    #[test]
    fn invalid_ratios_rejected() {
        let spec = PartitionSpec {
            ratios: [0.5, 0.2, 0.2],
            ..PartitionSpec::default()
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn straddling_subject_detected() {
        let ds = Dataset::with_cardinality(
            Task::Expr,
            1,
            vec![
                sample("a", "s1", 0, Race::Asian),
                sample("b", "s1", 0, Race::Asian),
                sample("c", "s2", 0, Race::Asian),
            ],
        )
        .unwrap();
        let mut p = Partition::new();
        p.assign("a", SplitSet::Train);
        p.assign("b", SplitSet::Test);
        p.assign("c", SplitSet::Valid);
        let q = validate_partition(&ds, &p, &PartitionSpec::default()).unwrap();
        assert!(!q.subject_independent);
        assert_eq!(q.straddling_subjects, vec!["s1".to_string()]);
        assert!(!q.passes(1.0));

        p.assign("zzz", SplitSet::Test);
        assert!(matches!(
            validate_partition(&ds, &p, &PartitionSpec::default()),
            Err(Error::UnknownSample(_))
        ));
    }

    #[test]
    fn search_objective_matches_validator() {
        let mut samples = Vec::new();
        for s in 0..40 {
            let race = if s % 3 == 0 { Race::Black } else { Race::White };
            for i in 0..(3 + s % 5) {
                samples.push(sample(
                    &format!("s{s}_{i}"),
                    &format!("s{s}"),
                    (s * 7 + i) % 4,
                    race,
                ));
            }
        }
        let ds = Dataset::with_cardinality(Task::Expr, 4, samples).unwrap();
        let out = partition(&ds, &PartitionSpec::default()).unwrap();
        let last = *out.trace.last().unwrap();
        assert!((last - out.quality.objective).abs() < 1e-9);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
