//! Domain types shared by the metric, partitioning and ingestion modules.
//!
//! Everything here is immutable once constructed. A [`Dataset`] owns its
//! samples and validates them against the declared task on construction, so
//! downstream code can index labels without re-checking them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nine ordered age bands used for demographic annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeGroup {
    #[serde(rename = "<=2")]
    UpTo2,
    #[serde(rename = "3-9")]
    From3To9,
    #[serde(rename = "10-19")]
    From10To19,
    #[serde(rename = "20-29")]
    From20To29,
    #[serde(rename = "30-39")]
    From30To39,
    #[serde(rename = "40-49")]
    From40To49,
    #[serde(rename = "50-59")]
    From50To59,
    #[serde(rename = "60-69")]
    From60To69,
    #[serde(rename = ">=70")]
    SeventyPlus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 9] = [
        AgeGroup::UpTo2,
        AgeGroup::From3To9,
        AgeGroup::From10To19,
        AgeGroup::From20To29,
        AgeGroup::From30To39,
        AgeGroup::From40To49,
        AgeGroup::From50To59,
        AgeGroup::From60To69,
        AgeGroup::SeventyPlus,
    ];

    /// Buckets an age in whole years.
    pub fn from_years(age: u32) -> AgeGroup {
        match age {
            0..=2 => AgeGroup::UpTo2,
            3..=9 => AgeGroup::From3To9,
            10..=19 => AgeGroup::From10To19,
            20..=29 => AgeGroup::From20To29,
            30..=39 => AgeGroup::From30To39,
            40..=49 => AgeGroup::From40To49,
            50..=59 => AgeGroup::From50To59,
            60..=69 => AgeGroup::From60To69,
            _ => AgeGroup::SeventyPlus,
        }
    }

    pub fn lower_bound(self) -> u32 {
        match self {
            AgeGroup::UpTo2 => 0,
            AgeGroup::From3To9 => 3,
            AgeGroup::From10To19 => 10,
            AgeGroup::From20To29 => 20,
            AgeGroup::From30To39 => 30,
            AgeGroup::From40To49 => 40,
            AgeGroup::From50To59 => 50,
            AgeGroup::From60To69 => 60,
            AgeGroup::SeventyPlus => 70,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::UpTo2 => "<=2",
            AgeGroup::From3To9 => "3-9",
            AgeGroup::From10To19 => "10-19",
            AgeGroup::From20To29 => "20-29",
            AgeGroup::From30To39 => "30-39",
            AgeGroup::From40To49 => "40-49",
            AgeGroup::From50To59 => "50-59",
            AgeGroup::From60To69 => "60-69",
            AgeGroup::SeventyPlus => ">=70",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accepts band tokens (`20-29`, `<=2`, `≤2`, `0-2`, `>=70`, `≥70`, `70+`)
/// and raw integer ages, which are bucketed.
impl FromStr for AgeGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().replace(['–', '—'], "-");
        if let Ok(years) = t.parse::<u32>() {
            return Ok(AgeGroup::from_years(years));
        }
        let found = match t.as_str() {
            "<=2" | "≤2" | "0-2" => Some(AgeGroup::UpTo2),
            ">=70" | "≥70" | "70+" => Some(AgeGroup::SeventyPlus),
            other => AgeGroup::ALL.iter().copied().find(|g| g.as_str() == other),
        };
        found.ok_or_else(|| format!("unknown age token `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
    OtherUncertain,
}

impl Gender {
    pub const ALL: [Gender; 3] = [Gender::Female, Gender::Male, Gender::OtherUncertain];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::OtherUncertain => "other_uncertain",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_token(s).as_str() {
            "female" | "f" => Ok(Gender::Female),
            "male" | "m" => Ok(Gender::Male),
            "other_uncertain" | "other" | "uncertain" | "other/uncertain" => {
                Ok(Gender::OtherUncertain)
            }
            _ => Err(format!("unknown gender token `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    Asian,
    Black,
    Indian,
    NativeHawaiian,
    White,
}

impl Race {
    pub const ALL: [Race; 5] = [
        Race::Asian,
        Race::Black,
        Race::Indian,
        Race::NativeHawaiian,
        Race::White,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Race::Asian => "asian",
            Race::Black => "black",
            Race::Indian => "indian",
            Race::NativeHawaiian => "native_hawaiian",
            Race::White => "white",
        }
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Race {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_token(s).as_str() {
            "asian" => Ok(Race::Asian),
            "black" | "african_american" => Ok(Race::Black),
            "indian" | "alaska_native" => Ok(Race::Indian),
            "native_hawaiian" | "nativehawaiian" | "pacific_islander" => Ok(Race::NativeHawaiian),
            "white" | "caucasian" => Ok(Race::White),
            _ => Err(format!("unknown race token `{s}`")),
        }
    }
}

fn normalize_token(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace([' ', '-'], "_")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demographics {
    pub age: AgeGroup,
    pub gender: Gender,
    pub race: Race,
}

/// Demographic attribute along which fairness is assessed. Ordered as the
/// columns of the published result tables: race, gender, age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Race,
    Gender,
    Age,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Race, Attribute::Gender, Attribute::Age];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Race => "race",
            Attribute::Gender => "gender",
            Attribute::Age => "age",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Attribute::Race => "Race",
            Attribute::Gender => "Gender",
            Attribute::Age => "Age",
        }
    }

    /// The subgroup a sample belongs to, or `None` when the sample is not
    /// admitted to this attribute's index (gender `OtherUncertain`).
    pub fn subgroup_of(self, demographics: &Demographics) -> Option<Subgroup> {
        match self {
            Attribute::Race => Some(Subgroup::Race(demographics.race)),
            Attribute::Age => Some(Subgroup::Age(demographics.age)),
            Attribute::Gender => match demographics.gender {
                Gender::OtherUncertain => None,
                g => Some(Subgroup::Gender(g)),
            },
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_token(s).as_str() {
            "race" => Ok(Attribute::Race),
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            _ => Err(format!("unknown attribute `{s}`")),
        }
    }
}

/// A subgroup `g` of a demographic attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subgroup {
    Race(Race),
    Gender(Gender),
    Age(AgeGroup),
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subgroup::Race(r) => write!(f, "race={r}"),
            Subgroup::Gender(g) => write!(f, "gender={g}"),
            Subgroup::Age(a) => write!(f, "age={a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Expr,
    Au,
    Va,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Expr => "expr",
            Task::Au => "au",
            Task::Va => "va",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "expr" => Ok(Task::Expr),
            "au" => Ok(Task::Au),
            "va" => Ok(Task::Va),
            _ => Err(format!("unknown task `{s}` (expected expr, au or va)")),
        }
    }
}

/// A ground-truth or predicted label for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskLabel {
    /// Expression class index in `[0, C)`.
    Expr(usize),
    /// Activation bit per action unit.
    Au(Vec<bool>),
    Va {
        valence: f64,
        arousal: f64,
    },
}

impl TaskLabel {
    pub fn task(&self) -> Task {
        match self {
            TaskLabel::Expr(_) => Task::Expr,
            TaskLabel::Au(_) => Task::Au,
            TaskLabel::Va { .. } => Task::Va,
        }
    }

    /// Checks the label against a task and its cardinality (C or M).
    pub fn check(&self, task: Task, cardinality: usize) -> Result<(), String> {
        if self.task() != task {
            return Err(format!("expected a {task} label, found {}", self.task()));
        }
        match self {
            TaskLabel::Expr(c) if *c >= cardinality => {
                Err(format!("class {c} out of range for {cardinality} classes"))
            }
            TaskLabel::Au(bits) if bits.len() != cardinality => Err(format!(
                "AU vector has length {}, expected {cardinality}",
                bits.len()
            )),
            TaskLabel::Va { valence, arousal } => {
                if !(-1.0..=1.0).contains(valence) {
                    Err(format!("valence {valence} outside [-1, 1]"))
                } else if !(-1.0..=1.0).contains(arousal) {
                    Err(format!("arousal {arousal} outside [-1, 1]"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    pub subject_id: String,
    pub demographics: Demographics,
    pub label: TaskLabel,
}

/// A task-typed collection of samples with its class or AU vocabulary.
#[derive(Debug, Clone)]
pub struct Dataset {
    task: Task,
    vocabulary: Vec<String>,
    samples: Vec<Sample>,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    /// `vocabulary` holds the class names (expr) or AU names (au); it is
    /// ignored for VA beyond being stored.
    pub fn new(task: Task, vocabulary: Vec<String>, samples: Vec<Sample>) -> Result<Dataset> {
        if task != Task::Va && vocabulary.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "{task} dataset needs a non-empty vocabulary"
            )));
        }
        let mut by_id = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.subject_id.is_empty() {
                return Err(Error::InvalidDataset(format!(
                    "sample `{}` has an empty subject id",
                    s.sample_id
                )));
            }
            s.label
                .check(task, vocabulary.len())
                .map_err(|e| Error::InvalidDataset(format!("sample `{}`: {e}", s.sample_id)))?;
            if by_id.insert(s.sample_id.clone(), i).is_some() {
                return Err(Error::DuplicateSample(s.sample_id.clone()));
            }
        }
        Ok(Dataset {
            task,
            vocabulary,
            samples,
            by_id,
        })
    }

    /// Convenience constructor naming classes or AUs by their index.
    pub fn with_cardinality(
        task: Task,
        cardinality: usize,
        samples: Vec<Sample>,
    ) -> Result<Dataset> {
        let vocabulary = match task {
            Task::Expr => (0..cardinality).map(|c| c.to_string()).collect(),
            Task::Au => (1..=cardinality).map(|m| format!("au{m}")).collect(),
            Task::Va => vec!["valence".into(), "arousal".into()],
        };
        Dataset::new(task, vocabulary, samples)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// C for expressions, M for action units.
    pub fn cardinality(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&Sample> {
        self.by_id.get(sample_id).map(|&i| &self.samples[i])
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.by_id.contains_key(sample_id)
    }
}

/// Samples of `samples` grouped by subgroup of `attribute`. Empty subgroups
/// never appear; gender `OtherUncertain` samples are left out of the gender
/// index only.
pub fn subgroup_index<'a, I>(samples: I, attribute: Attribute) -> BTreeMap<Subgroup, Vec<&'a str>>
where
    I: IntoIterator<Item = &'a Sample>,
{
    let mut index: BTreeMap<Subgroup, Vec<&str>> = BTreeMap::new();
    for s in samples {
        if let Some(g) = attribute.subgroup_of(&s.demographics) {
            index.entry(g).or_default().push(&s.sample_id);
        }
    }
    index
}

/// Exhaustive, disjoint grouping of sample ids by subject.
pub fn subject_groups(dataset: &Dataset) -> BTreeMap<&str, Vec<&str>> {
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in dataset.samples() {
        groups.entry(&s.subject_id).or_default().push(&s.sample_id);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSet {
    Train,
    Valid,
    Test,
}

impl SplitSet {
    pub const ALL: [SplitSet; 3] = [SplitSet::Train, SplitSet::Valid, SplitSet::Test];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitSet::Train => "train",
            SplitSet::Valid => "valid",
            SplitSet::Test => "test",
        }
    }
}

impl fmt::Display for SplitSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(SplitSet::Train),
            "valid" => Ok(SplitSet::Valid),
            "test" => Ok(SplitSet::Test),
            other => Err(format!(
                "unknown set `{other}` (expected train, valid or test)"
            )),
        }
    }
}

/// Assignment of sample ids to train/valid/test.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    assignment: BTreeMap<String, SplitSet>,
}

impl Partition {
    pub fn new() -> Partition {
        Partition::default()
    }

    /// Returns the previous set if the sample was already assigned.
    pub fn assign(&mut self, sample_id: impl Into<String>, set: SplitSet) -> Option<SplitSet> {
        self.assignment.insert(sample_id.into(), set)
    }

    pub fn get(&self, sample_id: &str) -> Option<SplitSet> {
        self.assignment.get(sample_id).copied()
    }

    /// Entries ordered by sample id.
    pub fn iter(&self) -> impl Iterator<Item = (&str, SplitSet)> {
        self.assignment.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Sample ids assigned to `set`, ordered by id.
    pub fn members(&self, set: SplitSet) -> Vec<&str> {
        self.iter()
            .filter(|(_, s)| *s == set)
            .map(|(id, _)| id)
            .collect()
    }
}

/// Model outputs keyed by sample id.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    task: Task,
    entries: HashMap<String, TaskLabel>,
}

impl PredictionSet {
    pub fn new(task: Task) -> PredictionSet {
        PredictionSet {
            task,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, sample_id: impl Into<String>, label: TaskLabel) -> Result<()> {
        if label.task() != self.task {
            return Err(Error::TaskMismatch {
                expected: self.task,
                found: label.task(),
            });
        }
        let id = sample_id.into();
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateSample(id));
        }
        self.entries.insert(id, label);
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn get(&self, sample_id: &str) -> Option<&TaskLabel> {
        self.entries.get(sample_id)
    }

    /// Entries sorted by sample id.
    pub fn sorted(&self) -> Vec<(&str, &TaskLabel)> {
        let mut v: Vec<(&str, &TaskLabel)> =
            self.entries.iter().map(|(k, l)| (k.as_str(), l)).collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// C×C counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<ConfusionMatrix> {
        let classes = rows.len();
        let mut cm = ConfusionMatrix::zeros(classes);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != classes {
                return Err(Error::DimensionMismatch {
                    expected: classes,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                cm.counts[i * classes + j] = v;
            }
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub(crate) fn increment(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.classes + pred] += 1;
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.classes).map(|i| self.row(i).to_vec()).collect()
    }
}
