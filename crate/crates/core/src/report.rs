//! Metric reports, fairness flags and leaderboards.
//!
//! A [`MetricReport`] stores metric values as fractions. Rendering converts
//! them to percentages with one decimal, the style of the published result
//! tables, and lays columns out as Whole, Race, Gender, Age.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data_model::{Attribute, SplitSet, Task};
use crate::error::{Error, Result};
use crate::metrics::{au, expr, va, EvalSet};

/// Disparity scores at or below this value are considered fair.
pub const FAIRNESS_THRESHOLD: f64 = 0.1;
const FAIRNESS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Fair,
    Unfair,
}

impl Flag {
    pub fn of(score: f64) -> Flag {
        if score <= FAIRNESS_THRESHOLD + FAIRNESS_EPS {
            Flag::Fair
        } else {
            Flag::Unfair
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Fair => "fair",
            Flag::Unfair => "unfair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessScore {
    pub score: f64,
    pub flag: Flag,
}

impl FairnessScore {
    pub fn new(score: f64) -> FairnessScore {
        FairnessScore {
            score,
            flag: Flag::of(score),
        }
    }
}

/// Formats a fraction as a percentage with one decimal: `0.064` → `6.4`.
pub fn percent(value: f64) -> String {
    let s = format!("{:.1}", value * 100.0);
    if s == "-0.0" {
        "0.0".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub dataset: Option<String>,
    pub manifest: Option<String>,
    pub set: Option<SplitSet>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub task: Task,
    pub metadata: ReportMetadata,
    pub global: BTreeMap<String, f64>,
    pub local: BTreeMap<Attribute, BTreeMap<String, f64>>,
    pub fairness: BTreeMap<Attribute, BTreeMap<String, FairnessScore>>,
    pub warnings: Vec<String>,
}

/// Column names of a task's table: the global block, then the block repeated
/// per attribute.
pub fn columns(task: Task) -> (&'static [&'static str], &'static [&'static str]) {
    match task {
        Task::Expr => (&["GF1"], &["SP", "LF1", "EOP"]),
        Task::Au => (&["GF1"], &["LF1", "EOD", "DPD"]),
        Task::Va => (&["GVA", "GV", "GA"], &["LVA", "LV", "LA"]),
    }
}

/// The metric leaderboards are ranked by.
pub fn primary_metric(task: Task) -> &'static str {
    match task {
        Task::Expr | Task::Au => "GF1",
        Task::Va => "GVA",
    }
}

impl MetricReport {
    fn empty(model: &str, task: Task, metadata: ReportMetadata) -> MetricReport {
        MetricReport {
            model: model.to_string(),
            task,
            metadata,
            global: BTreeMap::new(),
            local: BTreeMap::new(),
            fairness: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    fn put_local(&mut self, attribute: Attribute, name: &str, value: f64) {
        self.local
            .entry(attribute)
            .or_default()
            .insert(name.to_string(), value);
    }

    fn put_fairness(&mut self, attribute: Attribute, name: &str, score: f64) {
        self.fairness
            .entry(attribute)
            .or_default()
            .insert(name.to_string(), FairnessScore::new(score));
    }

    fn warn_skipped(&mut self, attribute: Attribute, metric: &str, skipped: Vec<String>) {
        for s in skipped {
            self.warnings
                .push(format!("{attribute} {metric}: skipped {s}"));
        }
    }

    fn record<T>(&mut self, attribute: Attribute, metric: &str, value: Result<T>) -> Option<T> {
        match value {
            Ok(v) => Some(v),
            Err(e) => {
                self.warnings
                    .push(format!("{attribute} {metric}: not computed ({e})"));
                None
            }
        }
    }

    /// Value of a column for `attribute`, or of a global column when
    /// `attribute` is `None`.
    pub fn value(&self, attribute: Option<Attribute>, name: &str) -> Option<f64> {
        match attribute {
            None => self.global.get(name).copied(),
            Some(a) => self
                .local
                .get(&a)
                .and_then(|m| m.get(name))
                .copied()
                .or_else(|| {
                    self.fairness
                        .get(&a)
                        .and_then(|m| m.get(name))
                        .map(|f| f.score)
                }),
        }
    }

    pub fn primary(&self) -> Option<f64> {
        self.global.get(primary_metric(self.task)).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<MetricReport> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} ({})", self.model, self.task);
        out.push('\n');
        let m = &self.metadata;
        let mut meta = Vec::new();
        if let Some(d) = &m.dataset {
            meta.push(format!("dataset: `{d}`"));
        }
        if let Some(p) = &m.manifest {
            meta.push(format!("manifest: `{p}`"));
        }
        if let Some(s) = m.set {
            meta.push(format!("set: {s}"));
        }
        meta.push(format!("samples: {}", m.samples));
        let _ = writeln!(out, "{}", meta.join(", "));
        out.push('\n');
        out.push_str("All values in %.\n\n");
        out.push_str(&table(self.task, &[self]));

        if !self.fairness.is_empty() {
            out.push_str("\n## Fairness flags\n\n");
            let _ = writeln!(
                out,
                "Scores at or below {} are fair.\n",
                percent(FAIRNESS_THRESHOLD)
            );
            out.push_str("| Attribute | Metric | Score | Flag |\n|---|---|---|---|\n");
            let (_, per_attr) = columns(self.task);
            for attribute in Attribute::ALL {
                let Some(scores) = self.fairness.get(&attribute) else {
                    continue;
                };
                for name in per_attr.iter().filter(|n| scores.contains_key(**n)) {
                    let f = scores[*name];
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} |",
                        attribute.title(),
                        name,
                        percent(f.score),
                        f.flag.as_str()
                    );
                }
            }
        }

        if !self.warnings.is_empty() {
            out.push_str("\n## Warnings\n\n");
            for w in &self.warnings {
                let _ = writeln!(out, "- {w}");
            }
        }
        out
    }
}

fn table(task: Task, rows: &[&MetricReport]) -> String {
    let (global, per_attr) = columns(task);
    let mut header = vec!["Model".to_string()];
    header.extend(global.iter().map(|n| n.to_string()));
    for a in Attribute::ALL {
        header.extend(per_attr.iter().map(|n| format!("{} {n}", a.title())));
    }
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let mut cells = vec![r.model.clone()];
        let cell = |v: Option<f64>| v.map(percent).unwrap_or_else(|| "n/a".to_string());
        cells.extend(global.iter().map(|n| cell(r.value(None, n))));
        for a in Attribute::ALL {
            cells.extend(per_attr.iter().map(|n| cell(r.value(Some(a), n))));
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

/// Computes every metric of the set's task. Attribute-level failures (for
/// instance a single subgroup present) become warnings; a failing global
/// metric is an error.
pub fn build_report(
    set: &EvalSet<'_>,
    model: &str,
    metadata: ReportMetadata,
) -> Result<MetricReport> {
    let mut r = MetricReport::empty(model, set.task(), metadata);
    r.metadata.samples = set.len();
    match set.task() {
        Task::Expr => {
            r.global.insert("GF1".into(), expr::global_f1(set)?);
            for a in Attribute::ALL {
                if let Some(v) = r.record(a, "LF1", expr::local_f1(set, a)) {
                    r.put_local(a, "LF1", v);
                }
                if let Some(v) = r.record(a, "SP", expr::sp(set, a)) {
                    r.put_fairness(a, "SP", v);
                }
                if let Some(v) = r.record(a, "EOP", expr::eop(set, a)) {
                    r.put_fairness(a, "EOP", v);
                }
            }
        }
        Task::Au => {
            r.global.insert("GF1".into(), au::global_f1(set)?);
            for a in Attribute::ALL {
                if let Some(m) = r.record(a, "LF1", au::local_f1(set, a)) {
                    r.put_local(a, "LF1", m.value);
                    r.warn_skipped(a, "LF1", m.skipped);
                }
                if let Some(m) = r.record(a, "EOD", au::eod(set, a)) {
                    r.put_fairness(a, "EOD", m.value);
                    r.warn_skipped(a, "EOD", m.skipped);
                }
                if let Some(v) = r.record(a, "DPD", au::dpd(set, a)) {
                    r.put_fairness(a, "DPD", v);
                }
            }
        }
        Task::Va => {
            let g = va::global_ccc(set)?;
            r.global.insert("GVA".into(), g.mean);
            r.global.insert("GV".into(), g.valence);
            r.global.insert("GA".into(), g.arousal);
            for a in Attribute::ALL {
                if let Some(l) = r.record(a, "LVA", va::local_ccc(set, a)) {
                    r.put_local(a, "LVA", l.scores.mean);
                    r.put_local(a, "LV", l.scores.valence);
                    r.put_local(a, "LA", l.scores.arousal);
                    r.warn_skipped(a, "LVA", l.skipped);
                }
            }
        }
    }
    Ok(r)
}

/// Reports of one task ranked by their global metric, best first; ties go
/// to the lexicographically smaller model name.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaderboard {
    task: Task,
    rows: Vec<MetricReport>,
}

impl Leaderboard {
    pub fn new(reports: Vec<MetricReport>) -> Result<Leaderboard> {
        let task = reports.first().ok_or(Error::EmptyLeaderboard)?.task;
        if let Some(other) = reports.iter().find(|r| r.task != task) {
            return Err(Error::TaskMismatch {
                expected: task,
                found: other.task,
            });
        }
        let mut rows = reports;
        rows.sort_by(|a, b| {
            let pa = a.primary().unwrap_or(f64::NEG_INFINITY);
            let pb = b.primary().unwrap_or(f64::NEG_INFINITY);
            pb.total_cmp(&pa).then_with(|| a.model.cmp(&b.model))
        });
        Ok(Leaderboard { task, rows })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn rows(&self) -> &[MetricReport] {
        &self.rows
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Leaderboard ({}), ranked by {}\n\nAll values in %.\n\n",
            self.task,
            primary_metric(self.task)
        );
        let rows: Vec<&MetricReport> = self.rows.iter().collect();
        out.push_str(&table(self.task, &rows));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.rows)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(model: &str, task: Task, primary: f64) -> MetricReport {
        let mut r = MetricReport::empty(model, task, ReportMetadata::default());
        r.global.insert(primary_metric(task).into(), primary);
        r
    }

    #[test]
    fn threshold_and_rendering() {
        assert_eq!(Flag::of(0.100), Flag::Fair);
        assert_eq!(Flag::of(0.101), Flag::Unfair);
        assert_eq!(Flag::of(0.30 - 0.20), Flag::Fair);
        assert_eq!(percent(0.064), "6.4");
        assert_eq!(percent(0.13), "13.0");
        assert_eq!(percent(1.0), "100.0");
        assert_eq!(percent(-0.0001), "0.0");
    }

    #[test]
    fn fairness_section_lists_flags() {
        let mut r = report("m", Task::Expr, 0.641);
        r.put_fairness(Attribute::Race, "SP", 0.064);
        r.put_fairness(Attribute::Race, "EOP", 0.13);
        let md = r.to_markdown();
        assert!(md.contains("| Race | SP | 6.4 | fair |"), "{md}");
        assert!(md.contains("| Race | EOP | 13.0 | unfair |"), "{md}");
        assert!(md.contains("| m | 64.1 | 6.4 | n/a | 13.0 |"), "{md}");
    }

    #[test]
    fn warnings_section() {
        let mut r = report("m", Task::Au, 0.5);
        r.warn_skipped(Attribute::Age, "EOD", vec!["au2".into()]);
        let md = r.to_markdown();
        assert!(
            md.contains("## Warnings\n\n- age EOD: skipped au2\n"),
            "{md}"
        );
    }

    #[test]
    fn json_round_trip() {
        let mut r = report("m", Task::Va, 0.1 + 0.2);
        r.put_local(Attribute::Gender, "LV", 1.0 / 3.0);
        r.put_fairness(Attribute::Age, "DPD", 0.07);
        r.metadata.set = Some(SplitSet::Test);
        let back = MetricReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn leaderboard_order() {
        let lb = Leaderboard::new(vec![
            report("b", Task::Expr, 0.761),
            report("POSTER++", Task::Expr, 0.789),
            report("a", Task::Expr, 0.761),
        ])
        .unwrap();
        let names: Vec<&str> = lb.rows().iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["POSTER++", "a", "b"]);
        let md = lb.to_markdown();
        assert!(md.find("78.9").unwrap() < md.find("76.1").unwrap());
    }

    #[test]
    fn leaderboard_errors() {
        assert!(matches!(
            Leaderboard::new(vec![]),
            Err(Error::EmptyLeaderboard)
        ));
        assert!(matches!(
            Leaderboard::new(vec![
                report("a", Task::Expr, 0.5),
                report("b", Task::Va, 0.5)
            ]),
            Err(Error::TaskMismatch { .. })
        ));
    }
}
