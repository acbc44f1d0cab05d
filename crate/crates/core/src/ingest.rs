//! Reading and writing the comma-separated tables the tools exchange:
//! annotations, predictions, partition manifests and metric reports.
//!
//! Every table has a header row. Values are trimmed; numbers use a dot as
//! decimal separator. Rejected rows are reported with their 1-based line
//! number in the file.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data_model::{
    AgeGroup, Dataset, Demographics, Gender, Partition, PredictionSet, Race, Sample, SplitSet,
    Task, TaskLabel,
};
use crate::error::{Error, Result, RowError};
use crate::metrics::au::intensity_to_activation;
use crate::report::MetricReport;

/// Column bindings for an annotation table. The defaults match the
/// documented layout; `age` and `expr` also fall back to the aliases `age`
/// and `expression`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSchema {
    pub sample_id: String,
    /// Optional column; when absent or empty the sample id stands in.
    pub subject_id: String,
    pub age: String,
    pub gender: String,
    pub race: String,
    /// Optional column with values `manual` or `automatic`.
    pub annotation_source: String,
    pub expr: String,
    /// AU columns in order; `None` takes every header column named `au<k>`
    /// or `au_<k>`, in header order.
    pub au: Option<Vec<String>>,
    pub valence: String,
    pub arousal: String,
    /// Number of expression classes; defaults to the largest class seen + 1.
    pub num_classes: Option<usize>,
}

impl Default for AnnotationSchema {
    fn default() -> Self {
        AnnotationSchema {
            sample_id: "sample_id".into(),
            subject_id: "subject_id".into(),
            age: "age_group".into(),
            gender: "gender".into(),
            race: "race".into(),
            annotation_source: "annotation_source".into(),
            expr: "expr".into(),
            au: None,
            valence: "valence".into(),
            arousal: "arousal".into(),
            num_classes: None,
        }
    }
}

/// Row accounting for one annotation file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: usize,
    pub accepted: usize,
    pub dropped_automatic: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedAnnotations {
    pub dataset: Dataset,
    pub stats: IngestStats,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input)
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    names
        .iter()
        .find_map(|n| headers.iter().position(|h| h.eq_ignore_ascii_case(n)))
}

fn require(headers: &csv::StringRecord, names: &[&str]) -> Result<usize> {
    column(headers, names).ok_or_else(|| Error::MissingColumn(names[0].to_string()))
}

fn is_au_column(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    let Some(rest) = lower.strip_prefix("au") else {
        return false;
    };
    let digits = rest.strip_prefix('_').unwrap_or(rest);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

fn au_columns(headers: &csv::StringRecord) -> Vec<usize> {
    headers
        .iter()
        .enumerate()
        .filter(|(_, h)| is_au_column(h))
        .map(|(i, _)| i)
        .collect()
}

enum TaskColumns {
    Expr(usize),
    Au(Vec<usize>),
    Va(usize, usize),
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_row_error(e: csv::Error) -> Result<RowError> {
    let line = match e.position() {
        Some(p) => p.line(),
        None => return Err(e.into()),
    };
    Ok(RowError {
        line,
        message: e.to_string(),
    })
}

fn parse_unit(value: &str, what: &str) -> Result<f64, String> {
    let v: f64 = value
        .parse()
        .map_err(|_| format!("{what} `{value}` is not a number"))?;
    if !(-1.0..=1.0).contains(&v) {
        return Err(format!("{what} {value} outside [-1, 1]"));
    }
    Ok(v)
}

fn parse_class(value: &str) -> Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("expression class `{value}` is not a non-negative integer"))
}

/// Reads an annotation table for `task`.
pub fn load_annotations(
    path: impl AsRef<Path>,
    schema: &AnnotationSchema,
    task: Task,
) -> Result<LoadedAnnotations> {
    read_annotations(File::open(path)?, schema, task)
}

pub fn read_annotations<R: Read>(
    input: R,
    schema: &AnnotationSchema,
    task: Task,
) -> Result<LoadedAnnotations> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let sample_col = require(&headers, &[&schema.sample_id])?;
    let subject_col = column(&headers, &[&schema.subject_id]);
    let age_col = require(&headers, &[&schema.age, "age"])?;
    let gender_col = require(&headers, &[&schema.gender])?;
    let race_col = require(&headers, &[&schema.race])?;
    let source_col = column(&headers, &[&schema.annotation_source]);
    let (task_cols, vocabulary) = match task {
        Task::Expr => (
            TaskColumns::Expr(require(&headers, &[&schema.expr, "expression"])?),
            Vec::new(),
        ),
        Task::Au => {
            let cols = match &schema.au {
                Some(names) => names
                    .iter()
                    .map(|n| require(&headers, &[n.as_str()]))
                    .collect::<Result<Vec<_>>>()?,
                None => au_columns(&headers),
            };
            if cols.is_empty() {
                return Err(Error::MissingColumn("au1".into()));
            }
            let names = cols.iter().map(|&i| headers[i].to_string()).collect();
            (TaskColumns::Au(cols), names)
        }
        Task::Va => (
            TaskColumns::Va(
                require(&headers, &[&schema.valence])?,
                require(&headers, &[&schema.arousal])?,
            ),
            vec!["valence".into(), "arousal".into()],
        ),
    };

    let mut stats = IngestStats::default();
    let mut errors = Vec::new();
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    let mut fallback_subjects = 0usize;
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                stats.rows += 1;
                errors.push(csv_row_error(e)?);
                continue;
            }
        };
        stats.rows += 1;
        let line = line_of(&record);
        let parsed = (|| -> Result<Option<Sample>, String> {
            let sample_id = record[sample_col].to_string();
            if sample_id.is_empty() {
                return Err("empty sample_id".into());
            }
            if let Some(c) = source_col {
                match record[c].to_ascii_lowercase().as_str() {
                    "" | "manual" => {}
                    "automatic" | "auto" => return Ok(None),
                    other => return Err(format!("unknown annotation source `{other}`")),
                }
            }
            let subject_id = match subject_col.map(|c| &record[c]) {
                Some(s) if !s.is_empty() => s.to_string(),
                _ => {
                    fallback_subjects += 1;
                    sample_id.clone()
                }
            };
            let field = |c: usize, what: &str| -> Result<&str, String> {
                match &record[c] {
                    "" => Err(format!("missing {what}")),
                    v => Ok(v),
                }
            };
            let demographics = Demographics {
                age: field(age_col, "age")?.parse::<AgeGroup>()?,
                gender: field(gender_col, "gender")?.parse::<Gender>()?,
                race: field(race_col, "race")?.parse::<Race>()?,
            };
            let label = match &task_cols {
                TaskColumns::Expr(c) => TaskLabel::Expr(parse_class(field(*c, "expression")?)?),
                TaskColumns::Au(cols) => TaskLabel::Au(
                    cols.iter()
                        .map(|&c| {
                            let raw = field(c, &headers[c])?;
                            let i: i64 = raw.parse().map_err(|_| {
                                format!("{} intensity `{raw}` is not an integer", &headers[c])
                            })?;
                            intensity_to_activation(i).map_err(|e| format!("{}: {e}", &headers[c]))
                        })
                        .collect::<Result<Vec<bool>, String>>()?,
                ),
                TaskColumns::Va(v, a) => TaskLabel::Va {
                    valence: parse_unit(field(*v, "valence")?, "valence")?,
                    arousal: parse_unit(field(*a, "arousal")?, "arousal")?,
                },
            };
            if !seen.insert(sample_id.clone()) {
                return Err(format!("duplicate sample id `{sample_id}`"));
            }
            Ok(Some(Sample {
                sample_id,
                subject_id,
                demographics,
                label,
            }))
        })();
        match parsed {
            Ok(Some(s)) => samples.push(s),
            Ok(None) => stats.dropped_automatic += 1,
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    stats.accepted = samples.len();
    if fallback_subjects > 0 {
        stats.warnings.push(format!(
            "{fallback_subjects} sample(s) without subject id; each treated as its own subject"
        ));
    }

    let vocabulary = match task {
        Task::Expr => {
            let seen_max = samples
                .iter()
                .filter_map(|s| match s.label {
                    TaskLabel::Expr(c) => Some(c + 1),
                    _ => None,
                })
                .max()
                .unwrap_or(0);
            let classes = match schema.num_classes {
                Some(n) if n < seen_max => {
                    return Err(Error::ClassOutOfRange {
                        index: seen_max - 1,
                        classes: n,
                    })
                }
                Some(n) => n,
                None => seen_max.max(1),
            };
            (0..classes).map(|c| c.to_string()).collect()
        }
        _ => vocabulary,
    };
    let dataset = Dataset::new(task, vocabulary, samples)?;
    Ok(LoadedAnnotations { dataset, stats })
}

/// Task declared by a prediction table's header.
fn declared_task(headers: &csv::StringRecord) -> Option<Task> {
    if column(headers, &["valence"]).is_some() && column(headers, &["arousal"]).is_some() {
        Some(Task::Va)
    } else if !au_columns(headers).is_empty() {
        Some(Task::Au)
    } else if column(headers, &["expr", "expression"]).is_some() {
        Some(Task::Expr)
    } else {
        None
    }
}

/// Reads a prediction table: `sample_id` plus `expr`, the AU columns
/// (0/1), or `valence,arousal`.
pub fn load_predictions(path: impl AsRef<Path>, task: Task) -> Result<PredictionSet> {
    read_predictions(File::open(path)?, task)
}

pub fn read_predictions<R: Read>(input: R, task: Task) -> Result<PredictionSet> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let sample_col = require(&headers, &["sample_id"])?;
    let declared = declared_task(&headers).ok_or_else(|| {
        Error::MissingColumn(match task {
            Task::Expr => "expr".into(),
            Task::Au => "au1".into(),
            Task::Va => "valence".into(),
        })
    })?;
    if declared != task {
        return Err(Error::TaskMismatch {
            expected: task,
            found: declared,
        });
    }
    let expr_col = column(&headers, &["expr", "expression"]);
    let aus = au_columns(&headers);
    let va_cols = (
        column(&headers, &["valence"]),
        column(&headers, &["arousal"]),
    );

    let mut predictions = PredictionSet::new(task);
    let mut errors = Vec::new();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(csv_row_error(e)?);
                continue;
            }
        };
        let line = line_of(&record);
        let parsed = (|| -> Result<(String, TaskLabel), String> {
            let id = record[sample_col].to_string();
            if id.is_empty() {
                return Err("empty sample_id".into());
            }
            let label = match task {
                Task::Expr => TaskLabel::Expr(parse_class(&record[expr_col.expect("declared")])?),
                Task::Au => TaskLabel::Au(
                    aus.iter()
                        .map(|&c| match &record[c] {
                            "0" | "false" => Ok(false),
                            "1" | "true" => Ok(true),
                            v => Err(format!("{} prediction `{v}` is not 0 or 1", &headers[c])),
                        })
                        .collect::<Result<_, _>>()?,
                ),
                Task::Va => TaskLabel::Va {
                    valence: parse_unit(&record[va_cols.0.expect("declared")], "valence")?,
                    arousal: parse_unit(&record[va_cols.1.expect("declared")], "arousal")?,
                },
            };
            Ok((id, label))
        })();
        match parsed {
            Ok((id, label)) => {
                if let Err(e) = predictions.insert(id, label) {
                    errors.push(RowError {
                        line,
                        message: e.to_string(),
                    });
                }
            }
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    Ok(predictions)
}

fn task_header(task: Task, vocabulary: &[String]) -> Vec<String> {
    match task {
        Task::Expr => vec!["expr".into()],
        Task::Au => vocabulary.to_vec(),
        Task::Va => vec!["valence".into(), "arousal".into()],
    }
}

fn label_fields(label: &TaskLabel) -> Vec<String> {
    match label {
        TaskLabel::Expr(c) => vec![c.to_string()],
        TaskLabel::Au(bits) => bits.iter().map(|&b| u8::from(b).to_string()).collect(),
        TaskLabel::Va { valence, arousal } => vec![valence.to_string(), arousal.to_string()],
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Writes a dataset in the default annotation layout, in sample order. AU
/// activations are written as intensities 0 and 1.
pub fn write_annotations<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header: Vec<String> = ["sample_id", "subject_id", "age_group", "gender", "race"]
        .map(String::from)
        .to_vec();
    header.extend(task_header(dataset.task(), dataset.vocabulary()));
    w.write_record(&header)?;
    for s in dataset.samples() {
        let d = &s.demographics;
        let mut row = vec![
            s.sample_id.clone(),
            s.subject_id.clone(),
            d.age.to_string(),
            d.gender.to_string(),
            d.race.to_string(),
        ];
        row.extend(label_fields(&s.label));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes predictions sorted by sample id. `vocabulary` names the AU
/// columns and is ignored for the other tasks.
pub fn write_predictions<W: Write>(
    predictions: &PredictionSet,
    vocabulary: &[String],
    out: W,
) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["sample_id".to_string()];
    header.extend(task_header(predictions.task(), vocabulary));
    w.write_record(&header)?;
    for (id, label) in predictions.sorted() {
        let mut row = vec![id.to_string()];
        row.extend(label_fields(label));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `sample_id,set` rows sorted by sample id, newline-terminated.
pub fn write_manifest<W: Write>(partition: &Partition, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["sample_id", "set"])?;
    for (id, set) in partition.iter() {
        w.write_record([id, set.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn manifest_string(partition: &Partition) -> Result<String> {
    let mut buf = Vec::new();
    write_manifest(partition, &mut buf)?;
    Ok(String::from_utf8(buf).expect("manifest is UTF-8"))
}

pub fn save_manifest(partition: &Partition, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, manifest_string(partition)?)?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Partition> {
    read_manifest(File::open(path)?)
}

/// Reads a manifest. An empty input, or a header alone, is an empty
/// partition.
pub fn read_manifest<R: Read>(input: R) -> Result<Partition> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let mut partition = Partition::new();
    if headers.is_empty() {
        return Ok(partition);
    }
    let id_col = require(&headers, &["sample_id"])?;
    let set_col = require(&headers, &["set"])?;
    let mut errors = Vec::new();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(csv_row_error(e)?);
                continue;
            }
        };
        let line = line_of(&record);
        let id = &record[id_col];
        match record[set_col].parse::<SplitSet>() {
            Err(message) => errors.push(RowError { line, message }),
            Ok(set) => {
                if partition.get(id).is_some() {
                    errors.push(RowError {
                        line,
                        message: format!("duplicate sample id `{id}`"),
                    });
                } else {
                    partition.assign(id, set);
                }
            }
        }
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    Ok(partition)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!(
                "unknown format `{other}` (expected json or markdown)"
            )),
        }
    }
}

pub fn write_report(report: &MetricReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Markdown => Ok(report.to_markdown()),
    }
}

pub fn load_report(path: impl AsRef<Path>) -> Result<MetricReport> {
    MetricReport::from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXPR_HEADER: &str = "sample_id,subject_id,age_group,gender,race,annotation_source,expr\n";

    fn expr(body: &str) -> Result<LoadedAnnotations> {
        read_annotations(
            format!("{EXPR_HEADER}{body}").as_bytes(),
            &AnnotationSchema::default(),
            Task::Expr,
        )
    }

    fn row_errors(r: Result<impl std::fmt::Debug>) -> Vec<RowError> {
        match r {
            Err(Error::Rows(rows)) => rows,
            other => panic!("expected row errors, got {other:?}"),
        }
    }

    #[test]
    fn expression_row() {
        let got = expr("s1,p1,20-29,female,white,manual,3\n").unwrap();
        let s = &got.dataset.samples()[0];
        assert_eq!(s.label, TaskLabel::Expr(3));
        assert_eq!(s.subject_id, "p1");
        assert_eq!(s.demographics.age, AgeGroup::From20To29);
        assert_eq!(s.demographics.gender, Gender::Female);
        assert_eq!(s.demographics.race, Race::White);
        assert_eq!(got.dataset.cardinality(), 4);
    }

    #[test]
    fn automatic_rows_dropped_and_counted() {
        let got = expr(
            "s1,p1,20-29,female,white,manual,3\n\
             s2,p1,20-29,female,white,automatic,1\n\
             s3,p2,25,male,asian,,0\n",
        )
        .unwrap();
        assert_eq!(got.stats.rows, 3);
        assert_eq!(got.stats.accepted, 2);
        assert_eq!(got.stats.dropped_automatic, 1);
        assert_eq!(
            got.dataset.get("s3").unwrap().demographics.age,
            AgeGroup::From20To29
        );
    }

    #[test]
    fn unknown_race_reports_line() {
        let errs = row_errors(expr(
            "s1,p1,20-29,female,white,manual,3\ns2,p1,20-29,female,martian,manual,3\n",
        ));
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 3);
        assert!(errs[0].message.contains("martian"));
    }

    #[test]
    fn every_bad_row_is_diagnosed() {
        let errs = row_errors(expr(
            "s1,p1,20-29,female,white,manual,3\n\
             s1,p1,20-29,female,white,manual,2\n\
             s3,p1,,female,white,manual,2\n\
             s4,p1,20-29,female,white,manual,x\n",
        ));
        let lines: Vec<u64> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, [3, 4, 5]);
    }

    #[test]
    fn missing_subject_uses_sample_id() {
        let got = read_annotations(
            "sample_id,age,gender,race,expression\na,30,m,black,1\n".as_bytes(),
            &AnnotationSchema::default(),
            Task::Expr,
        )
        .unwrap();
        assert_eq!(got.dataset.samples()[0].subject_id, "a");
        assert_eq!(got.stats.warnings.len(), 1);
    }

    #[test]
    fn missing_column() {
        let r = read_annotations(
            "sample_id,gender,race,expr\na,m,black,1\n".as_bytes(),
            &AnnotationSchema::default(),
            Task::Expr,
        );
        assert!(matches!(r, Err(Error::MissingColumn(c)) if c == "age_group"));
    }

    #[test]
    fn declared_class_count() {
        let schema = AnnotationSchema {
            num_classes: Some(7),
            ..AnnotationSchema::default()
        };
        let body = format!("{EXPR_HEADER}s1,p1,20-29,female,white,manual,3\n");
        let got = read_annotations(body.as_bytes(), &schema, Task::Expr).unwrap();
        assert_eq!(got.dataset.cardinality(), 7);
        let small = AnnotationSchema {
            num_classes: Some(3),
            ..AnnotationSchema::default()
        };
        assert!(read_annotations(body.as_bytes(), &small, Task::Expr).is_err());
    }

    #[test]
    fn au_intensities_become_activations() {
        let got = read_annotations(
            "sample_id,subject_id,age_group,gender,race,au1,au2,au_4\ns1,p1,3-9,f,indian,2,0,1\n"
                .as_bytes(),
            &AnnotationSchema::default(),
            Task::Au,
        )
        .unwrap();
        assert_eq!(
            got.dataset.samples()[0].label,
            TaskLabel::Au(vec![true, false, true])
        );
        assert_eq!(got.dataset.vocabulary(), ["au1", "au2", "au_4"]);
        let bad = read_annotations(
            "sample_id,subject_id,age_group,gender,race,au1\ns1,p1,3-9,f,indian,6\n".as_bytes(),
            &AnnotationSchema::default(),
            Task::Au,
        );
        assert_eq!(row_errors(bad)[0].line, 2);
    }

    #[test]
    fn va_range_checked() {
        let head = "sample_id,subject_id,age_group,gender,race,valence,arousal\n";
        let ok = read_annotations(
            format!("{head}s1,p1,>=70,male,white,0.25,-0.1\n").as_bytes(),
            &AnnotationSchema::default(),
            Task::Va,
        )
        .unwrap();
        assert_eq!(
            ok.dataset.samples()[0].label,
            TaskLabel::Va {
                valence: 0.25,
                arousal: -0.1
            }
        );
        let bad = read_annotations(
            format!("{head}s1,p1,>=70,male,white,1.5,-0.1\n").as_bytes(),
            &AnnotationSchema::default(),
            Task::Va,
        );
        assert!(row_errors(bad)[0].message.contains("outside"));
    }

    #[test]
    fn predictions() {
        let p = read_predictions("sample_id,expr\ns1,4\n".as_bytes(), Task::Expr).unwrap();
        assert_eq!(p.get("s1"), Some(&TaskLabel::Expr(4)));
        let p = read_predictions(
            "sample_id,valence,arousal\ns1,0.25,-0.10\n".as_bytes(),
            Task::Va,
        )
        .unwrap();
        assert_eq!(
            p.get("s1"),
            Some(&TaskLabel::Va {
                valence: 0.25,
                arousal: -0.10
            })
        );
        let p = read_predictions("sample_id,au1,au2\ns1,1,0\n".as_bytes(), Task::Au).unwrap();
        assert_eq!(p.get("s1"), Some(&TaskLabel::Au(vec![true, false])));
    }

    #[test]
    fn prediction_errors() {
        let range = read_predictions("sample_id,valence,arousal\ns1,1.5,0\n".as_bytes(), Task::Va);
        assert_eq!(row_errors(range)[0].line, 2);
        let dup = read_predictions("sample_id,expr\ns1,4\ns1,3\n".as_bytes(), Task::Expr);
        assert_eq!(row_errors(dup)[0].line, 3);
        let junk = read_predictions("sample_id,expr\ns1,happy\n".as_bytes(), Task::Expr);
        assert_eq!(row_errors(junk).len(), 1);
        assert!(matches!(
            read_predictions("sample_id,expr\ns1,4\n".as_bytes(), Task::Va),
            Err(Error::TaskMismatch {
                expected: Task::Va,
                found: Task::Expr
            })
        ));
    }

    #[test]
    fn written_tables_read_back() {
        use crate::harness::{generate_dataset, generate_predictions, SynthSpec};
        let spec = SynthSpec {
            subjects: 5,
            ..SynthSpec::default()
        };
        for task in [Task::Expr, Task::Au, Task::Va] {
            let ds = generate_dataset(&spec, task).unwrap();
            let preds = generate_predictions(&ds, &spec).unwrap();
            let mut buf = Vec::new();
            write_annotations(&ds, &mut buf).unwrap();
            let schema = AnnotationSchema {
                num_classes: Some(ds.cardinality()),
                ..AnnotationSchema::default()
            };
            let back = read_annotations(buf.as_slice(), &schema, task)
                .unwrap()
                .dataset;
            assert_eq!(back.samples(), ds.samples());
            assert_eq!(back.vocabulary(), ds.vocabulary());
            let mut buf = Vec::new();
            write_predictions(&preds, ds.vocabulary(), &mut buf).unwrap();
            let back = read_predictions(buf.as_slice(), task).unwrap();
            assert_eq!(back.sorted(), preds.sorted());
        }
    }

    #[test]
    fn manifest_format() {
        let mut p = Partition::new();
        p.assign("b", SplitSet::Test);
        p.assign("a", SplitSet::Train);
        p.assign("c", SplitSet::Valid);
        let text = manifest_string(&p).unwrap();
        assert_eq!(text, "sample_id,set\na,train\nb,test\nc,valid\n");
        assert_eq!(read_manifest(text.as_bytes()).unwrap(), p);
    }

    #[test]
    fn manifest_errors() {
        let dev = read_manifest("sample_id,set\na,dev\n".as_bytes());
        assert!(row_errors(dev)[0].message.contains("dev"));
        let dup = read_manifest("sample_id,set\na,train\na,test\n".as_bytes());
        assert_eq!(row_errors(dup)[0].line, 3);
        assert!(read_manifest("".as_bytes()).unwrap().is_empty());
        assert!(read_manifest("sample_id,set\n".as_bytes())
            .unwrap()
            .is_empty());
    }
}
