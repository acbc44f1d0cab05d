use affeval::data_model::{
    subgroup_index, AgeGroup, Attribute, Dataset, Demographics, Gender, PredictionSet, Race,
    Sample, Task, TaskLabel,
};
use affeval::metrics::{au, expr, va, EvalSet};
use affeval::partition::{partition, PartitionSpec};
use proptest::prelude::*;

const CLASSES: usize = 4;

fn demographics() -> impl Strategy<Value = Demographics> {
    (0..5usize, 0..9usize, 0..3usize).prop_map(|(r, a, g)| Demographics {
        race: Race::ALL[r],
        age: AgeGroup::ALL[a],
        gender: Gender::ALL[g],
    })
}

/// (subject, demographics, truth, prediction) rows for expression data.
fn expr_rows() -> impl Strategy<Value = Vec<(usize, Demographics, usize, usize)>> {
    prop::collection::vec((0..8usize, demographics(), 0..CLASSES, 0..CLASSES), 1..60)
}

/// Like `expr_rows`, with at least three distinct subjects.
fn partition_rows() -> impl Strategy<Value = Vec<(usize, Demographics, usize, usize)>> {
    prop::collection::vec((0..8usize, demographics(), 0..CLASSES, 0..CLASSES), 3..60).prop_map(
        |mut rows| {
            for (i, row) in rows.iter_mut().take(3).enumerate() {
                row.0 = i;
            }
            rows
        },
    )
}

fn build_expr(rows: &[(usize, Demographics, usize, usize)]) -> (Dataset, PredictionSet) {
    let mut samples = Vec::new();
    let mut preds = PredictionSet::new(Task::Expr);
    for (i, (subject, d, t, p)) in rows.iter().enumerate() {
        let id = format!("s{i:03}");
        samples.push(Sample {
            sample_id: id.clone(),
            subject_id: format!("p{subject}"),
            demographics: *d,
            label: TaskLabel::Expr(*t),
        });
        preds.insert(id, TaskLabel::Expr(*p)).unwrap();
    }
    (
        Dataset::with_cardinality(Task::Expr, CLASSES, samples).unwrap(),
        preds,
    )
}

fn expr_metrics(ds: &Dataset, preds: &PredictionSet) -> Vec<Option<f64>> {
    let set = EvalSet::new(ds, preds, None).unwrap();
    let mut out = vec![expr::global_f1(&set).ok()];
    for a in Attribute::ALL {
        out.push(expr::local_f1(&set, a).ok());
        out.push(expr::eop(&set, a).ok());
        out.push(expr::sp(&set, a).ok());
    }
    out
}

fn close(a: &[Option<f64>], b: &[Option<f64>]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        })
}

fn shuffled<T: Clone>(v: &[T], keys: &[u32]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by_key(|&i| (keys[i % keys.len()], i));
    idx.into_iter().map(|i| v[i].clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn expr_metrics_ignore_sample_order(rows in expr_rows(), keys in prop::collection::vec(any::<u32>(), 1..60)) {
        let (ds, preds) = build_expr(&rows);
        let base = expr_metrics(&ds, &preds);
        // ids travel with their rows, so only storage order changes
        let mut samples = ds.samples().to_vec();
        samples = shuffled(&samples, &keys);
        let reordered = Dataset::with_cardinality(Task::Expr, CLASSES, samples).unwrap();
        prop_assert!(close(&base, &expr_metrics(&reordered, &preds)));
    }

    #[test]
    fn expr_metrics_ignore_class_names(rows in expr_rows(), perm in Just((0..CLASSES).collect::<Vec<_>>()).prop_shuffle()) {
        let (ds, preds) = build_expr(&rows);
        let relabeled: Vec<_> = rows.iter().map(|&(s, d, t, p)| (s, d, perm[t], perm[p])).collect();
        let (ds2, preds2) = build_expr(&relabeled);
        prop_assert!(close(&expr_metrics(&ds, &preds), &expr_metrics(&ds2, &preds2)));
    }

    #[test]
    fn constant_predictions_have_no_parity_gap(rows in expr_rows(), c in 0..CLASSES) {
        let constant: Vec<_> = rows.iter().map(|&(s, d, t, _)| (s, d, t, c)).collect();
        let (ds, preds) = build_expr(&constant);
        let set = EvalSet::new(&ds, &preds, None).unwrap();
        for a in Attribute::ALL {
            if let Ok(v) = expr::sp(&set, a) {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn fairness_scores_are_bounded(rows in expr_rows()) {
        let (ds, preds) = build_expr(&rows);
        let set = EvalSet::new(&ds, &preds, None).unwrap();
        for a in Attribute::ALL {
            for v in [expr::eop(&set, a), expr::sp(&set, a)].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn subgroup_index_partitions_samples(rows in expr_rows()) {
        let (ds, _) = build_expr(&rows);
        for a in Attribute::ALL {
            let index = subgroup_index(ds.samples(), a);
            let mut seen: Vec<&str> = index.values().flatten().copied().collect();
            let total = seen.len();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), total);
            let expected = ds
                .samples()
                .iter()
                .filter(|s| a != Attribute::Gender || s.demographics.gender != Gender::OtherUncertain)
                .count();
            prop_assert_eq!(total, expected);
            prop_assert!(index.values().all(|ids| !ids.is_empty()));
        }
    }

    #[test]
    fn au_metrics_are_bounded(rows in prop::collection::vec((demographics(), prop::collection::vec(any::<bool>(), 6)), 1..40)) {
        let mut samples = Vec::new();
        let mut preds = PredictionSet::new(Task::Au);
        for (i, (d, bits)) in rows.iter().enumerate() {
            let id = format!("s{i}");
            samples.push(Sample {
                sample_id: id.clone(),
                subject_id: format!("p{i}"),
                demographics: *d,
                label: TaskLabel::Au(bits[..3].to_vec()),
            });
            preds.insert(id, TaskLabel::Au(bits[3..].to_vec())).unwrap();
        }
        let ds = Dataset::with_cardinality(Task::Au, 3, samples).unwrap();
        let set = EvalSet::new(&ds, &preds, None).unwrap();
        for a in Attribute::ALL {
            if let Ok(m) = au::eod(&set, a) {
                prop_assert!((0.0..=1.0).contains(&m.value));
            }
            if let Ok(v) = au::dpd(&set, a) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn ccc_is_bounded_and_symmetric(pairs in prop::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0, -1.0f64..=1.0, -1.0f64..=1.0), 2..40)) {
        let build = |swap: bool| {
            let mut samples = Vec::new();
            let mut preds = PredictionSet::new(Task::Va);
            for (i, &(tv, ta, pv, pa)) in pairs.iter().enumerate() {
                let (t, p) = if swap { ((pv, pa), (tv, ta)) } else { ((tv, ta), (pv, pa)) };
                let id = format!("s{i}");
                samples.push(Sample {
                    sample_id: id.clone(),
                    subject_id: "p".into(),
                    demographics: Demographics { race: Race::Asian, age: AgeGroup::From20To29, gender: Gender::Female },
                    label: TaskLabel::Va { valence: t.0, arousal: t.1 },
                });
                preds.insert(id, TaskLabel::Va { valence: p.0, arousal: p.1 }).unwrap();
            }
            let ds = Dataset::with_cardinality(Task::Va, 2, samples).unwrap();
            let set = EvalSet::new(&ds, &preds, None).unwrap();
            va::global_ccc(&set).ok()
        };
        match (build(false), build(true)) {
            (Some(a), Some(b)) => {
                prop_assert!((-1.0..=1.0).contains(&a.valence) && (-1.0..=1.0).contains(&a.arousal));
                prop_assert!((a.valence - b.valence).abs() < 1e-12);
                prop_assert!((a.arousal - b.arousal).abs() < 1e-12);
            }
            (None, None) => {}
            _ => prop_assert!(false, "degeneracy differs under swapping truth and prediction"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partitions_are_deterministic_and_subject_independent(rows in partition_rows(), seed in any::<u64>()) {
        let (ds, _) = build_expr(&rows);
        let spec = PartitionSpec { seed, ..PartitionSpec::default() };
        let a = partition(&ds, &spec).unwrap();
        let b = partition(&ds, &spec).unwrap();
        prop_assert_eq!(&a.partition, &b.partition);
        prop_assert_eq!(a.partition.len(), ds.len());
        prop_assert!(a.quality.subject_independent);
        for s in ds.samples() {
            for t in ds.samples() {
                if s.subject_id == t.subject_id {
                    prop_assert_eq!(a.partition.get(&s.sample_id), a.partition.get(&t.sample_id));
                }
            }
        }
    }

    #[test]
    fn partitions_ignore_sample_order(rows in partition_rows(), keys in prop::collection::vec(any::<u32>(), 1..60)) {
        let (ds, _) = build_expr(&rows);
        let reordered = Dataset::with_cardinality(Task::Expr, CLASSES, shuffled(ds.samples(), &keys)).unwrap();
        let spec = PartitionSpec::default();
        prop_assert_eq!(partition(&ds, &spec).unwrap().partition, partition(&reordered, &spec).unwrap().partition);
    }

    #[test]
    fn refinement_never_worsens_the_objective(rows in partition_rows(), seed in any::<u64>()) {
        let (ds, _) = build_expr(&rows);
        let out = partition(&ds, &PartitionSpec { seed, ..PartitionSpec::default() }).unwrap();
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!((out.trace.last().unwrap() - out.quality.objective).abs() < 1e-9);
    }
}
