use std::collections::BTreeSet;

use cascade_core::cascade::*;
use cascade_core::dataset::{generate_synthetic, CandidateSet, Label, SyntheticConfig};
use cascade_core::nn::{encode_network, LayerSpec, TrainConfig};
use cascade_core::Error;

fn tiny_data(seed: u64) -> CandidateSet {
    generate_synthetic(&SyntheticConfig {
        n_scans: 6,
        positives_per_scan: 2,
        negatives_per_scan: 40,
        patch_size: 8,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn tiny_config(n_stages: usize) -> CascadeConfig {
    let train = TrainConfig {
        learning_rate: 0.1,
        epochs: 2,
        batch_size: 16,
        dropout_rate: 0.0,
        ..TrainConfig::default()
    };
    CascadeConfig {
        n_stages,
        k: 3,
        per_fold_negatives: 10,
        stage_oversample: 3,
        final_oversample: 2,
        architecture: LayerSpec::compact_architecture(0.0),
        stage_train: train.clone(),
        final_train: train,
        seed: 5,
        ..CascadeConfig::default()
    }
}

fn model_bytes(m: &CascadeModel) -> Vec<Vec<u8>> {
    m.folds
        .iter()
        .flat_map(|f| f.stages.iter().map(|s| &s.net).chain([&f.final_net]))
        .map(encode_network)
        .collect()
}

#[test]
fn zero_stages_match_the_baseline() {
    let data = tiny_data(1);
    let cascade = train_cascade(&data, &tiny_config(0)).unwrap();
    let baseline = train_baseline(&data, &tiny_config(3)).unwrap();
    assert_eq!(baseline.model.n_stages(), 0);
    assert_eq!(model_bytes(&cascade.model), model_bytes(&baseline.model));
    let a = predict_all(&cascade.model, &data).unwrap();
    let b = predict_all(&baseline.model, &data).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.rejected_at.is_none()));
}

#[test]
fn thread_count_does_not_change_results() {
    let data = tiny_data(2);
    let cfg = tiny_config(2);
    let one = train_cascade_with(&data, &cfg, RunOptions { jobs: 1 }).unwrap();
    let many = train_cascade_with(&data, &cfg, RunOptions { jobs: 3 }).unwrap();
    assert_eq!(one.model, many.model);
    assert_eq!(model_bytes(&one.model), model_bytes(&many.model));
    assert_eq!(
        predict_all_with(&one.model, &data, RunOptions { jobs: 1 }).unwrap(),
        predict_all_with(&many.model, &data, RunOptions { jobs: 3 }).unwrap()
    );
}

#[test]
fn stage_counts_are_consistent() {
    let data = tiny_data(3);
    let run = train_cascade(&data, &tiny_config(3)).unwrap();
    let table = &run.model.stage_table;
    assert_eq!(table.len(), run.model.n_stages());
    let counts = data.counts();
    let (mut nodules, mut non_nodules) = (counts.nodules, counts.non_nodules);
    for row in table {
        assert_eq!(
            (row.n_nodule_before, row.n_non_nodule_before),
            (nodules, non_nodules)
        );
        assert!(row.n_nodule_after <= row.n_nodule_before);
        assert!(row.n_non_nodule_after <= row.n_non_nodule_before);
        nodules = row.n_nodule_after;
        non_nodules = row.n_non_nodule_after;
    }
    for (s, row) in table.iter().enumerate() {
        let per_fold: Vec<StageStats> = run.model.folds.iter().map(|f| f.stages[s].stats).collect();
        assert_eq!(
            StageStats::sum(&per_fold).n_non_nodule_after,
            row.n_non_nodule_after
        );
        for (f, fold) in run.model.folds.iter().enumerate() {
            let stage = &fold.stages[s];
            assert_eq!(stage.threshold, stage.stats.threshold, "fold {f}");
            assert!((0.0..=1.0).contains(&stage.threshold));
        }
    }
}

#[test]
fn recorded_sigma_matches_an_independent_recomputation() {
    let data = tiny_data(4);
    let run = train_cascade(&data, &tiny_config(1)).unwrap();
    let parts = run.model.assignment.partition(&data).unwrap();
    for (f, fold) in run.model.folds.iter().enumerate() {
        let stage = &fold.stages[0];
        let scores = score_set(&stage.net, &parts[f]).unwrap();
        let n = scores.len() as f64;
        let mean = scores.iter().map(|&s| s as f64).sum::<f64>() / n;
        let var = scores
            .iter()
            .map(|&s| (s as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!((stage.stats.sigma - var.sqrt()).abs() < 1e-9, "fold {f}");
        assert!((stage.threshold - (0.25 * var.sqrt()).min(1.0)).abs() < 1e-9);
        let kept = scores
            .iter()
            .filter(|&&s| s as f64 >= stage.threshold)
            .count();
        assert_eq!(
            kept,
            stage.stats.n_nodule_after + stage.stats.n_non_nodule_after
        );
    }
}

#[test]
fn rejected_records_score_zero_and_scoring_is_repeatable() {
    let data = tiny_data(5);
    let run = train_cascade(&data, &tiny_config(2)).unwrap();
    let records = predict_all(&run.model, &data).unwrap();
    assert_eq!(records.len(), data.len());
    for (r, p) in records.iter().zip(data.patches()) {
        assert_eq!(r.lesion_id, p.lesion_id);
        assert!((0.0..=1.0).contains(&r.score));
        if r.rejected_at.is_some() {
            assert_eq!(r.score, 0.0);
        }
    }
    assert_eq!(predict_all(&run.model, &data).unwrap(), records);
    // Inference rejects exactly what training filtered.
    let last = run.model.stage_table.last().unwrap();
    let survivors = records.iter().filter(|r| r.rejected_at.is_none());
    assert_eq!(
        survivors
            .clone()
            .filter(|r| r.label == Label::Nodule)
            .count(),
        last.n_nodule_after
    );
    assert_eq!(
        survivors.filter(|r| r.label == Label::NonNodule).count(),
        last.n_non_nodule_after
    );
}

#[test]
fn zero_thresholds_reduce_to_the_final_networks() {
    let data = tiny_data(6);
    let mut cfg = tiny_config(2);
    cfg.threshold_factor = 0.0;
    let run = train_cascade(&data, &cfg).unwrap();
    assert!(run
        .model
        .stage_table
        .iter()
        .all(|r| r.n_non_nodule_after == r.n_non_nodule_before));
    let mut finals_only = run.model.clone();
    for f in &mut finals_only.folds {
        f.stages.clear();
    }
    assert_eq!(
        predict_all(&run.model, &data).unwrap(),
        predict_all(&finals_only, &data).unwrap()
    );
}

#[test]
fn no_network_scores_what_it_trained_on() {
    let data = tiny_data(7);
    let run = train_cascade(&data, &tiny_config(2)).unwrap();
    let (_, trace) = predict_all_traced(&run.model, &data, RunOptions::default()).unwrap();
    let audit = audit_fold_hygiene(&run.lineage, &trace);
    assert!(
        audit.violations.is_empty(),
        "{:?}",
        &audit.violations[..audit.violations.len().min(5)]
    );
    assert!(audit.checked >= data.len() * 2);
    // Every training set holds lesions, and only ones from other folds.
    for (net, lesions) in &run.lineage.trained_on {
        assert!(!lesions.is_empty());
        for l in lesions {
            assert_ne!(run.model.assignment.fold_of[l], net.fold);
        }
    }
}

#[test]
fn save_and_load_round_trip() {
    let data = tiny_data(8);
    let run = train_cascade(&data, &tiny_config(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.model.save(dir.path()).unwrap();
    for f in 0..3 {
        for name in ["stage_0.csnn", "stage_1.csnn", "final.csnn"] {
            assert!(dir.path().join(format!("fold_{f}/{name}")).is_file());
        }
    }
    let loaded = CascadeModel::load(dir.path()).unwrap();
    assert_eq!(loaded, run.model);
    assert_eq!(
        predict_all(&loaded, &data).unwrap(),
        predict_all(&run.model, &data).unwrap()
    );
    let again = tempfile::tempdir().unwrap();
    loaded.save(again.path()).unwrap();
    for rel in [MANIFEST_FILE, "fold_1/stage_1.csnn", "fold_2/final.csnn"] {
        assert_eq!(
            std::fs::read(dir.path().join(rel)).unwrap(),
            std::fs::read(again.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn corrupted_network_file_fails_to_load() {
    let data = tiny_data(9);
    let run = train_cascade(&data, &tiny_config(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.model.save(dir.path()).unwrap();
    let path = dir.path().join("fold_0/stage_0.csnn");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(
        CascadeModel::load(dir.path()),
        Err(Error::Format { offset: 0, .. })
    ));
}

#[test]
fn unknown_lesions_cannot_be_routed() {
    let data = tiny_data(10);
    let run = train_cascade(&data, &tiny_config(0)).unwrap();
    let other = generate_synthetic(&SyntheticConfig {
        n_scans: 7,
        positives_per_scan: 2,
        negatives_per_scan: 40,
        patch_size: 8,
        ..SyntheticConfig::default()
    })
    .unwrap();
    assert!(matches!(
        predict_all(&run.model, &other),
        Err(Error::Routing(_))
    ));
}

#[test]
fn single_class_data_is_rejected() {
    let data = tiny_data(11).of_label(Label::NonNodule);
    assert!(matches!(
        train_cascade(&data, &tiny_config(1)),
        Err(Error::Training(_))
    ));
}

#[test]
fn baseline_separates_easy_data() {
    let data = generate_synthetic(&SyntheticConfig {
        n_scans: 10,
        positives_per_scan: 10,
        negatives_per_scan: 30,
        hard_negative_fraction: 0.0,
        patch_size: 16,
        seed: 12,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let mut cfg = tiny_config(0);
    cfg.final_train.learning_rate = 0.2;
    cfg.final_train.epochs = 10;
    let run = train_baseline(&data, &cfg).unwrap();
    let records = predict_all(&run.model, &data).unwrap();
    let correct = records
        .iter()
        .filter(|r| (r.score >= 0.5) == (r.label == Label::Nodule))
        .count();
    let accuracy = correct as f64 / records.len() as f64;
    assert!(accuracy >= 0.9, "out-of-fold accuracy {accuracy}");
    let labels: BTreeSet<_> = records.iter().map(|r| r.label).collect();
    assert_eq!(labels.len(), 2);
}
