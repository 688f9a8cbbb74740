//! Whatever happens to held-out rows must not change what is fitted on the
//! training rows.

mod common;

use convforest::data::{load_dataset, stratified_kfold, ClassColumn, Dataset};
use convforest::dcnn::NetworkConfig;
use convforest::eval::{fit_pipeline, PipelineKind, PipelineSpec, Protocol};
use convforest::frf::ForestConfig;

fn small_segment() -> Dataset {
    let ds = load_dataset(common::data_path("segment.arff"), &ClassColumn::Last).unwrap();
    let rows: Vec<usize> = (0..ds.n_instances()).step_by(10).collect();
    ds.subset(&rows)
}

fn spec(kind: PipelineKind) -> PipelineSpec {
    let net = NetworkConfig {
        epochs: 2,
        learning_rate: 0.0095,
        ..NetworkConfig::small()
    };
    let forest = ForestConfig {
        n_trees: 10,
        ..ForestConfig::default()
    };
    match kind {
        PipelineKind::StandaloneDcnn => PipelineSpec::standalone(net),
        PipelineKind::DcnnFrf => PipelineSpec::dcnn_frf(net, forest),
        PipelineKind::FrfRaw => PipelineSpec::frf_raw(forest),
    }
}

#[test]
fn corrupting_test_rows_leaves_fitted_models_unchanged() {
    let clean = small_segment();
    let folds = stratified_kfold(&clean.labels, 5, 2).unwrap();
    for kind in [PipelineKind::StandaloneDcnn, PipelineKind::DcnnFrf, PipelineKind::FrfRaw] {
        let pipeline = spec(kind);
        assert_eq!(pipeline.protocol, Protocol::PerFold);
        for fold in 0..5 {
            let train = folds.train_indices(fold);
            let test = folds.test_indices(fold);
            let mut dirty = clean.clone();
            for &r in &test {
                for v in &mut dirty.instances[r] {
                    *v = 1e9;
                }
                dirty.missing_mask[r][0] = true;
            }
            let a = fit_pipeline(&clean, &train, &pipeline, 5, fold, &mut Vec::new()).unwrap().unwrap();
            let b = fit_pipeline(&dirty, &train, &pipeline, 5, fold, &mut Vec::new()).unwrap().unwrap();
            assert_eq!(a, b, "{kind} fold {fold}");
            // Sanity: the canary is visible when it is part of the training rows.
            let mut with_test = train.clone();
            with_test.push(test[0]);
            let c = fit_pipeline(&clean, &with_test, &pipeline, 5, fold, &mut Vec::new()).unwrap().unwrap();
            let d = fit_pipeline(&dirty, &with_test, &pipeline, 5, fold, &mut Vec::new()).unwrap().unwrap();
            assert_ne!(c.preprocessing, d.preprocessing, "{kind} fold {fold}");
        }
    }
}
