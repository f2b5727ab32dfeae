use fuselage_core::dataset::{build_labeled_set, patch_key, Transform};
use fuselage_core::features::{load_embeddings, write_embeddings, FeatureKind};
use fuselage_core::manifest::{read_manifest, save_dataset};
use fuselage_core::pipeline::{
    classify_all, export_patches, load_model, read_defect_map, save_model, train_model, write_defect_map,
    PipelineConfig,
};
use fuselage_core::synth::{generate_dataset, DefectKind, SynthConfig};
use fuselage_core::Error;

fn small_set(n: usize) -> Vec<fuselage_core::dataset::Sample> {
    let cfg = SynthConfig {
        width: 400,
        height: 400,
        defect_count: 1,
        kinds: vec![DefectKind::Dent],
        seed: 31,
        ..SynthConfig::default()
    };
    generate_dataset(&cfg, n).unwrap()
}

#[test]
fn dataset_survives_a_manifest_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples = small_set(3);
    let manifest_path = save_dataset(&samples, dir.path(), Some(&[0, 1, 0])).unwrap();
    let manifest = read_manifest(&manifest_path).unwrap();
    assert_eq!(manifest.len(), 3);
    let folds: Vec<Option<usize>> = manifest.records.iter().map(|r| r.fold).collect();
    assert_eq!(folds, vec![Some(0), Some(1), Some(0)]);
    assert_eq!(manifest.load_samples().unwrap(), samples);
}

#[test]
fn missing_manifest_is_a_data_error() {
    let err = read_manifest("/nonexistent/manifest.tsv").unwrap_err();
    assert!(err.is_data_error(), "{err}");
}

#[test]
fn embeddings_round_trip_and_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.tsv");
    let entries = vec![
        ("a:0:0".to_string(), vec![0.5f32, -1.25, 3.0]),
        ("a:0:65:rot60".to_string(), vec![1.0f32, 2.0, f32::MIN_POSITIVE]),
    ];
    write_embeddings(&path, 3, &entries).unwrap();
    let store = load_embeddings(&path).unwrap();
    assert_eq!(store.dimension(), 3);
    assert_eq!(store.len(), 2);
    for (key, values) in &entries {
        let v = store.lookup(key).unwrap();
        assert_eq!(v.kind, FeatureKind::External);
        let expected: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        assert_eq!(v.values, expected);
    }
    assert!(matches!(store.lookup("b:0:0"), Err(Error::Lookup(_))));
    assert!(write_embeddings(&path, 2, &entries).is_err());
}

#[test]
fn external_features_train_from_an_embeddings_file() {
    let dir = tempfile::tempdir().unwrap();
    let samples = small_set(4);
    let cfg = PipelineConfig {
        patch_size: 65,
        feature: FeatureKind::External,
        ..PipelineConfig::default()
    };
    // Embed each patch by its mean mask coverage so the classes separate.
    let mut entries = Vec::new();
    for m in build_labeled_set(&samples, cfg.patch_size).unwrap() {
        let s = samples.iter().find(|s| s.id == m.parent_id).unwrap();
        let r = m.anchor.rect(cfg.patch_size);
        let cover = s.mask.count_in(r).unwrap() as f32 / r.area() as f32;
        for t in Transform::AUGMENTATIONS {
            let t = (!t.is_identity()).then_some(t);
            entries.push((patch_key(&m.parent_id, m.anchor, t), vec![cover, 1.0 - cover]));
        }
    }
    let path = dir.path().join("emb.tsv");
    write_embeddings(&path, 2, &entries).unwrap();
    let store = load_embeddings(&path).unwrap();
    let artifact = train_model(&samples, &cfg, Some(&store)).unwrap();
    assert_eq!(artifact.model.kind, FeatureKind::External);
    let s = &samples[0];
    let map = classify_all(&artifact.model, &s.id, &s.image, &cfg, Some(&store)).unwrap();
    let report = fuselage_core::pipeline::evaluate_mask(&map, &s.mask).unwrap();
    assert_eq!(report.fp + report.fn_, 0);
}

#[test]
fn model_and_defect_map_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let samples = small_set(3);
    let cfg = PipelineConfig::default();
    let artifact = train_model(&samples, &cfg, None).unwrap();
    let model_path = dir.path().join("model.bin");
    save_model(&artifact, &model_path).unwrap();
    let loaded = load_model(&model_path).unwrap();
    assert_eq!(loaded, artifact);

    let s = &samples[1];
    let map = classify_all(&loaded.model, &s.id, &s.image, &cfg, None).unwrap();
    let map_path = dir.path().join("map.json");
    write_defect_map(&map, &map_path).unwrap();
    assert_eq!(read_defect_map(&map_path).unwrap(), map);

    std::fs::write(&model_path, b"FDSV\x02\0\0\0").unwrap();
    assert!(matches!(load_model(&model_path), Err(Error::Format(_))));
}

#[test]
fn exported_patches_match_the_key_index() {
    let dir = tempfile::tempdir().unwrap();
    let samples = small_set(2);
    let written = export_patches(&samples, &PipelineConfig::default(), dir.path()).unwrap();
    let keys = std::fs::read_to_string(dir.path().join("keys.tsv")).unwrap();
    let pngs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert!(written > 0);
    assert_eq!(pngs, written);
    assert!(keys.lines().count() >= written);
}
