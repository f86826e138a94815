use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use har_audit::confusion::FusedDistribution;
use har_audit::dataset::{window_corpus, FoldPlan, SensorRecording, WindowConfig, WindowedDataset};
use har_audit::ifc::{compute_ifc, merge_to_samples, CorrectnessMatrix};
use har_audit::mask::{build_mask, write_window_mask, MaskCategory};
use har_audit::pipeline::{audit, train_fold_predictions, BaselineEnsemble};
use har_audit::predictions::MergePolicy;
use har_audit::synth::{generate, ScenarioSpec};

fn two_class_spec() -> ScenarioSpec {
    ScenarioSpec {
        num_classes: 2,
        signatures: vec![vec![-1.0, -1.0], vec![1.0, 1.0]],
        noise_std: 0.1,
        injections: Vec::new(),
        seed: 42,
        ..ScenarioSpec::default()
    }
}

fn trained(spec: &ScenarioSpec) -> (WindowedDataset, Vec<har_audit::predictions::PredictionRecord>) {
    let corpus = generate(spec).unwrap();
    let ds = window_corpus(&corpus.recordings, &WindowConfig::default()).unwrap();
    let plan = FoldPlan::for_dataset(&ds, 10).unwrap();
    let records = train_fold_predictions(&ds, &plan, &BaselineEnsemble::default()).unwrap();
    (ds, records)
}

#[test]
fn separable_two_class_scenario_is_learned() {
    let spec = two_class_spec();
    assert!(generate(&spec).unwrap().annotations.is_empty());
    let (ds, records) = trained(&spec);
    let a = audit(&ds, &records, MergePolicy::Majority, None).unwrap();
    for s in &a.scores {
        assert!(s.accuracy_pct.mean > 99.0, "{} scored {}", s.model, s.accuracy_pct.mean);
    }
    assert!(a.report().binary_mask_degenerate);
}

#[test]
fn stricter_merge_policy_never_lowers_ifc() {
    let (ds, records) = trained(&ScenarioSpec::default());
    let ifc = |p| audit(&ds, &records, p, None).unwrap().summary.ifc;
    let (any, majority, all) = (ifc(MergePolicy::Any), ifc(MergePolicy::Majority), ifc(MergePolicy::All));
    assert!(any <= majority && majority <= all, "{any} {majority} {all}");
}

#[test]
fn adding_models_never_raises_ifc() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let w = rng.random_range(1..300);
        let rows: Vec<Vec<bool>> = (0..6).map(|_| (0..w).map(|_| rng.random_bool(0.6)).collect()).collect();
        let mut previous = 100.0;
        for m in 1..=6 {
            let matrix = CorrectnessMatrix::from_rows(
                (0..m).map(|i| format!("m{i}")).collect(),
                (0..w).collect(),
                rows[..m].to_vec(),
            )
            .unwrap();
            let ifc = compute_ifc(&matrix).unwrap().ifc;
            assert!(ifc <= previous + 1e-12);
            previous = ifc;
        }
    }
}

fn dataset(samples: usize, size: usize, stride: usize) -> WindowedDataset {
    let rec = SensorRecording::new(
        Array2::zeros((samples, 1)),
        1.0,
        vec![0; samples],
        "s",
        "a",
        vec!["x".into()],
    )
    .unwrap();
    window_corpus(&[rec], &WindowConfig::new(size, stride).unwrap()).unwrap()
}

#[test]
fn sample_merge_is_idempotent_and_monotone() {
    let ds = dataset(500, 40, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let cats: Vec<u8> = (0..ds.len()).map(|_| rng.random_range(0..3)).collect();
        let once = merge_to_samples(&cats, &ds);
        assert_eq!(once, merge_to_samples(&cats, &ds));
        let mut raised = cats.clone();
        let i = rng.random_range(0..raised.len());
        raised[i] = 2;
        let after = merge_to_samples(&raised, &ds);
        assert!(once.iter().zip(&after).all(|(a, b)| a <= b));
    }
}

#[test]
fn ten_thousand_window_mask_export() {
    let ds = dataset(10_000, 1, 1);
    assert_eq!(ds.len(), 10_000);
    let flags: Vec<bool> = (0..ds.len()).map(|w| w % 7 == 0).collect();
    let fused: Vec<FusedDistribution> = (0..ds.len())
        .filter(|w| flags[*w])
        .map(|w| FusedDistribution {
            window_id: w,
            true_label: 0,
            mean_probs: if w % 2 == 0 { vec![0.1, 0.8, 0.1] } else { vec![0.2, 0.45, 0.35] },
            confused_class: 1,
            fused_agrees_with_truth: false,
        })
        .collect();
    let mask = build_mask(&flags, &fused, &ds).unwrap();
    let mut buf = Vec::new();
    write_window_mask(&mut buf, &mask).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 10_001);
    let majors = mask.window_mask().iter().filter(|c| **c == MaskCategory::Major).count();
    assert_eq!(majors, (0..10_000).filter(|w| w % 14 == 0).count());
}
