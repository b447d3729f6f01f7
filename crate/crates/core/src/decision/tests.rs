use super::*;
use crate::corpus::{build_corpus, CorpusConfig, Split, SplitData};
use crate::net::{init_model, ClassifierConfig};
use crate::synth::PlaceholderStyle;

fn rec(object_id: u32, view_id: u32, truth: GlitchClass, probs: [f64; 5], emb: &[f32]) -> PredictionRecord {
    PredictionRecord {
        sample_id: format!("{object_id}-{view_id}"),
        object_id,
        view_id,
        true_class: truth,
        predicted: GlitchClass::from_index(argmax(&probs)).unwrap(),
        probabilities: probs.to_vec(),
        embedding: emb.to_vec(),
    }
}

#[test]
fn aggregate_examples() {
    let p = [0.1, 0.2, 0.3, 0.15, 0.25];
    assert_eq!(aggregate_probs(&[p]).unwrap(), p.to_vec());
    let a = aggregate_probs(&[[1.0, 0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0, 0.0]]).unwrap();
    assert_eq!(a, vec![0.5, 0.5, 0.0, 0.0, 0.0]);
    assert!(matches!(aggregate_probs::<Vec<f64>>(&[]), Err(DecisionError::Empty)));
    assert!(matches!(aggregate_probs(&[[0.5, 0.6]]), Err(DecisionError::NotADistribution { .. })));
    assert!(matches!(aggregate_probs(&[vec![0.5, 0.5], vec![1.0]]), Err(DecisionError::NotADistribution { row: 1, .. })));
}

proptest::proptest! {
    #[test]
    fn aggregate_is_symmetric_and_normalized(raw in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 5), 1..12), rot in 0usize..12) {
        let rows: Vec<Vec<f64>> = raw.iter().map(|r| { let s: f64 = r.iter().sum(); r.iter().map(|v| v / s).collect() }).collect();
        let a = aggregate_probs(&rows).unwrap();
        proptest::prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let mut permuted = rows.clone();
        permuted.rotate_left(rot % rows.len());
        permuted.reverse();
        let b = aggregate_probs(&permuted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            proptest::prop_assert!((x - y).abs() < 1e-15);
        }
    }
}

/// Two 1-D embeddings per class at `offset` and `offset + 2`.
fn pairs_fixture() -> PredictionSet {
    let mut records = Vec::new();
    for (i, c) in GlitchClass::ALL.into_iter().enumerate() {
        let base = 10.0 * i as f32;
        records.push(rec(i as u32, 0, c, [0.2; 5], &[base]));
        records.push(rec(i as u32, 1, c, [0.2; 5], &[base + 2.0]));
    }
    PredictionSet { records }
}

#[test]
fn fit_confidence_examples() {
    let m = fit_confidence(&pairs_fixture()).unwrap();
    assert_eq!(m.dim, 1);
    assert_eq!(m.means[0], vec![1.0]);
    assert_eq!(m.sigmas[0], 1.0);
    assert_eq!(m.means[4], vec![41.0]);

    let mut reversed = pairs_fixture();
    reversed.records.reverse();
    assert_eq!(fit_confidence(&reversed).unwrap(), m);

    let mut same = pairs_fixture();
    same.records[3].embedding = vec![10.0];
    let m2 = fit_confidence(&same).unwrap();
    assert_eq!(m2.means[1], vec![10.0]);
    assert_eq!(m2.sigmas[1], SIGMA_FLOOR);

    let mut short = pairs_fixture();
    short.records.retain(|r| !(r.true_class == GlitchClass::LowRes && r.view_id == 1));
    let err = fit_confidence(&short).unwrap_err();
    assert!(err.to_string().contains("low_res"), "{err}");
}

#[test]
fn confidence_score_examples() {
    let m = fit_confidence(&pairs_fixture()).unwrap();
    assert_eq!(confidence_score(&m, &[1.0], GlitchClass::Normal).unwrap(), 1.0);
    assert!((confidence_score(&m, &[2.0], GlitchClass::Normal).unwrap() - (-0.5f64).exp()).abs() < 1e-12);
    let mut last = 1.0;
    for d in 1..20 {
        let s = confidence_score(&m, &[1.0 + d as f32 * 0.25], GlitchClass::Normal).unwrap();
        assert!(s < last);
        last = s;
    }
    assert!(matches!(confidence_score(&m, &[1.0, 2.0], GlitchClass::Normal), Err(DecisionError::Dimension { .. })));
}

fn decision(conf: f64, predicted: GlitchClass, truth: GlitchClass) -> ObjectDecision {
    let mut probabilities = vec![0.0; 5];
    probabilities[predicted.index()] = 1.0;
    ObjectDecision {
        object_id: 0,
        predicted,
        probabilities,
        confidence: Some(conf),
        verdict: verdict_for(predicted, Some(conf), 0.0),
        views_used: 1,
        true_class: Some(truth),
    }
}

#[test]
fn filter_examples() {
    let mut ds: Vec<ObjectDecision> = (0..10).map(|i| decision(0.8 + 0.01 * i as f64, GlitchClass::Missing, GlitchClass::Missing)).collect();
    ds.extend((0..10).map(|i| decision(0.1 + 0.01 * i as f64, GlitchClass::Stretched, GlitchClass::Normal)));
    ds.push(decision(0.05, GlitchClass::Normal, GlitchClass::Normal));

    assert_eq!(filter_predictions(&ds, 0.0).unwrap(), ds);
    assert!(filter_predictions(&ds, 1.0 + 1e-9).is_err());
    assert!(filter_predictions(&ds, -0.1).is_err());

    let f = filter_predictions(&ds, 0.5).unwrap();
    let abstained: Vec<usize> = (0..f.len()).filter(|&i| f[i].verdict == Verdict::AbstainNeedMoreViews).collect();
    assert_eq!(abstained, (10..20).collect::<Vec<_>>());
    assert_eq!(f[20].verdict, Verdict::Pass);

    let all = filter_predictions(&ds, 1.0).unwrap();
    assert!(all[..20].iter().all(|d| d.verdict == Verdict::AbstainNeedMoreViews));

    let before = decision_binary_metrics(&ds);
    let after = decision_binary_metrics(&f);
    assert_eq!(before.false_positive_rate, Some(10.0 / 11.0));
    assert_eq!(after.false_positive_rate, Some(0.0));
    assert_eq!(after.recall, Some(1.0));
}

#[test]
fn filtering_is_monotone_in_tau() {
    let ds: Vec<ObjectDecision> = (0..50)
        .map(|i| {
            let c = GlitchClass::ALL[i % 5];
            decision(((i * 37) % 50) as f64 / 50.0, c, GlitchClass::ALL[(i / 5) % 5])
        })
        .collect();
    let mut prev_flags: Option<Vec<bool>> = None;
    let mut prev_fpr = f64::INFINITY;
    for step in 0..=100 {
        let f = filter_predictions(&ds, step as f64 / 100.0).unwrap();
        let flags: Vec<bool> = f.iter().map(|d| d.verdict == Verdict::FlagGlitch).collect();
        if let Some(p) = &prev_flags {
            assert!(flags.iter().zip(p).all(|(&now, &before)| !now || before));
        }
        let fpr = decision_binary_metrics(&f).false_positive_rate.unwrap();
        assert!(fpr <= prev_fpr);
        prev_fpr = fpr;
        prev_flags = Some(flags);
    }
}

#[test]
fn decide_selects_views_in_order() {
    let a = rec(3, 7, GlitchClass::LowRes, [0.1, 0.1, 0.6, 0.1, 0.1], &[0.0]);
    let b = rec(3, 2, GlitchClass::LowRes, [0.1, 0.6, 0.1, 0.1, 0.1], &[0.0]);
    let c = rec(3, 4, GlitchClass::LowRes, [0.1, 0.1, 0.6, 0.1, 0.1], &[0.0]);
    let d1 = decide_from_predictions(&[&a, &b, &c], 1, None).unwrap();
    assert_eq!(d1.predicted, GlitchClass::Stretched);
    assert_eq!(d1.probabilities, b.probabilities);
    // Views 2 and 4 tie between Stretched and LowRes; the lower index wins.
    let d2 = decide_from_predictions(&[&a, &b, &c], 2, None).unwrap();
    assert_eq!(d2.predicted, GlitchClass::Stretched);
    let d3 = decide_from_predictions(&[&a, &b, &c], 3, None).unwrap();
    assert_eq!(d3.predicted, GlitchClass::LowRes);
    assert_eq!(d3.true_class, Some(GlitchClass::LowRes));

    let same = [&a, &a, &a];
    let x = decide_from_predictions(&same, 3, None).unwrap();
    let y = decide_from_predictions(&same, 1, None).unwrap();
    assert_eq!(x.predicted, y.predicted);
    for (u, v) in x.probabilities.iter().zip(&y.probabilities) {
        assert!((u - v).abs() < 1e-12);
    }

    let other = rec(4, 0, GlitchClass::LowRes, [0.2; 5], &[0.0]);
    assert!(matches!(decide_from_predictions(&[&a, &other], 1, None), Err(DecisionError::MixedObjects(_))));
    assert!(matches!(decide_from_predictions(&[&a], 2, None), Err(DecisionError::BadK { .. })));
}

#[test]
fn classify_object_and_sweep_on_a_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_corpus(&CorpusConfig::new(5, 5, (32, 32), PlaceholderStyle::Pattern, 4), dir.path(), false).unwrap();
    let cfg = ClassifierConfig::shuffle(0.5, 32);
    let net = Classifier::new(cfg.clone()).unwrap();
    let params = init_model(&cfg, 0).unwrap();
    let data = SplitData::load(&m, Split::Train).unwrap();

    let frames: Vec<ObjectFrame> = (0..data.len())
        .filter(|&i| data.object_ids[i] == 2)
        .map(|i| ObjectFrame { object_id: 2, view_id: data.view_ids[i], rgb: data.frame(i).to_vec() })
        .rev()
        .collect();
    let d = classify_object(&net, &params, &frames, 1, None).unwrap();
    let first = frames.iter().min_by_key(|f| f.view_id).unwrap();
    let single = net.forward(&params, &frames_to_tensor(&[first.rgb.as_slice()], (32, 32))).unwrap();
    assert_eq!(d.probabilities, single.probabilities.data().to_vec());
    assert_eq!(d.views_used, 1);

    let units = unit_predictions(&net, &params, &m, Split::Train, 3).unwrap();
    assert_eq!(units.len(), 25);
    for u in &units {
        let ids: Vec<u32> = u.views.iter().map(|r| r.view_id).collect();
        let c = u.class.index() as u32;
        assert_eq!(ids, vec![c, 5 + c, 10 + c]);
    }
    let table = aggregation_sweep(&units, &[1, 3], None).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.to_markdown().contains("| # Images | 1 | 3 |"));
    assert!(aggregation_sweep(&units, &[4], None).is_err());
}
