use rand::Rng;

use super::*;
use crate::seed::rng_for;

fn record(t: GlitchClass, p: GlitchClass) -> PredictionRecord {
    let mut probabilities = vec![0.0; 5];
    probabilities[p.index()] = 1.0;
    PredictionRecord {
        sample_id: String::new(),
        object_id: 0,
        view_id: 0,
        true_class: t,
        predicted: p,
        probabilities,
        embedding: vec![],
    }
}

fn set(pairs: &[(GlitchClass, GlitchClass)]) -> PredictionSet {
    PredictionSet { records: pairs.iter().map(|&(t, p)| record(t, p)).collect() }
}

pub(crate) fn random_set(seed: u64, n: usize) -> PredictionSet {
    let mut rng = rng_for("metrics-test", &[seed]);
    let pairs: Vec<_> = (0..n)
        .map(|_| {
            let t = GlitchClass::ALL[rng.random_range(0..5)];
            let p = if rng.random_bool(0.6) { t } else { GlitchClass::ALL[rng.random_range(0..5)] };
            (t, p)
        })
        .collect();
    set(&pairs)
}

use GlitchClass::*;

#[test]
fn grouping_tables() {
    assert_eq!(group_labels(Stretched, Grouping::Three), 1);
    assert_eq!(group_labels(LowRes, Grouping::Three), 1);
    assert_eq!(group_labels(Missing, Grouping::Three), 2);
    assert_eq!(group_labels(Placeholder, Grouping::Three), 2);
    assert_eq!(group_labels(Normal, Grouping::Binary), 0);
    assert_eq!(group_labels(Placeholder, Grouping::Binary), 1);
    for c in GlitchClass::ALL {
        assert_eq!(group_labels(c, Grouping::Five), c.index());
    }
    assert_eq!(Grouping::Three.group_names()[1], "corrupted");
}

#[test]
fn confusion_examples() {
    let perfect = set(&GlitchClass::ALL.map(|c| (c, c)));
    let m = confusion_matrix(&perfect, Grouping::Five);
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(m.normalized[i].as_ref().unwrap()[j], if i == j { 1.0 } else { 0.0 });
        }
    }
    let m = confusion_matrix(&set(&[(Normal, Normal), (Normal, Stretched)]), Grouping::Five);
    assert_eq!(m.normalized[0].as_ref().unwrap(), &vec![0.5, 0.5, 0.0, 0.0, 0.0]);
    assert_eq!(m.unsupported_rows(), vec![1, 2, 3, 4]);
    assert!(m.to_csv().contains("unsupported"));
}

#[test]
fn binary_examples() {
    let mut pairs = vec![(Normal, Normal); 9];
    pairs.push((Normal, Stretched));
    pairs.extend(vec![(Missing, Placeholder); 9]);
    pairs.push((LowRes, Normal));
    let b = binary_metrics(&set(&pairs));
    assert_eq!(b.false_positive_rate, Some(0.1));
    assert_eq!(b.recall, Some(0.9));
    assert_eq!(b.precision, Some(0.9));

    let perfect = binary_metrics(&set(&GlitchClass::ALL.map(|c| (c, c))));
    assert_eq!((perfect.precision, perfect.recall, perfect.false_positive_rate), (Some(1.0), Some(1.0), Some(0.0)));

    let only_normals = binary_metrics(&set(&[(Normal, Normal)]));
    assert_eq!(only_normals.recall, None);
    assert_eq!(only_normals.precision, None);
}

#[test]
fn report_consistency_on_random_sets() {
    for seed in 0..50 {
        let p = random_set(seed, 200);
        let r = EvalReport::from_predictions(Split::Val, &p);
        let five = &r.confusion[&Grouping::Five];
        assert_eq!(r.accuracy.unwrap(), five.trace() as f64 / five.total() as f64);
        for m in r.confusion.values() {
            for row in m.normalized.iter().flatten() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert!(r.grouped_accuracy[&Grouping::Binary].unwrap() >= r.accuracy.unwrap());
        assert!(r.grouped_accuracy[&Grouping::Three].unwrap() >= r.accuracy.unwrap());
        let glitches = p.records.iter().filter(|x| x.true_class.is_glitch()).count() as f64;
        let exact = p.records.iter().filter(|x| x.true_class.is_glitch() && x.predicted == x.true_class).count() as f64;
        assert!(r.binary.recall.unwrap() >= exact / glitches);
    }
}

#[test]
fn report_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let r = EvalReport::from_predictions(Split::Val, &set(&[(Normal, Normal), (Missing, LowRes)]));
    let written = r.write(&dir.path().join("report.json")).unwrap();
    assert_eq!(written.len(), 7);
    let back: EvalReport = serde_json::from_slice(&fs::read(&written[0]).unwrap()).unwrap();
    assert_eq!(back, r);
    let img = image::open(dir.path().join("report.three.png")).unwrap();
    assert_eq!(img.width(), 120);
}

#[test]
fn argmax_breaks_ties_low() {
    assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    assert_eq!(argmax(&[0.2; 5]), 0);
}
