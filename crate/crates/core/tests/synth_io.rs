use dscofs::cluster::LabelVector;
use dscofs::io::{csv_string, load_csv, load_report, parse_csv, save_csv, save_report, DatasetFile, Report};
use dscofs::model::Mat;
use dscofs::rng::rng_for;
use dscofs::synth::{embed_with_noise, SyntheticKind, INFORMATIVE, PLANTED_FEATURES};
use dscofs::{center_columns, run, SolverConfig};
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn planted_shapes_have_documented_sizes() {
    for kind in SyntheticKind::ALL {
        let ds = kind.generate(1000, &mut rng_for(1, 1)).unwrap();
        assert_eq!(ds.data.d(), PLANTED_FEATURES);
        assert_eq!(ds.data.n(), 1000);
        assert_eq!(ds.labels.classes(), kind.classes());
        let per = 1000 / kind.classes();
        for c in 0..kind.classes() {
            assert_eq!(ds.labels.as_slice().iter().filter(|&&l| l == c).count(), per);
        }
        assert_eq!(ds.informative, [3, 4]);
        let again = kind.generate(1000, &mut rng_for(1, 1)).unwrap();
        assert_eq!(again, ds);
    }
}

#[test]
fn geometry_is_copied_into_the_informative_rows() {
    let shape = SyntheticKind::Banana.generate_shape(200, 0.05, &mut rng_for(2, 1)).unwrap();
    let ds = embed_with_noise(&shape, &mut rng_for(2, 2)).unwrap();
    for (j, p) in shape.points.iter().enumerate() {
        assert_eq!(ds.data.values()[(INFORMATIVE[0], j)], p[0]);
        assert_eq!(ds.data.values()[(INFORMATIVE[1], j)], p[1]);
    }
}

fn moments(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    (mean, row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
}

#[test]
fn noise_moments_match_the_geometry() {
    for kind in SyntheticKind::ALL {
        let ds = kind.generate(1000, &mut rng_for(3, 1)).unwrap();
        let v = ds.data.values();
        let row = |i: usize| v.row(i).iter().cloned().collect::<Vec<_>>();
        let (m0, v0) = moments(&row(3));
        let (m1, v1) = moments(&row(4));
        let (mean, var) = ((m0 + m1) / 2.0, (v0 + v1) / 2.0);
        let n = 1000.0f64;
        for i in (0..9).filter(|i| !INFORMATIVE.contains(i)) {
            let (mi, vi) = moments(&row(i));
            assert!((mi - mean).abs() <= 5.0 * (var / n).sqrt(), "{kind:?} row {i} mean");
            assert!((vi - var).abs() <= 5.0 * var * (2.0 / (n - 1.0)).sqrt(), "{kind:?} row {i} var");
        }
    }
}

#[test]
fn noise_columns_are_exchangeable() {
    let ds = SyntheticKind::TwoSpiral.generate(1000, &mut rng_for(4, 1)).unwrap();
    let v = ds.data.values();
    let noise: Vec<(f64, f64)> = (0..9)
        .filter(|i| !INFORMATIVE.contains(i))
        .map(|i| moments(&v.row(i).iter().cloned().collect::<Vec<_>>()))
        .collect();
    // z ≈ 2.576 at α = 0.01, two-sample mean test with a Bonferroni-free pairwise check
    for a in &noise {
        for b in &noise {
            let se = ((a.1 + b.1) / 1000.0).sqrt();
            assert!((a.0 - b.0).abs() / se <= 3.5);
        }
    }
}

#[test]
fn shapes_without_jitter_lie_on_their_curves() {
    for kind in SyntheticKind::ALL {
        let shape = kind.generate_shape(400, 0.0, &mut rng_for(5, 1)).unwrap();
        for (p, &c) in shape.points.iter().zip(&shape.labels) {
            let resid = match kind {
                SyntheticKind::Dartboard => (p[0].hypot(p[1]) - dscofs::synth::ring_radius(c)).abs(),
                SyntheticKind::TwoSpiral => {
                    let q = if c == 1 { [-p[0], -p[1]] } else { *p };
                    let rad = q[0].hypot(q[1]);
                    let t = rad * 3.0 * std::f64::consts::PI;
                    let e = dscofs::synth::spiral_point(t, 0);
                    (e[0] - q[0]).hypot(e[1] - q[1])
                }
                SyntheticKind::Banana => {
                    let q = if c == 1 { [1.0 - p[0], 0.5 - p[1]] } else { *p };
                    (q[0].hypot(q[1]) - 1.0).abs()
                }
            };
            assert!(resid <= 1e-12, "{kind:?} {p:?} {resid}");
        }
    }
    let rs: Vec<f64> = (0..4).map(dscofs::synth::ring_radius).collect();
    assert!(rs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn unknown_names_are_rejected() {
    assert!("2spiral".parse::<SyntheticKind>().is_ok());
    assert!("spiral3".parse::<SyntheticKind>().is_err());
}

#[test]
fn csv_round_trip_is_exact() {
    let mut r = rng_for(6, 1);
    let data = Mat::from_fn(4, 25, |_, _| r.sample::<f64, _>(StandardNormal) * 10f64.powi(r.random_range(-8..8)));
    let labels = LabelVector::encode(&(0..25).map(|j| j % 3).collect::<Vec<_>>());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    save_csv(&data, Some(&labels), &path).unwrap();
    let (back, lab) = load_csv(&DatasetFile::new(&path).require_labels()).unwrap();
    assert_eq!(back.values(), &data);
    assert_eq!(lab.unwrap(), labels);
    let text = csv_string(&data, None);
    let (plain, none) = parse_csv(&text, &DatasetFile::new("x")).unwrap();
    assert_eq!(plain.values(), &data);
    assert!(none.is_none());
}

#[test]
fn labels_are_encoded_by_first_occurrence() {
    let (_, labels) = parse_csv("a,label\n1,z\n2,b\n3,z\n4,q\n", &DatasetFile::new("x")).unwrap();
    assert_eq!(labels.unwrap().as_slice(), &[0, 1, 0, 2]);
}

#[test]
fn reports_round_trip() {
    let ds = SyntheticKind::Banana.generate(60, &mut rng_for(7, 1)).unwrap();
    let a = center_columns(ds.data.values()).unwrap();
    let res = run(&a, &SolverConfig::new(2, 2)).unwrap();
    let report = Report::new("select", 0, res);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    save_report(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"objective_trace\""));
    let back: Report<dscofs::SolveResult> = load_report(&path).unwrap();
    let mut expected = report.clone();
    expected.body.wall_time = 0.0;
    assert_eq!(back, expected);
    assert!(save_report(&report, &dir.path().join("missing/\0/r.json")).is_err());
}
