use super::*;
use crate::error::Error;
use crate::geometry::ProbabilityMap;
use crate::harness::instances::{random_evidence, random_training_frame, InstanceSizes};
use crate::labels::LabelSpace;
use crate::potentials::ModelParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space() -> LabelSpace {
    LabelSpace::synthetic(3, 4, 3).unwrap()
}

fn records(seed: u64, n: usize) -> Vec<FrameRecord> {
    let dims = space().dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                let f = random_training_frame(&mut rng, dims);
                FrameRecord {
                    frame_id: format!("f{i}"),
                    evidence: f.evidence,
                    truth: Some(f.truth),
                }
            } else {
                FrameRecord {
                    frame_id: format!("f{i}"),
                    evidence: random_evidence(&mut rng, dims, &InstanceSizes::default()),
                    truth: None,
                }
            }
        })
        .collect()
}

fn encode(records: &[FrameRecord]) -> Vec<u8> {
    let mut w = FrameWriter::new(Vec::new(), &space()).unwrap();
    for r in records {
        w.write(r).unwrap();
    }
    w.finish().unwrap()
}

#[test]
fn frames_round_trip_bit_exact() {
    let rs = records(1, 40);
    let bytes = encode(&rs);
    let back = parse_frames(&bytes, &space()).unwrap();
    assert_eq!(back, rs);
    // also through a file
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frames.jsonl");
    write_frames(&path, &space(), &rs).unwrap();
    assert_eq!(read_frames(&path, &space()).unwrap(), rs);
}

#[test]
fn awkward_floats_survive() {
    let mut rs = records(2, 1);
    rs[0].evidence.phi_a = vec![0.1 + 0.2, f64::MIN_POSITIVE, 1.0 / 3.0];
    let back = parse_frames(&encode(&rs), &space()).unwrap();
    for (a, b) in back[0].evidence.phi_a.iter().zip(&rs[0].evidence.phi_a) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn empty_input_is_empty_stream() {
    assert!(parse_frames(b"", &space()).unwrap().is_empty());
    assert!(parse_frames(b"\n\n", &space()).unwrap().is_empty());
    let header_only = encode(&[]);
    assert!(parse_frames(&header_only, &space()).unwrap().is_empty());
}

#[test]
fn wrong_phi_g_length_names_field_and_line() {
    let rs = records(3, 4);
    let mut text = String::from_utf8(encode(&rs)).unwrap();
    // corrupt record 3 (line 4): make phi_g one element shorter
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    let side = if v["left"].as_array().unwrap().is_empty() {
        "right"
    } else {
        "left"
    };
    v[side][0]["phi_g"].as_array_mut().unwrap().pop();
    lines[3] = v.to_string();
    text = lines.join("\n");
    match parse_frames(text.as_bytes(), &space()) {
        Err(Error::Schema { line, field, .. }) => {
            assert_eq!(line, 4);
            assert_eq!(field, format!("{side}[0].phi_g"));
        }
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn malformed_json_reports_line() {
    let mut bytes = encode(&records(4, 2));
    bytes.extend_from_slice(b"{not json}\n");
    match parse_frames(&bytes, &space()) {
        Err(Error::Schema { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn fingerprint_mismatch_is_rejected() {
    let bytes = encode(&records(5, 2));
    let other = LabelSpace::synthetic(3, 4, 4).unwrap();
    assert!(matches!(
        FrameReader::new(&bytes[..], &other),
        Err(Error::Fingerprint { .. })
    ));
}

#[test]
fn params_round_trip() {
    let gtea = LabelSpace::gtea();
    let zero = ModelParams::zeros(gtea.dims());
    let text = params_to_string(&zero, &gtea, &ParamsMeta::default()).unwrap();
    assert_eq!(params_from_str(&text, &gtea).unwrap().0, zero);

    let s = space();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut p = ModelParams::zeros(s.dims());
    for v in p.values_mut() {
        *v = rng.random_range(-1e3..1e3) * rng.random_range(0.0..1.0f64).powi(7);
    }
    let meta = ParamsMeta {
        mode: Some("full".into()),
        objective: Some(-123.456),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    write_params(&path, &p, &s, &meta).unwrap();
    let (q, m) = read_params(&path, &s).unwrap();
    assert_eq!(m, meta);
    let max_diff = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert_eq!(max_diff, 0.0);
}

#[test]
fn params_under_other_taxonomy_fail() {
    let gtea = LabelSpace::gtea();
    let twelve = LabelSpace::new(
        gtea.actions().to_vec(),
        gtea.grasps()[..13].to_vec(),
        gtea.attributes().to_vec(),
    )
    .unwrap();
    assert_eq!(twelve.n_grasps(), 12);
    let text = params_to_string(
        &ModelParams::zeros(gtea.dims()),
        &gtea,
        &ParamsMeta::default(),
    )
    .unwrap();
    assert!(matches!(
        params_from_str(&text, &twelve),
        Err(Error::Fingerprint { .. })
    ));
    assert!(params_to_string(
        &ModelParams::zeros(gtea.dims()),
        &twelve,
        &ParamsMeta::default()
    )
    .is_err());
}

#[test]
fn params_shape_errors() {
    let s = space();
    let text = params_to_string(&ModelParams::zeros(s.dims()), &s, &ParamsMeta::default()).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["blocks"]["xi"]["values"].as_array_mut().unwrap().pop();
    assert!(params_from_str(&v.to_string(), &s).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["blocks"].as_object_mut().unwrap().remove("beta");
    assert!(params_from_str(&v.to_string(), &s).is_err());
}

#[test]
fn pgm_round_trip() {
    let values: Vec<f64> = (0..12).map(|i| (i * 20) as f64 / 255.0).collect();
    let map = ProbabilityMap::new(4, 3, values).unwrap();
    let bytes = encode_pgm(&map, 255).unwrap();
    assert_eq!(parse_pgm(&bytes).unwrap(), map);

    let values: Vec<f64> = (0..6).map(|i| (i * 10_000) as f64 / 65535.0).collect();
    let map = ProbabilityMap::new(3, 2, values).unwrap();
    let bytes = encode_pgm(&map, 65535).unwrap();
    assert_eq!(parse_pgm(&bytes).unwrap(), map);
}

#[test]
fn pgm_header_comments_and_errors() {
    let bytes = b"P5\n# a comment\n2 1\n# another\n255\n\x00\xff";
    let map = parse_pgm(bytes).unwrap();
    assert_eq!(map.values(), &[0.0, 1.0]);
    for bad in [
        &b"P6\n2 1\n255\n\x00\x00"[..],
        b"P5\n2 1\n255\n\x00",
        b"P5\n0 1\n255\n",
        b"P5\n2 1\n0\n\x00\x00",
        b"P5\n2 1\n10\n\x00\x0b",
        b"P5 2",
    ] {
        assert!(matches!(parse_pgm(bad), Err(Error::Pgm(_))), "{bad:?}");
    }
}

#[test]
fn manifest_validation() {
    let ok = r#"{"schema_version":1,"label_space":"l.toml","frame_files":["a.jsonl"],
        "splits":{"train":["x","y"],"test":["z"]}}"#;
    assert!(Manifest::parse(ok).is_ok());
    let overlap = r#"{"schema_version":1,"label_space":"l.toml","frame_files":["a.jsonl"],
        "splits":{"train":["x","y"],"test":["y"]}}"#;
    assert!(matches!(Manifest::parse(overlap), Err(Error::Manifest(_))));
    let none = r#"{"schema_version":1,"label_space":"l.toml","frame_files":[]}"#;
    assert!(Manifest::parse(none).is_err());
    let unknown = r#"{"schema_version":1,"label_space":"l.toml","frame_files":["a"],"x":1}"#;
    assert!(Manifest::parse(unknown).is_err());
}

#[test]
fn dataset_open_and_splits() {
    let dir = tempfile::tempdir().unwrap();
    let s = space();
    std::fs::write(dir.path().join("labels.toml"), s.to_toml_string()).unwrap();
    let rs = records(7, 6);
    write_frames(dir.path().join("frames.jsonl"), &s, &rs).unwrap();
    let manifest = Manifest {
        schema_version: 1,
        label_space: "labels.toml".into(),
        frame_files: vec!["frames.jsonl".into()],
        probability_maps: None,
        splits: Splits {
            train: vec!["f0".into(), "f2".into(), "f4".into()],
            test: vec!["f1".into()],
        },
    };
    let path = dir.path().join("manifest.json");
    std::fs::write(&path, manifest.to_string_pretty().unwrap()).unwrap();
    let ds = Dataset::open(&path).unwrap();
    let (train, test) = ds.load_splits().unwrap();
    assert_eq!(train, vec![rs[0].clone(), rs[2].clone(), rs[4].clone()]);
    assert_eq!(test, vec![rs[1].clone()]);

    let mut missing = manifest.clone();
    missing.frame_files.push("nope.jsonl".into());
    std::fs::write(&path, missing.to_string_pretty().unwrap()).unwrap();
    assert!(matches!(Dataset::open(&path), Err(Error::MissingFile(_))));

    let mut unknown_id = manifest;
    unknown_id.splits.test.push("ghost".into());
    std::fs::write(&path, unknown_id.to_string_pretty().unwrap()).unwrap();
    assert!(Dataset::open(&path).unwrap().load_splits().is_err());
}

#[test]
fn accuracy_tables() {
    let s = space();
    let dir = tempfile::tempdir().unwrap();
    let mut perfect = Confusion::new("grasp", s.grasps());
    for c in 1..=4 {
        for _ in 0..c {
            perfect.add(c, c);
        }
    }
    for c in 1..=4 {
        assert_eq!(perfect.class_accuracy(c), Some(1.0));
    }
    assert_eq!(perfect.overall(), Some(1.0));

    // class 2 always wrong
    let mut c = Confusion::new("grasp", s.grasps());
    let support = [0, 3, 2, 4, 1];
    for (class, &n) in support.iter().enumerate() {
        for _ in 0..n {
            c.add(class, if class == 2 { 1 } else { class });
        }
    }
    assert_eq!(c.class_accuracy(2), Some(0.0));
    assert_eq!(c.class_accuracy(0), None);
    let weighted: f64 = (1..=4)
        .map(|k| c.class_accuracy(k).unwrap() * support[k] as f64)
        .sum::<f64>()
        / 10.0;
    assert_eq!(c.overall(), Some(weighted));

    let path = dir.path().join("acc.csv");
    write_accuracy_csv(&path, &c).unwrap();
    let rows = read_accuracy_csv(&path).unwrap();
    assert_eq!(rows.last().unwrap(), &("Overall".to_string(), 8, 10));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("g02,0,2,0\n"));
    write_confusion_csv(dir.path().join("conf.csv"), &c).unwrap();
    write_context_tables(
        dir.path(),
        &ModelParams::zeros(s.dims()),
        &s,
        crate::learning::ReduceMode::Sum,
    )
    .unwrap();
    assert!(dir.path().join("context_action-grasp_sum.csv").exists());
}

/// Mutations of a valid record, each tagged with whether it must be
/// rejected.
fn mutate(record: &mut FrameRecord, kind: u8, value: f64) -> bool {
    let hand = record
        .evidence
        .left
        .first_mut()
        .or(record.evidence.right.first_mut());
    match (kind, hand) {
        (0, _) => {
            record.evidence.phi_a.push(value);
            true
        }
        (1, _) => {
            record.evidence.phi_a[0] = value;
            false
        }
        (2, Some(h)) => {
            h.phi_h[0] = value.abs().fract();
            false
        }
        (3, Some(h)) => {
            h.phi_h[1] = 1.0 + value.abs() + 1e-9;
            true
        }
        (4, Some(h)) => {
            h.bbox.w = -value.abs();
            true
        }
        (5, Some(h)) => {
            h.phi_g.pop();
            true
        }
        (6, Some(h)) => {
            h.phi_g[0] = value;
            false
        }
        (7, Some(h)) if !h.objects.is_empty() => {
            h.objects[0].phi_o.push(value);
            true
        }
        (8, Some(h)) if !h.objects.is_empty() => {
            h.offset = None;
            true
        }
        (9, _) => {
            record.frame_id.clear();
            true
        }
        (10, _) => {
            if let Some(t) = &mut record.truth {
                t.action = 99;
                true
            } else {
                false
            }
        }
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn validation_rejects_exactly_invalid_records(
        seed in 0u64..1000,
        kind in 0u8..12,
        value in -1e6f64..1e6,
    ) {
        let mut rec = records(seed, 1).pop().unwrap();
        let s = space();
        prop_assert!(rec.validate(s.dims()).is_ok());
        let must_fail = mutate(&mut rec, kind, value);
        prop_assert_eq!(rec.validate(s.dims()).is_err(), must_fail);
        // reading applies the same validation
        let line = serde_json::to_string(&rec).unwrap();
        let header = String::from_utf8(encode(&[])).unwrap();
        let text = format!("{header}{line}\n");
        prop_assert_eq!(parse_frames(text.as_bytes(), &s).is_err(), must_fail);
    }

    #[test]
    fn frames_round_trip_any_seed(seed in 0u64..10_000) {
        let rs = records(seed, 3);
        prop_assert_eq!(parse_frames(&encode(&rs), &space()).unwrap(), rs);
    }
}
