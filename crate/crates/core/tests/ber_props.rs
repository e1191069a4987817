mod common;

use proptest::prelude::*;

use vsdp::ber::{
    csv_string, emit_csv, emit_plot, fmt_g6, parse_csv, render_svg, run_sweep, BerRecord, Detector, SweepConfig,
    CSV_HEADER,
};
use vsdp::uwb::ChannelPreset;

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn record(preset: &str, ebn0_db: f64, detector: Detector, errors: u64) -> BerRecord {
    BerRecord {
        preset: preset.into(),
        ebn0_db,
        detector,
        bits: 1000,
        errors,
        ber: errors as f64 / 1000.0,
        iters: if detector == Detector::Sdp { 12.5 } else { 0.0 },
        gap: 0.0,
        seed: 1,
        failures: 0,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-6 * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csv_round_trips(
        rows in prop::collection::vec(
            (0usize..3, -5.0f64..30.0, any::<bool>(), 1u64..1_000_000, 0.0f64..1.0, 0.0f64..300.0, 0.0f64..1.0, any::<u64>()),
            0..12,
        )
    ) {
        let records: Vec<BerRecord> = rows
            .iter()
            .map(|&(p, e, sdp, bits, frac, iters, gap, seed)| {
                let errors = (frac * bits as f64) as u64;
                BerRecord {
                    preset: ChannelPreset::ALL[p].name().into(),
                    ebn0_db: e,
                    detector: if sdp { Detector::Sdp } else { Detector::Ml },
                    bits,
                    errors,
                    ber: errors as f64 / bits as f64,
                    iters,
                    gap,
                    seed,
                    failures: 0,
                }
            })
            .collect();
        let text = csv_string(&records);
        prop_assert_eq!(text.lines().count(), records.len() + 1);
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            prop_assert_eq!(&a.preset, &b.preset);
            prop_assert_eq!(a.detector, b.detector);
            prop_assert_eq!((a.bits, a.errors, a.seed), (b.bits, b.errors, b.seed));
            prop_assert!(close(a.ebn0_db, b.ebn0_db) && close(a.ber, b.ber));
            prop_assert!(close(a.iters, b.iters) && close(a.gap, b.gap));
        }
        prop_assert_eq!(csv_string(&back), text);
    }
}

#[test]
fn csv_line_counts() {
    assert_eq!(csv_string(&[]), format!("{CSV_HEADER}\n"));
    let one = csv_string(&[record("cm1", 12.0, Detector::Sdp, 3)]);
    assert_eq!(one.lines().count(), 2);
    assert_eq!(one.lines().nth(1).unwrap(), "cm1,12,sdp,1000,3,0.003,12.5,0,1");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_csv(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
}

#[test]
fn six_significant_digits() {
    for (x, want) in [
        (0.0, "0"),
        (1.0 / 3.0, "0.333333"),
        (123456789.0, "1.23457e+08"),
        (1.5e-5, "1.5e-05"),
        (2.0e-4, "0.0002"),
        (-7.25, "-7.25"),
        (999999.5, "1e+06"),
    ] {
        assert_eq!(fmt_g6(x), want, "{x}");
    }
}

#[test]
fn malformed_csv_is_rejected() {
    assert!(parse_csv("").is_err());
    assert!(parse_csv("a,b\n").is_err());
    let body = |row: &str| format!("{CSV_HEADER}\n{row}\n");
    assert!(parse_csv(&body("cm1,10,sdp,100,3,0.03,1,0")).is_err());
    assert!(parse_csv(&body("cm1,10,zf,100,3,0.03,1,0,1")).is_err());
    assert!(parse_csv(&body("cm1,10,sdp,100,300,3,1,0,1")).is_err());
    assert!(parse_csv(&body("cm1,ten,sdp,100,3,0.03,1,0,1")).is_err());
}

#[test]
fn plot_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("small.svg");
    emit_plot(fixture("small.csv"), &out).unwrap();
    let got = std::fs::read_to_string(&out).unwrap();
    let want = std::fs::read_to_string(fixture("small.svg")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn two_point_series_is_one_polyline() {
    let svg = render_svg(&[record("cm6", 10.0, Detector::Sdp, 20), record("cm6", 14.0, Detector::Sdp, 2)]);
    assert_eq!(svg.matches("<polyline").count(), 1);
    let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split_whitespace().count(), 2);
    assert!(svg.contains(">Eb/N0 (dB)</text>"));
    assert!(svg.contains(">BER</text>"));
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("BER = 0"));
}

#[test]
fn zero_ber_is_drawn_at_the_floor() {
    let svg = render_svg(&[record("cm1", 10.0, Detector::Ml, 5), record("cm1", 20.0, Detector::Ml, 0)]);
    assert!(svg.contains("BER = 0, drawn at 1e-6"));
    assert_eq!(svg.matches("<path").count(), 1);
    // The floor is the lowest decade on the axis, i.e. the bottom edge.
    assert!(svg.contains(">1e-6</text>"));
    assert!(!svg.contains(">1e-7</text>"));
    let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let ys: Vec<f64> = pts.split_whitespace().map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((ys[1] - 390.0).abs() < 1e-9, "floor drawn at y = {}", ys[1]);
}

#[test]
fn noiseless_single_tap_trial_has_no_errors() {
    let mut cfg = SweepConfig::default();
    cfg.presets = vec![ChannelPreset::SingleTap];
    cfg.ebn0_db = vec![f64::INFINITY];
    cfg.trials = 1;
    cfg.gap_tol = Some(1e-9);
    cfg.max_iter = 30_000;
    let recs = run_sweep(&cfg).unwrap();
    assert_eq!(recs.len(), 2);
    for r in &recs {
        assert_eq!((r.bits, r.errors, r.ber, r.failures), (10, 0, 0.0, 0), "{r:?}");
    }
}

#[test]
fn sweep_is_deterministic_across_runs_and_pools() {
    let cfg = SweepConfig::load(fixture("tiny_sweep.conf")).unwrap();
    assert_eq!(cfg.block.nb, 4);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        csv_string(&pool.install(|| run_sweep(&cfg).unwrap()))
    };
    let first = run(1);
    assert_eq!(first, run(1));
    assert_eq!(first, run(3));
    let recs = parse_csv(&first).unwrap();
    assert_eq!(recs.len(), 4);
    for r in &recs {
        assert_eq!(r.bits, 280);
        assert!(r.errors <= r.bits);
        assert!(close(r.ber, r.errors as f64 / r.bits as f64));
    }
    // Sorted by preset, then Eb/N0, then detector.
    let keys: Vec<(f64, Detector)> = recs.iter().map(|r| (r.ebn0_db, r.detector)).collect();
    assert_eq!(keys, vec![(6.0, Detector::Sdp), (6.0, Detector::Ml), (14.0, Detector::Sdp), (14.0, Detector::Ml)]);

    let mut other = cfg.clone();
    other.seed = 4;
    assert_ne!(csv_string(&run_sweep(&other).unwrap()), first);
}

#[test]
fn cells_stop_once_every_detector_has_enough_errors() {
    let mut cfg = SweepConfig::default();
    cfg.block.nb = 4;
    cfg.ebn0_db = vec![0.0];
    cfg.trials = 10_000;
    cfg.max_errors = 5;
    cfg.detectors = vec![Detector::Ml];
    let recs = run_sweep(&cfg).unwrap();
    let r = &recs[0];
    assert!(r.errors >= 5);
    assert!(r.bits < 10_000 * 4);
    assert_eq!(r.bits % (64 * 4), 0);
}

#[test]
fn config_errors_carry_line_numbers() {
    for (text, line) in [
        ("nb = 4\nbogus = 1\n", 2),
        ("trials = 10\n\n# c\ntrials = 20\n", 4),
        ("ebn0_db = 1, x\n", 1),
        ("no equals sign\n", 1),
    ] {
        match SweepConfig::parse(text) {
            Err(vsdp::Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    for bad in ["trials = 0", "ebn0_db = ", "detectors = ", "presets = cm9", "fs_ghz = 20"] {
        assert!(SweepConfig::parse(bad).is_err(), "{bad}");
    }
}
