use measurefirst::{csvio, edf, eegr, weights};
use measurefirst_core::neural::{Backbone, BackboneConfig};
use measurefirst_core::signal::synth::{synthesize, EventSpec, NoiseSpec, SynthSpec, Waveform};
use measurefirst_core::signal::{MontageGraph, Recording, Stream};
use proptest::prelude::*;
use tempfile::tempdir;

fn f32_channels(n_ch: usize, max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_len).prop_flat_map(move |len| {
        prop::collection::vec(prop::collection::vec((-1e4f32..1e4f32).prop_map(f64::from), len), n_ch)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eegr_stream_round_trip(ch in (1usize..6).prop_flat_map(|c| f32_channels(c, 300)), rate in 1.0..5000.0f64) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.eegr");
        let s = Stream::new(rate, ch).unwrap();
        eegr::write_stream(&path, &s).unwrap();
        prop_assert_eq!(std::fs::metadata(&path).unwrap().len(), eegr::HEADER_LEN + 4 * (s.n_channels() * s.len()) as u64);
        let back = eegr::read_stream(&path).unwrap();
        prop_assert_eq!(back, s);
    }
}

fn small_recording() -> Recording {
    let mut spec = SynthSpec::new(20.0, 128.0, 4, 9);
    spec.high_rate_hz = Some(512.0);
    spec.noise = NoiseSpec { white_sigma_uv: 3.0, pink_fraction: 0.5 };
    spec.events.push(EventSpec {
        onset_s: 5.0,
        duration_s: 4.0,
        frequency_hz: 6.0,
        amplitude_uv: 40.0,
        channels: vec![0, 1],
        waveform: Waveform::SpikeWave,
    });
    let (rec, _) = synthesize(&spec).unwrap();
    // Quantize once so the f32 container is lossless for the comparison.
    let q = |s: &Stream| {
        Stream::new(s.rate_hz(), s.channels().iter().map(|c| c.iter().map(|&v| v as f32 as f64).collect()).collect()).unwrap()
    };
    Recording::new(
        rec.channel_names().to_vec(),
        q(rec.low()),
        rec.high().map(q),
        0.0,
        rec.montage().clone(),
    )
    .unwrap()
    .with_note("fixture")
}

#[test]
fn sidecar_round_trip_is_lossless() {
    let dir = tempdir().unwrap();
    let rec = small_recording();
    let side = eegr::write_recording(dir.path(), "r", &rec).unwrap();
    assert!(dir.path().join("r.low.eegr").is_file() && dir.path().join("r.high.eegr").is_file());
    assert_eq!(eegr::read_recording(&side).unwrap(), rec);
}

#[test]
fn corrupt_streams_are_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("s.eegr");
    eegr::write_stream(&path, &Stream::new(100.0, vec![vec![1.0; 10]]).unwrap()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(eegr::read_stream(&path).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(eegr::read_stream(&path).is_err());
    std::fs::write(&path, &bytes[..10]).unwrap();
    assert!(eegr::read_stream(&path).is_err());
}

#[test]
fn sidecar_rejects_unknown_keys() {
    let dir = tempdir().unwrap();
    let side = eegr::write_recording(dir.path(), "r", &small_recording()).unwrap();
    let text = std::fs::read_to_string(&side).unwrap().replacen('{', "{\"extra\": 1,", 1);
    std::fs::write(&side, text).unwrap();
    assert!(eegr::read_recording(&side).is_err());
}

#[test]
fn csv_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let names = vec!["Fp1".to_string(), "Fp2".to_string(), "Cz".to_string()];
    let ch: Vec<Vec<f64>> = (0..3).map(|c| (0..500).map(|i| ((i * (c + 2)) as f64 * 0.1).sin() * 20.0).collect()).collect();
    let rec = Recording::new(names.clone(), Stream::new(250.0, ch).unwrap(), None, 0.0, MontageGraph::from_channel_names(&names)).unwrap();
    csvio::write_csv(&path, &rec).unwrap();
    let back = csvio::read_csv(&path).unwrap();
    assert_eq!(back.channel_names(), rec.channel_names());
    assert!((back.low().rate_hz() - 250.0).abs() < 1e-6);
    for (a, b) in back.low().channels().iter().zip(rec.low().channels()) {
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9));
    }
}

#[test]
fn csv_rejects_jittered_time() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("j.csv");
    std::fs::write(&path, "time,C3\n0.0,1\n0.01,2\n0.025,3\n0.03,4\n").unwrap();
    assert!(csvio::read_csv(&path).is_err());
}

#[test]
fn edf_fixture_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("r.edf");
    let ch: Vec<Vec<f64>> = (0..2).map(|c| (0..512).map(|i| ((i + c * 7) as f64 * 0.05).sin() * 150.0).collect()).collect();
    edf::write_edf(&path, &["C3", "C4"], 128, &ch).unwrap();
    let rec = edf::read_edf(&path).unwrap();
    assert_eq!(rec.channel_names(), ["C3", "C4"]);
    assert_eq!(rec.low().rate_hz(), 128.0);
    for (a, b) in rec.low().channels().iter().zip(&ch) {
        assert_eq!(a.len(), b.len());
        // 16-bit samples at 0.1 µV resolution.
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 0.05 + 1e-9));
    }
}

#[test]
fn weight_file_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("w.mfw");
    let cfg = BackboneConfig::toy();
    let net = Backbone::random(&cfg, 5).unwrap();
    let store = net.to_store();
    weights::write_weights(&path, &store).unwrap();
    let back = weights::read_weights(&path).unwrap();
    assert_eq!(back, store);
    assert_eq!(Backbone::from_store(&cfg, &back).unwrap().to_store(), store);
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"MFW1\n"));
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(weights::read_weights(&path).is_err());
}
