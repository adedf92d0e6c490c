use proptest::prelude::*;
use spx_core::netsim::{LatencyModel, LatencyTrace, NetsimError, TraceSample};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/synthetic_trace.csv");

#[test]
fn fixture_percentiles_match_reference() {
    let trace = LatencyTrace::load(FIXTURE).unwrap();
    assert_eq!(trace.len(), 1000);
    // nearest-rank values computed outside this crate when the fixture was generated
    let p = trace.percentiles(&[50.0, 90.0, 99.0]).unwrap();
    assert_eq!(p, vec![65.201, 342.346, 1064.394]);
}

#[test]
fn replay_without_wrap_is_lossless_then_exhausts() {
    let trace = LatencyTrace::load(FIXTURE).unwrap();
    let model = LatencyModel::TraceReplay { trace: trace.clone(), wrap: false };
    let replayed: Vec<f64> = (0..1000).map(|i| model.sample_rtt(i).unwrap()).collect();
    assert_eq!(replayed, trace.rtts().collect::<Vec<_>>());
    assert!(matches!(model.sample_rtt(1000), Err(NetsimError::TraceExhausted { .. })));
    let wrapping = LatencyModel::TraceReplay { trace, wrap: true };
    assert_eq!(wrapping.sample_rtt(1000).unwrap(), replayed[0]);
}

#[test]
fn file_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.csv");
    LatencyTrace::load(FIXTURE).unwrap().save(&out).unwrap();
    assert_eq!(std::fs::read(FIXTURE).unwrap(), std::fs::read(out).unwrap());
}

#[test]
fn bad_files_are_rejected() {
    assert!(LatencyTrace::read_csv("seq,rtt_ms\n0,1.0\n".as_bytes()).is_err());
    assert!(LatencyTrace::read_csv("seq,send_unix_ms,rtt_ms\n1,0,5.0\n0,0,5.0\n".as_bytes()).is_err());
    assert!(LatencyTrace::read_csv("seq,send_unix_ms,rtt_ms\n0,0,-1\n".as_bytes()).is_err());
    assert!(LatencyTrace::read_csv("seq,send_unix_ms,rtt_ms\n0,0,abc\n".as_bytes()).is_err());
    assert!(LatencyTrace::load("/nonexistent/trace.csv").is_err());
}

proptest! {
    #[test]
    fn csv_roundtrip(rtts in prop::collection::vec(1u32..10_000_000, 1..200), start in 0u64..2_000_000_000_000) {
        // rtt values with three decimals survive the fixed-precision encoding exactly
        let samples: Vec<TraceSample> = rtts
            .iter()
            .enumerate()
            .map(|(i, &r)| TraceSample { seq: 2 * i as u64, send_unix_ms: start + i as u64, rtt_ms: r as f64 / 1000.0 })
            .collect();
        let trace = LatencyTrace::new(samples).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        prop_assert_eq!(LatencyTrace::read_csv(buf.as_slice()).unwrap(), trace);
    }
}
