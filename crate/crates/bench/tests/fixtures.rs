use diskmc_bench::{explored, synthetic_stream};
use diskmc_core::corpus::DIE;
use diskmc_core::store::{decode_stream, IsqRecord};
use diskmc_core::{analyze, ConvergenceConfig, FileKind, PartitionId};

#[test]
fn synthetic_stream_decodes_to_the_reported_record_count() {
    let (bytes, records) = synthetic_stream(1000);
    let decoded = decode_stream(&bytes).unwrap();
    assert_eq!(decoded.len() as u64, records);
    let states = decoded.iter().filter(|r| matches!(r, IsqRecord::StateEnd { .. })).count();
    assert_eq!(states, 1000);
}

#[test]
fn explored_fixture_is_analyzable() {
    let e = explored(&DIE, "six", true);
    assert!(e.store.path(PartitionId(1), FileKind::Matrix).exists());
    let r = analyze(&e.store, &e.compiled.property, &ConvergenceConfig::with_epsilon(1e-10)).unwrap();
    assert!((r.value - 1.0 / 6.0).abs() < 1e-8, "{}", r.value);
}
