mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use diskmc_core::analyze::ExplicitMdp;
use diskmc_core::explore::correct_indices;
use diskmc_core::store::{decode_stream, BranchEntry, FormatError, IsqWriter};
use diskmc_core::{corpus, explore, Error, ExplorationConfig, FileKind, IsqRecord};

fn branch(partition: i32, index: i32) -> IsqRecord {
    IsqRecord::Branch(BranchEntry {
        probability: 0.5,
        reward: 0.0,
        partition,
        index,
    })
}

#[test]
fn coin_splits_into_three_partitions() {
    let c = compile_named(corpus::COIN.source, "p_heads");
    let (tmp, r) = explore_into(&c, false);
    assert_eq!(r.partition_count, 3);
    assert_eq!(r.partition_states, vec![1, 1, 1]);
    assert_eq!(r.cross_edge_count, 2);
    assert_eq!(r.outer_iterations, 2);
    assert_eq!((r.n_max, r.s_max), (1, 2));

    let records = matrix_records(&workdir(&tmp));
    assert_eq!(
        records[0].1,
        vec![
            branch(2, 0),
            branch(3, 0),
            IsqRecord::TransitionEnd,
            IsqRecord::StateEnd { is_target: false },
        ]
    );
    assert_eq!(records[2].1.last(), Some(&IsqRecord::StateEnd { is_target: true }));
}

#[test]
fn knuth_yao_die_has_thirteen_states() {
    let c = compile_named(corpus::DIE.source, "six");
    let (_tmp, r) = explore_into(&c, false);
    assert_eq!(r.states_total, 13);
    assert_eq!(r.partition_count, 4);
    assert_eq!(r.partition_states, vec![1, 2, 4, 6]);
}

#[test]
fn single_partition_matches_in_memory_bfs() {
    for seed in 0..10 {
        let src = random_model(seed, Limits::default());
        let c = diskmc_core::compile(&src, "reach_max", Some("1")).unwrap();
        let (tmp, r) = explore_into(&c, false);
        assert_eq!(r.partition_count, 1);
        // the confirming pass that finds nothing new is counted
        assert_eq!(r.outer_iterations, 2);
        let mdp = ExplicitMdp::build(&c.model, &c.property).unwrap();
        let stored: Vec<_> = stored_states(&workdir(&tmp), c.model.variables.len())
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        assert_eq!(stored, mdp.states, "seed {seed}");

        // the matrix lists the same transitions, with BFS indices
        let mut expected = Vec::new();
        for (k, ts) in mdp.transitions.iter().enumerate() {
            for t in ts {
                for b in t {
                    expected.push(IsqRecord::Branch(BranchEntry {
                        probability: b.probability,
                        reward: b.reward,
                        partition: 1,
                        index: b.target as i32,
                    }));
                }
                expected.push(IsqRecord::TransitionEnd);
            }
            expected.push(IsqRecord::StateEnd {
                is_target: mdp.targets[k],
            });
        }
        assert_eq!(matrix_records(&workdir(&tmp))[0].1, expected, "seed {seed}");
    }
}

#[test]
fn back_edges_to_known_states_need_no_extra_pass() {
    // die: the back edges 3->1 and 6->2 hit states already explored
    let c = compile_named(corpus::DIE.source, "six");
    let (_tmp, r) = explore_into(&c, false);
    assert_eq!(r.outer_iterations, 2);
}

#[test]
fn strongly_connected_partitions_need_more_passes() {
    let c = compile_named(corpus::CONSENSUS.source, "all_high");
    let (tmp, r) = explore_into(&c, false);
    assert!(r.outer_iterations > 2, "{}", r.outer_iterations);
    let dir = workdir(&tmp);
    let stored = stored_states(&dir, c.model.variables.len());
    assert_eq!(stored.len(), bfs_states(&c).len());
}

#[test]
fn exploration_is_deterministic() {
    let src = random_model(7, Limits::default());
    let c = compile_named(&src, "reach_min");
    for compress in [false, true] {
        let (a, _) = explore_into(&c, compress);
        let (b, _) = explore_into(&c, compress);
        let names = |dir: &std::path::Path| -> BTreeSet<String> {
            std::fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().file_name().into_string().unwrap())
                .collect()
        };
        let (da, db) = (workdir(&a), workdir(&b));
        assert_eq!(names(&da), names(&db));
        for name in names(&da) {
            assert_eq!(file_bytes(&da.join(&name)), file_bytes(&db.join(&name)), "{name}");
        }
    }
}

#[test]
fn compressed_files_use_the_z_suffix() {
    let c = compile_named(corpus::DIE.source, "six");
    let (tmp, r) = explore_into(&c, true);
    let dir = workdir(&tmp);
    assert!(dir.join("p1.matrix.z").exists());
    assert!(!dir.join("p1.matrix").exists());
    assert!(dir.join("meta").exists());
    assert!(r.matrix_bytes_raw > 0);
}

#[test]
fn scratch_files_do_not_survive() {
    let c = compile_named(corpus::COIN.source, "p_heads");
    let (tmp, _) = explore_into(&c, false);
    for e in std::fs::read_dir(workdir(&tmp)).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        assert!(!name.ends_with(".old") && !name.ends_with(".tmp"), "{name}");
    }
}

#[test]
fn non_empty_workdir_is_rejected() {
    let c = compile_named(corpus::COIN.source, "p_heads");
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("stray"), b"x").unwrap();
    let err = explore(&c.model, &c.property, &ExplorationConfig::new(tmp.path())).unwrap_err();
    assert!(matches!(err, Error::Workdir(_)), "{err}");
}

#[test]
fn initial_state_must_map_to_partition_one() {
    let c = diskmc_core::compile(corpus::COIN.source, "p_heads", Some("c+2 bound 4")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let err = explore(&c.model, &c.property, &ExplorationConfig::new(tmp.path().join("w")))
        .unwrap_err();
    assert!(err.to_string().contains("partition"), "{err}");
}

#[test]
fn residency_stays_within_the_bound() {
    let c = compile_named(corpus::DIE.source, "six");
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExplorationConfig::new(tmp.path().join("w"));
    cfg.max_resident_states = Some(1);
    let r = explore(&c.model, &c.property, &cfg).unwrap();
    assert!(r.resident_bound_exceeded);
    assert!(r.peak_resident_states <= r.n_max + r.c_max + 64);
}

#[test]
fn compact_records_round_trip() {
    let c = compile_named(corpus::DIE.source, "six");
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExplorationConfig::new(tmp.path().join("w"));
    cfg.compact_branches = true;
    let compact = explore(&c.model, &c.property, &cfg).unwrap();
    let (_plain_dir, plain) = explore_into(&c, false);
    assert!(compact.matrix_bytes_raw < plain.matrix_bytes_raw);
    let recs = matrix_records(&tmp.path().join("w"));
    assert!(recs
        .iter()
        .flat_map(|(_, r)| r)
        .any(|r| matches!(r, IsqRecord::LocalCertainBranch { .. })));
}

fn run_correction(input: &[IsqRecord], updates: &BTreeMap<u32, Vec<u32>>) -> Result<Vec<IsqRecord>, FormatError> {
    let mut bytes = Vec::new();
    for r in input {
        bytes.extend(r.to_bytes());
    }
    let mut w = IsqWriter::new(Vec::new());
    correct_indices(&bytes[..], &mut w, updates)?;
    Ok(decode_stream(&w.into_inner()).unwrap())
}

#[test]
fn correction_replaces_preliminary_indices() {
    let updates = BTreeMap::from([(2, vec![7, 3, 9])]);
    let input = [
        branch(2, -2),
        branch(1, 4),
        IsqRecord::TransitionEnd,
        IsqRecord::StateEnd { is_target: false },
    ];
    let out = run_correction(&input, &updates).unwrap();
    assert_eq!(out[0], branch(2, 3));
    assert_eq!(out[1..], input[1..]);
}

#[test]
fn correction_without_preliminary_indices_is_identity() {
    let input = [branch(3, 0), IsqRecord::TransitionEnd, IsqRecord::StateEnd { is_target: true }];
    assert_eq!(run_correction(&input, &BTreeMap::new()).unwrap(), input);
}

#[test]
fn correction_reports_dangling_and_missing_updates() {
    let updates = BTreeMap::from([(2, vec![0])]);
    assert!(matches!(
        run_correction(&[branch(2, -2)], &updates),
        Err(FormatError::DanglingIndex { partition: 2, index: -2, available: 1 })
    ));
    assert!(matches!(
        run_correction(&[branch(5, -1)], &updates),
        Err(FormatError::MissingUpdates { partition: 5 })
    ));
}

#[test]
fn every_partition_keeps_its_auxiliary_files() {
    let c = compile_named(corpus::DIE.source, "six");
    let (tmp, r) = explore_into(&c, false);
    let store = diskmc_core::PartitionStore::new(workdir(&tmp), false);
    for id in 1..=r.partition_count {
        let id = diskmc_core::PartitionId(id);
        assert!(store.path(id, FileKind::Matrix).exists());
        assert!(store.path(id, FileKind::States).exists());
    }
}
