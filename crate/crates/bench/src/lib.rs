//! Fixtures shared by the criterion benches: explored working directories
//! for corpus models and synthetic record streams.

use std::path::PathBuf;

use diskmc_core::corpus::CorpusModel;
use diskmc_core::store::isq::{BranchEntry, IsqRecord, IsqWriter};
use diskmc_core::{compile, explore, Compiled, ExplorationConfig, PartitionStore};
use tempfile::TempDir;

/// A corpus model explored into a temporary directory.
pub struct Explored {
    pub compiled: Compiled,
    pub store: PartitionStore,
    _tmp: TempDir,
}

pub fn compile_corpus(model: &CorpusModel, property: &str) -> Compiled {
    compile(model.source, property, None).expect("corpus model compiles")
}

/// A fresh, not yet existing working directory inside `tmp`.
pub fn fresh_workdir(tmp: &TempDir) -> PathBuf {
    let mut n = 0;
    loop {
        let dir = tmp.path().join(format!("work{n}"));
        if !dir.exists() {
            return dir;
        }
        n += 1;
    }
}

pub fn explored(model: &CorpusModel, property: &str, compress: bool) -> Explored {
    let compiled = compile_corpus(model, property);
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path().join("work");
    let mut cfg = ExplorationConfig::new(&dir);
    cfg.compress = compress;
    explore(&compiled.model, &compiled.property, &cfg).expect("exploration");
    Explored {
        compiled,
        store: PartitionStore::new(&dir, compress),
        _tmp: tmp,
    }
}

/// Encoded stream of `states` states with up to three transitions of up to
/// four branches each; a fixed arithmetic pattern keeps it reproducible.
pub fn synthetic_stream(states: u32) -> (Vec<u8>, u64) {
    let mut w = IsqWriter::new(Vec::new());
    let mut records = 0u64;
    for s in 0..states {
        for t in 0..=(s % 3) {
            let branches = 1 + (s + t) % 4;
            for b in 0..branches {
                let rec = IsqRecord::Branch(BranchEntry {
                    probability: 1.0 / branches as f64,
                    reward: (b % 2) as f64,
                    partition: 1 + ((s + b) % 7) as i32,
                    index: ((s * 31 + b * 17) % states) as i32,
                });
                w.write(&rec).expect("in-memory write");
                records += 1;
            }
            w.write(&IsqRecord::TransitionEnd).expect("in-memory write");
            records += 1;
        }
        w.write(&IsqRecord::StateEnd { is_target: s % 11 == 0 }).expect("in-memory write");
        records += 1;
    }
    (w.into_inner(), records)
}
