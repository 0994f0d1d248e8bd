//! `info`: per-partition statistics of an explored working directory,
//! computed by decoding the files without modifying anything.

use std::path::Path;

use anyhow::{Context, Result};
use diskmc_core::store::{IsqReader, IsqRecord};
use diskmc_core::{FileKind, Meta, PartitionStore};

use crate::report::Report;

#[derive(Debug, Default, Clone)]
pub struct PartitionInfo {
    pub id: u32,
    pub states: u64,
    pub targets: u64,
    pub transitions: u64,
    pub branches: u64,
    pub cross_branches: u64,
    pub incoming_cross: u64,
    pub negative_indices: u64,
    pub successors: usize,
    pub matrix_bytes_raw: u64,
    pub matrix_bytes_disk: u64,
    pub has_values: bool,
}

pub fn scan(dir: &Path) -> Result<Vec<PartitionInfo>> {
    let meta = Meta::load(dir).with_context(|| format!("{} is not an explored workdir", dir.display()))?;
    let store = PartitionStore::detect(dir);
    let mut out: Vec<PartitionInfo> = meta
        .ids()
        .map(|id| PartitionInfo {
            id: id.get(),
            successors: meta.get(id).successors.len(),
            ..Default::default()
        })
        .collect();
    for id in meta.ids() {
        let reader = store.reader_or_empty(id, FileKind::Matrix)?;
        let mut isq = IsqReader::new(reader);
        let mut incoming = Vec::new();
        let p = &mut out[id.slot()];
        while let Some(rec) = isq
            .next_record()
            .map_err(|e| anyhow::anyhow!("{}: {e}", store.path(id, FileKind::Matrix).display()))?
        {
            match rec {
                IsqRecord::Branch(b) => {
                    p.branches += 1;
                    if b.index < 0 {
                        p.negative_indices += 1;
                    }
                    if b.partition != id.get() as i32 {
                        p.cross_branches += 1;
                        incoming.push(b.partition);
                    }
                }
                IsqRecord::LocalCertainBranch { index } => {
                    p.branches += 1;
                    if index < 0 {
                        p.negative_indices += 1;
                    }
                }
                IsqRecord::TransitionEnd => p.transitions += 1,
                IsqRecord::StateEnd { is_target } => {
                    p.states += 1;
                    p.targets += is_target as u64;
                }
            }
        }
        p.matrix_bytes_raw = isq.offset();
        p.matrix_bytes_disk = store.disk_size(id, FileKind::Matrix)?;
        p.has_values = store.path(id, FileKind::Values).exists();
        for j in incoming {
            if let Some(q) = out.get_mut(j as usize - 1) {
                q.incoming_cross += 1;
            }
        }
    }
    Ok(out)
}

pub fn report(dir: &Path) -> Result<Report> {
    let parts = scan(dir)?;
    let meta = Meta::load(dir)?;
    let store = PartitionStore::detect(dir);
    let mut r = Report::default();
    let sum = |f: fn(&PartitionInfo) -> u64| parts.iter().map(f).sum::<u64>();
    let states_total = sum(|p| p.states);
    let n_max = parts.iter().map(|p| p.states).max().unwrap_or(0);
    let s_max = parts.iter().map(|p| p.successors).max().unwrap_or(0);
    let c_max = parts.iter().map(|p| p.incoming_cross).max().unwrap_or(0);
    let negative = sum(|p| p.negative_indices);

    r.show("workdir", "workdir", dir.display());
    r.show("compressed", "compressed", store.compressed());
    r.show("states_total", "states", states_total);
    r.show("p", "partitions", meta.count());
    r.show("n_max", "n_max", n_max);
    r.show("s_max", "s_max", s_max);
    r.show("c_max", "c_max", c_max);
    r.show("transitions_total", "transitions", sum(|p| p.transitions));
    r.show("branches_total", "branches", sum(|p| p.branches));
    r.show("cross_branches", "cross branches", sum(|p| p.cross_branches));
    r.show("targets_total", "target states", sum(|p| p.targets));
    r.show("negative_indices", "negative indices", negative);
    r.show("matrix_bytes_raw", "matrix bytes raw", sum(|p| p.matrix_bytes_raw));
    r.show("matrix_bytes_disk", "matrix bytes disk", sum(|p| p.matrix_bytes_disk));
    for p in &parts {
        let id = p.id;
        r.show(
            format!("partition.{id}"),
            "partition",
            format!(
                "{id}: {} states, {} transitions, {} branches ({} cross out, {} cross in), \
                 {} successors, {} bytes raw, {} bytes disk{}",
                p.states,
                p.transitions,
                p.branches,
                p.cross_branches,
                p.incoming_cross,
                p.successors,
                p.matrix_bytes_raw,
                p.matrix_bytes_disk,
                if p.has_values { ", values" } else { "" }
            ),
        );
        r.kv(format!("partition.{id}.states"), p.states);
        r.kv(format!("partition.{id}.transitions"), p.transitions);
        r.kv(format!("partition.{id}.branches"), p.branches);
        r.kv(format!("partition.{id}.cross_out"), p.cross_branches);
        r.kv(format!("partition.{id}.cross_in"), p.incoming_cross);
        r.kv(format!("partition.{id}.successors"), p.successors);
        r.kv(format!("partition.{id}.matrix_bytes_raw"), p.matrix_bytes_raw);
        r.kv(format!("partition.{id}.matrix_bytes_disk"), p.matrix_bytes_disk);
        let expected = meta.get(diskmc_core::PartitionId(id)).state_count as u64;
        if expected != p.states {
            anyhow::bail!("partition {id}: meta lists {expected} states, matrix has {}", p.states);
        }
    }
    Ok(r)
}
