//! Shared helpers for the integration tests: a seeded random model
//! generator and thin wrappers around the reference engine.

#![allow(dead_code)]

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use diskmc_core::analyze::{reach_reference, reward_reference, ExplicitMdp};
use diskmc_core::{
    compile, Compiled, ConvergenceConfig, ExplicitState, FileKind, Meta, PartitionStore,
    PropertyKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape limits for generated models.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_states: u64,
    pub max_commands: usize,
    pub max_alternatives: usize,
    pub max_partitions: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 10_000,
            max_commands: 4,
            max_alternatives: 4,
            max_partitions: 8,
        }
    }
}

/// Property names every generated model declares.
pub const RANDOM_PROPERTIES: [&str; 4] = ["reach_max", "reach_min", "cost_max", "cost_min"];

/// A random model source. Every variable starts at 0 and the partition
/// expression is `mod(linear combination, P) + 1`, so the initial state
/// always lands in partition 1.
pub fn random_model(seed: u64, limits: Limits) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = if rng.gen_bool(0.1) { 1 } else { rng.gen_range(2..=3usize) };
    let names = ["x", "y", "z"];
    let mut highs = Vec::new();
    let mut budget = limits.max_states;
    for v in 0..vars {
        let remaining = (vars - v) as u32;
        let cap = (budget as f64).powf(1.0 / remaining as f64).floor() as u64;
        let cap = cap.clamp(2, 26);
        let high = (rng.gen_range(cap / 3..=cap) - 1).max(1);
        budget /= high + 1;
        highs.push(high as i64);
    }

    let mut src = String::new();
    writeln!(src, "// random model, seed {seed}").unwrap();
    for (v, &h) in highs.iter().enumerate() {
        writeln!(src, "var {} : 0..{} init 0;", names[v], h).unwrap();
    }

    let commands = rng.gen_range(1..=limits.max_commands);
    for i in 0..commands {
        // the first command is always enabled so exploration gets going
        let guard = if i == 0 || rng.gen_bool(0.3) {
            "true".to_string()
        } else {
            permissive_guard(&mut rng, &names[..vars], &highs)
        };
        let alts = rng.gen_range(1..=limits.max_alternatives);
        let mut weights: Vec<u32> = (0..alts).map(|_| rng.gen_range(1..=9)).collect();
        let total: u32 = weights.iter().sum();
        if rng.gen_bool(0.1) {
            weights = vec![total];
        }
        let mut parts = Vec::new();
        for w in weights {
            let first = rng.gen_range(0..vars);
            let touched = if vars > 1 && rng.gen_bool(0.4) {
                vec![first, (first + 1) % vars]
            } else {
                vec![first]
            };
            let mut updates = Vec::new();
            for v in touched {
                let (name, high) = (names[v], highs[v]);
                let step = rng.gen_range(1..=5);
                updates.push(match rng.gen_range(0..5) {
                    0 => format!("({name}'=mod({name}+{step}, {}))", high + 1),
                    1 => format!("({name}'=min({name}+{step}, {high}))"),
                    2 => format!("({name}'=max({name}-{step}, 0))"),
                    3 => format!("({name}'={})", rng.gen_range(0..=high)),
                    _ => continue,
                });
            }
            let update = if updates.is_empty() {
                "true".to_string()
            } else {
                updates.join(" & ")
            };
            let reward = if rng.gen_bool(0.7) {
                format!(" reward {}", rng.gen_range(1..=4))
            } else {
                String::new()
            };
            parts.push(format!("{w}/{total} : {update}{reward}"));
        }
        writeln!(src, "[] {guard} -> {};", parts.join(" + ")).unwrap();
    }

    let target = random_guard(&mut rng, &names[..vars], &highs);
    for (name, spec) in RANDOM_PROPERTIES.iter().zip(["Pmax", "Pmin", "Rmax", "Rmin"]) {
        writeln!(src, "property {name} = {spec}=? [F {target}];").unwrap();
    }

    let parts = rng.gen_range(1..=limits.max_partitions);
    let combo: Vec<String> = (0..vars)
        .map(|v| format!("{}*{}", rng.gen_range(0..=3), names[v]))
        .collect();
    writeln!(src, "partition mod({}, {parts}) + 1 bound {parts};", combo.join(" + ")).unwrap();
    src
}

/// Sweep budget of the reference engine for a random model to be used.
pub const TRACTABLE_SWEEPS: usize = 20_000;

/// The first random model derived from `seed` on which the reference
/// engine converges within [`TRACTABLE_SWEEPS`] sweeps at `epsilon` for
/// both reachability directions. Models with rare-event cycles can need
/// millions of sweeps, which no value iteration engine finishes in a test.
/// Returns the source and the number of candidates rejected.
pub fn tractable_random_model(seed: u64, limits: Limits, epsilon: f64) -> (String, u32) {
    let cfg = ConvergenceConfig {
        epsilon,
        max_outer: Some(TRACTABLE_SWEEPS),
    };
    for attempt in 0u64.. {
        let src = random_model(seed * 1_000 + attempt, limits);
        let converges = ["reach_max", "reach_min"].iter().all(|p| {
            let c = compile_named(&src, p);
            let mdp = ExplicitMdp::build(&c.model, &c.property).unwrap();
            reach_reference(&mdp, c.property.direction, &cfg, None).is_ok()
        });
        if converges {
            return (src, attempt as u32);
        }
    }
    unreachable!()
}

/// One comparison that holds on most of a variable's range.
fn permissive_guard(rng: &mut ChaCha8Rng, names: &[&str], highs: &[i64]) -> String {
    let v = rng.gen_range(0..names.len());
    let h = highs[v];
    match rng.gen_range(0..3) {
        0 => format!("{}<{}", names[v], rng.gen_range(h / 2..=h).max(1)),
        1 => format!("{}>{}", names[v], rng.gen_range(0..=h / 2)),
        _ => format!("{}!={}", names[v], rng.gen_range(0..=h)),
    }
}

fn random_guard(rng: &mut ChaCha8Rng, names: &[&str], highs: &[i64]) -> String {
    let atoms = rng.gen_range(1..=2);
    let mut out = Vec::new();
    for _ in 0..atoms {
        let v = rng.gen_range(0..names.len());
        let c = rng.gen_range(0..=highs[v]);
        let op = ["<", "<=", ">", ">=", "=", "!="][rng.gen_range(0..6)];
        out.push(format!("{}{op}{c}", names[v]));
    }
    out.join(" & ")
}

/// Reference value of a compiled property at the initial state.
pub fn reference_value(c: &Compiled, epsilon: f64) -> f64 {
    let mdp = ExplicitMdp::build(&c.model, &c.property).unwrap();
    let cfg = ConvergenceConfig::with_epsilon(epsilon);
    match c.property.kind {
        PropertyKind::ReachProbability => reach_reference(&mdp, c.property.direction, &cfg, None),
        PropertyKind::ExpectedReward => reward_reference(&mdp, c.property.direction, &cfg, None),
    }
    .unwrap()
    .initial()
}

pub fn compile_named(src: &str, property: &str) -> Compiled {
    compile(src, property, None).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

/// All states stored in a working directory, with their partition ids.
pub fn stored_states(dir: &Path, vars: usize) -> Vec<(u32, ExplicitState)> {
    let meta = Meta::load(dir).unwrap();
    let store = PartitionStore::detect(dir);
    let mut out = Vec::new();
    for id in meta.ids() {
        for s in store.read_states(id, FileKind::States, vars).unwrap() {
            out.push((id.get(), s));
        }
    }
    out
}

/// Reachable states by in-memory breadth-first search.
pub fn bfs_states(c: &Compiled) -> HashSet<ExplicitState> {
    let mdp = ExplicitMdp::build(&c.model, &c.property).unwrap();
    mdp.states.into_iter().collect()
}

pub fn file_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Explores `c` into a fresh temporary working directory.
pub fn explore_into(
    c: &Compiled,
    compress: bool,
) -> (tempfile::TempDir, diskmc_core::ExplorationReport) {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = diskmc_core::ExplorationConfig::new(tmp.path().join("work"));
    cfg.compress = compress;
    let report = diskmc_core::explore(&c.model, &c.property, &cfg).unwrap();
    (tmp, report)
}

pub fn workdir(tmp: &tempfile::TempDir) -> std::path::PathBuf {
    tmp.path().join("work")
}

/// Decoded records of every matrix file, by partition id.
pub fn matrix_records(dir: &Path) -> Vec<(u32, Vec<diskmc_core::IsqRecord>)> {
    use std::io::Read;
    let meta = Meta::load(dir).unwrap();
    let store = PartitionStore::detect(dir);
    meta.ids()
        .map(|id| {
            let mut bytes = Vec::new();
            store
                .reader_or_empty(id, FileKind::Matrix)
                .unwrap()
                .read_to_end(&mut bytes)
                .unwrap();
            (id.get(), diskmc_core::store::decode_stream(&bytes).unwrap())
        })
        .collect()
}
