//! `selftest`: runs the bundled corpus and compares against known values.

use std::io::Write;

use anyhow::{bail, Result};
use diskmc_core::corpus::{self, CorpusModel};
use diskmc_core::{check, compile, ConvergenceConfig, ExplorationConfig};

use crate::report;

pub struct Summary {
    pub passed: usize,
    pub failed: usize,
}

fn run_one(
    m: &CorpusModel,
    property: &str,
    compress: bool,
    epsilon: f64,
) -> Result<diskmc_core::CheckReport> {
    let c = compile(m.source, property, None)?;
    let tmp = tempfile::tempdir()?;
    let mut cfg = ExplorationConfig::new(tmp.path().join("work"));
    cfg.compress = compress;
    Ok(check(&c.model, &c.property, &cfg, &ConvergenceConfig::with_epsilon(epsilon))?)
}

pub fn run(models: &[String], compress: bool, out: &mut impl Write) -> Result<Summary> {
    let selected: Vec<&CorpusModel> = if models.is_empty() {
        corpus::ALL.iter().collect()
    } else {
        let mut v = Vec::new();
        for name in models {
            match corpus::by_name(name) {
                Some(m) => v.push(m),
                None => bail!(
                    "unknown corpus model `{name}` (available: {})",
                    corpus::ALL.iter().map(|m| m.name).collect::<Vec<_>>().join(", ")
                ),
            }
        }
        v
    };
    let mut summary = Summary { passed: 0, failed: 0 };
    for m in selected {
        for chk in m.checks {
            let label = format!("{}.{}", m.name, chk.property);
            let line = match run_one(m, chk.property, compress, m.epsilon) {
                Ok(r) => {
                    let v = r.analysis.value;
                    let mut problems = Vec::new();
                    if !chk.expected.accepts(v) {
                        problems.push(format!("expected {}", chk.expected));
                    }
                    if r.exploration.io.backward_seeks + r.analysis.io.backward_seeks != 0 {
                        problems.push("backward seeks".to_string());
                    }
                    if m.forward_acyclic {
                        if r.exploration.outer_iterations != 2 {
                            problems.push(format!(
                                "exploration took {} outer iterations",
                                r.exploration.outer_iterations
                            ));
                        }
                        if r.analysis.outer_iterations > 1 {
                            problems.push(format!(
                                "analysis took {} outer iterations",
                                r.analysis.outer_iterations
                            ));
                        }
                    }
                    let detail = format!(
                        "value {} (states {}, p {}, outer {}/{})",
                        report::value(v),
                        r.exploration.states_total,
                        r.exploration.partition_count,
                        r.exploration.outer_iterations,
                        r.analysis.outer_iterations
                    );
                    if problems.is_empty() {
                        summary.passed += 1;
                        format!("PASS {label}: {detail}")
                    } else {
                        summary.failed += 1;
                        format!("FAIL {label}: {detail}; {}", problems.join("; "))
                    }
                }
                Err(e) => {
                    summary.failed += 1;
                    format!("FAIL {label}: {e:#}")
                }
            };
            writeln!(out, "{line}")?;
        }
    }
    writeln!(out, "{} passed, {} failed", summary.passed, summary.failed)?;
    Ok(summary)
}
