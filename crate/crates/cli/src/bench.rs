use irisdedup_core::bench::{bench_comparison, bench_or_tree, ComparisonBench, OrTreeBench};
use irisdedup_core::engine::ProtocolVariant;
use irisdedup_core::iris::MatchParams;
use serde::Serialize;

use crate::fail::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub comparisons: Vec<ComparisonBench>,
    pub or_tree: Option<OrTreeBench>,
}

pub fn run(
    variants: &[ProtocolVariant],
    n: usize,
    params: &MatchParams,
    repeat: usize,
    or_tree: bool,
    seed: u64,
) -> CliResult<BenchReport> {
    if n == 0 {
        return Err(CliError::Config("--comparisons must be positive".into()));
    }
    let mut comparisons = Vec::new();
    for &v in variants {
        let b = bench_comparison(v, n, params, repeat, seed)?;
        if !b.verified {
            return Err(CliError::Other(format!("{v} disagrees with the plaintext rule")));
        }
        comparisons.push(b);
    }
    let or_tree = if or_tree { Some(bench_or_tree(n, seed)?) } else { None };
    Ok(BenchReport { comparisons, or_tree })
}

/// Per-party communication in kB (1000 bytes) next to rounds and throughput.
pub fn table(r: &BenchReport) -> String {
    let mut out = format!(
        "{:<12} {:>10} {:>12} {:>12} {:>8} {:>6} {:>14}\n",
        "protocol", "n", "kB/party", "B/cmp", "rounds", "ANDs", "cmp/s"
    );
    for b in &r.comparisons {
        out += &format!(
            "{:<12} {:>10} {:>12.1} {:>12.2} {:>8} {:>6} {:>14.0}\n",
            b.variant.name(),
            b.n,
            b.max_party_bytes as f64 / 1e3,
            b.bytes_per_comparison_max,
            b.rounds,
            b.and_gates_per_comparison,
            b.comparisons_per_sec
        );
    }
    if let Some(t) = &r.or_tree {
        out += &format!(
            "{:<12} {:>10} {:>12.1} {:>12.2} {:>8} {:>6} {:>14.0}\n",
            "or-tree",
            t.n,
            t.max_party_bytes as f64 / 1e3,
            t.max_party_bytes as f64 / t.n as f64,
            t.rounds,
            t.and_gates,
            t.n as f64 / (t.wall_ms / 1e3)
        );
    }
    out
}
