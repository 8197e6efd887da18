#![allow(dead_code)]

use std::path::Path;

use mgtn::cli::{self, RunConfig};
use mgtn::market::SynthKind;
use mgtn::metrics::MetricReport;

pub fn kind_name(kind: SynthKind) -> &'static str {
    match kind {
        SynthKind::Alternating => "alternating",
        SynthKind::Momentum => "momentum",
        SynthKind::RandomWalk => "random-walk",
    }
}

/// Config text for a synthetic run writing to `out` (relative to the config's directory).
pub fn synthetic_toml(kind: SynthKind, length: usize, seed: u64, episodes: usize, out: &str) -> String {
    format!(
        "seed = {seed}\noutput_dir = \"{out}\"\ntarget = \"EURUSD\"\ncheckpoint_every = 1\n\n\
         [data]\nsource = \"synthetic\"\nkind = \"{}\"\nlength = {length}\n\n\
         [train]\nepisodes = {episodes}\n",
        kind_name(kind)
    )
}

/// Writes `text` as `run.toml` in `dir` and loads it.
pub fn write_config(dir: &Path, text: &str) -> RunConfig {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    RunConfig::load(&path).unwrap()
}

/// Greedy test-split metrics of a freshly initialized (untrained) agent.
pub fn untrained_backtest(config: &RunConfig) -> MetricReport {
    let prepared = cli::prepare(config).unwrap();
    let net = cli::build_network(config, &prepared).unwrap();
    let mut env = prepared.test_env.clone();
    cli::greedy_rollout(&net, &mut env).unwrap().report
}

pub fn mean_and_standard_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
