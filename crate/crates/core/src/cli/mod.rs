//! Run configuration, the data-to-agent pipeline and the four commands.
//!
//! Every command reads one TOML document, writes only below the configured
//! output directory (or the explicit `--out` path for `synth`) and replaces
//! files atomically.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{self, Adjacency, CarryTable};
use crate::market::{self, PriceSeries, ReturnTensorStream, SynthSpec, TradingEnv};
use crate::metrics::{EquityCurve, MetricReport};
use crate::mgtn::{AgentNetwork, Checkpoint, CHECKPOINT_MAGIC};
use crate::rl::{self, Action, StepRecord, Trainer};

pub use config::{DataSource, ExtractorKind, Manifest, ModelConfig, Overrides, RunConfig, RunInfo};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    /// 1 for validation failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn validation(field: &str, message: impl ToString) -> Self {
        CliError::Validation {
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        CliError::Runtime(message.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Writes via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::runtime(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let io = |e: std::io::Error| CliError::runtime(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

/// Data, graphs and environments derived from a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub series: PriceSeries,
    pub stream: Arc<ReturnTensorStream>,
    pub train_env: TradingEnv,
    pub test_env: TradingEnv,
    pub time_graph: Adjacency,
    pub carry_graph: Adjacency,
    /// Carry-table pairs not between two configured currencies.
    pub skipped_pairs: Vec<String>,
}

fn load_series(config: &RunConfig) -> Result<PriceSeries> {
    let data_err = |e: market::MarketError| CliError::validation("data", e);
    match &config.data {
        DataSource::Csv {
            path,
            max_fill_fraction,
        } => market::load_prices(path, &config.symbols, *max_fill_fraction).map_err(data_err),
        DataSource::Synthetic { .. } => {
            market::synth_series(&config.synth_spec().expect("synthetic source")).map_err(data_err)
        }
    }
}

fn build_carry_graph(config: &RunConfig) -> Result<(Adjacency, Vec<String>)> {
    let n = config.currencies.len();
    let Some(path) = &config.carry_table else {
        return Ok((Adjacency::empty(n), Vec::new()));
    };
    let field = |e: graph::GraphError| CliError::validation("carry_table", e);
    let table = CarryTable::load(path).map_err(field)?;
    let mut kept = CarryTable::default();
    let mut skipped = Vec::new();
    for (pair, quote) in &table.pairs {
        let known = |c: &str| config.currencies.iter().any(|x| x == c);
        if pair.len() == 6 && pair.is_ascii() && known(&pair[..3]) && known(&pair[3..]) {
            kept.pairs.insert(pair.clone(), *quote);
        } else {
            skipped.push(pair.clone());
        }
    }
    let mut adj = graph::carry_graph(&kept, &config.currencies, config.model.carry_rescale).map_err(field)?;
    if config.model.normalize_carry {
        adj = adj
            .normalize()
            .map_err(|e| CliError::validation("model.normalize_carry", e))?;
    }
    Ok((adj, skipped))
}

/// Validates `config`, loads prices and builds the stream, split and graphs.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let series = load_series(config)?;
    let returns = market::log_returns(&series).map_err(|e| CliError::validation("data", e))?;
    let stream = Arc::new(
        market::build_stream(&returns, config.lags, &config.target).map_err(|e| CliError::validation("data", e))?,
    );
    let (train_env, test_env) =
        market::split(stream.clone(), config.train_fraction).map_err(|e| CliError::validation("train_fraction", e))?;
    let time_graph = graph::time_graph(config.lags).map_err(|e| CliError::validation("lags", e))?;
    let (carry_graph, skipped_pairs) = build_carry_graph(config)?;
    Ok(Prepared {
        series,
        stream,
        train_env,
        test_env,
        time_graph,
        carry_graph,
        skipped_pairs,
    })
}

/// Network for `config`, initialized from the run seed.
pub fn build_network(config: &RunConfig, prepared: &Prepared) -> Result<AgentNetwork> {
    let spec = config.agent_spec();
    let (time, nodes) = match config.model.extractor {
        ExtractorKind::Fmgtn => (prepared.time_graph.clone(), prepared.carry_graph.clone()),
        ExtractorKind::Ttnn => (Adjacency::empty(spec.lags), Adjacency::empty(spec.nodes)),
    };
    let mut net = AgentNetwork::new(spec, &time, &nodes).map_err(|e| CliError::validation("model", e))?;
    net.init_params(config.seed);
    Ok(net)
}

/// Greedy evaluation over one environment episode.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// Timestamp of the newest return in the first state, then of every reward.
    pub times: Vec<i64>,
    pub curve: EquityCurve,
    pub report: MetricReport,
}

/// Runs the greedy policy once through `env`; parameters are untouched.
pub fn greedy_rollout(net: &AgentNetwork, env: &mut TradingEnv) -> Result<Rollout> {
    let mut state = env.restart();
    let (start, _) = env.bounds();
    let samples = &env.stream().samples;
    let mut times = vec![samples[start].state_time];
    let mut actions = Vec::with_capacity(env.len());
    let mut rewards = Vec::with_capacity(env.len());
    loop {
        let i = env.cursor();
        let action = rl::greedy_action(net, &state).map_err(CliError::runtime)?;
        let tr = env.advance(action).map_err(CliError::runtime)?;
        actions.push(action);
        rewards.push(tr.reward);
        times.push(env.stream().samples[i].reward_time);
        if tr.terminal {
            break;
        }
        state = tr.next_state;
    }
    let curve = EquityCurve::from_returns(&rewards);
    let report = MetricReport::from_curve(&curve);
    Ok(Rollout {
        actions,
        rewards,
        times,
        curve,
        report,
    })
}

/// One line of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub steps: usize,
    pub cumulative_reward: f64,
    pub mean_loss: Option<f64>,
    pub epsilon_end: f64,
    pub test_total_return_pct: f64,
    pub test_hit_rate_pct: Option<f64>,
    pub test_sharpe: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: AgentNetwork,
    pub episodes: Vec<EpisodeRow>,
    pub steps: Vec<StepRecord>,
}

/// Trains on the train split for `config.train.episodes` episodes, scoring the
/// greedy policy on the test split after each. `on_episode` sees every row and
/// the online network as it stands at the end of that episode.
pub fn train(
    config: &RunConfig,
    prepared: &Prepared,
    mut on_episode: impl FnMut(&EpisodeRow, &AgentNetwork) -> Result<()>,
) -> Result<TrainOutcome> {
    let net = build_network(config, prepared)?;
    let tc = config.train_config();
    let total = tc.episodes * prepared.train_env.len();
    let mut trainer = Trainer::new(net, tc.clone(), total).map_err(|e| CliError::validation("train", e))?;
    let mut train_env = prepared.train_env.clone();
    let mut test_env = prepared.test_env.clone();
    let mut episodes = Vec::with_capacity(tc.episodes);
    let mut steps = Vec::new();
    for ep in 0..tc.episodes {
        let report = trainer.run_episode(&mut train_env, ep).map_err(CliError::runtime)?;
        let eval = greedy_rollout(&trainer.online, &mut test_env)?;
        let row = EpisodeRow {
            episode: ep,
            steps: report.steps,
            cumulative_reward: report.cumulative_reward,
            mean_loss: report.mean_loss,
            epsilon_end: report.epsilon_end,
            test_total_return_pct: eval.report.total_return_pct,
            test_hit_rate_pct: eval.report.hit_rate_pct,
            test_sharpe: eval.report.sharpe,
        };
        on_episode(&row, &trainer.online)?;
        episodes.push(row);
        steps.extend(report.records);
    }
    Ok(TrainOutcome {
        network: trainer.online,
        episodes,
        steps,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn episodes_csv(rows: &[EpisodeRow]) -> String {
    let mut s = String::from(
        "episode,steps,cumulative_reward,mean_loss,epsilon_end,test_total_return_pct,test_hit_rate_pct,test_sharpe\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.episode,
            r.steps,
            r.cumulative_reward,
            opt(r.mean_loss),
            r.epsilon_end,
            r.test_total_return_pct,
            opt(r.test_hit_rate_pct),
            opt(r.test_sharpe)
        )
        .expect("string write");
    }
    s
}

fn curve_csv(steps: &[StepRecord]) -> String {
    let mut s = String::from("global_step,action,reward,epsilon,loss\n");
    for r in steps {
        let action = match r.action {
            Action::Buy => "buy",
            Action::Sell => "sell",
        };
        writeln!(
            s,
            "{},{},{},{},{}",
            r.global_step,
            action,
            r.reward,
            r.epsilon,
            opt(r.loss)
        )
        .expect("string write");
    }
    s
}

/// Training run. Writes into `output_dir`: `manifest.toml`, `fills.json`,
/// `episodes.csv`, `training_curve.csv`, `checkpoints/episode_NNN.ckpt` and
/// `final.ckpt`. Returns the output directory.
pub fn cmd_train(mut config: RunConfig, overrides: &Overrides) -> Result<PathBuf> {
    config.apply(overrides);
    let prepared = prepare(&config)?;
    let out = config.output_dir.clone();
    let manifest = Manifest {
        run: RunInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: "train".to_string(),
            overrides: overrides.clone(),
        },
        config: config.clone(),
    };
    write_atomic(&out.join("manifest.toml"), manifest.to_toml().as_bytes())?;
    let fills = serde_json::to_string_pretty(&prepared.series.fills).expect("fill report serializes");
    write_atomic(&out.join("fills.json"), fills.as_bytes())?;
    let every = config.checkpoint_every;
    let outcome = train(&config, &prepared, |row, net| {
        if every > 0 && (row.episode + 1) % every == 0 {
            let path = out
                .join("checkpoints")
                .join(format!("episode_{:03}.ckpt", row.episode + 1));
            write_atomic(&path, &Checkpoint::from_network(net).to_bytes())?;
        }
        Ok(())
    })?;
    write_atomic(&out.join("episodes.csv"), episodes_csv(&outcome.episodes).as_bytes())?;
    write_atomic(&out.join("training_curve.csv"), curve_csv(&outcome.steps).as_bytes())?;
    write_atomic(
        &out.join("final.ckpt"),
        &Checkpoint::from_network(&outcome.network).to_bytes(),
    )?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub target: String,
    pub checkpoint: PathBuf,
    pub test_start: String,
    pub test_end: String,
    pub metrics: MetricReport,
}

/// Loads a checkpoint into the configured network, reporting array mismatches.
pub fn load_network(config: &RunConfig, prepared: &Prepared, checkpoint: &Path) -> Result<AgentNetwork> {
    let bytes = std::fs::read(checkpoint)
        .map_err(|e| CliError::validation("--checkpoint", format!("{}: {e}", checkpoint.display())))?;
    let ck = Checkpoint::from_bytes(&bytes).map_err(|e| CliError::validation("--checkpoint", e))?;
    let mut net = build_network(config, prepared)?;
    ck.apply_to(&mut net)
        .map_err(|e| CliError::validation("--checkpoint", e))?;
    Ok(net)
}

/// Greedy out-of-sample evaluation. Writes `backtest/report.json` and
/// `backtest/equity.csv` under `output_dir`.
pub fn cmd_backtest(config: &RunConfig, checkpoint: &Path) -> Result<BacktestReport> {
    let prepared = prepare(config)?;
    let net = load_network(config, &prepared, checkpoint)?;
    let mut env = prepared.test_env.clone();
    let rollout = greedy_rollout(&net, &mut env)?;
    let report = BacktestReport {
        target: config.target.clone(),
        checkpoint: checkpoint.to_path_buf(),
        test_start: market::format_timestamp(rollout.times[0]),
        test_end: market::format_timestamp(*rollout.times.last().expect("nonempty")),
        metrics: rollout.report.clone(),
    };
    let dir = config.output_dir.join("backtest");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&dir.join("report.json"), json.as_bytes())?;
    let mut equity = String::from("timestamp,equity\n");
    for (t, e) in rollout.times.iter().zip(rollout.curve.values()) {
        writeln!(equity, "{},{}", market::format_timestamp(*t), e).expect("string write");
    }
    write_atomic(&dir.join("equity.csv"), equity.as_bytes())?;
    Ok(report)
}

/// Writes a synthetic price CSV to `out`.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<()> {
    let series = market::synth_series(spec).map_err(|e| CliError::validation("synth", e))?;
    let mut buf = Vec::new();
    market::write_prices(&series, &mut buf).map_err(CliError::runtime)?;
    write_atomic(out, &buf)
}

/// Summary of a checkpoint (arrays and counts) or of a carry table (edges).
pub fn cmd_inspect(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::validation("path", format!("{}: {e}", path.display())))?;
    let mut s = String::new();
    if bytes.starts_with(CHECKPOINT_MAGIC) {
        let ck = Checkpoint::from_bytes(&bytes).map_err(|e| CliError::validation("path", e))?;
        let spec = &ck.spec;
        writeln!(
            s,
            "checkpoint: input ({}, {}, {}) -> {} features, TT out modes {:?}, ranks {:?}",
            spec.input_features, spec.lags, spec.nodes, spec.hidden_features, spec.dense_out_modes, spec.tt_ranks
        )
        .expect("string write");
        for (name, a) in &ck.arrays {
            writeln!(s, "{name:<18} {:<18} {}", format!("{:?}", a.shape()), a.len()).expect("string write");
        }
        writeln!(s, "total {}", ck.param_count()).expect("string write");
        return Ok(s);
    }
    let text =
        String::from_utf8(bytes).map_err(|_| CliError::validation("path", "neither a checkpoint nor a text file"))?;
    let table = CarryTable::parse(&text).map_err(|e| CliError::validation("path", e))?;
    let currencies = table.currencies().map_err(|e| CliError::validation("path", e))?;
    let adj = graph::carry_graph(&table, &currencies, false).map_err(|e| CliError::validation("path", e))?;
    writeln!(
        s,
        "carry table: {} pairs over {}",
        table.pairs.len(),
        currencies.join(" ")
    )
    .expect("string write");
    let edges: Vec<_> = adj.edges().into_iter().filter(|(i, j, _)| i < j).collect();
    writeln!(s, "edges: {}", edges.len()).expect("string write");
    for (i, j, w) in edges {
        writeln!(s, "{} -- {} {w}", currencies[i], currencies[j]).expect("string write");
    }
    Ok(s)
}
