//! Performance metrics on a hand-written return path, then a full train and
//! backtest round through the command layer.

use mgtn::cli::{self, Overrides, RunConfig};
use mgtn::metrics::{self, EquityCurve, MetricReport};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let returns = [0.002, -0.001, 0.0, 0.003, -0.004, 0.001];
    let curve = EquityCurve::from_returns(&returns);
    println!(
        "equity: {:?}",
        curve.values().iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>()
    );
    println!("total return {:.4}%", metrics::total_return(&curve));
    println!("sharpe {:?}", metrics::sharpe(&returns));
    println!("sortino {:?}", metrics::sortino(&returns));
    println!("max drawdown {:.4}%", metrics::max_drawdown(&curve));
    println!("hit rate {:?} (zero steps excluded)", metrics::hit_rate(&returns));
    println!(
        "{}",
        serde_json::to_string_pretty(&MetricReport::from_curve(&EquityCurve::from_returns(&[0.001; 4])))?
    );

    let dir = std::env::temp_dir().join("mgtn-backtest-example");
    let text = "seed = 5\noutput_dir = \"run\"\ntarget = \"GBPUSD\"\n\n\
                [data]\nsource = \"synthetic\"\nkind = \"momentum\"\nlength = 300\n\n\
                [train]\nepisodes = 2\n";
    let config = RunConfig::parse(text, &dir)?;
    let run = cli::cmd_train(config.clone(), &Overrides::default())?;
    let report = cli::cmd_backtest(&config, &run.join("final.ckpt"))?;
    println!(
        "backtest {} .. {}: {:?}",
        report.test_start, report.test_end, report.metrics
    );
    println!("wrote {}", run.join("backtest").display());
    Ok(())
}
