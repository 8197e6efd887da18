//! Trains the default agent on alternating synthetic minutes and reports the
//! greedy policy on the held-out split after every episode.
//!
//! `cargo run --release --example train_agent -- [episodes] [minutes]`

use mgtn::cli::{self, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(Ok(4), |s| s.parse())?;
    let minutes: usize = args.next().map_or(Ok(300), |s| s.parse())?;
    let out = std::env::temp_dir().join("mgtn-train-example");
    let text = format!(
        "seed = 0\noutput_dir = {:?}\ntarget = \"EURUSD\"\n\n\
         [data]\nsource = \"synthetic\"\nkind = \"alternating\"\nlength = {minutes}\n\n\
         [train]\nepisodes = {episodes}\n",
        out.display().to_string()
    );
    let config = RunConfig::parse(&text, &std::env::temp_dir())?;
    let prepared = cli::prepare(&config)?;
    println!(
        "{} parameters; {} train / {} test steps per episode",
        config.agent_spec().param_count(),
        prepared.train_env.len(),
        prepared.test_env.len()
    );
    println!("episode  reward     loss       epsilon  test return  test hit");
    let outcome = cli::train(&config, &prepared, |row, _| {
        println!(
            "{:>7}  {:+.5}  {:<9}  {:.3}    {:+.4}%     {}",
            row.episode,
            row.cumulative_reward,
            row.mean_loss.map_or("-".into(), |l| format!("{l:.3e}")),
            row.epsilon_end,
            row.test_total_return_pct,
            row.test_hit_rate_pct.map_or("-".into(), |h| format!("{h:.1}%"))
        );
        Ok(())
    })?;
    println!("{} training steps recorded", outcome.steps.len());
    Ok(())
}
