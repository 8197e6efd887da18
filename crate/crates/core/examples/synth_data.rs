//! Synthetic OHLC series, their CSV form, and the window stream built from
//! them.

use mgtn::market::{self, SynthKind, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for kind in [SynthKind::Alternating, SynthKind::Momentum, SynthKind::RandomWalk] {
        let spec = SynthSpec {
            kind,
            length: 500,
            seed: 1,
            ..SynthSpec::default()
        };
        let series = market::synth_series(&spec)?;
        let returns = market::log_returns(&series)?;
        let closes: Vec<f64> = returns.rows[0].iter().map(|r| r[market::CLOSE]).collect();
        let flips = closes.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        println!(
            "{kind:?}: {} minutes, sign flips {:.2} of steps, EURUSD close {:.5} -> {:.5}",
            series.len(),
            flips as f64 / (closes.len() - 1) as f64,
            series.bars[0][0][market::CLOSE],
            series.bars[0][series.len() - 1][market::CLOSE]
        );
    }

    let spec = SynthSpec {
        kind: SynthKind::Alternating,
        length: 6,
        ..SynthSpec::default()
    };
    let series = market::synth_series(&spec)?;
    let mut csv = Vec::new();
    market::write_prices(&series, &mut csv)?;
    let text = String::from_utf8(csv)?;
    println!("CSV head:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    let back = market::parse_prices(text.as_bytes(), &spec.symbols(), 0.0)?;
    println!("round trip identical: {}", back.bars == series.bars);

    let stream = market::build_stream(&market::log_returns(&series)?, 2, "EURUSD")?;
    for s in &stream.samples {
        println!(
            "state ending {} (shape {:?}) -> reward at {}: {:+.6}",
            market::format_timestamp(s.state_time),
            s.state.shape(),
            market::format_timestamp(s.reward_time),
            s.next_return
        );
    }
    Ok(())
}
