//! Time graph, carry graph from spot/forward quotes, and the shift and
//! multi-linear filters built from them.

use mgtn::graph::{self, CarryTable, RateQuote};
use mgtn::tensor::DenseTensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let time = graph::time_graph(4)?;
    println!("time graph edges (present <- past): {:?}", time.edges());

    let mut table = CarryTable::default();
    for (pair, spot, forward) in [
        ("EURUSD", 1.1012, 1.1089),
        ("GBPUSD", 1.2310, 1.2375),
        ("USDJPY", 108.20, 107.45),
        ("EURGBP", 0.8946, 0.8961),
    ] {
        table.pairs.insert(pair.to_string(), RateQuote { spot, forward });
    }
    let currencies = table.currencies()?;
    let carry = graph::carry_graph(&table, &currencies, true)?;
    println!("carry graph over {currencies:?} (rescaled to max 1):");
    for (i, j, w) in carry.edges().into_iter().filter(|(i, j, _)| i < j) {
        println!("  {} -- {}  {w:.4}", currencies[i], currencies[j]);
    }
    let normalized = carry.normalize()?;
    println!("normalized graph symmetric: {}", normalized.is_symmetric());

    let shift = graph::shift_filter(&carry);
    let signal = DenseTensor::from_fn(&[currencies.len(), 1], |ix| ix[0] as f64);
    println!("(I + A) applied to [0, 1, 2, 3]: {:?}", shift.apply(&signal)?.data());

    let p = DenseTensor::from_rows(&[vec![1.0, 0.2], vec![0.0, 1.0]])?;
    let ml = graph::multilinear_filter(&time, &p, graph::DEFAULT_FILTER_CAP)?;
    println!(
        "multi-linear filter: tensor {:?}, unfolding {:?}",
        ml.tensor().shape(),
        ml.matrix().shape()
    );
    Ok(())
}
