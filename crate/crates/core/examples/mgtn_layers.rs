//! The general and fast multi-graph layers on a (features, lags, currencies)
//! window, and their agreement when every propagation matrix is the identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mgtn::graph::{self, Adjacency};
use mgtn::mgtn::{Activation, FMGTNLayer, GMGTNLayer};
use mgtn::tensor::DenseTensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (j0, j1, lags, nodes) = (4, 16, 5, 9);
    let time = graph::time_graph(lags)?;
    let fx = Adjacency::new(DenseTensor::from_fn(&[nodes, nodes], |ix| {
        if ix[0] == ix[1] {
            0.0
        } else {
            0.1 * ((ix[0] + ix[1]) % 3) as f64
        }
    }))?;
    let w = DenseTensor::from_fn(&[j1, j0], |_| rng.random_range(-0.5..0.5));
    let x = DenseTensor::from_fn(&[j0, lags, nodes], |_| rng.random_range(-1.0..1.0));

    let fast = FMGTNLayer::from_adjacencies(&[time.clone(), fx.clone()], w.clone(), Activation::Relu)?;
    let y = fast.forward(&x)?;
    let active = y.data().iter().filter(|&&v| v > 0.0).count();
    println!(
        "fast layer: {:?} -> {:?}, {active}/{} units active",
        x.shape(),
        y.shape(),
        y.len()
    );

    let general = GMGTNLayer::new(
        vec![time.clone(), fx.clone()],
        vec![w, DenseTensor::identity(j1)],
        vec![DenseTensor::identity(j1), DenseTensor::identity(j1)],
        Activation::Relu,
    )?;
    println!(
        "general layer at P = I differs by {:.1e}",
        general.forward(&x)?.max_abs_diff(&y)?
    );

    let coupled = GMGTNLayer::new(
        vec![time, fx],
        vec![
            DenseTensor::from_fn(&[8, j0], |_| rng.random_range(-0.5..0.5)),
            DenseTensor::identity(8),
        ],
        vec![
            DenseTensor::from_fn(&[8, 8], |_| rng.random_range(-0.3..0.3)),
            DenseTensor::from_fn(&[8, 8], |_| rng.random_range(-0.3..0.3)),
        ],
        Activation::Identity,
    )?;
    println!(
        "general layer with learned propagation: output {:?}",
        coupled.forward(&x)?.shape()
    );
    Ok(())
}
