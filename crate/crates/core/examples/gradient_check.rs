//! Finite-difference check of the Q-network's hand-written gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mgtn::graph::{self, Adjacency};
use mgtn::mgtn::gradcheck;
use mgtn::mgtn::{AgentNetwork, AgentSpec};
use mgtn::tensor::DenseTensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = AgentSpec {
        hidden_features: 3,
        lags: 4,
        nodes: 3,
        ..AgentSpec::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let carry = Adjacency::new(DenseTensor::from_rows(&[
        vec![0.0, 0.4, 0.1],
        vec![0.4, 0.0, 0.7],
        vec![0.1, 0.7, 0.0],
    ])?)?;
    let mut net = AgentNetwork::new(spec.clone(), &graph::time_graph(spec.lags)?, &carry)?;
    net.init_params(11);
    let x = DenseTensor::from_fn(&spec.input_shape(), |_| rng.random_range(-1.0..1.0));

    let probes = gradcheck::check_agent(&net, &x, [1.0, -0.5], 10, 1e-5, 0)?;
    let mut worst: Vec<(String, f64)> = Vec::new();
    for p in &probes {
        match worst.iter_mut().find(|(n, _)| *n == p.array) {
            Some((_, e)) => *e = e.max(p.relative_error),
            None => worst.push((p.array.clone(), p.relative_error)),
        }
    }
    for (name, err) in &worst {
        println!("{name:<16} max relative error {err:.2e}");
    }
    println!("{} probes, floor {:e}", probes.len(), gradcheck::RELATIVE_ERROR_FLOOR);
    Ok(())
}
