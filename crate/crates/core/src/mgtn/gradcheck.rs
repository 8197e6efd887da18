//! Central finite-difference checks of the hand-derived agent gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::DenseTensor;

use super::{AgentNetwork, Result, ACTIONS};

/// Gradients smaller than this are compared absolutely; central differences
/// carry roughly `1e-16 / h` of rounding noise.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradProbe {
    pub array: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

/// Checks `d/dθ sum_a dq[a] Q_a(x)` at `per_array` random coordinates of every
/// trainable array (every coordinate when the array is smaller).
pub fn check_agent(
    net: &AgentNetwork,
    x: &DenseTensor,
    dq: [f64; ACTIONS],
    per_array: usize,
    h: f64,
    seed: u64,
) -> Result<Vec<GradProbe>> {
    let cache = net.forward_cached(x)?;
    let grads = net.backward(&cache, dq)?;
    let objective = |n: &AgentNetwork| -> Result<f64> {
        let q = n.forward(x)?;
        Ok(q.iter().zip(&dq).map(|(q, d)| q * d).sum())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = net.clone();
    let mut out = Vec::new();
    for (a, name) in net.param_names().iter().enumerate() {
        let len = grads.arrays()[a].len();
        let coords: Vec<usize> = if len <= per_array {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, per_array).into_vec()
        };
        for idx in coords {
            let original = probe.params_mut()[a].data()[idx];
            probe.params_mut()[a].data_mut()[idx] = original + h;
            let up = objective(&probe)?;
            probe.params_mut()[a].data_mut()[idx] = original - h;
            let down = objective(&probe)?;
            probe.params_mut()[a].data_mut()[idx] = original;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.arrays()[a].data()[idx];
            out.push(GradProbe {
                array: name.clone(),
                index: idx,
                analytic,
                numeric,
                relative_error: relative_error(analytic, numeric),
            });
        }
    }
    Ok(out)
}
