use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{self, Adjacency, GraphFilter};
use crate::tensor::{DenseTensor, TTMatrix};

use super::layers::{Activation, FMGTNCache, FMGTNLayer};
use super::{ModelError, Result};

/// Buy and sell action values.
pub const ACTIONS: usize = 2;

/// Architecture of the three-layer Q-network.
///
/// The TT dense layer's input factorization is always the extractor output
/// shape `(J_1, I_1, I_2)`; its output factorization and ranks are free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSpec {
    pub input_features: usize,
    pub hidden_features: usize,
    pub lags: usize,
    pub nodes: usize,
    pub dense_out_modes: Vec<usize>,
    pub tt_ranks: Vec<usize>,
}

impl Default for AgentSpec {
    fn default() -> Self {
        Self {
            input_features: 4,
            hidden_features: 16,
            lags: 30,
            nodes: 9,
            dense_out_modes: vec![3, 3, 3],
            tt_ranks: vec![1, 2, 2, 1],
        }
    }
}

impl AgentSpec {
    pub fn input_shape(&self) -> [usize; 3] {
        [self.input_features, self.lags, self.nodes]
    }

    pub fn dense_in_modes(&self) -> [usize; 3] {
        [self.hidden_features, self.lags, self.nodes]
    }

    pub fn dense_units(&self) -> usize {
        self.dense_out_modes.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.input_features, self.hidden_features, self.lags, self.nodes];
        if dims.contains(&0) {
            return Err(ModelError::InvalidSpec("layer sizes must be positive".into()));
        }
        if self.dense_out_modes.len() != 3 || self.dense_out_modes.contains(&0) {
            return Err(ModelError::InvalidSpec(format!(
                "dense output factorization needs 3 positive modes, got {:?}",
                self.dense_out_modes
            )));
        }
        let r = &self.tt_ranks;
        if r.len() != 4 || r[0] != 1 || r[3] != 1 || r.contains(&0) {
            return Err(ModelError::InvalidSpec(format!(
                "TT ranks must read (1, R_1, R_2, 1), got {r:?}"
            )));
        }
        Ok(())
    }

    /// Closed form: `J_1 J_0 + sum_k R_{k-1} J^out_k J^in_k R_k + H + 2 H + 2`
    /// with `H = prod J^out_k`.
    pub fn param_count(&self) -> usize {
        let ins = self.dense_in_modes();
        let tt: usize = (0..3)
            .map(|k| self.tt_ranks[k] * self.dense_out_modes[k] * ins[k] * self.tt_ranks[k + 1])
            .sum();
        let h = self.dense_units();
        self.hidden_features * self.input_features + tt + h + ACTIONS * h + ACTIONS
    }
}

/// Q-network: fMGTN extractor (ReLU) -> flatten -> TT dense + bias (ReLU) ->
/// dense + bias (linear, two action values).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNetwork {
    spec: AgentSpec,
    extractor: FMGTNLayer,
    hidden: TTMatrix,
    hidden_bias: DenseTensor,
    output_weight: DenseTensor,
    output_bias: DenseTensor,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    extractor: FMGTNCache,
    features: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    q: [f64; ACTIONS],
}

impl ForwardCache {
    pub fn q(&self) -> [f64; ACTIONS] {
        self.q
    }

    pub fn hidden_activation(&self) -> &[f64] {
        &self.hidden
    }
}

/// One gradient array per trainable array, in [`AgentNetwork::param_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    names: Vec<String>,
    arrays: Vec<DenseTensor>,
}

impl GradientSet {
    pub fn new(names: Vec<String>, arrays: Vec<DenseTensor>) -> Self {
        assert_eq!(names.len(), arrays.len(), "one name per gradient array");
        Self { names, arrays }
    }

    pub fn zeros_like(net: &AgentNetwork) -> Self {
        let (names, arrays) = net
            .params()
            .into_iter()
            .map(|(n, p)| (n, DenseTensor::zeros(p.shape())))
            .unzip();
        Self { names, arrays }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn arrays(&self) -> &[DenseTensor] {
        &self.arrays
    }

    pub fn get(&self, name: &str) -> Option<&DenseTensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.arrays[i])
    }

    pub fn accumulate(&mut self, other: &GradientSet) {
        for (a, b) in self.arrays.iter_mut().zip(&other.arrays) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.arrays.iter().all(|a| a.data().iter().all(|&v| v == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.arrays.iter().all(|a| a.data().iter().all(|v| v.is_finite()))
    }
}

impl AgentNetwork {
    /// Zero-initialized network over the given time and currency adjacencies.
    pub fn new(spec: AgentSpec, time: &Adjacency, nodes: &Adjacency) -> Result<Self> {
        Self::with_filters(spec, graph::shift_filter(time), graph::shift_filter(nodes))
    }

    pub fn with_filters(spec: AgentSpec, time: GraphFilter, nodes: GraphFilter) -> Result<Self> {
        spec.validate()?;
        if time.nodes() != spec.lags || nodes.nodes() != spec.nodes {
            return Err(ModelError::InvalidSpec(format!(
                "filters cover ({}, {}) vertices but the network expects ({}, {})",
                time.nodes(),
                nodes.nodes(),
                spec.lags,
                spec.nodes
            )));
        }
        let extractor = FMGTNLayer::new(
            vec![time, nodes],
            DenseTensor::zeros(&[spec.hidden_features, spec.input_features]),
            Activation::Relu,
        )?;
        let hidden = TTMatrix::zeros(&spec.dense_out_modes, &spec.dense_in_modes(), &spec.tt_ranks)?;
        let h = spec.dense_units();
        Ok(Self {
            extractor,
            hidden,
            hidden_bias: DenseTensor::zeros(&[h]),
            output_weight: DenseTensor::zeros(&[ACTIONS, h]),
            output_bias: DenseTensor::zeros(&[ACTIONS]),
            spec,
        })
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    pub fn extractor(&self) -> &FMGTNLayer {
        &self.extractor
    }

    pub fn hidden(&self) -> &TTMatrix {
        &self.hidden
    }

    /// Names of the trainable arrays, in optimizer order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["extractor.weight".to_string()];
        names.extend((0..self.hidden.cores().len()).map(|k| format!("hidden.core{k}")));
        names.extend(["hidden.bias", "output.weight", "output.bias"].map(String::from));
        names
    }

    pub fn params(&self) -> Vec<(String, &DenseTensor)> {
        let arrays = std::iter::once(self.extractor.weight())
            .chain(self.hidden.cores())
            .chain([&self.hidden_bias, &self.output_weight, &self.output_bias]);
        self.param_names().into_iter().zip(arrays).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut DenseTensor> {
        let mut out = vec![self.extractor.weight_mut()];
        out.extend(self.hidden.cores_mut().iter_mut());
        out.push(&mut self.hidden_bias);
        out.push(&mut self.output_weight);
        out.push(&mut self.output_bias);
        out
    }

    /// Runtime count of every scalar the optimizer updates.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Overwrites parameters with those of `other`; the architecture must match.
    pub fn copy_params_from(&mut self, other: &AgentNetwork) -> Result<()> {
        if self.spec != other.spec {
            return Err(ModelError::InvalidSpec("architecture mismatch".into()));
        }
        let src: Vec<DenseTensor> = other.params().into_iter().map(|(_, p)| p.clone()).collect();
        for (dst, s) in self.params_mut().into_iter().zip(src) {
            *dst = s;
        }
        Ok(())
    }

    /// Replaces one named array, rejecting shape changes.
    pub fn set_param(&mut self, name: &str, value: DenseTensor) -> Result<()> {
        let idx = self
            .param_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ModelError::UnknownParam(name.to_string()))?;
        let slot = self.params_mut().swap_remove(idx);
        if slot.shape() != value.shape() {
            return Err(ModelError::Shape {
                what: name.to_string(),
                expected: slot.shape().to_vec(),
                actual: value.shape().to_vec(),
            });
        }
        *slot = value;
        Ok(())
    }

    /// Deterministic initialization. Dense matrices draw from
    /// `U(-sqrt(6 / (fan_in + fan_out)), +..)`. TT cores use a common uniform
    /// scale chosen so entries of the reconstructed matrix have variance
    /// `2 / (fan_in + fan_out)`. Biases start at zero.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let glorot = |t: &mut DenseTensor, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in t.data_mut() {
                *v = rng.random_range(-limit..limit);
            }
        };
        let (j1, j0) = (self.spec.hidden_features, self.spec.input_features);
        glorot(self.extractor.weight_mut(), j0, j1, &mut rng);

        let (rows, cols) = (self.hidden.rows(), self.hidden.cols());
        let target_var = 2.0 / (rows + cols) as f64;
        let d = self.hidden.cores().len();
        let rank_paths: usize = self.spec.tt_ranks[1..d].iter().product();
        let core_var = (target_var / rank_paths as f64).powf(1.0 / d as f64);
        let limit = (3.0 * core_var).sqrt();
        for core in self.hidden.cores_mut() {
            for v in core.data_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
        let h = self.spec.dense_units();
        glorot(&mut self.output_weight, h, ACTIONS, &mut rng);
        self.hidden_bias = DenseTensor::zeros(&[h]);
        self.output_bias = DenseTensor::zeros(&[ACTIONS]);
    }

    fn check_input(&self, x: &DenseTensor) -> Result<()> {
        let expected = self.spec.input_shape().to_vec();
        if x.shape() != expected.as_slice() {
            return Err(ModelError::Shape {
                what: "agent input".into(),
                expected,
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<[f64; ACTIONS]> {
        Ok(self.forward_cached(x)?.q)
    }

    pub fn forward_cached(&self, x: &DenseTensor) -> Result<ForwardCache> {
        self.check_input(x)?;
        let (features, extractor) = self.extractor.forward_cached(x)?;
        let features = features.into_data();
        let mut hidden_pre = self.hidden.matvec_flat(&features);
        for (z, b) in hidden_pre.iter_mut().zip(self.hidden_bias.data()) {
            *z += b;
        }
        let hidden: Vec<f64> = hidden_pre.iter().map(|&z| z.max(0.0)).collect();
        let h = hidden.len();
        let w = self.output_weight.data();
        let mut q = [0.0; ACTIONS];
        for (a, qa) in q.iter_mut().enumerate() {
            *qa = self.output_bias.data()[a]
                + hidden
                    .iter()
                    .enumerate()
                    .map(|(k, g)| w[a + ACTIONS * k] * g)
                    .sum::<f64>();
        }
        debug_assert_eq!(h, self.spec.dense_units());
        Ok(ForwardCache {
            extractor,
            features,
            hidden_pre,
            hidden,
            q,
        })
    }

    /// Reverse-mode gradients of `sum_a dq[a] Q_a` for every trainable array.
    /// Graph filters are fixed and receive none.
    pub fn backward(&self, cache: &ForwardCache, dq: [f64; ACTIONS]) -> Result<GradientSet> {
        let h = self.spec.dense_units();
        if cache.hidden.len() != h || cache.features.len() != self.hidden.cols() {
            return Err(ModelError::CacheMismatch);
        }
        let mut grads = GradientSet::zeros_like(self);
        let n_cores = self.hidden.cores().len();
        let (i_hb, i_ow, i_ob) = (1 + n_cores, 2 + n_cores, 3 + n_cores);

        grads.arrays[i_ob].data_mut().copy_from_slice(&dq);
        let w = self.output_weight.data();
        let mut d_hidden = vec![0.0; h];
        {
            let dw = grads.arrays[i_ow].data_mut();
            for k in 0..h {
                for a in 0..ACTIONS {
                    dw[a + ACTIONS * k] = dq[a] * cache.hidden[k];
                    d_hidden[k] += w[a + ACTIONS * k] * dq[a];
                }
            }
        }
        for (d, &z) in d_hidden.iter_mut().zip(&cache.hidden_pre) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        grads.arrays[i_hb].data_mut().copy_from_slice(&d_hidden);

        if d_hidden.iter().all(|&v| v == 0.0) {
            return Ok(grads);
        }
        let (d_cores, d_features) = self.hidden.matvec_backward(&cache.features, &d_hidden);
        for (k, dc) in d_cores.into_iter().enumerate() {
            grads.arrays[1 + k] = dc;
        }
        let upstream = DenseTensor::from_parts(self.extractor.output_shape(), d_features);
        let (d_w, _) = self.extractor.backward(&cache.extractor, &upstream, false)?;
        grads.arrays[0] = d_w;
        Ok(grads)
    }

    /// The TT dense layer as an explicit matrix, for cross-checks.
    pub fn dense_hidden_matrix(&self) -> DenseTensor {
        self.hidden.to_dense()
    }

    pub fn hidden_bias(&self) -> &DenseTensor {
        &self.hidden_bias
    }

    pub fn output_weight(&self) -> &DenseTensor {
        &self.output_weight
    }

    pub fn output_bias(&self) -> &DenseTensor {
        &self.output_bias
    }
}
