use crate::graph::{self, Adjacency, GraphFilter};
use crate::tensor::{self, DenseTensor};

use super::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: &DenseTensor) -> DenseTensor {
        match self {
            Activation::Identity => x.clone(),
            Activation::Relu => {
                let data = x.data().iter().map(|&v| v.max(0.0)).collect();
                DenseTensor::from_parts(x.shape().to_vec(), data)
            }
        }
    }

    /// Multiplies `grad` by the derivative at `pre`; ReLU'(0) = 0.
    pub fn backprop(self, pre: &DenseTensor, grad: &DenseTensor) -> DenseTensor {
        match self {
            Activation::Identity => grad.clone(),
            Activation::Relu => {
                let data = pre
                    .data()
                    .iter()
                    .zip(grad.data())
                    .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
                    .collect();
                DenseTensor::from_parts(grad.shape().to_vec(), data)
            }
        }
    }
}

/// General multi-graph tensor network layer.
///
/// For every graph domain `m` the feature mode is transformed by `W^(m)` and
/// then filtered jointly over (feature, vertex) by the order-4 filter
/// `F^(m) = fold(I + A^(m) ⊗ P^(m))`. Input `(J_0, I_1, .., I_M)`, output
/// `(J_M, I_1, .., I_M)`.
#[derive(Debug, Clone)]
pub struct GMGTNLayer {
    adjacencies: Vec<Adjacency>,
    weights: Vec<DenseTensor>,
    propagations: Vec<DenseTensor>,
    filters: Vec<GraphFilter>,
    activation: Activation,
    filter_cap: usize,
}

#[derive(Debug, Clone)]
pub struct GMGTNCache {
    /// Input of each feature transform.
    before_weight: Vec<DenseTensor>,
    /// Input of each filter contraction.
    before_filter: Vec<DenseTensor>,
    pre_activation: DenseTensor,
}

#[derive(Debug, Clone)]
pub struct GMGTNGradients {
    pub weights: Vec<DenseTensor>,
    pub propagations: Vec<DenseTensor>,
    pub input: DenseTensor,
}

/// Contracts `filter` (J, I_m, J, I_m) against `t`'s feature mode and graph
/// mode `m`, then restores the `(J, I_1, .., I_M)` mode order.
fn filter_step(filter: &DenseTensor, t: &DenseTensor, m: usize) -> Result<DenseTensor> {
    let graph_mode = m + 1;
    let z = tensor::contract(filter, &[2, 3], t, &[0, graph_mode])?;
    // z modes: (J, I_m, I_1, .., I_{m-1}, I_{m+1}, ..)
    let order = t.order();
    let perm: Vec<usize> = (0..order)
        .map(|d| match d {
            0 => 0,
            d if d == graph_mode => 1,
            d if d < graph_mode => d + 1,
            d => d,
        })
        .collect();
    Ok(tensor::permute(&z, &perm)?)
}

fn transpose_filter(filter: &DenseTensor) -> DenseTensor {
    tensor::permute(filter, &[2, 3, 0, 1]).expect("order-4 filter")
}

/// `a · b^T` for two tensors sharing every mode but the first.
fn outer_over_first(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    let rest: Vec<usize> = (1..a.order()).collect();
    Ok(tensor::contract(a, &rest, b, &rest)?)
}

impl GMGTNLayer {
    pub fn new(
        adjacencies: Vec<Adjacency>,
        weights: Vec<DenseTensor>,
        propagations: Vec<DenseTensor>,
        activation: Activation,
    ) -> Result<Self> {
        let m = adjacencies.len();
        if m == 0 || weights.len() != m || propagations.len() != m {
            return Err(ModelError::InvalidSpec(format!(
                "gMGTN needs one weight and one propagation matrix per graph: {} graphs, {} weights, {} propagations",
                m,
                weights.len(),
                propagations.len()
            )));
        }
        for k in 0..m {
            let ws = weights[k].shape();
            if ws.len() != 2 {
                return Err(ModelError::InvalidSpec(format!("W^({}) must be a matrix", k + 1)));
            }
            if k > 0 && ws[1] != weights[k - 1].shape()[0] {
                return Err(ModelError::InvalidSpec(format!(
                    "W^({}) expects {} input features but W^({}) produces {}",
                    k + 1,
                    ws[1],
                    k,
                    weights[k - 1].shape()[0]
                )));
            }
            if propagations[k].shape() != [ws[0], ws[0]] {
                return Err(ModelError::InvalidSpec(format!(
                    "P^({}) must be {}x{}",
                    k + 1,
                    ws[0],
                    ws[0]
                )));
            }
        }
        let mut layer = Self {
            adjacencies,
            weights,
            propagations,
            filters: Vec::new(),
            activation,
            filter_cap: graph::DEFAULT_FILTER_CAP,
        };
        layer.rebuild_filters()?;
        Ok(layer)
    }

    /// Recomputes every `F^(m)` from the current `(A^(m), P^(m))`.
    pub fn rebuild_filters(&mut self) -> Result<()> {
        self.filters = self
            .adjacencies
            .iter()
            .zip(&self.propagations)
            .map(|(a, p)| graph::multilinear_filter(a, p, self.filter_cap))
            .collect::<std::result::Result<_, _>>()?;
        Ok(())
    }

    pub fn domains(&self) -> usize {
        self.adjacencies.len()
    }

    pub fn weights(&self) -> &[DenseTensor] {
        &self.weights
    }

    pub fn propagations(&self) -> &[DenseTensor] {
        &self.propagations
    }

    pub fn filters(&self) -> &[GraphFilter] {
        &self.filters
    }

    /// Replaces the trainable arrays and rebuilds the filters.
    pub fn set_params(&mut self, weights: Vec<DenseTensor>, propagations: Vec<DenseTensor>) -> Result<()> {
        for (old, new) in self
            .weights
            .iter()
            .zip(&weights)
            .chain(self.propagations.iter().zip(&propagations))
        {
            new.expect_shape(old.shape())?;
        }
        if weights.len() != self.weights.len() || propagations.len() != self.propagations.len() {
            return Err(ModelError::InvalidSpec("parameter count changed".into()));
        }
        self.weights = weights;
        self.propagations = propagations;
        self.rebuild_filters()
    }

    pub fn input_shape(&self) -> Vec<usize> {
        std::iter::once(self.weights[0].shape()[1])
            .chain(self.adjacencies.iter().map(Adjacency::nodes))
            .collect()
    }

    fn check_input(&self, x: &DenseTensor) -> Result<()> {
        let expected = self.input_shape();
        if x.shape() != expected.as_slice() {
            return Err(ModelError::Shape {
                what: "gMGTN input".into(),
                expected,
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<DenseTensor> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &DenseTensor) -> Result<(DenseTensor, GMGTNCache)> {
        self.check_input(x)?;
        let mut before_weight = Vec::with_capacity(self.domains());
        let mut before_filter = Vec::with_capacity(self.domains());
        let mut t = x.clone();
        for (m, (w, f)) in self.weights.iter().zip(&self.filters).enumerate() {
            let tw = tensor::contract(w, &[1], &t, &[0])?;
            let next = filter_step(f.tensor(), &tw, m)?;
            before_weight.push(t);
            before_filter.push(tw);
            t = next;
        }
        let y = self.activation.apply(&t);
        Ok((
            y,
            GMGTNCache {
                before_weight,
                before_filter,
                pre_activation: t,
            },
        ))
    }

    /// Reverse-mode gradients of `<upstream, forward(x)>`.
    ///
    /// `dP^(m)[j, j'] = sum A^(m)[i, i'] dZ[j, .., i, ..] T[j', .., i', ..]`, the
    /// only part of the filter that depends on `P^(m)`.
    pub fn backward(&self, cache: &GMGTNCache, upstream: &DenseTensor) -> Result<GMGTNGradients> {
        upstream.expect_shape(cache.pre_activation.shape())?;
        let m_count = self.domains();
        let mut grad = self.activation.backprop(&cache.pre_activation, upstream);
        let mut d_weights = vec![DenseTensor::scalar(0.0); m_count];
        let mut d_props = vec![DenseTensor::scalar(0.0); m_count];
        for m in (0..m_count).rev() {
            let tw = &cache.before_filter[m];
            let mixed = tensor::mode_product(tw, self.adjacencies[m].weights(), m + 1)?;
            d_props[m] = outer_over_first(&grad, &mixed)?;
            let d_tw = filter_step(&transpose_filter(self.filters[m].tensor()), &grad, m)?;
            d_weights[m] = outer_over_first(&d_tw, &cache.before_weight[m])?;
            grad = tensor::contract(&self.weights[m], &[0], &d_tw, &[0])?;
        }
        Ok(GMGTNGradients {
            weights: d_weights,
            propagations: d_props,
            input: grad,
        })
    }
}

/// Fast multi-graph tensor network layer: one feature transform `W^(x)`
/// followed by a shift filter `I + A^(m)` along every graph mode.
///
/// Each filter is applied as a mode product that keeps the `(J_1, I_1, ..,
/// I_M)` mode order. The chained `x_2^{m+1}` contractions of the reduced
/// forward pass produce the same entries with the modes cyclically rotated.
#[derive(Debug, Clone, PartialEq)]
pub struct FMGTNLayer {
    filters: Vec<GraphFilter>,
    weight: DenseTensor,
    activation: Activation,
}

#[derive(Debug, Clone)]
pub struct FMGTNCache {
    input: DenseTensor,
    pre_activation: DenseTensor,
}

impl FMGTNCache {
    pub fn pre_activation(&self) -> &DenseTensor {
        &self.pre_activation
    }
}

impl FMGTNLayer {
    pub fn new(filters: Vec<GraphFilter>, weight: DenseTensor, activation: Activation) -> Result<Self> {
        if weight.order() != 2 {
            return Err(ModelError::InvalidSpec("W^(x) must be a matrix".into()));
        }
        for (m, f) in filters.iter().enumerate() {
            if !matches!(f, GraphFilter::Shift(_)) {
                return Err(ModelError::InvalidSpec(format!(
                    "fMGTN filter {} must be a shift filter",
                    m + 1
                )));
            }
        }
        Ok(Self {
            filters,
            weight,
            activation,
        })
    }

    /// Builds the shift filters `I + A^(m)` from adjacencies.
    pub fn from_adjacencies(adjacencies: &[Adjacency], weight: DenseTensor, activation: Activation) -> Result<Self> {
        Self::new(
            adjacencies.iter().map(graph::shift_filter).collect(),
            weight,
            activation,
        )
    }

    pub fn weight(&self) -> &DenseTensor {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut DenseTensor {
        &mut self.weight
    }

    pub fn filters(&self) -> &[GraphFilter] {
        &self.filters
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_shape(&self) -> Vec<usize> {
        std::iter::once(self.weight.shape()[1])
            .chain(self.filters.iter().map(GraphFilter::nodes))
            .collect()
    }

    pub fn output_shape(&self) -> Vec<usize> {
        std::iter::once(self.weight.shape()[0])
            .chain(self.filters.iter().map(GraphFilter::nodes))
            .collect()
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<DenseTensor> {
        Ok(self.activation.apply(&self.linear(x)?))
    }

    pub fn forward_cached(&self, x: &DenseTensor) -> Result<(DenseTensor, FMGTNCache)> {
        let pre = self.linear(x)?;
        let y = self.activation.apply(&pre);
        Ok((
            y,
            FMGTNCache {
                input: x.clone(),
                pre_activation: pre,
            },
        ))
    }

    fn linear(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let expected = self.input_shape();
        if x.shape() != expected.as_slice() {
            return Err(ModelError::Shape {
                what: "fMGTN input".into(),
                expected,
                actual: x.shape().to_vec(),
            });
        }
        let mut t = tensor::mode_product(x, &self.weight, 0)?;
        for (m, f) in self.filters.iter().enumerate() {
            t = tensor::mode_product(&t, f.tensor(), m + 1)?;
        }
        Ok(t)
    }

    /// Gradient of `<upstream, forward(x)>` w.r.t. `W^(x)` and, when
    /// `want_input` is set, w.r.t. `x`.
    pub fn backward(
        &self,
        cache: &FMGTNCache,
        upstream: &DenseTensor,
        want_input: bool,
    ) -> Result<(DenseTensor, Option<DenseTensor>)> {
        upstream.expect_shape(cache.pre_activation.shape())?;
        let mut g = self.activation.backprop(&cache.pre_activation, upstream);
        for (m, f) in self.filters.iter().enumerate().rev() {
            g = tensor::mode_product(&g, &f.tensor().transpose()?, m + 1)?;
        }
        let d_weight = outer_over_first(&g, &cache.input)?;
        let d_input = if want_input {
            Some(tensor::mode_product(&g, &self.weight.transpose()?, 0)?)
        } else {
            None
        };
        Ok((d_weight, d_input))
    }
}
