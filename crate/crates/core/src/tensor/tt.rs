//! Tensor-train tensors and matrices.
//!
//! A TT tensor stores order-3 cores `(R_{n-1}, I_n, R_n)` with unit boundary
//! ranks. A TT matrix stores order-4 cores `(R_{k-1}, J^out_k, J^in_k, R_k)`;
//! row and column indices of the represented matrix are the Little-Endian
//! composites of the output and input mode indices.

use super::index;
use super::{contract, permute, DenseTensor, Result, TensorError};

/// Rank selection for [`tt_svd`].
#[derive(Debug, Clone, PartialEq)]
pub enum Truncation {
    /// Keep every numerically nonzero singular value.
    Exact,
    /// Upper bounds for the interior ranks `R_1..R_{N-1}`.
    MaxRanks(Vec<usize>),
    /// Relative Frobenius error budget in `(0, 1)`.
    Tolerance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTTensor {
    cores: Vec<DenseTensor>,
}

fn check_chain(cores: &[DenseTensor], core_order: usize) -> Result<()> {
    if cores.is_empty() {
        return Err(TensorError::Empty);
    }
    for (k, c) in cores.iter().enumerate() {
        if c.order() != core_order {
            return Err(TensorError::InvalidRanks(format!(
                "core {k} has order {}, expected {core_order}",
                c.order()
            )));
        }
    }
    if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[core_order - 1] != 1 {
        return Err(TensorError::InvalidRanks("boundary ranks must be 1".into()));
    }
    for k in 1..cores.len() {
        let left = cores[k - 1].shape()[core_order - 1];
        let right = cores[k].shape()[0];
        if left != right {
            return Err(TensorError::InvalidRanks(format!(
                "core {} trailing rank {left} != core {k} leading rank {right}",
                k - 1
            )));
        }
    }
    Ok(())
}

impl TTTensor {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        check_chain(&cores, 3)?;
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    /// `(R_0, ..., R_N)`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.cores.iter().map(|c| c.shape()[2]))
            .collect()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }
}

fn select_rank(singular: &[f64], truncation: &Truncation, step: usize, budget_sq: f64) -> usize {
    let full = singular.len();
    let smax = singular.first().copied().unwrap_or(0.0);
    let numerical = singular
        .iter()
        .take_while(|&&s| s > smax * 1e-14 * full as f64)
        .count()
        .max(1);
    match truncation {
        Truncation::Exact => numerical,
        Truncation::MaxRanks(caps) => numerical.min(caps[step]).max(1),
        Truncation::Tolerance(_) => {
            // smallest r whose discarded tail energy fits the per-step budget
            let mut tail = 0.0;
            let mut r = full;
            while r > 1 {
                let s = singular[r - 1];
                if tail + s * s > budget_sq {
                    break;
                }
                tail += s * s;
                r -= 1;
            }
            r
        }
    }
}

/// Sequential-SVD TT decomposition.
///
/// In tolerance mode each of the `N - 1` unfoldings may discard tail energy up
/// to `(tau / sqrt(N - 1))^2 * ||x||_F^2`, which bounds the relative
/// reconstruction error by `tau`.
pub fn tt_svd(x: &DenseTensor, truncation: &Truncation) -> Result<TTTensor> {
    let order = x.order();
    if order == 0 {
        return Err(TensorError::Empty);
    }
    let shape = x.shape().to_vec();
    match truncation {
        Truncation::MaxRanks(caps) => {
            if caps.len() != order - 1 || caps.contains(&0) {
                return Err(TensorError::InvalidRanks(format!(
                    "expected {} positive interior ranks, got {caps:?}",
                    order - 1
                )));
            }
        }
        Truncation::Tolerance(tau) => {
            if !(*tau > 0.0 && *tau < 1.0) {
                return Err(TensorError::InvalidTolerance(*tau));
            }
        }
        Truncation::Exact => {}
    }
    let budget_sq = match truncation {
        Truncation::Tolerance(tau) if order > 1 => {
            let delta = tau / ((order - 1) as f64).sqrt() * x.frobenius_norm();
            delta * delta
        }
        _ => 0.0,
    };

    let mut cores = Vec::with_capacity(order);
    let mut rank = 1usize;
    let mut remainder: Vec<f64> = x.data().to_vec();
    for (step, &mode) in shape.iter().enumerate().take(order - 1) {
        let rows = rank * mode;
        let cols = remainder.len() / rows;
        let mat = faer::MatRef::from_column_major_slice(&remainder, rows, cols);
        let svd = mat
            .thin_svd()
            .map_err(|e| TensorError::Numerical(format!("svd did not converge: {e:?}")))?;
        let (u, v) = (svd.U(), svd.V());
        let singular: Vec<f64> = svd.S().column_vector().iter().copied().collect();
        debug_assert!(singular.windows(2).all(|w| w[0] >= w[1]));
        let r = select_rank(&singular, truncation, step, budget_sq);

        let mut core = Vec::with_capacity(rows * r);
        for j in 0..r {
            core.extend(u.col(j).iter());
        }
        cores.push(DenseTensor::from_parts(vec![rank, mode, r], core));

        let mut next = Vec::with_capacity(r * cols);
        for c in 0..cols {
            for j in 0..r {
                next.push(singular[j] * v[(c, j)]);
            }
        }
        remainder = next;
        rank = r;
    }
    let last = shape[order - 1];
    cores.push(DenseTensor::from_parts(vec![rank, last, 1], remainder));
    TTTensor::new(cores)
}

/// Contracts the core chain back into a dense tensor of shape `(I_1, ..., I_N)`.
pub fn tt_reconstruct(t: &TTTensor) -> DenseTensor {
    let mut acc = t.cores[0].clone();
    for core in &t.cores[1..] {
        let last = acc.order() - 1;
        acc = contract(&acc, &[last], core, &[0]).expect("rank chain validated at construction");
    }
    acc.into_reshaped(&t.mode_sizes()).expect("boundary ranks are one")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTMatrix {
    out_modes: Vec<usize>,
    in_modes: Vec<usize>,
    cores: Vec<DenseTensor>,
}

impl TTMatrix {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        check_chain(&cores, 4)?;
        let out_modes = cores.iter().map(|c| c.shape()[1]).collect();
        let in_modes = cores.iter().map(|c| c.shape()[2]).collect();
        Ok(Self {
            out_modes,
            in_modes,
            cores,
        })
    }

    /// All-zero TT matrix; `ranks` is the full list `(R_0, .., R_d)`.
    pub fn zeros(out_modes: &[usize], in_modes: &[usize], ranks: &[usize]) -> Result<Self> {
        let d = out_modes.len();
        if in_modes.len() != d || ranks.len() != d + 1 || d == 0 {
            return Err(TensorError::InvalidRanks(format!(
                "{d} output modes, {} input modes, {} ranks",
                in_modes.len(),
                ranks.len()
            )));
        }
        if ranks.contains(&0) || out_modes.iter().chain(in_modes).any(|&m| m == 0) {
            return Err(TensorError::InvalidRanks("ranks and modes must be positive".into()));
        }
        let cores = (0..d)
            .map(|k| DenseTensor::zeros(&[ranks[k], out_modes[k], in_modes[k], ranks[k + 1]]))
            .collect();
        Self::new(cores)
    }

    /// Rank-one TT form of the identity: every core is a 2-D identity slice.
    pub fn identity(modes: &[usize]) -> Result<Self> {
        let cores = modes
            .iter()
            .map(|&m| {
                let mut c = DenseTensor::zeros(&[1, m, m, 1]);
                for i in 0..m {
                    c.set(&[0, i, i, 0], 1.0);
                }
                c
            })
            .collect();
        Self::new(cores)
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    /// Mutable cores; shapes must be left unchanged.
    pub fn cores_mut(&mut self) -> &mut [DenseTensor] {
        &mut self.cores
    }

    pub fn out_modes(&self) -> &[usize] {
        &self.out_modes
    }

    pub fn in_modes(&self) -> &[usize] {
        &self.in_modes
    }

    pub fn rows(&self) -> usize {
        index::numel(&self.out_modes)
    }

    pub fn cols(&self) -> usize {
        index::numel(&self.in_modes)
    }

    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1)
            .chain(self.cores.iter().map(|c| c.shape()[3]))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }

    /// Dense `(rows, cols)` matrix, built by contracting the core chain.
    pub fn to_dense(&self) -> DenseTensor {
        let mut acc = self.cores[0].clone();
        for core in &self.cores[1..] {
            let last = acc.order() - 1;
            acc = contract(&acc, &[last], core, &[0]).expect("rank chain validated");
        }
        // acc modes: (1, o_1, i_1, o_2, i_2, ..., o_d, i_d, 1)
        let d = self.cores.len();
        let perm: Vec<usize> = std::iter::once(0)
            .chain((0..d).map(|k| 1 + 2 * k))
            .chain((0..d).map(|k| 2 + 2 * k))
            .chain(std::iter::once(2 * d + 1))
            .collect();
        permute(&acc, &perm)
            .expect("valid permutation")
            .into_reshaped(&[self.rows(), self.cols()])
            .expect("sizes agree")
    }

    fn check_input(&self, x: &DenseTensor) -> Result<()> {
        let flat_ok = x.order() == 1 && x.len() == self.cols();
        if !flat_ok && x.shape() != self.in_modes.as_slice() {
            return Err(TensorError::ShapeMismatch {
                expected: self.in_modes.clone(),
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Left-to-right sweep states `S_0 = x, S_1, .., S_d`, with `S_k` laid out
    /// as `(prod out_{<k}, R_k, prod in_{>=k})`.
    fn sweep(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let d = self.cores.len();
        let mut states = Vec::with_capacity(d + 1);
        states.push(x.to_vec());
        let mut a = 1;
        for k in 0..d {
            let dims = self.step_dims(k, a);
            let next = sweep_step(&states[k], self.cores[k].data(), dims);
            states.push(next);
            a *= self.out_modes[k];
        }
        states
    }

    fn step_dims(&self, k: usize, a: usize) -> StepDims {
        let s = self.cores[k].shape();
        StepDims {
            a,
            r: s[0],
            i: s[2],
            b: index::numel(&self.in_modes[k + 1..]),
            o: s[1],
            rn: s[3],
        }
    }

    /// Matrix-vector product returned flat (length `rows`).
    pub fn matvec_flat(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols());
        self.sweep(x).pop().expect("at least one core")
    }

    /// Gradients of `<dy, W x>` with respect to every core and to `x`.
    pub fn matvec_backward(&self, x: &[f64], dy: &[f64]) -> (Vec<DenseTensor>, Vec<f64>) {
        debug_assert_eq!(dy.len(), self.rows());
        let states = self.sweep(x);
        let d = self.cores.len();
        let mut a_sizes = Vec::with_capacity(d);
        let mut a = 1;
        for k in 0..d {
            a_sizes.push(a);
            a *= self.out_modes[k];
        }
        let mut grads: Vec<DenseTensor> = self.cores.iter().map(|c| DenseTensor::zeros(c.shape())).collect();
        let mut upstream = dy.to_vec();
        for k in (0..d).rev() {
            let dims = self.step_dims(k, a_sizes[k]);
            let (d_state, d_core) = sweep_step_adjoint(&states[k], self.cores[k].data(), &upstream, dims);
            grads[k].data_mut().copy_from_slice(&d_core);
            upstream = d_state;
        }
        (grads, upstream)
    }
}

#[derive(Clone, Copy)]
struct StepDims {
    a: usize,
    r: usize,
    i: usize,
    b: usize,
    o: usize,
    rn: usize,
}

/// Core as a `(r i) x (o r')` column-major matrix.
fn core_matrix(core: &[f64], d: StepDims) -> Vec<f64> {
    let StepDims { r, i, o, rn, .. } = d;
    let ri = r * i;
    let mut c = vec![0.0; ri * o * rn];
    for rp in 0..rn {
        for ii in 0..i {
            for oo in 0..o {
                for rr in 0..r {
                    c[(rr + r * ii) + ri * (oo + o * rp)] = core[rr + r * (oo + o * (ii + i * rp))];
                }
            }
        }
    }
    c
}

// next[a, o, r', b] = sum_{r, i} state[a, r, i, b] * core[r, o, i, r'],
// one (a x ri) * (ri x orn) block product per b.
fn sweep_step(state: &[f64], core: &[f64], d: StepDims) -> Vec<f64> {
    let StepDims { a, r, i, b, o, rn } = d;
    let (ri, orn) = (r * i, o * rn);
    let c = core_matrix(core, d);
    let mut out = vec![0.0; a * orn * b];
    for bb in 0..b {
        let s = &state[a * ri * bb..a * ri * (bb + 1)];
        let dst = &mut out[a * orn * bb..a * orn * (bb + 1)];
        for q in 0..orn {
            let col = &c[ri * q..ri * (q + 1)];
            if a == 1 {
                dst[q] = s.iter().zip(col).map(|(x, y)| x * y).sum();
                continue;
            }
            for aa in 0..a {
                let mut acc = 0.0;
                for (p, &cv) in col.iter().enumerate() {
                    acc += s[aa + a * p] * cv;
                }
                dst[aa + a * q] = acc;
            }
        }
    }
    out
}

fn sweep_step_adjoint(state: &[f64], core: &[f64], upstream: &[f64], d: StepDims) -> (Vec<f64>, Vec<f64>) {
    let StepDims { a, r, i, b, o, rn } = d;
    let (ri, orn) = (r * i, o * rn);
    let c = core_matrix(core, d);
    let mut d_state = vec![0.0; state.len()];
    let mut d_c = vec![0.0; c.len()];
    for bb in 0..b {
        let s = &state[a * ri * bb..a * ri * (bb + 1)];
        let up = &upstream[a * orn * bb..a * orn * (bb + 1)];
        let ds = &mut d_state[a * ri * bb..a * ri * (bb + 1)];
        for q in 0..orn {
            if a == 1 {
                let u = up[q];
                let col = &c[ri * q..ri * (q + 1)];
                for ((dc, &sv), (dv, &cv)) in d_c[ri * q..ri * (q + 1)].iter_mut().zip(s).zip(ds.iter_mut().zip(col)) {
                    *dc += sv * u;
                    *dv += cv * u;
                }
                continue;
            }
            let u = &up[a * q..a * (q + 1)];
            for p in 0..ri {
                let sp = &s[a * p..a * (p + 1)];
                d_c[p + ri * q] += sp.iter().zip(u).map(|(x, y)| x * y).sum::<f64>();
                let cv = c[p + ri * q];
                for (dv, &uv) in ds[a * p..a * (p + 1)].iter_mut().zip(u) {
                    *dv += cv * uv;
                }
            }
        }
    }
    let mut d_core = vec![0.0; core.len()];
    for rp in 0..rn {
        for ii in 0..i {
            for oo in 0..o {
                for rr in 0..r {
                    d_core[rr + r * (oo + o * (ii + i * rp))] = d_c[(rr + r * ii) + ri * (oo + o * rp)];
                }
            }
        }
    }
    (d_state, d_core)
}

/// Product of a TT matrix with `x` (shaped by the input factorization or flat),
/// returned shaped by the output factorization. The full matrix is never formed.
pub fn tt_matvec(w: &TTMatrix, x: &DenseTensor) -> Result<DenseTensor> {
    w.check_input(x)?;
    let y = w.matvec_flat(x.data());
    Ok(DenseTensor::from_parts(w.out_modes.clone(), y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn rel_err(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.axpy(-1.0, b).unwrap().frobenius_norm() / b.frobenius_norm()
    }

    #[test]
    fn rank_one_tensor_has_unit_ranks() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 1.0, -1.0, 2.0];
        let w = [1.5, -0.7];
        let x = DenseTensor::from_fn(&[3, 4, 2], |i| u[i[0]] * v[i[1]] * w[i[2]]);
        let tt = tt_svd(&x, &Truncation::Exact).unwrap();
        assert_eq!(tt.ranks(), vec![1, 1, 1, 1]);
        assert!(tt_reconstruct(&tt).max_abs_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn untruncated_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random(&[4, 4, 4], &mut rng);
        let tt = tt_svd(&x, &Truncation::Exact).unwrap();
        assert_eq!(tt.ranks(), vec![1, 4, 4, 1]);
        assert!(rel_err(&tt_reconstruct(&tt), &x) < 1e-12);
    }

    #[test]
    fn tolerance_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[6, 6, 6], &mut rng);
        let tt = tt_svd(&x, &Truncation::Tolerance(0.1)).unwrap();
        let err = rel_err(&tt_reconstruct(&tt), &x);
        assert!(err <= 0.1, "error {err}");
        assert!(tt.ranks().iter().any(|&r| r < 6), "tolerance should truncate");
    }

    #[test]
    fn max_ranks_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&[3, 4, 5], &mut rng);
        let tt = tt_svd(&x, &Truncation::MaxRanks(vec![2, 2])).unwrap();
        assert_eq!(tt.ranks(), vec![1, 2, 2, 1]);
    }

    #[test]
    fn invalid_truncations() {
        let x = DenseTensor::zeros(&[2, 2]);
        assert!(matches!(
            tt_svd(&x, &Truncation::Tolerance(1.0)),
            Err(TensorError::InvalidTolerance(_))
        ));
        assert!(tt_svd(&x, &Truncation::MaxRanks(vec![0])).is_err());
        assert!(tt_svd(&x, &Truncation::MaxRanks(vec![1, 1])).is_err());
        assert!(matches!(
            tt_svd(&DenseTensor::scalar(1.0), &Truncation::Exact),
            Err(TensorError::Empty)
        ));
    }

    #[test]
    fn order_one_and_zero_tensor() {
        let x = DenseTensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let tt = tt_svd(&x, &Truncation::Exact).unwrap();
        assert_eq!(tt_reconstruct(&tt), x);
        let z = DenseTensor::zeros(&[2, 3]);
        let tt = tt_svd(&z, &Truncation::Tolerance(0.5)).unwrap();
        assert_eq!(tt_reconstruct(&tt), z);
    }

    #[test]
    fn rank_chain_validation() {
        let bad = vec![DenseTensor::zeros(&[1, 2, 2]), DenseTensor::zeros(&[3, 2, 1])];
        assert!(TTTensor::new(bad).is_err());
        assert!(TTTensor::new(vec![DenseTensor::zeros(&[2, 2, 1])]).is_err());
    }

    #[test]
    fn identity_ttm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = TTMatrix::identity(&[2, 3, 2]).unwrap();
        let x = random(&[2, 3, 2], &mut rng);
        assert_eq!(tt_matvec(&w, &x).unwrap(), x);
        assert_eq!(w.to_dense(), DenseTensor::identity(12));
    }

    #[test]
    fn zero_ttm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = TTMatrix::zeros(&[4, 2], &[2, 3], &[1, 2, 1]).unwrap();
        let x = random(&[2, 3], &mut rng);
        assert!(tt_matvec(&w, &x).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(tt_matvec(&w, &DenseTensor::zeros(&[3, 2])).is_err());
        assert!(tt_matvec(&w, &DenseTensor::zeros(&[6])).is_ok());
    }

    #[test]
    fn matvec_matches_dense_entry_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cores = vec![random(&[1, 4, 2, 2], &mut rng), random(&[2, 2, 3, 1], &mut rng)];
        let w = TTMatrix::new(cores.clone()).unwrap();
        let x = random(&[2, 3], &mut rng);
        let y = tt_matvec(&w, &x).unwrap();
        // W[(o1,o2),(i1,i2)] = sum_r G1[0,o1,i1,r] G2[r,o2,i2,0]
        for o1 in 0..4 {
            for o2 in 0..2 {
                let mut s = 0.0;
                for i1 in 0..2 {
                    for i2 in 0..3 {
                        let mut wv = 0.0;
                        for r in 0..2 {
                            wv += cores[0].get(&[0, o1, i1, r]) * cores[1].get(&[r, o2, i2, 0]);
                        }
                        s += wv * x.get(&[i1, i2]);
                    }
                }
                assert!((y.get(&[o1, o2]) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matvec_backward_matches_dense_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = TTMatrix::new(vec![
            random(&[1, 3, 2, 2], &mut rng),
            random(&[2, 2, 3, 2], &mut rng),
            random(&[2, 2, 2, 1], &mut rng),
        ])
        .unwrap();
        let x = random(&[12], &mut rng);
        let dy = random(&[12], &mut rng);
        let (_, dx) = w.matvec_backward(x.data(), dy.data());
        let dense = w.to_dense();
        let expected = contract(&dense, &[0], &dy, &[0]).unwrap();
        for (a, b) in dx.iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
