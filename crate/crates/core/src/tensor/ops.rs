use super::index;
use super::{DenseTensor, Result, TensorError};

/// Reorders modes so that output mode `d` is input mode `perm[d]`.
pub fn permute(x: &DenseTensor, perm: &[usize]) -> Result<DenseTensor> {
    let order = x.order();
    let mut seen = vec![false; order];
    if perm.len() != order
        || perm
            .iter()
            .any(|&p| p >= order || std::mem::replace(&mut seen[p], true))
    {
        return Err(TensorError::InvalidPermutation(perm.to_vec()));
    }
    if perm.iter().enumerate().all(|(d, &p)| d == p) {
        return Ok(x.clone());
    }
    let in_strides = index::strides(x.shape());
    let out_shape: Vec<usize> = perm.iter().map(|&p| x.shape()[p]).collect();
    let step: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let src = x.data();
    let mut data = Vec::with_capacity(src.len());
    let mut idx = vec![0usize; order];
    let mut off = 0usize;
    loop {
        data.push(src[off]);
        // odometer with incremental source offset
        let mut d = 0;
        loop {
            if d == order {
                return Ok(DenseTensor::from_parts(out_shape, data));
            }
            idx[d] += 1;
            off += step[d];
            if idx[d] < out_shape[d] {
                break;
            }
            off -= step[d] * out_shape[d];
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Column-major (Little-Endian) product of an (m x k) and a (k x n) matrix,
/// both given as flat slices.
pub(crate) fn gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for j in 0..n {
        let col = &mut c[j * m..(j + 1) * m];
        for p in 0..k {
            let bv = b[p + k * j];
            if bv == 0.0 {
                continue;
            }
            let a_col = &a[p * m..(p + 1) * m];
            for (ci, &ai) in col.iter_mut().zip(a_col) {
                *ci += ai * bv;
            }
        }
    }
    c
}

/// Ordinary matrix product of two order-2 tensors.
pub fn matmul(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    contract(a, &[1], b, &[0])
}

fn check_modes(modes: &[usize], order: usize) -> Result<()> {
    for (k, &m) in modes.iter().enumerate() {
        if m >= order {
            return Err(TensorError::ModeOutOfRange { mode: m, order });
        }
        if modes[..k].contains(&m) {
            return Err(TensorError::DuplicateMode(m));
        }
    }
    Ok(())
}

/// Contracts `a` and `b` over the paired modes `modes_a[k] <-> modes_b[k]`.
///
/// The result carries the surviving modes of `a` in their original order,
/// followed by the surviving modes of `b`. With one pair this is the
/// `(m, n)`-contraction; contracting every mode yields an order-0 scalar.
pub fn contract(a: &DenseTensor, modes_a: &[usize], b: &DenseTensor, modes_b: &[usize]) -> Result<DenseTensor> {
    if modes_a.len() != modes_b.len() {
        return Err(TensorError::ModeListLength(modes_a.len(), modes_b.len()));
    }
    check_modes(modes_a, a.order())?;
    check_modes(modes_b, b.order())?;
    for (&ma, &mb) in modes_a.iter().zip(modes_b) {
        if a.shape()[ma] != b.shape()[mb] {
            return Err(TensorError::PairedSize {
                left_mode: ma,
                right_mode: mb,
                left: a.shape()[ma],
                right: b.shape()[mb],
            });
        }
    }

    let surv_a: Vec<usize> = (0..a.order()).filter(|m| !modes_a.contains(m)).collect();
    let surv_b: Vec<usize> = (0..b.order()).filter(|m| !modes_b.contains(m)).collect();

    let perm_a: Vec<usize> = surv_a.iter().chain(modes_a).copied().collect();
    let perm_b: Vec<usize> = modes_b.iter().chain(&surv_b).copied().collect();
    let pa = permute(a, &perm_a)?;
    let pb = permute(b, &perm_b)?;

    let m: usize = surv_a.iter().map(|&d| a.shape()[d]).product();
    let k: usize = modes_a.iter().map(|&d| a.shape()[d]).product();
    let n: usize = surv_b.iter().map(|&d| b.shape()[d]).product();
    let data = gemm(pa.data(), pb.data(), m, k, n);

    let shape: Vec<usize> = surv_a
        .iter()
        .map(|&d| a.shape()[d])
        .chain(surv_b.iter().map(|&d| b.shape()[d]))
        .collect();
    Ok(DenseTensor::from_parts(shape, data))
}

/// Left Kronecker product of two tensors of equal order.
pub fn kron(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != b.order() {
        return Err(TensorError::OrderMismatch(a.order(), b.order()));
    }
    let shape: Vec<usize> = a.shape().iter().zip(b.shape()).map(|(i, j)| i * j).collect();
    let mut out = DenseTensor::zeros(&shape);
    let mut ia = vec![0; a.order()];
    let mut composite = vec![0; a.order()];
    for &av in a.data() {
        let mut ib = vec![0; b.order()];
        for &bv in b.data() {
            for n in 0..composite.len() {
                composite[n] = index::kron_composite(ia[n], ib[n], b.shape()[n]);
            }
            let off = index::ravel(&shape, &composite);
            out.data_mut()[off] = av * bv;
            index::increment(b.shape(), &mut ib);
        }
        index::increment(a.shape(), &mut ia);
    }
    Ok(out)
}

fn check_mode(n: usize, order: usize) -> Result<()> {
    if n >= order {
        return Err(TensorError::ModeOutOfRange { mode: n, order });
    }
    Ok(())
}

/// Mode-`n` matricization: shape `(I_n, prod_{k != n} I_k)`, columns indexed
/// Little-Endian over the remaining modes in ascending order.
pub fn matricize(x: &DenseTensor, n: usize) -> Result<DenseTensor> {
    check_mode(n, x.order())?;
    let perm: Vec<usize> = std::iter::once(n).chain((0..x.order()).filter(|&k| k != n)).collect();
    let rows = x.shape()[n];
    let cols = x.len() / rows;
    permute(x, &perm)?.into_reshaped(&[rows, cols])
}

/// Inverse of [`matricize`] for the same `(target_shape, n)`.
pub fn tensorize(m: &DenseTensor, target_shape: &[usize], n: usize) -> Result<DenseTensor> {
    check_mode(n, target_shape.len())?;
    let rows = target_shape[n];
    let cols = index::numel(target_shape) / rows.max(1);
    if m.shape() != [rows, cols] {
        return Err(TensorError::ShapeMismatch {
            expected: vec![rows, cols],
            actual: m.shape().to_vec(),
        });
    }
    let permuted_shape: Vec<usize> = std::iter::once(rows)
        .chain((0..target_shape.len()).filter(|&k| k != n).map(|k| target_shape[k]))
        .collect();
    let permuted = m.reshape(&permuted_shape)?;
    // position of original mode k inside the permuted layout
    let mut inverse = vec![0; target_shape.len()];
    inverse[n] = 0;
    let mut pos = 1;
    for (k, slot) in inverse.iter_mut().enumerate() {
        if k != n {
            *slot = pos;
            pos += 1;
        }
    }
    permute(&permuted, &inverse)
}

/// Groups the first `split` modes into rows and the rest into columns.
pub fn matricize_grouped(x: &DenseTensor, split: usize) -> Result<DenseTensor> {
    if split > x.order() {
        return Err(TensorError::ModeOutOfRange {
            mode: split,
            order: x.order(),
        });
    }
    let rows = index::numel(&x.shape()[..split]);
    let cols = index::numel(&x.shape()[split..]);
    x.reshape(&[rows, cols])
}

/// Inverse of [`matricize_grouped`]: folds a matrix whose rows index the first
/// `split` modes of `target_shape` and whose columns index the rest.
pub fn tensorize_grouped(m: &DenseTensor, target_shape: &[usize], split: usize) -> Result<DenseTensor> {
    if split > target_shape.len() {
        return Err(TensorError::ModeOutOfRange {
            mode: split,
            order: target_shape.len(),
        });
    }
    let expected = vec![
        index::numel(&target_shape[..split]),
        index::numel(&target_shape[split..]),
    ];
    if m.shape() != expected.as_slice() {
        return Err(TensorError::ShapeMismatch {
            expected,
            actual: m.shape().to_vec(),
        });
    }
    m.reshape(target_shape)
}

/// Mode-`n` product with a matrix `u` of shape `(P, I_n)`:
/// `y[.., p, ..] = sum_i u[p, i] x[.., i, ..]`, all other modes left in place.
pub fn mode_product(x: &DenseTensor, u: &DenseTensor, n: usize) -> Result<DenseTensor> {
    check_mode(n, x.order())?;
    if u.order() != 2 || u.shape()[1] != x.shape()[n] {
        return Err(TensorError::PairedSize {
            left_mode: 1,
            right_mode: n,
            left: *u.shape().get(1).unwrap_or(&0),
            right: x.shape()[n],
        });
    }
    let inner: usize = x.shape()[..n].iter().product();
    let outer: usize = x.shape()[n + 1..].iter().product();
    let (p_dim, i_dim) = (u.shape()[0], u.shape()[1]);
    let mut shape = x.shape().to_vec();
    shape[n] = p_dim;
    let mut out = vec![0.0; inner * p_dim * outer];
    let src = x.data();
    let ud = u.data();
    if inner == 1 {
        // leading mode: one small matrix-vector product per fibre
        for r in 0..outer {
            let s = &src[i_dim * r..i_dim * (r + 1)];
            for p in 0..p_dim {
                let mut acc = 0.0;
                for (i, &sv) in s.iter().enumerate() {
                    acc += ud[p + p_dim * i] * sv;
                }
                out[p + p_dim * r] = acc;
            }
        }
        return Ok(DenseTensor::from_parts(shape, out));
    }
    for r in 0..outer {
        for i in 0..i_dim {
            let s = &src[inner * (i + i_dim * r)..inner * (i + 1 + i_dim * r)];
            for p in 0..p_dim {
                let w = ud[p + p_dim * i];
                if w == 0.0 {
                    continue;
                }
                let d = &mut out[inner * (p + p_dim * r)..inner * (p + 1 + p_dim * r)];
                for (dv, sv) in d.iter_mut().zip(s) {
                    *dv += w * sv;
                }
            }
        }
    }
    Ok(DenseTensor::from_parts(shape, out))
}
