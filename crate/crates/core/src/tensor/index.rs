//! Little-Endian index arithmetic: offset = i_1 + I_1 (i_2 + I_2 (i_3 + ...)).

/// Number of elements for a shape; the empty shape (a scalar) has one.
pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Strides with the first mode contiguous.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(shape.len());
    let mut acc = 1;
    for &s in shape {
        out.push(acc);
        acc *= s;
    }
    out
}

pub fn ravel(shape: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), idx.len());
    let mut off = 0;
    for (&i, &s) in idx.iter().zip(shape).rev() {
        debug_assert!(i < s, "index {i} out of range for mode of size {s}");
        off = off * s + i;
    }
    off
}

pub fn unravel_into(shape: &[usize], mut lin: usize, out: &mut [usize]) {
    for (o, &s) in out.iter_mut().zip(shape) {
        *o = lin % s;
        lin /= s;
    }
}

pub fn unravel(shape: &[usize], lin: usize) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    unravel_into(shape, lin, &mut out);
    out
}

/// Advances a multi-index by one position (first mode fastest).
/// Returns false once the index wraps past the end.
pub fn increment(shape: &[usize], idx: &mut [usize]) -> bool {
    for (i, &s) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < s {
            return true;
        }
        *i = 0;
    }
    false
}

/// Composite index of a left Kronecker product: j + i * J (0-based).
pub fn kron_composite(i: usize, j: usize, inner: usize) -> usize {
    j + i * inner
}
