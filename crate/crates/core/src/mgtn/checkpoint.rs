//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "MGTNCKPT" | u32 version
//! u32 J_0 | u32 J_1 | u32 I_1 | u32 I_2
//! u32 d | d x u32 dense output modes | (d + 1) x u32 TT ranks
//! u32 array count
//! per array: u32 name length | name (UTF-8) | u32 order | order x u64 dims | f64 data
//! ```
//!
//! Identical parameters always serialize to identical bytes.

use crate::tensor::DenseTensor;

use super::{AgentNetwork, AgentSpec, ModelError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MGTNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: AgentSpec,
    pub arrays: Vec<(String, DenseTensor)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
}

impl Checkpoint {
    pub fn from_network(net: &AgentNetwork) -> Self {
        Self {
            spec: net.spec().clone(),
            arrays: net.params().into_iter().map(|(n, p)| (n, p.clone())).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let put = |out: &mut Vec<u8>, v: usize| out.extend((v as u32).to_le_bytes());
        out.extend(CHECKPOINT_MAGIC);
        out.extend(CHECKPOINT_VERSION.to_le_bytes());
        let s = &self.spec;
        for v in [s.input_features, s.hidden_features, s.lags, s.nodes] {
            put(&mut out, v);
        }
        put(&mut out, s.dense_out_modes.len());
        for &m in s.dense_out_modes.iter().chain(&s.tt_ranks) {
            put(&mut out, m);
        }
        put(&mut out, self.arrays.len());
        for (name, t) in &self.arrays {
            put(&mut out, name.len());
            out.extend(name.as_bytes());
            put(&mut out, t.order());
            for &d in t.shape() {
                out.extend((d as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend(v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(ModelError::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
        }
        let (j0, j1, i1, i2) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
        let d = r.usize()?;
        if d > 64 {
            return Err(ModelError::Checkpoint(format!("implausible TT length {d}")));
        }
        let dense_out_modes = (0..d).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let tt_ranks = (0..=d).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let spec = AgentSpec {
            input_features: j0,
            hidden_features: j1,
            lags: i1,
            nodes: i2,
            dense_out_modes,
            tt_ranks,
        };
        let count = r.usize()?;
        let mut arrays = Vec::new();
        for _ in 0..count {
            let len = r.usize()?;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| ModelError::Checkpoint("array name is not UTF-8".into()))?;
            let order = r.usize()?;
            let shape = (0..order)
                .map(|_| r.u64().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            if n.saturating_mul(8) > bytes.len() {
                return Err(ModelError::Checkpoint(format!("array {name} larger than file")));
            }
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let t = DenseTensor::new(shape, data).map_err(|e| ModelError::Checkpoint(format!("array {name}: {e}")))?;
            arrays.push((name, t));
        }
        if r.pos != bytes.len() {
            return Err(ModelError::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { spec, arrays })
    }

    pub fn param_count(&self) -> usize {
        self.arrays.iter().map(|(_, t)| t.len()).sum()
    }

    /// Loads every array into `net`, rejecting unknown names, missing arrays
    /// and shape mismatches (the error names the offending array).
    pub fn apply_to(&self, net: &mut AgentNetwork) -> Result<()> {
        let names = net.param_names();
        for name in &names {
            if !self.arrays.iter().any(|(n, _)| n == name) {
                return Err(ModelError::Checkpoint(format!("missing array {name}")));
            }
        }
        let current: Vec<(String, Vec<usize>)> =
            net.params().into_iter().map(|(n, p)| (n, p.shape().to_vec())).collect();
        for (name, t) in &self.arrays {
            let (_, shape) = current
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| ModelError::UnknownParam(name.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(ModelError::Shape {
                    what: name.clone(),
                    expected: shape.clone(),
                    actual: t.shape().to_vec(),
                });
            }
        }
        for (name, t) in &self.arrays {
            net.set_param(name, t.clone())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;

    fn net(spec: AgentSpec, seed: u64) -> AgentNetwork {
        let mut n = AgentNetwork::new(
            spec.clone(),
            &Adjacency::empty(spec.lags),
            &Adjacency::empty(spec.nodes),
        )
        .unwrap();
        n.init_params(seed);
        n
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let a = net(AgentSpec::default(), 1);
        let bytes = Checkpoint::from_network(&a).to_bytes();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        assert_eq!(bytes, Checkpoint::from_network(&a.clone()).to_bytes());
        let ck = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(ck.to_bytes(), bytes);
        assert_eq!(ck.param_count(), 657);
        let mut b = net(AgentSpec::default(), 2);
        assert_ne!(a, b);
        ck.apply_to(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatch_names_the_array() {
        let mut spec = AgentSpec::default();
        let ck = Checkpoint::from_network(&net(spec.clone(), 1));
        spec.tt_ranks = vec![1, 3, 2, 1];
        let mut other = net(spec, 1);
        let err = ck.apply_to(&mut other).unwrap_err().to_string();
        assert!(err.contains("hidden.core0"), "{err}");
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = Checkpoint::from_network(&net(AgentSpec::default(), 1)).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        assert!(Checkpoint::from_bytes(&[]).is_err());
    }
}
