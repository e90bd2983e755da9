//! Named parameter collections and their checkpoint format.
//!
//! Checkpoint layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "GNFPARAM"
//! version  u32      1
//! count    u32
//! count × { name_len u32, name (UTF-8), rank u32 (= 2), dims rank × u64, data f64 × prod(dims) }
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::tape::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"GNFPARAM";
const VERSION: u32 = 1;

/// Ordered name → tensor map. Iteration follows insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidConfig(format!(
                "duplicate parameter {name:?}"
            )));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Total number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.rows(), t.cols())))
                .collect(),
            index: self.index.clone(),
        }
    }

    /// True when both sets hold the same names in the same order with equal shapes.
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((n1, t1), (n2, t2))| n1 == n2 && t1.shape() == t2.shape())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|(_, t)| t.data().iter().copied())
            .collect()
    }

    /// Inverse of [`flatten`](Self::flatten) against this set's layout.
    pub fn unflatten(&self, flat: &[f64]) -> Result<ParamSet> {
        if flat.len() != self.num_scalars() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_scalars()
            )));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for (_, t) in out.entries.iter_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }

    /// Records every parameter on `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        Binding {
            vars: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), tape.param(t.clone())))
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ParamSet> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        ParamSet::from_bytes(&bytes).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 8 * self.num_scalars());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&2u32.to_le_bytes());
            buf.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            buf.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for x in t.data() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<ParamSet, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err("bad magic".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let count = r.u32()?;
        let mut out = ParamSet::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| "parameter name is not UTF-8".to_string())?
                .to_string();
            let rank = r.u32()?;
            let dims: Vec<usize> = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<std::result::Result<_, _>>()?;
            let (rows, cols) = match dims.as_slice() {
                [] => (1, 1),
                [c] => (1, *c),
                [r, c] => (*r, *c),
                _ => return Err(format!("rank {rank} parameter {name:?} is not supported")),
            };
            let n = rows.checked_mul(cols).ok_or("dimension overflow")?;
            let data = (0..n)
                .map(|_| r.f64())
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let t = Tensor::from_vec(rows, cols, data).map_err(|e| e.to_string())?;
            out.insert(name, t).map_err(|e| e.to_string())?;
        }
        if r.pos != bytes.len() {
            return Err("trailing bytes".into());
        }
        Ok(out)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| "truncated checkpoint".to_string())?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Tape handles for a bound [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Binding {
    vars: Vec<(String, Var)>,
}

impl Binding {
    /// Panics on an unknown name: parameter names are fixed by the model code.
    pub fn var(&self, name: &str) -> Var {
        self.try_var(name)
            .unwrap_or_else(|| panic!("parameter {name:?} is not bound"))
    }

    pub fn try_var(&self, name: &str) -> Option<Var> {
        self.vars.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Gradients keyed like the bound parameters; unreached parameters get zeros.
    pub fn collect(&self, tape: &Tape, grads: &Gradients) -> ParamSet {
        let mut out = ParamSet::new();
        for (name, var) in &self.vars {
            let g = grads.get(*var).cloned().unwrap_or_else(|| {
                let v = tape.value(*var);
                Tensor::zeros(v.rows(), v.cols())
            });
            out.insert(name.clone(), g).expect("names are unique");
        }
        out
    }
}

/// Reverse pass from `loss` returning one gradient per parameter in `binding`.
pub fn backward(tape: &Tape, loss: Var, binding: &Binding) -> Result<ParamSet> {
    let grads = tape.backward(loss)?;
    Ok(binding.collect(tape, &grads))
}
