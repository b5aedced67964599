use crate::error::{Error, Result};

/// Default cap on the flattened dimension of a layout.
pub const DEFAULT_DIM_CAP: usize = 1 << 20;

/// Ordered named registers. The first register is the most significant digit
/// of the flattened basis index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    names: Vec<String>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl RegisterLayout {
    pub fn new<S: Into<String>>(regs: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        Self::with_cap(regs, DEFAULT_DIM_CAP)
    }

    pub fn with_cap<S: Into<String>>(
        regs: impl IntoIterator<Item = (S, usize)>,
        cap: usize,
    ) -> Result<Self> {
        let mut names = Vec::new();
        let mut dims = Vec::new();
        let mut total: usize = 1;
        for (name, dim) in regs {
            let name = name.into();
            if dim < 2 {
                return Err(Error::RegisterTooSmall { name, dim });
            }
            if names.contains(&name) {
                return Err(Error::DuplicateRegister(name));
            }
            total = total.checked_mul(dim).ok_or(Error::LayoutTooLarge { dim: usize::MAX, cap })?;
            if total > cap {
                return Err(Error::LayoutTooLarge { dim: total, cap });
            }
            names.push(name);
            dims.push(dim);
        }
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(RegisterLayout { names, dims, strides, total })
    }

    pub fn empty() -> Self {
        RegisterLayout { names: vec![], dims: vec![], strides: vec![], total: 1 }
    }

    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn registers(&self) -> impl Iterator<Item = (&str, usize)> + '_ {
        self.names.iter().map(String::as_str).zip(self.dims.iter().copied())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let pos = names.iter().map(|n| self.position(n)).collect::<Result<Vec<_>>>()?;
        for (i, p) in pos.iter().enumerate() {
            if pos[..i].contains(p) {
                return Err(Error::DuplicateRegister(names[i].to_string()));
            }
        }
        Ok(pos)
    }

    pub fn reg_dim(&self, name: &str) -> Result<usize> {
        Ok(self.dims[self.position(name)?])
    }

    pub fn stride(&self, pos: usize) -> usize {
        self.strides[pos]
    }

    /// Digit of register `pos` inside the flattened index.
    pub fn digit(&self, index: usize, pos: usize) -> usize {
        (index / self.strides[pos]) % self.dims[pos]
    }

    pub fn digits(&self, index: usize) -> Vec<usize> {
        (0..self.len()).map(|p| self.digit(index, p)).collect()
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.strides).map(|(d, s)| d * s).sum()
    }

    /// Product of the sizes of the named registers.
    pub fn sub_dim(&self, positions: &[usize]) -> usize {
        positions.iter().map(|&p| self.dims[p]).product()
    }

    /// Sub-layout of the named registers in the given order.
    pub fn select(&self, names: &[&str]) -> Result<RegisterLayout> {
        let pos = self.positions(names)?;
        RegisterLayout::with_cap(
            pos.iter().map(|&p| (self.names[p].clone(), self.dims[p])),
            usize::MAX,
        )
    }

    /// Registers of `self` followed by those of `other`.
    pub fn concat(&self, other: &RegisterLayout) -> Result<RegisterLayout> {
        RegisterLayout::new(
            self.registers()
                .chain(other.registers())
                .map(|(n, d)| (n.to_string(), d)),
        )
    }

    /// Flat offsets of every joint value of `positions` (first listed most significant).
    pub fn target_offsets(&self, positions: &[usize]) -> Vec<usize> {
        let mut offsets = vec![0usize];
        for &p in positions {
            let mut next = Vec::with_capacity(offsets.len() * self.dims[p]);
            for &o in &offsets {
                for v in 0..self.dims[p] {
                    next.push(o + v * self.strides[p]);
                }
            }
            offsets = next;
        }
        offsets
    }

    /// Flat indices at which every register in `positions` holds digit 0.
    pub fn complement_bases(&self, positions: &[usize]) -> Vec<usize> {
        let rest: Vec<usize> = (0..self.len()).filter(|p| !positions.contains(p)).collect();
        self.target_offsets(&rest)
    }
}
