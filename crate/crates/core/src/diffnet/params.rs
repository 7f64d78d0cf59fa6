//! Flat parameter vectors with a named block layout.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Ordered list of `(name, shape)` blocks; immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    blocks: Vec<(String, Vec<usize>)>,
    offsets: Vec<usize>,
    total: usize,
}

impl ParamLayout {
    pub fn new(blocks: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0usize;
        for (i, (name, shape)) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::structure(format!("duplicate block name {name:?}")));
            }
            offsets.push(total);
            total += shape.iter().product::<usize>();
        }
        Ok(ParamLayout { blocks, offsets, total })
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_name(&self, i: usize) -> &str {
        &self.blocks[i].0
    }

    pub fn block_shape(&self, i: usize) -> &[usize] {
        &self.blocks[i].1
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.offsets[i];
        let len: usize = self.blocks[i].1.iter().product();
        start..start + len
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|(n, _)| n == name)
    }
}

/// Flat real vector carrying all parameters of one model component.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    layout: Arc<ParamLayout>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let n = layout.total_len();
        ParamVector { values: vec![0.0; n], layout }
    }

    pub fn from_values(layout: Arc<ParamLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::structure(format!(
                "parameter vector has {} values, layout expects {}",
                values.len(),
                layout.total_len()
            )));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, name: &str) -> Result<&[f64]> {
        let i = self
            .layout
            .find(name)
            .ok_or_else(|| Error::structure(format!("unknown block {name:?}")))?;
        Ok(&self.values[self.layout.block_range(i)])
    }

    pub fn block_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let i = self
            .layout
            .find(name)
            .ok_or_else(|| Error::structure(format!("unknown block {name:?}")))?;
        let range = self.layout.block_range(i);
        Ok(&mut self.values[range])
    }

    /// Zeroed vector with the same layout (gradient accumulator).
    pub fn zeros_like(&self) -> ParamVector {
        ParamVector::zeros(self.layout.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_offsets_and_lookup() {
        let layout = Arc::new(
            ParamLayout::new(vec![
                ("w0".into(), vec![3, 2]),
                ("b0".into(), vec![3]),
            ])
            .unwrap(),
        );
        assert_eq!(layout.total_len(), 9);
        assert_eq!(layout.block_range(1), 6..9);
        let mut p = ParamVector::zeros(layout);
        p.block_mut("b0").unwrap()[1] = 5.0;
        assert_eq!(p.values[7], 5.0);
        assert!(p.block("nope").is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(ParamLayout::new(vec![
            ("w".into(), vec![2]),
            ("w".into(), vec![2]),
        ])
        .is_err());
    }
}
