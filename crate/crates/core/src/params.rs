//! Named, ordered collections of trainable tensors.

use std::ops::Index;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{numel, Tensor};

/// Position of a tensor inside a [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    /// Adds a tensor drawn from `N(0, std²)`.
    pub fn push_normal(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        std: f64,
        rng: &mut impl Rng,
    ) -> ParamId {
        let normal = Normal::new(0.0, std).expect("finite std");
        let data = (0..numel(shape)).map(|_| normal.sample(rng)).collect();
        let value = Tensor::new(shape.to_vec(), data).expect("shape matches data");
        self.push(name, value)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Fills every tensor whose name satisfies `pred` with zeros.
    pub fn zero_where(&mut self, pred: impl Fn(&str) -> bool) {
        for (name, t) in self.names.iter().zip(self.tensors.iter_mut()) {
            if pred(name) {
                t.data_mut().fill(0.0);
            }
        }
    }

    /// Replaces all values with those of `other`, which must have the same
    /// names and shapes in the same order.
    pub fn assign(&mut self, other: &ModelParams) -> Result<()> {
        self.check_layout(other)?;
        self.tensors.clone_from(&other.tensors);
        Ok(())
    }

    pub fn check_layout(&self, other: &ModelParams) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Config(format!(
                "parameter names differ: expected {} entries, found {}",
                self.names.len(),
                other.names.len()
            )));
        }
        for ((name, a), b) in self.names.iter().zip(&self.tensors).zip(&other.tensors) {
            if a.shape() != b.shape() {
                return Err(Error::Config(format!(
                    "parameter '{name}' has shape {:?}, expected {:?}",
                    b.shape(),
                    a.shape()
                )));
            }
        }
        Ok(())
    }

    /// Records every tensor on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound {
            vars: self.tensors.iter().map(|t| tape.param(t.clone())).collect(),
        }
    }

    /// Records every tensor on `tape` as a constant (no gradients).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound {
            vars: self.tensors.iter().map(|t| tape.constant(t.clone())).collect(),
        }
    }
}

/// Tape handles for a bound [`ModelParams`], indexable by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Handles already on a tape, in [`ModelParams`] order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}
