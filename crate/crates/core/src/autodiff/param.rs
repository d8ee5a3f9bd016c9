use alloc::string::String;
use alloc::vec::Vec;

use super::graph::Gradients;
use super::tensor::Tensor;
use super::AutodiffError;
use crate::math::sqrt;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A learnable tensor with its AdamW moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    name: String,
    value: Tensor,
    first_moment: Tensor,
    second_moment: Tensor,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn moments(&self) -> (&Tensor, &Tensor) {
        (&self.first_moment, &self.second_moment)
    }
}

/// Ordered collection of parameters; ids are insertion positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let (r, c) = value.shape();
        self.params.push(Parameter {
            name: name.into(),
            value,
            first_moment: Tensor::zeros(r, c),
            second_moment: Tensor::zeros(r, c),
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Replaces parameter values (moments are reset) after checking shapes.
    pub fn load_values(&mut self, values: Vec<Tensor>) -> Result<(), AutodiffError> {
        if values.len() != self.params.len() {
            return Err(AutodiffError::Shape {
                op: "load_values",
                detail: alloc::format!("{} tensors for {} parameters", values.len(), self.params.len()),
            });
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(AutodiffError::Shape {
                    op: "load_values",
                    detail: alloc::format!("{}: {:?} vs {:?}", p.name, v.shape(), p.value.shape()),
                });
            }
            let (r, c) = v.shape();
            p.value = v;
            p.first_moment = Tensor::zeros(r, c);
            p.second_moment = Tensor::zeros(r, c);
        }
        Ok(())
    }
}

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamW {
    /// Applies update number `step` (1-based).
    ///
    /// Per element: `θ ← θ − lr·wd·θ`, then `θ ← θ − lr·m̂/(√v̂ + eps)`.
    /// Parameters without a gradient are treated as having a zero gradient.
    pub fn step(&self, store: &mut ParamStore, grads: &Gradients, step: u64) -> Result<(), AutodiffError> {
        if step == 0 {
            return Err(AutodiffError::Optimizer("step counts from 1"));
        }
        if !(self.lr >= 0.0) {
            return Err(AutodiffError::Optimizer("learning rate must be non-negative"));
        }
        for (i, p) in store.params.iter().enumerate() {
            if let Some(g) = grads.param(ParamId(i)) {
                if g.shape() != p.value.shape() {
                    return Err(AutodiffError::Shape {
                        op: "adamw",
                        detail: alloc::format!("{}: grad {:?} vs {:?}", p.name, g.shape(), p.value.shape()),
                    });
                }
            }
        }
        let bc1 = 1.0 - libm::pow(self.beta1, step as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, step as f64);
        for (i, p) in store.params.iter_mut().enumerate() {
            let g = grads.param(ParamId(i));
            let n = p.value.len();
            let values = p.value.data_mut();
            let m = p.first_moment.data_mut();
            let v = p.second_moment.data_mut();
            for k in 0..n {
                let gk = g.map_or(0.0, |t| t.data()[k]);
                values[k] -= self.lr * self.weight_decay * values[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                values[k] -= self.lr * mhat / (sqrt(vhat) + self.eps);
            }
        }
        Ok(())
    }
}
