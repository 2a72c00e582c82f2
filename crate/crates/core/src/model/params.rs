use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autograd::{Grads, Graph, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named network weights in a fixed registration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    frozen: Vec<bool>,
}

impl<T: Scalar> Default for Params<T> {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            frozen: Vec::new(),
        }
    }
}

impl<T: Scalar> Params<T> {
    pub(crate) fn register(&mut self, name: String, t: Tensor<T>, frozen: bool) -> ParamId {
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(t);
        self.frozen.push(frozen);
        ParamId(self.tensors.len() - 1)
    }

    /// He-normal weights for a conv kernel `[o, c, kh, kw]`, scaled by `gain`.
    pub(crate) fn conv<R: Rng>(
        &mut self,
        name: String,
        shape: [usize; 4],
        fan_in: usize,
        gain: f64,
        rng: &mut R,
    ) -> ParamId {
        let std = gain * (2.0 / fan_in as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::of(z * std)
            })
            .collect();
        self.register(name, Tensor::from_vec(&shape, data).expect("shape"), false)
    }

    pub(crate) fn filled(&mut self, name: String, shape: &[usize], v: f64, frozen: bool) -> ParamId {
        self.register(name, Tensor::full(shape, T::of(v)), frozen)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.frozen[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Number of scalar weights.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            frozen: self.frozen.clone(),
        }
    }

    /// Replaces every tensor by name, checking that the layout matches exactly.
    pub fn load(&mut self, named: Vec<(String, Tensor<T>)>) -> Result<()> {
        if named.len() != self.tensors.len() {
            return Err(Error::Config(alloc::format!(
                "expected {} parameter arrays, found {}",
                self.tensors.len(),
                named.len()
            )));
        }
        for (i, (name, t)) in named.into_iter().enumerate() {
            if name != self.names[i] || t.shape() != self.tensors[i].shape() {
                return Err(Error::Config(alloc::format!(
                    "parameter {i}: expected {} {:?}, found {name} {:?}",
                    self.names[i],
                    self.tensors[i].shape(),
                    t.shape()
                )));
            }
            self.tensors[i] = t;
        }
        Ok(())
    }
}

/// Maps parameters onto graph leaves, creating each leaf once per graph so that
/// gradients from shared weights accumulate in one place.
pub struct Binder<'a, T: Scalar> {
    params: &'a Params<T>,
    vars: Vec<Option<Var>>,
}

impl<'a, T: Scalar> Binder<'a, T> {
    pub fn new(params: &'a Params<T>) -> Self {
        Self {
            params,
            vars: alloc::vec![None; params.len()],
        }
    }

    pub fn var(&mut self, g: &mut Graph<'a, T>, id: ParamId) -> Var {
        if let Some(v) = self.vars[id.0] {
            return v;
        }
        let t = self.params.get(id);
        let v = if self.params.is_frozen(id) {
            g.constant(t)
        } else {
            g.param(t)
        };
        self.vars[id.0] = Some(v);
        v
    }

    /// Gradients for every parameter touched by the graph, in parameter order.
    pub fn collect(&self, grads: &mut Grads<T>) -> Vec<(ParamId, Tensor<T>)> {
        self.vars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.and_then(|v| grads.take(v)).map(|g| (ParamId(i), g)))
            .collect()
    }
}
