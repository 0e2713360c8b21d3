use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// First and second Adam moments plus the step counter of one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub adam: AdamState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))` over the last two dims.
    XavierUniform,
    Zeros,
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        }
    }
}

/// Named trainable tensors with their optimizer state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, NnError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(NnError::DuplicateParam(name));
        }
        let id = ParamId(self.params.len());
        let adam = AdamState {
            m: Tensor::zeros(value.shape()),
            v: Tensor::zeros(value.shape()),
            step: 0,
        };
        self.index.insert(name.clone(), id);
        self.params.push(Param { name, value, adam });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId, NnError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub(crate) fn param_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Builds a store from `specs`, drawing initial values in spec order.
pub fn init_params(specs: &[ParamSpec], seed: u64) -> Result<ParamStore, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for spec in specs {
        let len: usize = spec.shape.iter().product();
        let bound = match spec.init {
            Init::Zeros => 0.0,
            Init::Uniform(b) => b,
            Init::XavierUniform => {
                let (fan_in, fan_out) = match spec.shape.as_slice() {
                    [] => (1, 1),
                    [n] => (1, *n),
                    [.., a, b] => (*a, *b),
                };
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            }
        };
        let data = if bound == 0.0 {
            vec![0.0; len]
        } else {
            (0..len).map(|_| rng.random_range(-bound..bound)).collect()
        };
        store.insert(spec.name.clone(), Tensor::new(spec.shape.clone(), data)?)?;
    }
    Ok(store)
}

/// Gradient buffers aligned with a [`ParamStore`]; `None` means zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: vec![None; store.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &[f64]) {
        let slot = &mut self.grads[id.0];
        match slot {
            Some(t) => {
                for (a, b) in t.data_mut().iter_mut().zip(g) {
                    *a += b;
                }
            }
            None => *slot = Some(Tensor::row_vector(g.to_vec())),
        }
    }

    /// Restores parameter shapes after accumulation.
    pub(crate) fn reshape_to(&mut self, store: &ParamStore) {
        for (id, slot) in self.grads.iter_mut().enumerate() {
            if let Some(t) = slot {
                let shape = store.value(ParamId(id)).shape().to_vec();
                if t.shape() != shape.as_slice() {
                    *t = Tensor::new(shape, std::mem::take(t).into_data()).expect("grad length");
                }
            }
        }
    }

    /// Element-wise sum; both sides must come from the same store layout.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            match (a.as_mut(), b) {
                (_, None) => {}
                (Some(a), Some(b)) => a.add_assign(b),
                (None, Some(b)) => *a = Some(b.clone()),
            }
        }
    }

    pub fn norm(&self, id: ParamId) -> f64 {
        self.get(id).map_or(0.0, Tensor::norm)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, Option<&Tensor>)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g.as_ref()))
    }
}

impl Default for Tensor {
    fn default() -> Self {
        Tensor::zeros(&[0])
    }
}
