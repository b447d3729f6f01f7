use indexmap::IndexMap;
use rand::Rng;

use super::{ClassifierConfig, InitMode, NetError, Scalar, Tensor};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight,
    BnWeight,
    BnBias,
    BnRunningMean,
    BnRunningVar,
    LinearWeight,
    LinearBias,
}

impl ParamKind {
    /// Running statistics are updated by forward passes, not by the optimizer.
    pub fn trainable(self) -> bool {
        !matches!(self, Self::BnRunningMean | Self::BnRunningVar)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    /// Fan-in used by the uniform initializer.
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Named tensors in a fixed order, including normalization running stats.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T = f32> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for Parameters<T> {
    fn default() -> Self {
        Self { tensors: IndexMap::new() }
    }
}

impl<T: Scalar> Parameters<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, NetError> {
        self.tensors.get(name).ok_or_else(|| NetError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>, NetError> {
        self.tensors.get_mut(name).ok_or_else(|| NetError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        Parameters { tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }

    /// Checks names, order-independent presence, shapes, and finiteness
    /// against `specs`; reports the first offending tensor.
    pub fn check_against(&self, specs: &[ParamSpec]) -> Result<(), NetError> {
        for spec in specs {
            let t = self.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(NetError::ParamShape { name: spec.name.clone(), expected: spec.shape.clone(), got: t.shape().to_vec() });
            }
            if !t.all_finite() {
                return Err(NetError::NonFinite(spec.name.clone()));
            }
        }
        if self.len() != specs.len() {
            let extra = self.tensors.keys().find(|k| !specs.iter().any(|s| &s.name == *k));
            if let Some(name) = extra {
                return Err(NetError::Config(format!("unexpected parameter `{name}`")));
            }
        }
        Ok(())
    }

    /// Reorders tensors to match `specs` order.
    pub(crate) fn ordered_like(mut self, specs: &[ParamSpec]) -> Self {
        let mut tensors = IndexMap::with_capacity(specs.len());
        for s in specs {
            if let Some(t) = self.tensors.shift_remove(&s.name) {
                tensors.insert(s.name.clone(), t);
            }
        }
        tensors.extend(self.tensors);
        Self { tensors }
    }
}

/// Gradients of the trainable parameters, keyed like [`Parameters`].
pub type Gradients<T = f32> = Parameters<T>;

/// Builds the parameters for `config`: seeded uniform `±1/√fan_in` for
/// convolution and linear tensors, ones and zeros for normalization, or a
/// shape-checked load from an external checkpoint.
pub fn init_model(config: &ClassifierConfig, init_seed: u64) -> Result<Parameters<f32>, NetError> {
    config.validate()?;
    let specs = config.param_specs();
    match &config.init {
        InitMode::Random => Ok(random_init(&specs, init_seed)),
        InitMode::External { path } => {
            let (params, _, _) = super::load_checkpoint(path)?;
            params.check_against(&specs)?;
            Ok(params.ordered_like(&specs))
        }
    }
}

pub(crate) fn random_init(specs: &[ParamSpec], seed: u64) -> Parameters<f32> {
    let mut rng = rng_for("init", &[seed]);
    let mut params = Parameters::new();
    for spec in specs {
        let tensor = match spec.kind {
            ParamKind::ConvWeight | ParamKind::LinearWeight | ParamKind::LinearBias => {
                let bound = 1.0 / (spec.fan_in as f64).sqrt();
                let data = (0..spec.numel()).map(|_| rng.random_range(-bound..bound) as f32).collect();
                Tensor::from_vec(&spec.shape, data).expect("spec shape")
            }
            ParamKind::BnWeight | ParamKind::BnRunningVar => Tensor::full(&spec.shape, 1.0),
            ParamKind::BnBias | ParamKind::BnRunningMean => Tensor::zeros(&spec.shape),
        };
        params.insert(spec.name.clone(), tensor);
    }
    params
}
