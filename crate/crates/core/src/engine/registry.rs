use std::any::Any;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::domain::DatasetHandle;
use crate::graphstore::Transaction;

use super::{EngineError, JobContext};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;
pub type Params = Map<String, Json>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    /// Runs over the profiles of a dataset.
    Inference,
    /// Runs over a stored inference layer.
    Visualization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Integer,
    Number,
    String,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Json>,
    /// Inclusive lower bound for numeric parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
}

impl ParamSpec {
    pub fn new(name: &str, ty: ParamType) -> Self {
        Self {
            name: name.into(),
            ty,
            required: false,
            default: None,
            min: None,
        }
    }

    pub fn required(mut self) -> Self {
        self.required = true;
        self
    }

    pub fn default_value(mut self, value: impl Into<Json>) -> Self {
        self.default = Some(value.into());
        self
    }

    pub fn min(mut self, min: f64) -> Self {
        self.min = Some(min);
        self
    }

    fn accepts(&self, value: &Json) -> bool {
        match self.ty {
            ParamType::Integer => value.is_i64() || value.is_u64(),
            ParamType::Number => value.is_number(),
            ParamType::String => value.is_string(),
            ParamType::Boolean => value.is_boolean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmDescriptor {
    pub name: String,
    pub kind: AlgorithmKind,
    pub parameters: Vec<ParamSpec>,
}

impl AlgorithmDescriptor {
    /// Last dotted segment of the name, e.g. `goeburst`.
    pub fn short_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }

    /// Checks `params` against the schema and fills in defaults.
    pub fn validate(&self, params: &Params) -> Result<Params, EngineError> {
        let invalid = |m: String| EngineError::InvalidParameters(m);
        if let Some(unknown) = params.keys().find(|k| !self.parameters.iter().any(|p| &p.name == *k)) {
            return Err(invalid(format!("unknown parameter {unknown:?}")));
        }
        let mut out = Params::new();
        for spec in &self.parameters {
            let value = match params.get(&spec.name).filter(|v| !v.is_null()) {
                Some(v) => v.clone(),
                None => match (&spec.default, spec.required) {
                    (Some(d), _) => d.clone(),
                    (None, true) => return Err(invalid(format!("missing parameter {:?}", spec.name))),
                    (None, false) => continue,
                },
            };
            if !spec.accepts(&value) {
                return Err(invalid(format!("parameter {:?} must be {:?}", spec.name, spec.ty).to_lowercase()));
            }
            if let (Some(min), Some(x)) = (spec.min, value.as_f64()) {
                if x < min {
                    return Err(invalid(format!("parameter {:?} must be at least {min}", spec.name)));
                }
            }
            out.insert(spec.name.clone(), value);
        }
        Ok(out)
    }
}

/// A pluggable algorithm. The engine calls `init`, then `read` inside a read
/// transaction, then `compute` with no transaction open, then `write` inside
/// a write transaction that also records the job's success.
pub trait Algorithm: Send {
    type Input: Send + 'static;
    type Output: Send + 'static;

    fn init(&mut self, context: &JobContext, params: &Params) -> Result<(), BoxError>;
    fn read(&mut self, tx: &Transaction, dataset: &DatasetHandle) -> Result<Self::Input, BoxError>;
    fn compute(&mut self, input: Self::Input) -> Result<Self::Output, BoxError>;
    fn write(&mut self, tx: &mut Transaction, dataset: &DatasetHandle, output: Self::Output) -> Result<(), BoxError>;
}

pub(crate) type Erased = Box<dyn Any + Send>;

/// Object-safe view of [`Algorithm`] used by the executor.
pub(crate) trait DynAlgorithm: Send {
    fn init(&mut self, context: &JobContext, params: &Params) -> Result<(), BoxError>;
    fn read(&mut self, tx: &Transaction, dataset: &DatasetHandle) -> Result<Erased, BoxError>;
    fn compute(&mut self, input: Erased) -> Result<Erased, BoxError>;
    fn write(&mut self, tx: &mut Transaction, dataset: &DatasetHandle, output: Erased) -> Result<(), BoxError>;
}

struct Wrap<A>(A);

impl<A: Algorithm> DynAlgorithm for Wrap<A> {
    fn init(&mut self, context: &JobContext, params: &Params) -> Result<(), BoxError> {
        self.0.init(context, params)
    }

    fn read(&mut self, tx: &Transaction, dataset: &DatasetHandle) -> Result<Erased, BoxError> {
        Ok(Box::new(self.0.read(tx, dataset)?))
    }

    fn compute(&mut self, input: Erased) -> Result<Erased, BoxError> {
        let input = input.downcast::<A::Input>().expect("input produced by read");
        Ok(Box::new(self.0.compute(*input)?))
    }

    fn write(&mut self, tx: &mut Transaction, dataset: &DatasetHandle, output: Erased) -> Result<(), BoxError> {
        let output = output.downcast::<A::Output>().expect("output produced by compute");
        self.0.write(tx, dataset, *output)
    }
}

type Factory = Arc<dyn Fn() -> Box<dyn DynAlgorithm> + Send + Sync>;

#[derive(Clone, Default)]
pub(crate) struct Registry {
    entries: BTreeMap<String, (AlgorithmDescriptor, Factory)>,
}

impl Registry {
    pub fn register<A, F>(&mut self, descriptor: AlgorithmDescriptor, factory: F) -> Result<(), EngineError>
    where
        A: Algorithm + 'static,
        F: Fn() -> A + Send + Sync + 'static,
    {
        if self.entries.contains_key(&descriptor.name) {
            return Err(EngineError::DuplicateAlgorithm(descriptor.name));
        }
        let factory: Factory = Arc::new(move || Box::new(Wrap(factory())));
        self.entries.insert(descriptor.name.clone(), (descriptor, factory));
        Ok(())
    }

    /// Looks up by full name, or by short name when that is unambiguous.
    pub fn resolve(&self, name: &str) -> Option<&AlgorithmDescriptor> {
        if let Some((d, _)) = self.entries.get(name) {
            return Some(d);
        }
        let mut hits = self.entries.values().filter(|(d, _)| d.short_name() == name);
        match (hits.next(), hits.next()) {
            (Some((d, _)), None) => Some(d),
            _ => None,
        }
    }

    pub fn instantiate(&self, name: &str) -> Option<Box<dyn DynAlgorithm>> {
        self.entries.get(name).map(|(_, f)| f())
    }

    pub fn descriptors(&self) -> Vec<AlgorithmDescriptor> {
        self.entries.values().map(|(d, _)| d.clone()).collect()
    }
}
