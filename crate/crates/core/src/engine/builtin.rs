use serde_json::json;

use crate::domain::{profile, AllelicProfile, DatasetHandle};
use crate::graphstore::Transaction;
use crate::inference::{self, repo::InferenceResult, GoeBurstParams};
use crate::viz::{self, repo::Coordinate, VisualizationResult};

use super::registry::{Algorithm, AlgorithmDescriptor, AlgorithmKind, BoxError, ParamSpec, ParamType, Params};
use super::JobContext;

pub const GOEBURST: &str = "algorithms.inference.goeburst";
pub const RADIAL: &str = "algorithms.visualization.radial";

pub fn goeburst_descriptor() -> AlgorithmDescriptor {
    AlgorithmDescriptor {
        name: GOEBURST.into(),
        kind: AlgorithmKind::Inference,
        parameters: vec![ParamSpec::new("lvs", ParamType::Integer).default_value(3).min(1.0)],
    }
}

pub fn radial_descriptor() -> AlgorithmDescriptor {
    AlgorithmDescriptor {
        name: RADIAL.into(),
        kind: AlgorithmKind::Visualization,
        parameters: vec![],
    }
}

#[derive(Default)]
pub struct GoeBurst {
    params: GoeBurstParams,
    result: String,
}

impl Algorithm for GoeBurst {
    type Input = Vec<AllelicProfile>;
    type Output = inference::Inferred;

    fn init(&mut self, context: &JobContext, params: &Params) -> Result<(), BoxError> {
        let lvs = params.get("lvs").and_then(|v| v.as_u64()).unwrap_or(3);
        self.params = GoeBurstParams { lvs: usize::try_from(lvs)? };
        self.result = context.result.clone();
        Ok(())
    }

    fn read(&mut self, tx: &Transaction, dataset: &DatasetHandle) -> Result<Self::Input, BoxError> {
        self.params.validate(dataset.schema().len())?;
        Ok(profile::load_current(tx, dataset)?
            .into_iter()
            .map(|(_, p)| p)
            .collect())
    }

    fn compute(&mut self, input: Self::Input) -> Result<Self::Output, BoxError> {
        Ok(inference::infer::<u32>(&input, self.params)?)
    }

    fn write(&mut self, tx: &mut Transaction, dataset: &DatasetHandle, output: Self::Output) -> Result<(), BoxError> {
        let result = InferenceResult {
            id: self.result.clone(),
            algorithm: "goeburst".into(),
            dataset: dataset.id().to_owned(),
            parameters: json!({ "lvs": self.params.lvs }),
            edges: output.edges,
        };
        inference::repo::persist(tx, dataset, &result, &output.ranking)?;
        Ok(())
    }
}

#[derive(Default)]
pub struct Radial {
    inference: String,
    result: String,
}

pub struct RadialInput {
    nodes: Vec<String>,
    edges: Vec<(String, String, f64)>,
}

impl Algorithm for Radial {
    type Input = RadialInput;
    type Output = Vec<Coordinate>;

    fn init(&mut self, context: &JobContext, _: &Params) -> Result<(), BoxError> {
        self.inference = context.inference.clone().ok_or("radial layout needs an inference")?;
        self.result = context.result.clone();
        Ok(())
    }

    fn read(&mut self, tx: &Transaction, dataset: &DatasetHandle) -> Result<Self::Input, BoxError> {
        let nodes = inference::repo::ranking(tx, dataset, &self.inference)?.unwrap_or_default();
        let edges = inference::repo::edges(tx, dataset, &self.inference)
            .into_iter()
            .map(|e| (e.from, e.to, e.distance as f64))
            .collect();
        Ok(RadialInput { nodes, edges })
    }

    fn compute(&mut self, input: Self::Input) -> Result<Self::Output, BoxError> {
        let forest = viz::to_forest(&input.nodes, &input.edges, &input.nodes)?;
        Ok(viz::layout_forest(&forest)
            .into_iter()
            .map(|(profile, x, y)| Coordinate { profile, x, y })
            .collect())
    }

    fn write(&mut self, tx: &mut Transaction, dataset: &DatasetHandle, output: Self::Output) -> Result<(), BoxError> {
        let result = VisualizationResult {
            id: self.result.clone(),
            inference: self.inference.clone(),
            algorithm: "radial".into(),
            parameters: json!({}),
            coordinates: output,
        };
        viz::repo::persist(tx, dataset, &result)?;
        Ok(())
    }
}
