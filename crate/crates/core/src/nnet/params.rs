use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io::NamedArray;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Ordered, named collection of learnable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Places every parameter on the tape; the returned binding is indexed
    /// by [`ParamId`].
    pub fn bind(&self, g: &mut Graph) -> Result<Bound> {
        let vars = self.values.iter().map(|t| g.leaf(t.clone())).collect::<Result<_>>()?;
        Ok(Bound(vars))
    }

    pub fn to_records(&self) -> Vec<NamedArray> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, t)| NamedArray {
                name: n.clone(),
                dims: t.shape.clone(),
                data: t.data.clone(),
            })
            .collect()
    }

    /// Overwrites values from checkpoint records matched by name.
    pub fn load_records(&mut self, records: &[NamedArray]) -> Result<()> {
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let rec = records
                .iter()
                .find(|r| &r.name == name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks parameter {name}")))?;
            if rec.dims != value.shape {
                return Err(Error::shape(format!(
                    "parameter {name}: checkpoint {:?}, model {:?}",
                    rec.dims, value.shape
                )));
            }
            value.data.clone_from(&rec.data);
        }
        Ok(())
    }
}

/// Tape variables for a [`Params`] collection.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    /// Binding from variables listed in parameter order.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bound(vars)
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}
