use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Handle to one tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors owned by one network.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a tensor. Names must be unique within the set.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(self.find(&name).is_none(), "duplicate parameter name {name}");
        self.names.push(name);
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

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Replace every tensor with the same-named tensor of `other`.
    pub fn copy_from(&mut self, other: &ParamSet) -> Result<()> {
        check_layout("copy_from", &self.names, &self.values, &other.names, &other.values)?;
        self.values.clone_from_slice(&other.values);
        Ok(())
    }

    /// Place every tensor on `g` as a leaf.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        Bound {
            vars: self.values.iter().map(|t| g.leaf(t.clone(), trainable)).collect(),
        }
    }

    /// Gradients of `loss` with respect to every bound parameter, named.
    /// A non-finite entry is reported with the parameter's name.
    pub fn gradients(&self, g: &mut Graph, loss: Var, bound: &Bound) -> Result<GradSet> {
        let gv = g.backward(loss, &bound.vars)?;
        let mut grads = Vec::with_capacity(gv.len());
        for (name, v) in self.names.iter().zip(gv) {
            let t = g.value(v).clone();
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
            grads.push(t);
        }
        Ok(GradSet {
            names: self.names.clone(),
            grads,
        })
    }
}

/// Graph vars of a bound [`ParamSet`], addressable by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Same binding with one parameter replaced by another var.
    pub fn with(&self, id: ParamId, v: Var) -> Bound {
        let mut vars = self.vars.clone();
        vars[id.0] = v;
        Bound { vars }
    }
}

/// Per-parameter gradients keyed by name, in parameter-set order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradSet {
    names: Vec<String>,
    grads: Vec<Tensor>,
}

impl GradSet {
    pub fn new(names: Vec<String>, grads: Vec<Tensor>) -> Result<Self> {
        if names.len() != grads.len() {
            return Err(Error::invalid(
                "GradSet",
                format!("{} names for {} tensors", names.len(), grads.len()),
            ));
        }
        Ok(GradSet { names, grads })
    }

    pub fn zeros_like(params: &ParamSet) -> Self {
        GradSet {
            names: params.names.clone(),
            grads: params.values.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [Tensor] {
        &mut self.grads
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.grads)
    }

    /// Euclidean norm over all entries of all tensors.
    pub fn global_norm(&self) -> f64 {
        libm::sqrt(
            self.grads
                .iter()
                .flat_map(|t| t.data())
                .map(|x| x * x)
                .sum::<f64>(),
        )
    }

    pub fn scale(&mut self, c: f64) {
        for t in &mut self.grads {
            t.data_mut().iter_mut().for_each(|x| *x *= c);
        }
    }

    /// Verify this set addresses exactly the parameters of `params`.
    pub fn check_matches(&self, params: &ParamSet) -> Result<()> {
        check_layout("gradient set", &params.names, &params.values, &self.names, &self.grads)
    }
}

fn check_layout(
    op: &'static str,
    names: &[String],
    values: &[Tensor],
    other_names: &[String],
    other_values: &[Tensor],
) -> Result<()> {
    for n in other_names {
        if !names.contains(n) {
            return Err(Error::invalid(op, format!("unexpected parameter {n}")));
        }
    }
    for (i, n) in names.iter().enumerate() {
        if other_names.get(i) != Some(n) {
            return Err(Error::invalid(op, format!("missing parameter {n}")));
        }
        if values[i].shape() != other_values[i].shape() {
            return Err(Error::invalid(
                op,
                format!(
                    "parameter {n}: shape {:?} vs {:?}",
                    values[i].shape(),
                    other_values[i].shape()
                ),
            ));
        }
    }
    if other_names.len() != names.len() {
        return Err(Error::invalid(op, "parameter count differs"));
    }
    Ok(())
}

/// Arithmetic mean of per-learner gradient sets, reduced in the given order.
pub fn average_gradients(sets: &[GradSet]) -> Result<GradSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::invalid("average_gradients", "no gradient sets"))?;
    let mut out = first.clone();
    for s in &sets[1..] {
        check_layout("average_gradients", &first.names, &first.grads, &s.names, &s.grads)?;
        for (acc, t) in out.grads.iter_mut().zip(&s.grads) {
            for (a, &b) in acc.data_mut().iter_mut().zip(t.data()) {
                *a += b;
            }
        }
    }
    if sets.len() > 1 {
        let n = sets.len() as f64;
        for t in &mut out.grads {
            t.data_mut().iter_mut().for_each(|x| *x /= n);
        }
    }
    Ok(out)
}
