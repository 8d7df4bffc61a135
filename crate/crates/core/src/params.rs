//! Named parameter storage shared by all networks.

use alloc::string::String;
use alloc::vec::Vec;

use crate::real::Real;
use crate::spectral::PowerState;
use crate::tensor::Tensor;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Optimization group. `Generator` holds the encoders, predictor and decoder;
/// `Discriminator` holds both discriminators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Generator,
    Discriminator,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Generator => "generator",
            Group::Discriminator => "discriminator",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Param<F> {
    name: String,
    group: Group,
    value: Tensor<F>,
    power: Option<PowerState<F>>,
}

/// All trainable arrays of a model, partitioned into two disjoint groups.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<F> {
    params: Vec<Param<F>>,
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, group: Group, value: Tensor<F>) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            group,
            value,
            power: None,
        });
        ParamId(self.params.len() - 1)
    }

    /// Adds a weight that is spectrally normalized whenever it is used.
    pub fn add_spectral(
        &mut self,
        name: impl Into<String>,
        group: Group,
        value: Tensor<F>,
        power: PowerState<F>,
    ) -> ParamId {
        let id = self.add(name, group, value);
        self.params[id.0].power = Some(power);
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn ids_in(&self, group: Group) -> Vec<ParamId> {
        self.ids().filter(|&id| self.group(id) == group).collect()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn group(&self, id: ParamId) -> Group {
        self.params[id.0].group
    }

    pub fn value(&self, id: ParamId) -> &Tensor<F> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.params[id.0].value
    }

    pub fn power_state(&self, id: ParamId) -> Option<&PowerState<F>> {
        self.params[id.0].power.as_ref()
    }

    pub fn power_state_mut(&mut self, id: ParamId) -> Option<&mut PowerState<F>> {
        self.params[id.0].power.as_mut()
    }

    /// Runs one power iteration for every spectrally normalized weight in `group`.
    pub fn power_iterate(&mut self, group: Group) {
        for p in self.params.iter_mut().filter(|p| p.group == group) {
            if let Some(state) = p.power.as_mut() {
                state.iterate(p.value.data());
            }
        }
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Sets every parameter to zero (power vectors are left untouched).
    pub fn zero_all(&mut self) {
        for p in &mut self.params {
            p.value.data_mut().fill(F::zero());
        }
    }

    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    group: p.group,
                    value: p.value.cast(),
                    power: p.power.as_ref().map(|s| s.cast()),
                })
                .collect(),
        }
    }
}
