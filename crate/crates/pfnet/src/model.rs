//! A fully analysed net: the working net (open nets with `p_ext` deleted),
//! its layered structure, witnesses and product-form constants.

use thiserror::Error;

use crate::bags::{compute_witnesses_pi3, derive_open, infer_pi3, BagGraph, Pi3Structure, StructureError, WitnessTable};
use crate::net::{parse_marking, validate_net, Marking, Mode, NetError, NetFile, PetriNet, RateTable, Violation};
use crate::qualitative::{invariant_system, is_live, InvariantSystem, LiveReport};
use crate::stochastic::{product_form, ProductForm, StochasticError};

/// Why a net file could not be turned into a [`Model`].
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("structural assumption violated: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
}

/// Everything derived from a net file.
#[derive(Clone, Debug)]
pub struct Model {
    /// The file as given (closed form plus optional `external` marker).
    pub file: NetFile,
    /// The net that is analysed: the closed net, or the open net.
    pub net: PetriNet,
    pub rates: RateTable,
    pub structure: Pi3Structure,
    pub graph: BagGraph,
    pub witnesses: WitnessTable,
    pub pf: ProductForm,
    /// Initial marking over the places of [`Model::net`].
    pub m0: Marking,
}

impl Model {
    pub fn new(file: &NetFile) -> Result<Model, ModelError> {
        let violations = validate_net(&file.net);
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        let closed = infer_pi3(&file.net, None)?;
        let (net, structure, m0) = match (file.mode, file.external) {
            (Mode::Open, Some(e)) => {
                let (net, s) = derive_open(&file.net, &closed, e)?;
                let v = validate_net(&net);
                if !v.is_empty() {
                    return Err(ModelError::Invalid(v));
                }
                (net, s, file.initial.without_place(e))
            }
            _ => (file.net.clone(), closed, file.initial.clone()),
        };
        let (graph, witnesses) = compute_witnesses_pi3(&net, &structure)?;
        let pf = product_form(&net, &file.rates, &graph, &witnesses)?;
        Ok(Model { file: file.clone(), net, rates: file.rates.clone(), structure, graph, witnesses, pf, m0 })
    }

    /// The same model with every rate replaced.
    pub fn with_rates(&self, rates: RateTable) -> Result<Model, ModelError> {
        let mut f = self.file.clone();
        f.rates = rates;
        Model::new(&f)
    }

    pub fn is_open(&self) -> bool {
        self.structure.is_open()
    }

    /// Parses a marking literal over the analysed net's places.
    pub fn marking(&self, literal: &str) -> Result<Marking, NetError> {
        parse_marking(&self.net, literal)
    }

    pub fn live_report(&self) -> LiveReport {
        is_live(&self.structure, &self.m0)
    }

    pub fn is_live(&self) -> bool {
        self.live_report().live
    }

    pub fn invariants(&self) -> InvariantSystem {
        invariant_system(&self.structure, &self.m0)
    }
}
