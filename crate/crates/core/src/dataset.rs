//! Per-model choice data.

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::design::{Answer, Corner, PriceVector, RoundSpec};
use crate::N_CONSTRAINED_ROUNDS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatasetError {
    #[error("round {0} is unconstrained")]
    Unconstrained(u32),
    #[error("round {round_id}: chosen answer {chosen} is not among the offered options")]
    NotOffered { round_id: u32, chosen: Answer },
    #[error("round {0} appears more than once")]
    DuplicateRound(u32),
    #[error("{0} observations exceed the {N_CONSTRAINED_ROUNDS} constrained rounds")]
    TooMany(usize),
    #[error("dataset has no observations")]
    Empty,
}

/// A chosen answer together with the round it was chosen in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub round: Arc<RoundSpec>,
    pub chosen: Answer,
}

impl Observation {
    pub fn new(round: Arc<RoundSpec>, chosen: Answer) -> Result<Self, DatasetError> {
        if !round.is_constrained() {
            return Err(DatasetError::Unconstrained(round.round_id));
        }
        if let Some(options) = &round.options {
            if !options.contains(&chosen) {
                return Err(DatasetError::NotOffered { round_id: round.round_id, chosen });
            }
        }
        Ok(Observation { round, chosen })
    }

    pub fn corner(&self) -> Corner {
        self.round.corner.expect("constrained round")
    }

    pub fn prices(&self) -> PriceVector {
        self.round.prices.expect("constrained round")
    }

    pub fn round_id(&self) -> u32 {
        self.round.round_id
    }

    /// Own shifted expenditure `p · q_o`.
    pub fn own_cost(&self) -> u32 {
        self.chosen.cost(self.corner(), self.prices())
    }

    /// Cost of `other` under this round's corner and prices.
    pub fn cost_of(&self, other: Answer) -> u32 {
        other.cost(self.corner(), self.prices())
    }
}

/// All constrained observations of one model. Refused or unparseable rounds
/// are simply absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub model_id: String,
    pub q0: Option<Answer>,
    pub observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(
        model_id: impl Into<String>,
        q0: Option<Answer>,
        observations: Vec<Observation>,
    ) -> Result<Self, DatasetError> {
        if observations.len() > N_CONSTRAINED_ROUNDS {
            return Err(DatasetError::TooMany(observations.len()));
        }
        let mut seen = HashSet::new();
        for o in &observations {
            if !seen.insert(o.round_id()) {
                return Err(DatasetError::DuplicateRound(o.round_id()));
            }
        }
        Ok(Dataset { model_id: model_id.into(), q0, observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Same rounds with the chosen answers replaced.
    pub fn with_choices(&self, choices: Vec<Answer>) -> Dataset {
        debug_assert_eq!(choices.len(), self.observations.len());
        Dataset {
            model_id: self.model_id.clone(),
            q0: self.q0,
            observations: self
                .observations
                .iter()
                .zip(choices)
                .map(|(o, chosen)| Observation { round: o.round.clone(), chosen })
                .collect(),
        }
    }
}
