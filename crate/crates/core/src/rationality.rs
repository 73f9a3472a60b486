//! Monte-Carlo test of random choice against approximate utility
//! maximization.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

use crate::dataset::{Dataset, Observation};
use crate::design::RoundSpec;
use crate::par;
use crate::revealed::{ratio_to_f64, CostTable, Efficiency};
use crate::rng::{label_key, substream};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TestError {
    #[error("dataset {0} has no observations")]
    Empty(String),
    #[error("n_draws must be at least 1")]
    NoDraws,
    #[error("round {0} has no options to draw from")]
    NoOptions(u32),
}

/// Rounds the random counterparts are drawn on.
#[derive(Clone, Debug, Default)]
pub enum Support {
    /// Only the rounds present in the observed dataset.
    #[default]
    Observed,
    /// An explicit round list, typically every constrained round of a design.
    Rounds(Vec<Arc<RoundSpec>>),
}

#[derive(Clone, Debug)]
pub struct TestConfig {
    pub n_draws: usize,
    pub seed: u64,
    pub support: Support,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig { n_draws: 1000, seed: 0, support: Support::Observed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestResult {
    pub model_id: String,
    pub ccei_observed: Efficiency,
    pub n_obs: usize,
    pub n_draws: usize,
    /// Random draws with CCEI at least the observed one.
    pub n_at_least: u64,
    pub p_value: f64,
    pub pass_1pct: bool,
    pub pass_5pct: bool,
    pub pass_10pct: bool,
    pub seed: u64,
}

impl TestResult {
    /// `p <= percent / 100`, decided on integers.
    pub fn passes_percent(&self, percent: u64) -> bool {
        self.n_at_least * 100 <= percent * self.n_draws as u64
    }

    /// Significance stars: three at 1%, two at 5%, one at 10%.
    pub fn stars(&self) -> &'static str {
        match (self.pass_1pct, self.pass_5pct, self.pass_10pct) {
            (true, _, _) => "***",
            (_, true, _) => "**",
            (_, _, true) => "*",
            _ => "",
        }
    }
}

fn draw_choices<R: Rng + ?Sized>(rounds: &[Arc<RoundSpec>], rng: &mut R) -> Result<Vec<Observation>, TestError> {
    rounds
        .iter()
        .map(|r| {
            let options = r.options.as_deref().unwrap_or(&[]);
            let chosen = *options.choose(rng).ok_or(TestError::NoOptions(r.round_id))?;
            Ok(Observation { round: r.clone(), chosen })
        })
        .collect()
}

/// Same rounds and option sets with each choice replaced by a uniform draw.
pub fn generate_random_dataset<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Result<Dataset, TestError> {
    let rounds: Vec<_> = data.observations.iter().map(|o| o.round.clone()).collect();
    Ok(Dataset { model_id: data.model_id.clone(), q0: data.q0, observations: draw_choices(&rounds, rng)? })
}

fn random_table(rounds: &[Arc<RoundSpec>], model_id: &str, seed: u64, n: u64) -> Result<CostTable, TestError> {
    let mut rng = substream(seed, &[label_key(model_id), n]);
    Ok(CostTable::from_observations(&draw_choices(rounds, &mut rng)?))
}

/// Random-choice CCEI for draw `n` of a model, on its own substream.
pub fn random_ccei(rounds: &[Arc<RoundSpec>], model_id: &str, seed: u64, n: u64) -> Result<Efficiency, TestError> {
    Ok(random_table(rounds, model_id, seed, n)?.ccei().value_exact)
}

pub fn rationality_test(data: &Dataset, config: &TestConfig) -> Result<TestResult, TestError> {
    if data.is_empty() {
        return Err(TestError::Empty(data.model_id.clone()));
    }
    if config.n_draws == 0 {
        return Err(TestError::NoDraws);
    }
    let rounds: Vec<Arc<RoundSpec>> = match &config.support {
        Support::Observed => data.observations.iter().map(|o| o.round.clone()).collect(),
        Support::Rounds(r) => r.iter().filter(|r| r.is_constrained()).cloned().collect(),
    };
    if let Some(r) = rounds.iter().find(|r| r.options.as_ref().is_none_or(|o| o.is_empty())) {
        return Err(TestError::NoOptions(r.round_id));
    }
    let observed = CostTable::from_observations(&data.observations).ccei().value_exact;
    let n_at_least = par::count_indexed(config.n_draws, |n| {
        // same outcome as comparing random_ccei with `observed`, one GARP check
        let table = random_table(&rounds, &data.model_id, config.seed, n as u64).expect("options checked");
        u64::from(table.ccei_at_least(observed))
    });
    let mut result = TestResult {
        model_id: data.model_id.clone(),
        ccei_observed: observed,
        n_obs: data.len(),
        n_draws: config.n_draws,
        n_at_least,
        p_value: n_at_least as f64 / config.n_draws as f64,
        pass_1pct: false,
        pass_5pct: false,
        pass_10pct: false,
        seed: config.seed,
    };
    result.pass_1pct = result.passes_percent(1);
    result.pass_5pct = result.passes_percent(5);
    result.pass_10pct = result.passes_percent(10);
    Ok(result)
}

/// Observed CCEI as a float, rounded to three decimals for reports.
pub fn ccei_3dp(result: &TestResult) -> String {
    format!("{:.3}", ratio_to_f64(result.ccei_observed))
}
