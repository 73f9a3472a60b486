//! Experiment construction: answers, corners, price vectors, budget sets and
//! the 161-round design.
//!
//! A constrained round is identified by a corner `o` of the answer cube and
//! a price vector `p`. Answers are measured from `o` (component `s` becomes
//! `|q_s - o_s|`) and the round offers answers whose shifted cost `p · q_o`
//! equals the budget.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;
use crate::{BUDGET, N_QUESTIONS, SCALE_MAX};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DesignError {
    #[error("expected {expected} components, got {got}")]
    Length { expected: usize, got: usize },
    #[error("answer component {value} outside 0..={SCALE_MAX}")]
    AnswerRange { value: i64 },
    #[error("corner component {value} is neither 0 nor {SCALE_MAX}")]
    CornerValue { value: i64 },
    #[error("price {value} is not a positive integer")]
    Price { value: i64 },
    #[error("cannot sample from an empty budget set")]
    EmptyBudgetSet,
    #[error("round {round_id} has an empty budget set (corner {corner}, prices {prices})")]
    DegenerateRound { round_id: u32, corner: Corner, prices: PriceVector },
    #[error("invalid design config: {0}")]
    Config(String),
}

/// A survey answer: one Likert point in `0..=5` per question.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct Answer([u8; N_QUESTIONS]);

/// A vertex of the answer cube, every component 0 or 5.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct Corner([u8; N_QUESTIONS]);

/// Relative prices of the five questions, each at least 1.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct PriceVector([u32; N_QUESTIONS]);

fn check_len(values: &[i64]) -> Result<(), DesignError> {
    if values.len() != N_QUESTIONS {
        return Err(DesignError::Length { expected: N_QUESTIONS, got: values.len() });
    }
    Ok(())
}

impl Answer {
    pub fn new(values: [u8; N_QUESTIONS]) -> Result<Self, DesignError> {
        match values.iter().find(|&&v| v > SCALE_MAX) {
            Some(&v) => Err(DesignError::AnswerRange { value: v as i64 }),
            None => Ok(Answer(values)),
        }
    }

    pub fn values(&self) -> [u8; N_QUESTIONS] {
        self.0
    }

    /// Coordinates measured from `corner`.
    pub fn shift(&self, corner: Corner) -> [u8; N_QUESTIONS] {
        std::array::from_fn(|s| self.0[s].abs_diff(corner.0[s]))
    }

    /// Shifted cost `p · q_o`.
    pub fn cost(&self, corner: Corner, prices: PriceVector) -> u32 {
        prices.dot(&self.shift(corner))
    }

    pub fn as_f64(&self) -> [f64; N_QUESTIONS] {
        self.0.map(f64::from)
    }

    /// Inverse of [`Answer::shift`]: the raw answer whose shift from `corner`
    /// is `shifted`.
    pub fn from_shifted(shifted: [u8; N_QUESTIONS], corner: Corner) -> Result<Self, DesignError> {
        Answer::new(shifted)?;
        Ok(Answer(std::array::from_fn(|s| shifted[s].abs_diff(corner.0[s]))))
    }

    /// All 6^5 answers in lexicographic order.
    pub fn all() -> impl Iterator<Item = Answer> {
        let side = SCALE_MAX as usize + 1;
        (0..side.pow(N_QUESTIONS as u32)).map(move |mut code| {
            let mut v = [0u8; N_QUESTIONS];
            for s in (0..N_QUESTIONS).rev() {
                v[s] = (code % side) as u8;
                code /= side;
            }
            Answer(v)
        })
    }
}

impl TryFrom<Vec<i64>> for Answer {
    type Error = DesignError;
    fn try_from(values: Vec<i64>) -> Result<Self, Self::Error> {
        Answer::try_from(values.as_slice())
    }
}

impl TryFrom<&[i64]> for Answer {
    type Error = DesignError;
    fn try_from(values: &[i64]) -> Result<Self, Self::Error> {
        check_len(values)?;
        let mut v = [0u8; N_QUESTIONS];
        for (slot, &x) in v.iter_mut().zip(values) {
            if !(0..=SCALE_MAX as i64).contains(&x) {
                return Err(DesignError::AnswerRange { value: x });
            }
            *slot = x as u8;
        }
        Ok(Answer(v))
    }
}

impl From<Answer> for Vec<i64> {
    fn from(a: Answer) -> Self {
        a.0.iter().map(|&x| x as i64).collect()
    }
}

impl Corner {
    pub const ORIGIN: Corner = Corner([0; N_QUESTIONS]);
    pub const TOP: Corner = Corner([SCALE_MAX; N_QUESTIONS]);

    pub fn new(values: [u8; N_QUESTIONS]) -> Result<Self, DesignError> {
        match values.iter().find(|&&v| v != 0 && v != SCALE_MAX) {
            Some(&v) => Err(DesignError::CornerValue { value: v as i64 }),
            None => Ok(Corner(values)),
        }
    }

    /// The 32 corners, ordered by the binary code of `component == 5`
    /// (question 1 is the most significant bit).
    pub fn all() -> impl Iterator<Item = Corner> {
        (0..1u32 << N_QUESTIONS).map(Corner::from_index)
    }

    pub fn from_index(index: u32) -> Corner {
        Corner(std::array::from_fn(|s| {
            if index >> (N_QUESTIONS - 1 - s) & 1 == 1 {
                SCALE_MAX
            } else {
                0
            }
        }))
    }

    pub fn index(&self) -> u32 {
        self.0.iter().fold(0, |acc, &v| acc << 1 | u32::from(v == SCALE_MAX))
    }

    pub fn values(&self) -> [u8; N_QUESTIONS] {
        self.0
    }

    /// `(5,5,5,5,5) - o`.
    pub fn opposite(&self) -> Corner {
        Corner(self.0.map(|v| SCALE_MAX - v))
    }

    /// `+1` where the corner component is 0 and `-1` where it is 5: the
    /// derivative of a shifted coordinate with respect to the raw one.
    pub fn orientation(&self) -> [f64; N_QUESTIONS] {
        self.0.map(|v| if v == 0 { 1.0 } else { -1.0 })
    }
}

impl TryFrom<Vec<i64>> for Corner {
    type Error = DesignError;
    fn try_from(values: Vec<i64>) -> Result<Self, Self::Error> {
        check_len(&values)?;
        let mut v = [0u8; N_QUESTIONS];
        for (slot, &x) in v.iter_mut().zip(&values) {
            if x != 0 && x != SCALE_MAX as i64 {
                return Err(DesignError::CornerValue { value: x });
            }
            *slot = x as u8;
        }
        Ok(Corner(v))
    }
}

impl From<Corner> for Vec<i64> {
    fn from(c: Corner) -> Self {
        c.0.iter().map(|&x| x as i64).collect()
    }
}

impl PriceVector {
    /// The five canonical price vectors: price 2 on one question, 1 elsewhere.
    pub const CANONICAL: [PriceVector; 5] = [
        PriceVector([2, 1, 1, 1, 1]),
        PriceVector([1, 2, 1, 1, 1]),
        PriceVector([1, 1, 2, 1, 1]),
        PriceVector([1, 1, 1, 2, 1]),
        PriceVector([1, 1, 1, 1, 2]),
    ];

    pub fn new(values: [u32; N_QUESTIONS]) -> Result<Self, DesignError> {
        match values.iter().find(|&&v| v == 0) {
            Some(_) => Err(DesignError::Price { value: 0 }),
            None => Ok(PriceVector(values)),
        }
    }

    pub fn values(&self) -> [u32; N_QUESTIONS] {
        self.0
    }

    pub fn as_f64(&self) -> [f64; N_QUESTIONS] {
        self.0.map(f64::from)
    }

    pub fn dot(&self, shifted: &[u8; N_QUESTIONS]) -> u32 {
        self.0.iter().zip(shifted).map(|(&p, &q)| p * q as u32).sum()
    }
}

impl TryFrom<Vec<i64>> for PriceVector {
    type Error = DesignError;
    fn try_from(values: Vec<i64>) -> Result<Self, Self::Error> {
        check_len(&values)?;
        let mut v = [0u32; N_QUESTIONS];
        for (slot, &x) in v.iter_mut().zip(&values) {
            if x < 1 || x > u32::MAX as i64 {
                return Err(DesignError::Price { value: x });
            }
            *slot = x as u32;
        }
        Ok(PriceVector(v))
    }
}

impl From<PriceVector> for Vec<i64> {
    fn from(p: PriceVector) -> Self {
        p.0.iter().map(|&x| x as i64).collect()
    }
}

fn fmt_tuple<T: fmt::Display>(f: &mut fmt::Formatter<'_>, values: &[T]) -> fmt::Result {
    write!(f, "(")?;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{v}")?;
    }
    write!(f, ")")
}

macro_rules! tuple_display {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt_tuple(f, &self.0)
            }
        }
        impl fmt::Debug for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }
    )*};
}
tuple_display!(Answer, Corner, PriceVector);

/// Componentwise `|q_s - o_s|` for raw integer vectors of equal length.
pub fn shift_coordinates(q: &[i64], o: &[i64]) -> Result<Vec<i64>, DesignError> {
    if q.len() != o.len() {
        return Err(DesignError::Length { expected: o.len(), got: q.len() });
    }
    Ok(q.iter().zip(o).map(|(a, b)| (a - b).abs()).collect())
}

/// Real-valued shift: `x_s` where `o_s = 0` and `5 - x_s` where `o_s = 5`.
/// Agrees with `|x_s - o_s|` on `[0, 5]` and stays an involution on all of R.
pub fn shift_real(x: &[f64; N_QUESTIONS], corner: Corner) -> [f64; N_QUESTIONS] {
    std::array::from_fn(|s| if corner.0[s] == 0 { x[s] } else { SCALE_MAX as f64 - x[s] })
}

/// `{ q in X : p · q_o = budget }` in lexicographic order of raw answers.
pub fn enumerate_budget_set(corner: Corner, prices: PriceVector, budget: u32) -> Vec<Answer> {
    Answer::all().filter(|q| q.cost(corner, prices) == budget).collect()
}

/// `{ q in X : p · q_o <= budget }` in lexicographic order.
pub fn enumerate_comprehensive_set(corner: Corner, prices: PriceVector, budget: u32) -> Vec<Answer> {
    Answer::all().filter(|q| q.cost(corner, prices) <= budget).collect()
}

/// Replaces `corner` by its opposite when the unconstrained answer `q0` is
/// affordable from it, so that `q0` lies strictly above the budget plane.
pub fn apply_corner_flip(q0: Answer, corner: Corner, prices: PriceVector, budget: u32) -> Corner {
    if q0.cost(corner, prices) <= budget {
        corner.opposite()
    } else {
        corner
    }
}

/// Uniform sample without replacement of `min(n, |budget_set|)` members, in
/// random order.
pub fn sample_choice_set<R: Rng + ?Sized>(
    budget_set: &[Answer],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Answer>, DesignError> {
    if budget_set.is_empty() {
        return Err(DesignError::EmptyBudgetSet);
    }
    let k = n.min(budget_set.len());
    let mut picked: Vec<Answer> =
        rand::seq::index::sample(rng, budget_set.len(), k).into_iter().map(|i| budget_set[i]).collect();
    picked.shuffle(rng);
    Ok(picked)
}

/// What each constrained round offers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionMode {
    /// A random sample of `options_per_round` members of the budget set.
    #[default]
    Sampled,
    /// The entire budget set (every answer on the budget plane).
    FullBudget,
    /// Every answer with shifted cost at most the budget. Lets a utility
    /// maximizer over the inequality set always find its choice on the list.
    FullComprehensive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub n_questions: usize,
    pub scale_max: u8,
    pub budget: u32,
    pub options_per_round: usize,
    pub seed: u64,
    #[serde(default)]
    pub option_mode: OptionMode,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            n_questions: N_QUESTIONS,
            scale_max: SCALE_MAX,
            budget: BUDGET,
            options_per_round: 100,
            seed: 0,
            option_mode: OptionMode::Sampled,
        }
    }
}

impl DesignConfig {
    pub fn with_seed(seed: u64) -> Self {
        DesignConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if self.n_questions != N_QUESTIONS || self.scale_max != SCALE_MAX {
            return Err(DesignError::Config(format!(
                "only {N_QUESTIONS} questions on a 0..={SCALE_MAX} scale are supported"
            )));
        }
        if self.options_per_round == 0 {
            return Err(DesignError::Config("options_per_round must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(DesignError::Config("budget must be positive".into()));
        }
        Ok(())
    }
}

/// One round of the experiment. Round 0 is unconstrained and carries no
/// corner, prices or options.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSpec {
    pub round_id: u32,
    /// Corner actually used for the round (after the flip rule).
    pub corner: Option<Corner>,
    pub prices: Option<PriceVector>,
    pub budget: u32,
    pub options: Option<Vec<Answer>>,
    /// Corner before the flip rule. Together with `prices` it is the round's
    /// identity, shared by every model answering the same design slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_corner: Option<Corner>,
}

impl RoundSpec {
    pub fn unconstrained(budget: u32) -> Self {
        RoundSpec { round_id: 0, corner: None, prices: None, budget, options: None, base_corner: None }
    }

    pub fn is_constrained(&self) -> bool {
        self.corner.is_some() && self.prices.is_some()
    }

    /// Identity of the design slot: `(base corner, prices)`, falling back to
    /// the effective corner when no base corner was recorded.
    pub fn identity(&self) -> Option<(Corner, PriceVector)> {
        Some((self.base_corner.or(self.corner)?, self.prices?))
    }
}

/// Slot id of `(corner, prices)` in the canonical ordering: corners by
/// index, prices in canonical order, numbered from 1.
pub fn round_id_for(corner: Corner, price_index: usize) -> u32 {
    1 + corner.index() * PriceVector::CANONICAL.len() as u32 + price_index as u32
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Design {
    pub config: DesignConfig,
    pub q0: Answer,
    pub rounds: Vec<RoundSpec>,
}

impl Design {
    pub fn constrained_rounds(&self) -> impl Iterator<Item = &RoundSpec> {
        self.rounds.iter().filter(|r| r.is_constrained())
    }

    pub fn round(&self, round_id: u32) -> Option<&RoundSpec> {
        self.rounds.iter().find(|r| r.round_id == round_id)
    }

    pub fn shared_rounds(&self) -> Vec<Arc<RoundSpec>> {
        self.rounds.iter().cloned().map(Arc::new).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("design serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Builds the full design for a model whose unconstrained answer is `q0`.
///
/// Rounds 1..=160 enumerate every corner against every canonical price
/// vector; each round's corner is flipped with respect to `q0` and its option
/// list is drawn from a substream keyed by the round id.
pub fn generate_design(q0: Answer, config: &DesignConfig) -> Result<Design, DesignError> {
    config.validate()?;
    let mut rounds = Vec::with_capacity(1 + 32 * PriceVector::CANONICAL.len());
    rounds.push(RoundSpec::unconstrained(config.budget));
    for base in Corner::all() {
        for (pi, &prices) in PriceVector::CANONICAL.iter().enumerate() {
            let round_id = round_id_for(base, pi);
            let corner = apply_corner_flip(q0, base, prices, config.budget);
            let mut rng = substream(config.seed, &[round_id as u64]);
            let options = match config.option_mode {
                OptionMode::Sampled => {
                    let set = enumerate_budget_set(corner, prices, config.budget);
                    if set.is_empty() {
                        return Err(DesignError::DegenerateRound { round_id, corner, prices });
                    }
                    sample_choice_set(&set, config.options_per_round, &mut rng)?
                }
                OptionMode::FullBudget | OptionMode::FullComprehensive => {
                    let mut set = if config.option_mode == OptionMode::FullBudget {
                        enumerate_budget_set(corner, prices, config.budget)
                    } else {
                        enumerate_comprehensive_set(corner, prices, config.budget)
                    };
                    if set.is_empty() {
                        return Err(DesignError::DegenerateRound { round_id, corner, prices });
                    }
                    set.shuffle(&mut rng);
                    set
                }
            };
            rounds.push(RoundSpec {
                round_id,
                corner: Some(corner),
                prices: Some(prices),
                budget: config.budget,
                options: Some(options),
                base_corner: Some(base),
            });
        }
    }
    Ok(Design { config: config.clone(), q0, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use std::collections::{HashMap, HashSet};

    fn ans(v: [u8; 5]) -> Answer {
        Answer::new(v).unwrap()
    }

    fn corner(v: [u8; 5]) -> Corner {
        Corner::new(v).unwrap()
    }

    #[test]
    fn shift_examples() {
        assert_eq!(ans([3, 2, 5, 1, 4]).shift(corner([5, 0, 5, 5, 5])), [2, 2, 0, 4, 1]);
        assert_eq!(ans([0; 5]).shift(Corner::ORIGIN), [0; 5]);
        assert_eq!(ans([5; 5]).shift(Corner::TOP), [0; 5]);
        assert_eq!(shift_coordinates(&[3, 2, 5, 1, 4], &[5, 0, 5, 5, 5]).unwrap(), vec![2, 2, 0, 4, 1]);
        assert!(matches!(shift_coordinates(&[1, 2], &[0; 5]), Err(DesignError::Length { .. })));
    }

    #[test]
    fn shift_is_an_involution_on_the_cube() {
        for o in Corner::all() {
            for q in Answer::all().step_by(7) {
                assert_eq!(Answer::from_shifted(q.shift(o), o).unwrap(), q);
            }
        }
        let x = [-1.5, 0.3, 2.0, 4.9, 7.25];
        for o in Corner::all() {
            let back = shift_real(&shift_real(&x, o), o);
            assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn validation() {
        assert!(Answer::new([6, 0, 0, 0, 0]).is_err());
        assert!(Answer::try_from(vec![1, 2, 3]).is_err());
        assert!(Corner::new([0, 1, 0, 0, 0]).is_err());
        assert!(PriceVector::try_from(vec![1, 1, 0, 1, 1]).is_err());
        assert_eq!(Corner::all().count(), 32);
        assert_eq!(Corner::all().collect::<HashSet<_>>().len(), 32);
        for c in Corner::all() {
            assert_eq!(Corner::from_index(c.index()), c);
        }
    }

    #[test]
    fn budget_set_matches_brute_force_count() {
        let p = PriceVector::CANONICAL[0];
        let set = enumerate_budget_set(Corner::ORIGIN, p, 12);
        assert!(set.iter().all(|q| {
            let v = q.values().map(u32::from);
            2 * v[0] + v[1] + v[2] + v[3] + v[4] == 12
        }));
        // independent nested-loop count
        let mut count = 0;
        for a in 0..=5u32 {
            for b in 0..=5u32 {
                for c in 0..=5u32 {
                    for d in 0..=5u32 {
                        for e in 0..=5u32 {
                            if 2 * a + b + c + d + e == 12 {
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(set.len(), count);
        assert!(set.windows(2).all(|w| w[0] < w[1]));
        assert!(enumerate_budget_set(Corner::ORIGIN, PriceVector::new([1; 5]).unwrap(), 26).is_empty());
    }

    #[test]
    fn corner_flip_rule() {
        let p1 = PriceVector::CANONICAL[0];
        let p5 = PriceVector::CANONICAL[4];
        assert_eq!(apply_corner_flip(ans([0; 5]), Corner::ORIGIN, p1, 12), Corner::TOP);
        assert_eq!(apply_corner_flip(ans([5; 5]), Corner::ORIGIN, p1, 12), Corner::ORIGIN);
        // boundary: 2+2+2+2+4 = 12 flips
        assert_eq!(ans([3; 5]).cost(Corner::TOP, p5), 12);
        assert_eq!(apply_corner_flip(ans([3; 5]), Corner::TOP, p5, 12), Corner::ORIGIN);
    }

    #[test]
    fn no_degenerate_rounds_at_budget_12() {
        for o in Corner::all() {
            for p in PriceVector::CANONICAL {
                assert!(!enumerate_budget_set(o, p, 12).is_empty());
            }
        }
    }

    #[test]
    fn design_covers_every_slot_once() {
        let q0 = ans([2, 3, 1, 4, 2]);
        let d = generate_design(q0, &DesignConfig::with_seed(11)).unwrap();
        assert_eq!(d.rounds.len(), 161);
        assert!(!d.rounds[0].is_constrained());
        let ids: HashSet<_> = d.constrained_rounds().map(|r| r.identity().unwrap()).collect();
        assert_eq!(ids.len(), 160);
        for r in d.constrained_rounds() {
            let (o, p) = (r.corner.unwrap(), r.prices.unwrap());
            let opts = r.options.as_ref().unwrap();
            assert_eq!(opts.len(), 100.min(enumerate_budget_set(o, p, 12).len()));
            assert_eq!(opts.iter().collect::<HashSet<_>>().len(), opts.len());
            assert!(opts.iter().all(|q| q.cost(o, p) == 12));
            assert!(q0.cost(o, p) > 12, "q0 affordable in round {}", r.round_id);
        }
    }

    #[test]
    fn design_is_a_function_of_q0_and_seed() {
        let q0 = ans([1, 1, 4, 0, 5]);
        let a = generate_design(q0, &DesignConfig::with_seed(5)).unwrap();
        let b = generate_design(q0, &DesignConfig::with_seed(5)).unwrap();
        let c = generate_design(q0, &DesignConfig::with_seed(6)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_ne!(a.to_json(), c.to_json());
        assert_eq!(Design::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn small_budget_sets_are_offered_whole() {
        // budget 3 under p = (2,1,1,1,1) has fewer than 100 members
        let cfg = DesignConfig { budget: 3, ..DesignConfig::with_seed(1) };
        let d = generate_design(ans([5; 5]), &cfg).unwrap();
        for r in d.constrained_rounds() {
            let full = enumerate_budget_set(r.corner.unwrap(), r.prices.unwrap(), 3);
            assert!(full.len() < 100);
            let mut got = r.options.clone().unwrap();
            got.sort();
            assert_eq!(got, full);
        }
    }

    #[test]
    fn full_modes_list_entire_sets() {
        let q0 = ans([4, 1, 3, 3, 0]);
        for mode in [OptionMode::FullBudget, OptionMode::FullComprehensive] {
            let cfg = DesignConfig { option_mode: mode, ..DesignConfig::with_seed(3) };
            let d = generate_design(q0, &cfg).unwrap();
            for r in d.constrained_rounds().take(10) {
                let (o, p) = (r.corner.unwrap(), r.prices.unwrap());
                let mut full = match mode {
                    OptionMode::FullBudget => enumerate_budget_set(o, p, 12),
                    _ => enumerate_comprehensive_set(o, p, 12),
                };
                let mut got = r.options.clone().unwrap();
                got.sort();
                full.sort();
                assert_eq!(got, full);
            }
        }
    }

    #[test]
    fn sample_sizes() {
        let mut rng = substream(1, &[]);
        let big: Vec<Answer> = Answer::all().take(300).collect();
        let s = sample_choice_set(&big, 100, &mut rng).unwrap();
        assert_eq!(s.iter().collect::<HashSet<_>>().len(), 100);
        let small: Vec<Answer> = Answer::all().take(40).collect();
        assert_eq!(sample_choice_set(&small, 100, &mut rng).unwrap().len(), 40);
        assert_eq!(sample_choice_set(&[], 3, &mut rng), Err(DesignError::EmptyBudgetSet));
    }

    #[test]
    fn sampling_is_uniform() {
        let set: Vec<Answer> = Answer::all().take(10).collect();
        let mut counts: HashMap<Answer, usize> = HashMap::new();
        let draws = 10_000;
        for d in 0..draws {
            let mut rng = substream(99, &[d]);
            for q in sample_choice_set(&set, 3, &mut rng).unwrap() {
                *counts.entry(q).or_default() += 1;
            }
        }
        for q in &set {
            let freq = counts[q] as f64 / draws as f64;
            assert!((freq - 0.3).abs() <= 0.02, "{q}: {freq}");
        }
    }

    #[test]
    fn json_shape() {
        let d = generate_design(ans([0; 5]), &DesignConfig::with_seed(2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert!(v["rounds"][0]["corner"].is_null());
        assert!(v["rounds"][0]["options"].is_null());
        assert_eq!(v["rounds"][1]["budget"], 12);
        assert_eq!(v["q0"], serde_json::json!([0, 0, 0, 0, 0]));
        let keys: Vec<&str> = v["rounds"][1].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert!(keys.contains(&"round_id") && keys.contains(&"options"));
    }
}
