//! Revealed-preference relations, GARP at an efficiency level, the critical
//! cost efficiency index and Afriat numbers.
//!
//! Costs are integers (integer prices times shifted Likert points) and
//! efficiency levels are exact rationals, so every relation is decided in
//! integer arithmetic.
//!
//! For observations `i, j` with `C[i][j] = p^i · shift(q^j, o^i)` and own
//! cost `E[i] = C[i][i]`:
//!
//! * `i` weakly prefers `j` at level `e` when `e·E[i] >= C[i][j]` or the two
//!   bundles are identical;
//! * `i` strictly prefers `j` when `e·E[i] > C[i][j]` or the bundles are
//!   identical (the matrix keeps this literal form, but identical bundles are
//!   never counted as a violation);
//! * GARP at `e` holds when no `r` reaches `k` through weak edges while `k`
//!   strictly prefers `r`.

use std::collections::VecDeque;

use highs::{RowProblem, Sense};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::bitmatrix::BitMatrix;
use crate::dataset::{Dataset, Observation};
use crate::design::{Answer, Corner, PriceVector};
use crate::lp::{self, LpOutcome};

/// Exact efficiency level in `[0, 1]`.
pub type Efficiency = Ratio<i64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RevealedError {
    #[error("dataset has no observations")]
    Empty,
    #[error("efficiency vector has {got} entries for {expected} observations")]
    EfficiencyLength { expected: usize, got: usize },
    #[error("efficiency {0} outside [0, 1]")]
    EfficiencyRange(Efficiency),
    #[error("no Afriat numbers exist: GARP fails at this efficiency")]
    Infeasible,
    #[error("LP solver returned {0}")]
    Solver(String),
}

/// Efficiency from a decimal such as `0.333`, kept exact to `1e-9`.
pub fn efficiency_from_f64(e: f64) -> Result<Efficiency, RevealedError> {
    if !(0.0..=1.0).contains(&e) {
        return Err(RevealedError::EfficiencyRange(Ratio::from_integer(-1)));
    }
    let den = 1_000_000_000i64;
    Ok(Ratio::new((e * den as f64).round() as i64, den))
}

fn check_efficiency(e: &Efficiency) -> Result<(), RevealedError> {
    if *e < Ratio::zero() || *e > Ratio::one() {
        return Err(RevealedError::EfficiencyRange(*e));
    }
    Ok(())
}

/// Pairwise costs of a pool of observations.
#[derive(Clone, Debug)]
pub struct CostTable {
    n: usize,
    round_ids: Vec<u32>,
    bundles: Vec<Answer>,
    cost: Vec<u32>,
    same: BitMatrix,
}

impl CostTable {
    pub fn from_parts(parts: &[(u32, Corner, PriceVector, Answer)]) -> Self {
        let n = parts.len();
        let mut cost = Vec::with_capacity(n * n);
        for &(_, corner, prices, _) in parts {
            for &(_, _, _, q) in parts {
                cost.push(q.cost(corner, prices));
            }
        }
        let bundles: Vec<Answer> = parts.iter().map(|p| p.3).collect();
        let same = BitMatrix::from_fn(n, |i, j| bundles[i] == bundles[j]);
        CostTable { n, round_ids: parts.iter().map(|p| p.0).collect(), bundles, cost, same }
    }

    pub fn from_observations<'a>(obs: impl IntoIterator<Item = &'a Observation>) -> Self {
        let parts: Vec<_> =
            obs.into_iter().map(|o| (o.round_id(), o.corner(), o.prices(), o.chosen)).collect();
        Self::from_parts(&parts)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn round_ids(&self) -> &[u32] {
        &self.round_ids
    }

    pub fn bundles(&self) -> &[Answer] {
        &self.bundles
    }

    /// `p^i · shift(q^j, o^i)`.
    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> u32 {
        self.cost[i * self.n + j]
    }

    #[inline]
    pub fn own(&self, i: usize) -> u32 {
        self.cost(i, i)
    }

    pub fn same_bundle(&self, i: usize, j: usize) -> bool {
        self.same.get(i, j)
    }

    /// Sub-table on the given observation indices, in that order.
    pub fn restrict(&self, idx: &[usize]) -> CostTable {
        let n = idx.len();
        let mut cost = Vec::with_capacity(n * n);
        for &i in idx {
            for &j in idx {
                cost.push(self.cost(i, j));
            }
        }
        CostTable {
            n,
            round_ids: idx.iter().map(|&i| self.round_ids[i]).collect(),
            bundles: idx.iter().map(|&i| self.bundles[i]).collect(),
            cost,
            same: BitMatrix::from_fn(n, |a, b| self.same.get(idx[a], idx[b])),
        }
    }

    /// Direct relations at per-observation levels, in their literal form.
    fn literal_relations(&self, e: &[Efficiency]) -> (BitMatrix, BitMatrix) {
        let mut weak = BitMatrix::new(self.n);
        let mut strict = BitMatrix::new(self.n);
        for (i, ei) in e.iter().enumerate() {
            let lhs = *ei.numer() as i128 * self.own(i) as i128;
            let den = *ei.denom() as i128;
            for j in 0..self.n {
                let rhs = den * self.cost(i, j) as i128;
                let same = self.same.get(i, j);
                weak.set(i, j, lhs >= rhs || same);
                strict.set(i, j, lhs > rhs || same);
            }
        }
        (weak, strict)
    }

    /// Relations used for violation detection at the uniform level `e`
    /// (`below = false`) or just below it (`below = true`, where weak and
    /// strict inequality coincide). Identical bundles are dropped from the
    /// strict relation.
    fn uniform_relations(&self, e: Efficiency, below: bool) -> (BitMatrix, BitMatrix) {
        let num = *e.numer() as i128;
        let den = *e.denom() as i128;
        let mut weak = BitMatrix::new(self.n);
        let mut strict = BitMatrix::new(self.n);
        for i in 0..self.n {
            let lhs = num * self.own(i) as i128;
            for j in 0..self.n {
                let rhs = den * self.cost(i, j) as i128;
                let same = self.same.get(i, j);
                let w = if below { lhs > rhs } else { lhs >= rhs };
                weak.set(i, j, w || same);
                strict.set(i, j, lhs > rhs && !same);
            }
        }
        (weak, strict)
    }

    fn violation(weak: &BitMatrix, strict: &BitMatrix) -> Option<(usize, usize)> {
        let closure = weak.closure();
        // r reaches k and k strictly prefers r
        closure.first_common_off_diagonal(&strict.transpose())
    }

    /// GARP at the uniform level `e`.
    pub fn satisfies_garp(&self, e: Efficiency) -> bool {
        let (w, s) = self.uniform_relations(e, false);
        Self::violation(&w, &s).is_none()
    }

    /// GARP at every level strictly below `e`.
    fn satisfies_garp_below(&self, e: Efficiency) -> bool {
        if e.is_zero() {
            return true;
        }
        let (w, s) = self.uniform_relations(e, true);
        Self::violation(&w, &s).is_none()
    }

    /// Whether the CCEI is at least `level`, without computing it: the set
    /// of levels passing GARP is closed downwards, so this holds exactly
    /// when GARP holds everywhere below `level`.
    pub fn ccei_at_least(&self, level: Efficiency) -> bool {
        self.satisfies_garp_below(level)
    }

    fn garp_with(&self, e: &[Efficiency]) -> GarpCheck {
        let (weak, strict_lit) = self.literal_relations(e);
        let strict = BitMatrix::from_fn(self.n, |i, j| strict_lit.get(i, j) && !self.same.get(i, j));
        match Self::violation(&weak, &strict) {
            None => GarpCheck { satisfied: true, witness: None },
            Some((r, k)) => {
                let path = shortest_path(&weak, r, k);
                GarpCheck {
                    satisfied: false,
                    witness: Some(path.into_iter().map(|i| self.round_ids[i]).collect()),
                }
            }
        }
    }

    /// Ratios `C[i][j] / E[i]` at most 1, plus 0 and 1, ascending.
    pub fn critical_candidates(&self) -> Vec<Efficiency> {
        let mut pairs: Vec<(u64, u64)> = vec![(0, 1), (1, 1)];
        for i in 0..self.n {
            let own = self.own(i);
            if own == 0 {
                continue;
            }
            for j in 0..self.n {
                let c = self.cost(i, j);
                if c <= own {
                    pairs.push((c as u64, own as u64));
                }
            }
        }
        pairs.sort_unstable_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
        pairs.dedup_by(|a, b| a.0 * b.1 == b.0 * a.1);
        pairs.into_iter().map(|(c, e)| Ratio::new(c as i64, e as i64)).collect()
    }

    /// Exact CCEI: the supremum of uniform levels at which GARP holds.
    pub fn ccei(&self) -> CceiResult {
        let candidates = self.critical_candidates();
        let one = Ratio::one();
        let at_one = self.garp_with(&vec![one; self.n]);
        let (value, attained) = if at_one.satisfied {
            (one, true)
        } else if self.satisfies_garp_below(one) {
            (one, false)
        } else {
            // largest candidate c with GARP on [0, c); candidates[0] = 0 qualifies
            let (mut lo, mut hi) = (0usize, candidates.len() - 1);
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if self.satisfies_garp_below(candidates[mid]) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let v = candidates[lo];
            (v, self.satisfies_garp(v))
        };
        CceiResult {
            value_exact: value,
            value_float: ratio_to_f64(value),
            critical_candidates: candidates,
            garp_at_one: at_one.satisfied,
            attained,
            witness_cycle: at_one.witness,
        }
    }
}

fn shortest_path(graph: &BitMatrix, from: usize, to: usize) -> Vec<usize> {
    let n = graph.len();
    if from == to {
        return vec![from];
    }
    let mut prev = vec![usize::MAX; n];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for v in graph.row_iter(u) {
            if prev[v] == usize::MAX {
                prev[v] = u;
                if v == to {
                    let mut path = vec![to];
                    let mut cur = to;
                    while cur != from {
                        cur = prev[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return path;
                }
                queue.push_back(v);
            }
        }
    }
    vec![from, to]
}

pub fn ratio_to_f64(r: Efficiency) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Direct and closed relations of a dataset.
#[derive(Clone, Debug)]
pub struct RelationMatrices {
    pub weak_direct: BitMatrix,
    pub strict_direct: BitMatrix,
    pub weak_closure: BitMatrix,
}

fn efficiency_vector(data: &Dataset, e: &[Efficiency]) -> Result<(), RevealedError> {
    if e.len() != data.len() {
        return Err(RevealedError::EfficiencyLength { expected: data.len(), got: e.len() });
    }
    e.iter().try_for_each(check_efficiency)
}

pub fn direct_relations(data: &Dataset, e: &[Efficiency]) -> Result<RelationMatrices, RevealedError> {
    efficiency_vector(data, e)?;
    let table = CostTable::from_observations(&data.observations);
    let (weak_direct, strict_direct) = table.literal_relations(e);
    let weak_closure = weak_direct.closure();
    Ok(RelationMatrices { weak_direct, strict_direct, weak_closure })
}

/// Reflexive-transitive closure.
pub fn transitive_closure(m: &BitMatrix) -> BitMatrix {
    m.closure()
}

/// Outcome of a GARP check. The witness lists round ids along a shortest
/// weak path `r -> ... -> k` whose end strictly prefers its start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarpCheck {
    pub satisfied: bool,
    pub witness: Option<Vec<u32>>,
}

pub fn check_garp(data: &Dataset, e: &[Efficiency]) -> Result<GarpCheck, RevealedError> {
    efficiency_vector(data, e)?;
    Ok(CostTable::from_observations(&data.observations).garp_with(e))
}

pub fn check_garp_uniform(data: &Dataset, e: Efficiency) -> Result<GarpCheck, RevealedError> {
    check_garp(data, &vec![e; data.len()])
}

#[derive(Clone, Debug, PartialEq)]
pub struct CceiResult {
    pub value_exact: Efficiency,
    pub value_float: f64,
    pub critical_candidates: Vec<Efficiency>,
    pub garp_at_one: bool,
    /// Whether GARP holds at `value_exact` itself (the supremum can be an
    /// open endpoint when the last edge to appear is a weak one).
    pub attained: bool,
    pub witness_cycle: Option<Vec<u32>>,
}

pub fn ccei(data: &Dataset) -> Result<CceiResult, RevealedError> {
    if data.is_empty() {
        return Err(RevealedError::Empty);
    }
    Ok(CostTable::from_observations(&data.observations).ccei())
}

/// Utility levels and multipliers satisfying
/// `U[k] <= U[l] + lambda[l] * (C[l][k] - e * E[l])` for every pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AfriatNumbers {
    pub utility: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl AfriatNumbers {
    /// Largest violation of the Afriat inequalities (and of equal utility for
    /// identical bundles); `<= 0` up to rounding when they all hold.
    pub fn max_violation(&self, data: &Dataset, e: Efficiency) -> f64 {
        let table = CostTable::from_observations(&data.observations);
        let slack = afriat_slack(&table, e);
        let mut worst = f64::NEG_INFINITY;
        for l in 0..table.len() {
            for k in 0..table.len() {
                let v = if table.same_bundle(l, k) {
                    (self.utility[k] - self.utility[l]).abs()
                } else {
                    self.utility[k] - self.utility[l] - self.lambda[l] * slack[l][k]
                };
                worst = worst.max(v);
            }
        }
        worst
    }
}

/// `C[l][k] - e * E[l]` as floats.
fn afriat_slack(table: &CostTable, e: Efficiency) -> Vec<Vec<f64>> {
    let ef = ratio_to_f64(e);
    (0..table.len())
        .map(|l| (0..table.len()).map(|k| table.cost(l, k) as f64 - ef * table.own(l) as f64).collect())
        .collect()
}

/// Solves the Afriat inequalities as a linear feasibility problem
/// (`U >= 0`, `lambda >= 1`, minimizing their sum). Identical bundles are
/// tied to equal utility. Infeasibility means GARP fails at `e`.
pub fn recover_afriat_numbers(data: &Dataset, e: Efficiency) -> Result<AfriatNumbers, RevealedError> {
    check_efficiency(&e)?;
    if data.is_empty() {
        return Err(RevealedError::Empty);
    }
    let table = CostTable::from_observations(&data.observations);
    let n = table.len();
    let slack = afriat_slack(&table, e);
    let mut pb = RowProblem::default();
    let u: Vec<_> = (0..n).map(|_| pb.add_column(1.0, 0.0..)).collect();
    let lam: Vec<_> = (0..n).map(|_| pb.add_column(1.0, 1.0..)).collect();
    for l in 0..n {
        for k in 0..n {
            if k == l {
                continue;
            }
            if table.same_bundle(l, k) {
                if k > l {
                    pb.add_row(0.0..=0.0, [(u[k], 1.0), (u[l], -1.0)]);
                }
            } else {
                pb.add_row(..=0.0, [(u[k], 1.0), (u[l], -1.0), (lam[l], -slack[l][k])]);
            }
        }
    }
    let cols = match lp::solve(pb, Sense::Minimise, true) {
        LpOutcome::Optimal(cols) => cols,
        LpOutcome::Infeasible => return Err(RevealedError::Infeasible),
        LpOutcome::Other(status) => return Err(RevealedError::Solver(format!("{status:?}"))),
    };
    let lambda = cols[n..].to_vec();
    let utility = polish_utility(&table, &slack, &lambda).unwrap_or_else(|| cols[..n].to_vec());
    Ok(AfriatNumbers { utility, lambda })
}

/// Recomputes utility levels for fixed multipliers as shortest-path
/// potentials, which satisfy the difference constraints up to float rounding
/// rather than up to the LP tolerance. `None` on a negative cycle.
fn polish_utility(table: &CostTable, slack: &[Vec<f64>], lambda: &[f64]) -> Option<Vec<f64>> {
    let n = table.len();
    let weight = |l: usize, k: usize| if table.same_bundle(l, k) { 0.0 } else { lambda[l] * slack[l][k] };
    let mut dist = vec![0.0f64; n];
    for _ in 0..=n {
        let mut changed = false;
        for l in 0..n {
            for k in 0..n {
                if l != k {
                    let cand = dist[l] + weight(l, k);
                    if cand < dist[k] {
                        dist[k] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            let min = dist.iter().cloned().fold(f64::INFINITY, f64::min);
            return Some(dist.iter().map(|d| d - min).collect());
        }
    }
    None
}
