//! Jointly rational model subsets, type partitions, permutation similarity
//! and threshold networks.

use std::collections::{HashMap, HashSet, VecDeque};

use highs::{RowProblem, Sense};
use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Observation};
use crate::design::{Corner, PriceVector};
use crate::lp::{self, LpOutcome};
use crate::par;
use crate::revealed::{CostTable, Efficiency};
use crate::rng::substream;
use crate::N_CONSTRAINED_ROUNDS;

/// A design slot shared across models: base corner and price vector.
pub type RoundIdentity = (Corner, PriceVector);

#[derive(Debug, Error, PartialEq)]
pub enum HeterogeneityError {
    #[error("model {model_id} has {available} usable rounds, fewer than rho = {rho}")]
    RhoShortfall { model_id: String, available: usize, rho: usize },
    #[error("{models} models x rho = {rho} exceeds {N_CONSTRAINED_ROUNDS} rounds")]
    TooManyRounds { models: usize, rho: usize },
    #[error("could not assign {rho} disjoint rounds to every model in 100 attempts")]
    SamplingFailed { rho: usize },
    #[error("model id {0} appears more than once")]
    DuplicateModel(String),
    #[error("no models given")]
    NoModels,
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("MILP solver returned {0}")]
    Solver(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointMember {
    pub model_id: String,
    pub observations: Vec<Observation>,
}

/// Observations of several models, pooled for joint consistency checks.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct JointDataset {
    pub members: Vec<JointMember>,
}

impl JointDataset {
    pub fn from_datasets(models: &[Dataset]) -> Self {
        JointDataset {
            members: models
                .iter()
                .map(|d| JointMember { model_id: d.model_id.clone(), observations: d.observations.clone() })
                .collect(),
        }
    }

    pub fn n_obs(&self) -> usize {
        self.members.iter().map(|m| m.observations.len()).sum()
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.members.iter().map(|m| m.model_id.clone()).collect()
    }

    fn check_unique(&self) -> Result<(), HeterogeneityError> {
        let mut seen = HashSet::new();
        for m in &self.members {
            if !seen.insert(&m.model_id) {
                return Err(HeterogeneityError::DuplicateModel(m.model_id.clone()));
            }
        }
        Ok(())
    }

    /// Members sorted by id, their pooled cost table and each member's row
    /// range in it.
    fn pooled(&self) -> (Vec<&JointMember>, CostTable, Vec<std::ops::Range<usize>>) {
        let mut members: Vec<&JointMember> = self.members.iter().collect();
        members.sort_by(|a, b| a.model_id.cmp(&b.model_id));
        let mut ranges = Vec::with_capacity(members.len());
        let mut start = 0;
        for m in &members {
            ranges.push(start..start + m.observations.len());
            start += m.observations.len();
        }
        let table = CostTable::from_observations(members.iter().flat_map(|m| m.observations.iter()));
        (members, table, ranges)
    }

    pub fn subset(&self, ids: &[String]) -> JointDataset {
        JointDataset { members: self.members.iter().filter(|m| ids.contains(&m.model_id)).cloned().collect() }
    }
}

/// GARP at the uniform level `e` on all members' observations pooled.
pub fn joint_garp(joint: &JointDataset, e: Efficiency) -> bool {
    CostTable::from_observations(joint.members.iter().flat_map(|m| m.observations.iter())).satisfies_garp(e)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSolution {
    /// Sorted model ids.
    pub members: Vec<String>,
    /// No nonempty subset is consistent; the first model stands alone.
    pub by_fiat: bool,
}

/// Largest jointly consistent set of models by enumeration, largest
/// cardinality first and lexicographic over sorted ids within a size.
pub fn largest_rational_subset(joint: &JointDataset, e: Efficiency) -> Result<SubsetSolution, HeterogeneityError> {
    joint.check_unique()?;
    if joint.members.is_empty() {
        return Err(HeterogeneityError::NoModels);
    }
    let (members, table, ranges) = joint.pooled();
    let m = members.len();
    for k in (1..=m).rev() {
        for combo in (0..m).combinations(k) {
            let rows: Vec<usize> = combo.iter().flat_map(|&i| ranges[i].clone()).collect();
            if table.restrict(&rows).satisfies_garp(e) {
                return Ok(SubsetSolution {
                    members: combo.iter().map(|&i| members[i].model_id.clone()).collect(),
                    by_fiat: false,
                });
            }
        }
    }
    Ok(SubsetSolution { members: vec![members[0].model_id.clone()], by_fiat: true })
}

/// Largest jointly consistent set of models as a mixed-integer program over
/// model indicators, pairwise order indicators and utility levels. Returns
/// the sorted ids of one optimal subset (possibly empty).
pub fn largest_rational_subset_milp(joint: &JointDataset, e: Efficiency) -> Result<Vec<String>, HeterogeneityError> {
    joint.check_unique()?;
    let (members, table, ranges) = joint.pooled();
    let n = table.len();
    let owner: Vec<usize> = (0..members.len()).flat_map(|m| ranges[m].clone().map(move |_| m)).collect();
    let num = *e.numer() as f64;
    let den = *e.denom() as f64;
    let big_a = 1.0 + (0..n).map(|i| table.own(i)).max().unwrap_or(0) as f64;
    let eps = 1.0 / (n as f64 + 1.0);

    let mut pb = RowProblem::default();
    let x: Vec<_> = (0..members.len()).map(|_| pb.add_integer_column(1.0, 0.0..=1.0)).collect();
    let u: Vec<_> = (0..n).map(|_| pb.add_column(0.0, 0.0..=1.0 - eps)).collect();
    let mut psi = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let col = if table.same_bundle(i, j) {
                    pb.add_integer_column(0.0, 1.0..=1.0)
                } else {
                    pb.add_integer_column(0.0, 0.0..=1.0)
                };
                psi.insert((i, j), col);
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = psi[&(i, j)];
            let (ei, ej) = (table.own(i) as f64, table.own(j) as f64);
            // U_i - U_j < psi_ij
            pb.add_row(..=-eps, [(u[i], 1.0), (u[j], -1.0), (p, -1.0)]);
            // psi_ij - 1 <= U_i - U_j
            pb.add_row(-1.0.., [(u[i], 1.0), (u[j], -1.0), (p, -1.0)]);
            // x e E_i - C_ij < psi_ij A, scaled to integers
            pb.add_row(..=den * table.cost(i, j) as f64 - 1.0, [(x[owner[i]], num * ei), (p, -den * big_a)]);
            // (psi_ij - 1) A <= C_ji - x e E_j
            pb.add_row(
                ..=den * table.cost(j, i) as f64 + den * big_a,
                [(p, den * big_a), (x[owner[j]], num * ej)],
            );
        }
    }
    match lp::solve(pb, Sense::Maximise, false) {
        LpOutcome::Optimal(cols) => {
            Ok((0..members.len()).filter(|&m| cols[m] > 0.5).map(|m| members[m].model_id.clone()).collect())
        }
        LpOutcome::Infeasible => Err(HeterogeneityError::Solver("infeasible".into())),
        LpOutcome::Other(s) => Err(HeterogeneityError::Solver(format!("{s:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    /// Types in extraction order, each with sorted ids.
    pub types: Vec<Vec<String>>,
    pub e_level: f64,
}

/// Repeatedly removes the largest jointly consistent subset.
pub fn partition_models(joint: &JointDataset, e: Efficiency) -> Result<Partition, HeterogeneityError> {
    joint.check_unique()?;
    let mut remaining = joint.clone();
    let mut types = Vec::new();
    while !remaining.members.is_empty() {
        let best = largest_rational_subset(&remaining, e)?.members;
        remaining.members.retain(|m| !best.contains(&m.model_id));
        types.push(best);
    }
    Ok(Partition { types, e_level: crate::revealed::ratio_to_f64(e) })
}

/// Assigns `rho` distinct round identities to each model so that no identity
/// is used twice, and collects each model's choices on its identities.
pub fn sample_synthetic_dataset<R: Rng + ?Sized>(
    models: &[Dataset],
    rho: usize,
    rng: &mut R,
) -> Result<JointDataset, HeterogeneityError> {
    if models.is_empty() {
        return Err(HeterogeneityError::NoModels);
    }
    if rho == 0 {
        return Err(HeterogeneityError::Parameter("rho must be positive".into()));
    }
    if models.len() * rho > N_CONSTRAINED_ROUNDS {
        return Err(HeterogeneityError::TooManyRounds { models: models.len(), rho });
    }
    let indexed: Vec<HashMap<RoundIdentity, &Observation>> = models
        .iter()
        .map(|d| d.observations.iter().filter_map(|o| Some((o.round.identity()?, o))).collect())
        .collect();
    for (d, idx) in models.iter().zip(&indexed) {
        if idx.len() < rho {
            return Err(HeterogeneityError::RhoShortfall {
                model_id: d.model_id.clone(),
                available: idx.len(),
                rho,
            });
        }
    }
    let mut slots: Vec<RoundIdentity> =
        Corner::all().flat_map(|c| PriceVector::CANONICAL.iter().map(move |&p| (c, p))).collect();
    'attempt: for _ in 0..100 {
        slots.shuffle(rng);
        let mut used = HashSet::new();
        let mut members = Vec::with_capacity(models.len());
        for (d, idx) in models.iter().zip(&indexed) {
            let mut picked = Vec::with_capacity(rho);
            for slot in &slots {
                if picked.len() == rho {
                    break;
                }
                if let Some(o) = idx.get(slot) {
                    if used.insert(*slot) {
                        picked.push((*o).clone());
                    }
                }
            }
            if picked.len() < rho {
                continue 'attempt;
            }
            members.push(JointMember { model_id: d.model_id.clone(), observations: picked });
        }
        return Ok(JointDataset { members });
    }
    Err(HeterogeneityError::SamplingFailed { rho })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityConfig {
    pub rho: usize,
    pub draws: usize,
    pub e: Efficiency,
    pub seed: u64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig { rho: 20, draws: 500, e: Efficiency::new(333, 1000), seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub model_ids: Vec<String>,
    /// Draws in which each pair shared a type (diagonal = draws).
    pub counts: Vec<Vec<u32>>,
    pub g: Vec<Vec<f64>>,
    pub draws: usize,
    pub rho: usize,
    pub e_level: f64,
    pub seed: u64,
}

/// Same-type frequencies over `draws` synthetic datasets, each drawn on
/// substream `(seed, t)` and partitioned at level `e`.
pub fn permutation_similarity(models: &[Dataset], config: &SimilarityConfig) -> Result<SimilarityMatrix, HeterogeneityError> {
    if config.draws == 0 {
        return Err(HeterogeneityError::Parameter("draws must be positive".into()));
    }
    JointDataset::from_datasets(models).check_unique()?;
    let m = models.len();
    let position: HashMap<&str, usize> = models.iter().enumerate().map(|(i, d)| (d.model_id.as_str(), i)).collect();
    let per_draw = par::map_indexed(config.draws, |t| -> Result<Vec<(usize, usize)>, HeterogeneityError> {
        let mut rng = substream(config.seed, &[t as u64]);
        let joint = sample_synthetic_dataset(models, config.rho, &mut rng)?;
        let partition = partition_models(&joint, config.e)?;
        let mut pairs = Vec::new();
        for ty in &partition.types {
            for (a, b) in ty.iter().tuple_combinations() {
                pairs.push((position[a.as_str()], position[b.as_str()]));
            }
        }
        Ok(pairs)
    });
    let mut counts = vec![vec![0u32; m]; m];
    for draw in per_draw {
        for (a, b) in draw? {
            counts[a][b] += 1;
            counts[b][a] += 1;
        }
    }
    for (i, row) in counts.iter_mut().enumerate() {
        row[i] = config.draws as u32;
    }
    let g = counts.iter().map(|row| row.iter().map(|&c| c as f64 / config.draws as f64).collect()).collect();
    Ok(SimilarityMatrix {
        model_ids: models.iter().map(|d| d.model_id.clone()).collect(),
        counts,
        g,
        draws: config.draws,
        rho: config.rho,
        e_level: crate::revealed::ratio_to_f64(config.e),
        seed: config.seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdNetwork {
    pub model_ids: Vec<String>,
    pub alpha: f64,
    pub adjacency: Vec<Vec<bool>>,
}

impl ThresholdNetwork {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.adjacency.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| self.adjacency[i][j]).collect()
    }
}

/// Links models whose similarity is at least `1 - alpha`.
pub fn threshold_network(g: &SimilarityMatrix, alpha: f64) -> Result<ThresholdNetwork, HeterogeneityError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(HeterogeneityError::Parameter(format!("alpha {alpha} outside (0, 1)")));
    }
    let n = g.model_ids.len();
    let cut = 1.0 - alpha - 1e-9;
    let adjacency = (0..n).map(|i| (0..n).map(|j| i != j && g.g[i][j] >= cut).collect()).collect();
    Ok(ThresholdNetwork { model_ids: g.model_ids.clone(), alpha, adjacency })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub strength: f64,
    /// `None` for degree one; isolated nodes report 0.
    pub clustering: Option<f64>,
    pub betweenness: f64,
    pub eigenvector: f64,
}

pub fn network_metrics(h: &ThresholdNetwork) -> Vec<NodeMetrics> {
    adjacency_metrics(&h.adjacency)
}

/// Metrics of an undirected simple graph given as a symmetric adjacency
/// matrix.
pub fn adjacency_metrics(adj: &[Vec<bool>]) -> Vec<NodeMetrics> {
    let n = adj.len();
    let neighbours: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i && adj[i][j]).collect()).collect();
    let betweenness = brandes(&neighbours);
    let eigen = eigenvector_centrality(&neighbours);
    (0..n)
        .map(|i| {
            let k = neighbours[i].len();
            let clustering = match k {
                0 => Some(0.0),
                1 => None,
                _ => {
                    let links = neighbours[i]
                        .iter()
                        .tuple_combinations()
                        .filter(|(&a, &b)| adj[a][b])
                        .count();
                    Some(2.0 * links as f64 / (k * (k - 1)) as f64)
                }
            };
            NodeMetrics { strength: k as f64, clustering, betweenness: betweenness[i], eigenvector: eigen[i] }
        })
        .collect()
}

/// Shortest-path betweenness with each unordered pair counted once.
fn brandes(neighbours: &[Vec<usize>]) -> Vec<f64> {
    let n = neighbours.len();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &neighbours[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb.iter().map(|c| c / 2.0).collect()
}

/// Principal eigenvector by power iteration on `A + I`, max-normalized.
fn eigenvector_centrality(neighbours: &[Vec<usize>]) -> Vec<f64> {
    let n = neighbours.len();
    let mut x = vec![1.0; n];
    for _ in 0..100_000 {
        let mut next: Vec<f64> = (0..n).map(|i| x[i] + neighbours[i].iter().map(|&j| x[j]).sum::<f64>()).collect();
        let max = next.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            break;
        }
        next.iter_mut().for_each(|v| *v /= max);
        let diff = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if diff <= 1e-10 {
            break;
        }
    }
    (0..n).map(|i| if neighbours[i].is_empty() { 0.0 } else { x[i] }).collect()
}
