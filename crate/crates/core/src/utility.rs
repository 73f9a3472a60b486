//! Quadratic single-peaked utility, constrained demand and its nonlinear
//! least-squares estimation.

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::design::{shift_real, Answer, Corner, PriceVector, RoundSpec};
use crate::par;
use crate::rng::substream;
use crate::{N_QUESTIONS, SCALE_MAX};

const N: usize = N_QUESTIONS;
/// Free parameters: five ideal answers and four weight logits (the fifth is 0).
pub const N_THETA: usize = 2 * N - 1;
pub type Theta = [f64; N_THETA];

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("weights must be positive and finite, got {0:?}")]
    Weights([f64; N]),
    #[error("no observations to fit")]
    Empty,
    #[error("unconstrained answer is missing")]
    MissingQ0,
    #[error("at least 8 restarts are required, got {0}")]
    Restarts(usize),
}

/// Question weights `a` (positive, summing to one) and ideal answers `b` in
/// raw coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    pub a: [f64; N],
    pub b: [f64; N],
}

impl UtilityParams {
    /// Normalizes `a` to sum to one.
    pub fn new(a: [f64; N], b: [f64; N]) -> Result<Self, FitError> {
        if a.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(FitError::Weights(a));
        }
        let s: f64 = a.iter().sum();
        Ok(UtilityParams { a: a.map(|x| x / s), b })
    }

    pub fn from_theta(theta: &Theta) -> Self {
        let mut b = [0.0; N];
        b.copy_from_slice(&theta[..N]);
        UtilityParams { a: softmax(&theta[N..]), b }
    }

    pub fn to_theta(&self) -> Theta {
        let mut t = [0.0; N_THETA];
        t[..N].copy_from_slice(&self.b);
        for k in 0..N - 1 {
            t[N + k] = (self.a[k] / self.a[N - 1]).ln();
        }
        t
    }

    /// Random start: `b` uniform on the answer box, logits standard normal.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut t = [0.0; N_THETA];
        for v in &mut t[..N] {
            *v = rng.random_range(0.0..=SCALE_MAX as f64);
        }
        for v in &mut t[N..] {
            *v = StandardNormal.sample(rng);
        }
        Self::from_theta(&t)
    }
}

fn softmax(logits: &[f64]) -> [f64; N] {
    let mut z = [0.0; N];
    z[..N - 1].copy_from_slice(logits);
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|x| (x - max).exp());
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

/// `-1/2 * sum a (q - b)^2`.
pub fn utility_value(params: &UtilityParams, q: &[f64; N]) -> f64 {
    -0.5 * (0..N).map(|s| params.a[s] * (q[s] - params.b[s]).powi(2)).sum::<f64>()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemandMode {
    /// Exact maximizer of the utility on the budget hyperplane.
    #[default]
    #[serde(rename = "lagrangian")]
    Lagrangian,
    /// The published closed form, kept for replication.
    #[serde(rename = "paper-verbatim")]
    PaperVerbatim,
}

impl DemandMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DemandMode::Lagrangian => "lagrangian",
            DemandMode::PaperVerbatim => "paper-verbatim",
        }
    }
}

impl std::str::FromStr for DemandMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lagrangian" => Ok(DemandMode::Lagrangian),
            "paper-verbatim" | "paper_verbatim" | "paper" => Ok(DemandMode::PaperVerbatim),
            _ => Err(format!("unknown demand mode {s:?}")),
        }
    }
}

/// Geometry of one constrained round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundGeometry {
    pub corner: Corner,
    pub prices: PriceVector,
    pub budget: f64,
}

impl RoundGeometry {
    pub fn of(round: &RoundSpec) -> Option<Self> {
        let (corner, prices) = (round.corner?, round.prices?);
        Some(RoundGeometry { corner, prices, budget: round.budget as f64 })
    }
}

/// Predicted shifted answer and its Jacobian with respect to `(b, a)`
/// (columns `0..5` are `b` in raw coordinates, `5..10` are `a`).
fn predict_with_jacobian(
    params: &UtilityParams,
    g: &RoundGeometry,
    mode: DemandMode,
) -> ([f64; N], [[f64; 2 * N]; N]) {
    let p = g.prices.as_f64();
    let a = &params.a;
    let bh = shift_real(&params.b, g.corner);
    let sigma = g.corner.orientation();
    let gap = g.budget - (0..N).map(|s| p[s] * bh[s]).sum::<f64>();
    let mut q = [0.0; N];
    let mut jac = [[0.0; 2 * N]; N];
    match mode {
        DemandMode::Lagrangian => {
            let s: f64 = (0..N).map(|k| p[k] * p[k] / a[k]).sum();
            let w: [f64; N] = std::array::from_fn(|z| p[z] / a[z] / s);
            for z in 0..N {
                q[z] = bh[z] + gap * w[z];
                for k in 0..N {
                    let d = if z == k { 1.0 } else { 0.0 };
                    jac[z][k] = sigma[k] * (d - p[k] * w[z]);
                    jac[z][N + k] = gap * w[z] * (p[k] / a[k] * w[k] - d / a[z]);
                }
            }
        }
        DemandMode::PaperVerbatim => {
            let r: f64 = (0..N).map(|k| a[k] / (p[k] * p[k])).sum();
            let v: [f64; N] = std::array::from_fn(|z| a[z] / (p[z] * p[z]) / r);
            for z in 0..N {
                let pull = gap / p[z] - bh[z];
                q[z] = bh[z] + v[z] * pull;
                for k in 0..N {
                    let d = if z == k { 1.0 } else { 0.0 };
                    jac[z][k] = sigma[k] * (d * (1.0 - v[z]) - v[z] * p[k] / p[z]);
                    jac[z][N + k] = (d / (p[z] * p[z] * r) - v[z] / (p[k] * p[k] * r)) * pull;
                }
            }
        }
    }
    (q, jac)
}

pub fn predict(params: &UtilityParams, g: &RoundGeometry, mode: DemandMode) -> [f64; N] {
    predict_with_jacobian(params, g, mode).0
}

/// Maximizer of the utility on `{q : p . shift(q) = budget}`, in shifted
/// coordinates. Not clamped to the answer box.
pub fn predict_answer_lagrangian(params: &UtilityParams, round: &RoundSpec) -> Option<[f64; N]> {
    Some(predict(params, &RoundGeometry::of(round)?, DemandMode::Lagrangian))
}

/// The published closed form `alpha * b + (1 - alpha) * (m - p . b) / p`,
/// in shifted coordinates.
pub fn predict_answer_paper(params: &UtilityParams, round: &RoundSpec) -> Option<[f64; N]> {
    Some(predict(params, &RoundGeometry::of(round)?, DemandMode::PaperVerbatim))
}

/// One observation to fit: a round and a real-valued raw answer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitTarget {
    pub geometry: RoundGeometry,
    pub answer: [f64; N],
}

impl FitTarget {
    pub fn from_dataset(data: &Dataset) -> Vec<FitTarget> {
        data.observations
            .iter()
            .map(|o| FitTarget {
                geometry: RoundGeometry { corner: o.corner(), prices: o.prices(), budget: o.round.budget as f64 },
                answer: o.chosen.as_f64(),
            })
            .collect()
    }

    fn shifted(&self) -> [f64; N] {
        shift_real(&self.answer, self.geometry.corner)
    }
}

/// Sum of squared residuals in shifted coordinates and its gradient in
/// `theta`.
pub fn sse_and_gradient(targets: &[FitTarget], mode: DemandMode, theta: &Theta) -> (f64, Theta) {
    let (r, j) = residuals(targets, mode, theta);
    let g = 2.0 * j.transpose() * &r;
    (r.norm_squared(), std::array::from_fn(|k| g[k]))
}

pub fn sse(targets: &[FitTarget], mode: DemandMode, theta: &Theta) -> f64 {
    let params = UtilityParams::from_theta(theta);
    targets
        .iter()
        .map(|t| {
            let q = predict(&params, &t.geometry, mode);
            let y = t.shifted();
            (0..N).map(|z| (y[z] - q[z]).powi(2)).sum::<f64>()
        })
        .sum()
}

type Jac = nalgebra::OMatrix<f64, nalgebra::Dyn, nalgebra::Const<N_THETA>>;

fn residuals(targets: &[FitTarget], mode: DemandMode, theta: &Theta) -> (nalgebra::DVector<f64>, Jac) {
    let params = UtilityParams::from_theta(theta);
    let a = params.a;
    // d a_k / d logit_j
    let da: [[f64; N - 1]; N] =
        std::array::from_fn(|k| std::array::from_fn(|j| a[k] * (if k == j { 1.0 } else { 0.0 } - a[j])));
    let rows = targets.len() * N;
    let mut r = nalgebra::DVector::zeros(rows);
    let mut jac = Jac::zeros(rows);
    for (t, target) in targets.iter().enumerate() {
        let (q, dq) = predict_with_jacobian(&params, &target.geometry, mode);
        let y = target.shifted();
        for z in 0..N {
            let row = t * N + z;
            r[row] = y[z] - q[z];
            for k in 0..N {
                jac[(row, k)] = -dq[z][k];
            }
            for j in 0..N - 1 {
                jac[(row, N + j)] = -(0..N).map(|k| dq[z][N + k] * da[k][j]).sum::<f64>();
            }
        }
    }
    (r, jac)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub demand_mode: DemandMode,
    pub n_restarts: usize,
    /// Convergence threshold on the infinity norm of the SSE gradient.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { demand_mode: DemandMode::Lagrangian, n_restarts: 8, tol: 1e-6, max_iter: 500, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: UtilityParams,
    pub sse: f64,
    pub n_rounds_used: usize,
    pub converged: bool,
    pub n_restarts: usize,
    pub demand_mode: DemandMode,
    /// Index of the restart that produced `params`.
    pub best_restart: usize,
}

/// One local Levenberg-Marquardt run.
#[derive(Clone, Debug)]
pub struct LocalFit {
    pub theta: Theta,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
    /// SSE after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

pub fn levenberg_marquardt(targets: &[FitTarget], mode: DemandMode, start: Theta, tol: f64, max_iter: usize) -> LocalFit {
    let mut theta = start;
    let (mut r, mut jac) = residuals(targets, mode, &theta);
    let mut cost = r.norm_squared();
    let mut trace = vec![cost];
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let jtj: SMatrix<f64, N_THETA, N_THETA> = jac.transpose() * &jac;
        let jtr: SVector<f64, N_THETA> = jac.transpose() * &r;
        if 2.0 * jtr.amax() <= tol {
            converged = true;
            break;
        }
        let mut accepted = false;
        while mu < 1e16 {
            let mut lhs = jtj;
            for k in 0..N_THETA {
                lhs[(k, k)] += mu * (jtj[(k, k)] + 1e-9);
            }
            let Some(chol) = lhs.cholesky() else {
                mu *= 4.0;
                continue;
            };
            let step = chol.solve(&(-jtr));
            let trial: Theta = std::array::from_fn(|k| theta[k] + step[k]);
            let trial_cost = sse(targets, mode, &trial);
            if trial_cost.is_finite() && trial_cost < cost {
                theta = trial;
                (r, jac) = residuals(targets, mode, &theta);
                cost = r.norm_squared();
                trace.push(cost);
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // no descent step exists at any damping: stationary to rounding
            let g = 2.0 * (jac.transpose() * &r).amax();
            converged = g <= tol.max(1e-9 * (1.0 + cost));
            break;
        }
    }
    if !converged && iterations >= max_iter {
        let g = 2.0 * (jac.transpose() * &r).amax();
        converged = g <= tol;
    }
    LocalFit { theta, sse: cost, converged, iterations, trace }
}

/// Multi-start NLLS on explicit targets. Restart `i` starts from substream
/// `(seed, i)`; the lowest SSE wins, ties to the lower index.
pub fn fit_targets(targets: &[FitTarget], config: &FitConfig) -> Result<FitResult, FitError> {
    if targets.is_empty() {
        return Err(FitError::Empty);
    }
    if config.n_restarts < 8 {
        return Err(FitError::Restarts(config.n_restarts));
    }
    let runs = par::map_indexed(config.n_restarts, |i| {
        let start = UtilityParams::random(&mut substream(config.seed, &[i as u64])).to_theta();
        levenberg_marquardt(targets, config.demand_mode, start, config.tol, config.max_iter)
    });
    let (best_restart, best) = runs
        .iter()
        .enumerate()
        .min_by(|(i, x), (j, y)| x.sse.total_cmp(&y.sse).then(i.cmp(j)))
        .expect("at least one restart");
    Ok(FitResult {
        params: UtilityParams::from_theta(&best.theta),
        sse: best.sse,
        n_rounds_used: targets.len(),
        converged: best.converged && targets.len() >= 10,
        n_restarts: config.n_restarts,
        demand_mode: config.demand_mode,
        best_restart,
    })
}

pub fn fit_nlls(data: &Dataset, config: &FitConfig) -> Result<FitResult, FitError> {
    fit_targets(&FitTarget::from_dataset(data), config)
}

/// `q0 - b` in raw coordinates.
pub fn ideal_vs_unconstrained(params: &UtilityParams, q0: Option<Answer>) -> Result<[f64; N], FitError> {
    let q = q0.ok_or(FitError::MissingQ0)?.as_f64();
    Ok(std::array::from_fn(|s| q[s] - params.b[s]))
}
