//! Acceptance checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! replication check needs `PSM_REPLICATION_DIR` (see the README) and is
//! skipped when it is unset or the directory is missing.

use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use psm_core::dataset::{Dataset, Observation};
use psm_core::design::{generate_design, shift_real, Answer, Corner, DesignConfig, OptionMode, PriceVector, RoundSpec};
use psm_core::heterogeneity::{
    adjacency_metrics, largest_rational_subset, largest_rational_subset_milp, partition_models,
    permutation_similarity, threshold_network, JointDataset, JointMember, SimilarityConfig,
};
use psm_core::rationality::{rationality_test, Support, TestConfig};
use psm_core::revealed::{ccei, check_garp_uniform, recover_afriat_numbers};
use psm_core::rng::substream;
use psm_core::survey::{build_prompt, parse_response, run_session, AgentKind, AgentSpec, SyntheticAgent, QUESTIONS};
use psm_core::utility::{
    fit_targets, predict, predict_answer_lagrangian, FitConfig, FitTarget, RoundGeometry, UtilityParams,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

fn one() -> Ratio<i64> {
    Ratio::from_integer(1)
}

/// A synthetic agent's answered constrained rounds on its own design.
fn agent_dataset(id: &str, spec: AgentSpec, mode: OptionMode, design_seed: u64) -> Dataset {
    let q0 = match &spec.params {
        Some(p) => Answer::new(p.b.map(|x| x.round().clamp(0.0, 5.0) as u8)).unwrap(),
        None => Answer::new([2, 3, 2, 3, 2]).unwrap(),
    };
    let cfg = DesignConfig { option_mode: mode, ..DesignConfig::with_seed(design_seed) };
    let design = generate_design(q0, &cfg).unwrap();
    let agent = SyntheticAgent::new(spec).unwrap();
    let log = run_session(&agent, id, &design, &mut |_| Ok(())).map_err(|(_, e)| e).unwrap();
    log.to_dataset(&design).unwrap()
}

fn utility_spec(kind: AgentKind, params: UtilityParams) -> AgentSpec {
    AgentSpec { kind, params: Some(params), fixed_index: None, seed: 0 }
}

fn ac1() -> Check {
    let start = Instant::now();
    let round = |id, prices, q: [u8; 5]| {
        let q = Answer::new(q).unwrap();
        let r = RoundSpec {
            round_id: id,
            corner: Some(Corner::ORIGIN),
            prices: Some(PriceVector::new(prices).unwrap()),
            budget: 6,
            options: Some(vec![q]),
            base_corner: None,
        };
        Observation::new(Arc::new(r), q).unwrap()
    };
    let d = Dataset::new(
        "toy",
        None,
        vec![round(1, [2, 1, 1, 1, 1], [3, 0, 0, 0, 0]), round(2, [1, 2, 1, 1, 1], [0, 3, 0, 0, 0])],
    )
    .unwrap();
    let c = ccei(&d).map_err(|e| e.to_string())?;
    ensure(c.value_exact == Ratio::new(1, 2), || format!("ccei {}", c.value_exact))?;
    let grid = (0..=10_000i64).rev().find(|&k| check_garp_uniform(&d, Ratio::new(k, 10_000)).unwrap().satisfied).unwrap();
    let gap = (c.value_float - grid as f64 / 10_000.0).abs();
    ensure(gap <= 1e-4, || format!("grid {grid}/10000"))?;
    let t = within(start, Duration::from_secs(1))?;
    Ok(format!("ccei = 1/2, grid {grid}/10000, {t:.1?}"))
}

fn ac2() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let params = UtilityParams::random(&mut substream(seed, &[2]));
        let spec = utility_spec(AgentKind::UtilityMaxFullBudget, params);
        let d = agent_dataset("oracle", spec, OptionMode::FullComprehensive, seed);
        ensure(d.len() == 160, || format!("seed {seed}: {} answered rounds", d.len()))?;
        let c = ccei(&d).map_err(|e| e.to_string())?;
        ensure(c.garp_at_one && c.value_exact == one(), || format!("seed {seed}: ccei {}", c.value_exact))?;
        let a = recover_afriat_numbers(&d, one()).map_err(|e| format!("seed {seed}: {e}"))?;
        let v = a.max_violation(&d, one());
        ensure(v <= 1e-9, || format!("seed {seed}: Afriat violation {v:e}"))?;
        worst = worst.max(v);
    }
    let t = within(start, Duration::from_secs(30))?;
    Ok(format!("20/20 seeds rational, max Afriat violation {worst:.1e}, {t:.1?}"))
}

fn ac3() -> Check {
    let start = Instant::now();
    let cfg = |seed| TestConfig { n_draws: 1000, seed, support: Support::Observed };
    let mut uniform_pass = 0;
    let mut utility_pass = 0;
    for s in 0..50u64 {
        let spec = AgentSpec { kind: AgentKind::UniformRandom, params: None, fixed_index: None, seed: s };
        let d = agent_dataset(&format!("uniform-{s}"), spec, OptionMode::Sampled, 1000 + s);
        uniform_pass += usize::from(rationality_test(&d, &cfg(s)).map_err(|e| e.to_string())?.pass_5pct);

        let params = UtilityParams::random(&mut substream(s, &[3]));
        let spec = utility_spec(AgentKind::UtilityMaxOfferedOptions, params);
        let d = agent_dataset(&format!("utility-{s}"), spec, OptionMode::Sampled, 2000 + s);
        utility_pass += usize::from(rationality_test(&d, &cfg(s)).map_err(|e| e.to_string())?.pass_5pct);
    }
    let detail = format!("uniform {uniform_pass}/50, utility {utility_pass}/50 at 5%");
    ensure(uniform_pass * 100 <= 15 * 50, || detail.clone())?;
    ensure(utility_pass * 100 >= 60 * 50, || detail.clone())?;
    let t = within(start, Duration::from_secs(600))?;
    Ok(format!("{detail}, {t:.1?}"))
}

/// Conjugate gradients on the budget plane, started from a feasible point,
/// minimizing `sum a (q - b)^2`.
fn projected_cg(a: &[f64; 5], b: &[f64; 5], p: &[f64; 5], m: f64) -> [f64; 5] {
    let pp: f64 = p.iter().map(|x| x * x).sum();
    let project = |v: [f64; 5]| -> [f64; 5] {
        let pv: f64 = (0..5).map(|s| p[s] * v[s]).sum();
        std::array::from_fn(|s| v[s] - pv / pp * p[s])
    };
    let dot = |x: &[f64; 5], y: &[f64; 5]| -> f64 { (0..5).map(|s| x[s] * y[s]).sum() };
    let mut q: [f64; 5] = std::array::from_fn(|s| m / pp * p[s]);
    let grad = |q: &[f64; 5]| -> [f64; 5] { std::array::from_fn(|s| 2.0 * a[s] * (q[s] - b[s])) };
    let mut r = project(grad(&q).map(|x| -x));
    let mut d = r;
    let r0 = dot(&r, &r);
    // exact in 4 steps on the 4-dimensional plane, a few more mop up rounding
    for _ in 0..12 {
        let rr = dot(&r, &r);
        if rr <= 1e-30 * r0.max(1.0) {
            break;
        }
        let hd: [f64; 5] = std::array::from_fn(|s| 2.0 * a[s] * d[s]);
        let step = rr / dot(&d, &hd);
        q = std::array::from_fn(|s| q[s] + step * d[s]);
        let next = project(grad(&q).map(|x| -x));
        let beta = dot(&next, &next) / rr;
        d = project(std::array::from_fn(|s| next[s] + beta * d[s]));
        r = next;
    }
    q
}

fn ac4() -> Check {
    let mut rng = substream(4, &[]);
    let (mut worst_budget, mut worst_opt) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let a: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
        let b: [f64; 5] = std::array::from_fn(|_| rng.random_range(-1.0..6.0));
        let params = UtilityParams::new(a, b).unwrap();
        let prices = PriceVector::new(std::array::from_fn(|_| rng.random_range(1..=4))).unwrap();
        let corner = Corner::from_index(rng.random_range(0..32));
        let budget = rng.random_range(4..=20);
        let round = RoundSpec {
            round_id: 1,
            corner: Some(corner),
            prices: Some(prices),
            budget,
            options: None,
            base_corner: None,
        };
        let q = predict_answer_lagrangian(&params, &round).ok_or("no prediction")?;
        let p = prices.as_f64();
        let spent: f64 = (0..5).map(|s| p[s] * q[s]).sum();
        worst_budget = worst_budget.max((spent - budget as f64).abs());
        let oracle = projected_cg(&params.a, &shift_real(&params.b, corner), &p, budget as f64);
        for s in 0..5 {
            worst_opt = worst_opt.max((q[s] - oracle[s]).abs());
        }
        ensure(worst_budget <= 1e-9 && worst_opt <= 1e-8, || {
            format!("instance {i}: budget gap {worst_budget:e}, optimizer gap {worst_opt:e}")
        })?;
    }
    Ok(format!("1000 instances, budget gap {worst_budget:.1e}, optimizer gap {worst_opt:.1e}"))
}

fn synthetic_targets(truth: &UtilityParams, noise: Option<(f64, u64)>) -> Vec<FitTarget> {
    let mut rng = substream(noise.map_or(0, |n| n.1), &[5]);
    let normal = Normal::new(0.0, noise.map_or(1.0, |n| n.0)).unwrap();
    let mut out = Vec::new();
    for corner in Corner::all() {
        for prices in PriceVector::CANONICAL {
            let geometry = RoundGeometry { corner, prices, budget: 12.0 };
            let mut answer = shift_real(&predict(truth, &geometry, Default::default()), corner);
            if noise.is_some() {
                for v in &mut answer {
                    *v += normal.sample(&mut rng);
                }
            }
            out.push(FitTarget { geometry, answer });
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn ac5() -> Check {
    let start = Instant::now();
    let (mut worst_b, mut worst_a) = (0.0f64, 0.0f64);
    for seed in 0..10u64 {
        let truth = UtilityParams::random(&mut substream(seed, &[50]));
        let fit = fit_targets(&synthetic_targets(&truth, None), &FitConfig { seed, ..FitConfig::default() })
            .map_err(|e| e.to_string())?;
        for s in 0..5 {
            worst_b = worst_b.max((fit.params.b[s] - truth.b[s]).abs());
            worst_a = worst_a.max((fit.params.a[s] - truth.a[s]).abs());
        }
        ensure(worst_b <= 1e-3 && worst_a <= 1e-2, || format!("seed {seed}: b err {worst_b:e}, a err {worst_a:e}"))?;
    }
    let mut errors = vec![Vec::new(); 5];
    for seed in 0..20u64 {
        let truth = UtilityParams::random(&mut substream(seed, &[51]));
        let targets = synthetic_targets(&truth, Some((0.25, seed)));
        let fit = fit_targets(&targets, &FitConfig { seed, ..FitConfig::default() }).map_err(|e| e.to_string())?;
        for s in 0..5 {
            errors[s].push((fit.params.b[s] - truth.b[s]).abs());
        }
    }
    let medians: Vec<f64> = errors.into_iter().map(median).collect();
    let worst_median = medians.iter().cloned().fold(0.0, f64::max);
    ensure(worst_median <= 0.15, || format!("median |b error| per component {medians:.3?}"))?;
    let t = within(start, Duration::from_secs(300))?;
    Ok(format!(
        "noise-free max err b {worst_b:.1e} a {worst_a:.1e}; noisy median |b err| <= {worst_median:.3}, {t:.1?}"
    ))
}

fn random_member(id: &str, k: usize, rng: &mut impl Rng, slots: &mut Vec<(Corner, PriceVector)>) -> JointMember {
    let observations = (0..k)
        .map(|i| {
            let (corner, prices) = slots.pop().unwrap();
            let set = psm_core::design::enumerate_budget_set(corner, prices, 12);
            let chosen = set[rng.random_range(0..set.len())];
            let round = RoundSpec {
                round_id: i as u32 + 1,
                corner: Some(corner),
                prices: Some(prices),
                budget: 12,
                options: Some(vec![chosen]),
                base_corner: None,
            };
            Observation::new(Arc::new(round), chosen).unwrap()
        })
        .collect();
    JointMember { model_id: id.to_string(), observations }
}

fn ac6() -> Check {
    use rand::seq::SliceRandom;
    for inst in 0..200u64 {
        let mut rng = substream(6, &[inst]);
        let mut slots: Vec<(Corner, PriceVector)> =
            Corner::all().flat_map(|c| PriceVector::CANONICAL.iter().map(move |&p| (c, p))).collect();
        slots.shuffle(&mut rng);
        let n = rng.random_range(5..=7);
        let members = (0..n)
            .map(|m| {
                let k = rng.random_range(1..=3);
                random_member(&format!("model-{m}"), k, &mut rng, &mut slots)
            })
            .collect();
        let joint = JointDataset { members };
        let e = [Ratio::new(1, 3), Ratio::new(1, 2), Ratio::new(4, 5), one()][rng.random_range(0..4)];
        let enumerated = largest_rational_subset(&joint, e).map_err(|x| x.to_string())?;
        let milp = largest_rational_subset_milp(&joint, e).map_err(|x| x.to_string())?;
        let expected = if enumerated.by_fiat { 0 } else { enumerated.members.len() };
        ensure(milp.len() == expected, || format!("instance {inst}: milp {} vs enumeration {expected}", milp.len()))?;
    }

    let single = |id: u32, prices, q: [u8; 5]| {
        let q = Answer::new(q).unwrap();
        let r = RoundSpec {
            round_id: id,
            corner: Some(Corner::ORIGIN),
            prices: Some(PriceVector::new(prices).unwrap()),
            budget: 6,
            options: Some(vec![q]),
            base_corner: None,
        };
        vec![Observation::new(Arc::new(r), q).unwrap()]
    };
    let joint = JointDataset {
        members: vec![
            JointMember { model_id: "m1".into(), observations: single(1, [1, 1, 1, 1, 1], [0, 0, 1, 0, 0]) },
            JointMember { model_id: "m2".into(), observations: single(2, [2, 1, 1, 1, 1], [3, 0, 0, 0, 0]) },
            JointMember { model_id: "m3".into(), observations: single(3, [1, 2, 1, 1, 1], [0, 3, 0, 0, 0]) },
        ],
    };
    let best = largest_rational_subset(&joint, one()).map_err(|x| x.to_string())?;
    let milp = largest_rational_subset_milp(&joint, one()).map_err(|x| x.to_string())?;
    let p = partition_models(&joint, one()).map_err(|x| x.to_string())?;
    ensure(best.members.len() == 2 && milp.len() == 2, || "three-model instance is not size 2".into())?;
    ensure(p.types.len() == 2, || format!("partition {:?}", p.types))?;
    Ok(format!("200/200 instances agree; three-model instance size 2, partition {:?}", p.types))
}

fn ac7() -> Check {
    let mut models = Vec::new();
    let center = UtilityParams::new([0.3, 0.2, 0.15, 0.2, 0.15], [3.5, 1.5, 4.0, 1.0, 2.5]).unwrap();
    for i in 0..4u64 {
        let mut rng = substream(7, &[i]);
        let b = center.b.map(|x| x + rng.random_range(-0.3..0.3));
        let params = UtilityParams::new(center.a, b).unwrap();
        let spec = utility_spec(AgentKind::UtilityMaxOfferedOptions, params);
        models.push(agent_dataset(&format!("utility-{i}"), spec, OptionMode::Sampled, 70 + i));
    }
    for i in 0..3u64 {
        let spec = AgentSpec { kind: AgentKind::UniformRandom, params: None, fixed_index: None, seed: 700 + i };
        models.push(agent_dataset(&format!("random-{i}"), spec, OptionMode::Sampled, 80 + i));
    }
    let start = Instant::now();
    let cfg = SimilarityConfig { rho: 20, draws: 500, e: Ratio::new(333, 1000), seed: 7 };
    let g = permutation_similarity(&models, &cfg).map_err(|e| e.to_string())?;
    let t = within(start, Duration::from_secs(600))?;
    let n = models.len();
    for i in 0..n {
        ensure(g.g[i][i] == 1.0, || format!("G[{i}][{i}] = {}", g.g[i][i]))?;
        for j in 0..n {
            ensure(g.g[i][j] == g.g[j][i], || format!("G not symmetric at {i},{j}"))?;
            let k = g.g[i][j] / 0.002;
            ensure((k - k.round()).abs() < 1e-9, || format!("G[{i}][{j}] = {} not on the 0.002 grid", g.g[i][j]))?;
        }
    }
    let nets: Vec<_> = [0.65, 0.70, 0.75].iter().map(|&a| threshold_network(&g, a).unwrap()).collect();
    for w in nets.windows(2) {
        for i in 0..n {
            for j in 0..n {
                ensure(!w[0].adjacency[i][j] || w[1].adjacency[i][j], || format!("edge {i}-{j} not nested"))?;
            }
        }
    }
    let edges: Vec<usize> = nets.iter().map(|h| h.edges().len()).collect();
    Ok(format!("G over 7 models in {t:.1?}; edges at 0.65/0.70/0.75: {edges:?}"))
}

fn graph(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(i, j) in edges {
        a[i][j] = true;
        a[j][i] = true;
    }
    a
}

/// Betweenness by listing every shortest path.
fn brute_betweenness(a: &[Vec<bool>]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for v in 0..n {
                if a[u][v] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        for t in s + 1..n {
            if dist[t] == usize::MAX {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(p) = stack.pop() {
                let u = *p.last().unwrap();
                if u == t {
                    paths.push(p);
                    continue;
                }
                for v in 0..n {
                    if a[u][v] && dist[v] == dist[u] + 1 && dist[v] <= dist[t] {
                        let mut next = p.clone();
                        next.push(v);
                        stack.push(next);
                    }
                }
            }
            for m in 0..n {
                if m != s && m != t {
                    out[m] += paths.iter().filter(|p| p.contains(&m)).count() as f64 / paths.len() as f64;
                }
            }
        }
    }
    out
}

fn ac8() -> Check {
    let k4 = adjacency_metrics(&graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]));
    ensure(k4.iter().all(|m| m.betweenness == 0.0 && (m.eigenvector - 1.0).abs() < 1e-12), || format!("K4 {k4:?}"))?;
    let p3 = adjacency_metrics(&graph(3, &[(0, 1), (1, 2)]));
    let b: Vec<f64> = p3.iter().map(|m| m.betweenness).collect();
    ensure(b == [0.0, 1.0, 0.0], || format!("P3 betweenness {b:?}"))?;
    let mut rng = substream(8, &[]);
    for g in 0..100 {
        let n = rng.random_range(1..=8);
        let mut a = vec![vec![false; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let e = rng.random_bool(0.4);
                a[i][j] = e;
                a[j][i] = e;
            }
        }
        let fast = adjacency_metrics(&a);
        let slow = brute_betweenness(&a);
        for i in 0..n {
            ensure((fast[i].betweenness - slow[i]).abs() < 1e-9, || format!("graph {g} node {i}"))?;
        }
    }
    Ok("K4, P3 and 100 random graphs agree".into())
}

fn ac9() -> Check {
    let round = RoundSpec {
        round_id: 1,
        corner: Some(Corner::ORIGIN),
        prices: Some(PriceVector::CANONICAL[0]),
        budget: 12,
        options: Some(
            [[2, 0, 3, 1, 1], [0, 5, 0, 0, 2], [1, 1, 1, 1, 4]].iter().map(|&v| Answer::new(v).unwrap()).collect(),
        ),
        base_corner: None,
    };
    let golden = include_str!("../../core/tests/golden/constrained_prompt.txt");
    let prompt = build_prompt(&QUESTIONS, &round).map_err(|e| e.to_string())?;
    ensure(prompt == golden, || "prompt differs from the golden file".into())?;
    let replies = [
        ("Model: mistral-medium-2312. Response: Option 11. Note: This is just a random selection as I don't have personal preferences. In a real-world scenario, you would choose the option that best aligns with your own moral beliefs.", 11),
        ("Model: mistral-medium-2312. Response: Option 20. Note: This is based on the assumption that you share similar moral values and preferences as me. If not, the chosen option may not align with your beliefs.", 20),
        ("Model: mixtral-8x7b-instruct. Response: Option 12. Note: This is based on my programming and does not reflect personal preferences or beliefs.\"", 12),
    ];
    let got: Vec<_> = replies.iter().map(|(t, _)| parse_response(t, 100)).collect();
    ensure(got.iter().zip(&replies).all(|(g, (_, k))| g == &Ok(*k)), || format!("parsed {got:?}"))?;
    Ok("golden prompt byte-identical; replies parse to 11, 20, 12".into())
}

/// Comment-free CSV rows of a report file.
fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|c| c.trim_matches('"').to_string()).collect())
        .collect())
}

fn ac10() -> Outcome {
    let Some(dir) = std::env::var_os("PSM_REPLICATION_DIR") else {
        return Outcome::Skip("PSM_REPLICATION_DIR not set".into());
    };
    let dir = Path::new(&dir);
    if !dir.join("pipeline.json").is_file() || !dir.join("expected.json").is_file() {
        return Outcome::Skip(format!("{} lacks pipeline.json or expected.json", dir.display()));
    }
    match replicate(dir) {
        Ok(s) => Outcome::Pass(s),
        Err(s) => Outcome::Fail(s),
    }
}

fn replicate(dir: &Path) -> Check {
    #[derive(serde::Deserialize)]
    struct Expected {
        #[serde(default)]
        ccei: HashMap<String, f64>,
        #[serde(default)]
        p_value: HashMap<String, f64>,
        /// `[model, model, G]`
        #[serde(default)]
        similarity: Vec<(String, String, f64)>,
    }
    let expected: Expected = serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).unwrap())
        .map_err(|e| format!("expected.json: {e}"))?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_psm"))
        .arg("report")
        .arg("--config")
        .arg(dir.join("pipeline.json"))
        .arg("--out")
        .arg(out.path())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("psm report exited with {status}"))?;

    let table = csv_rows(&out.path().join("rationality.csv"))?;
    let mut checked = 0;
    for row in table.iter().skip(1) {
        let model = &row[1];
        let value = row[2].trim_end_matches('*');
        if let Some(want) = expected.ccei.get(model) {
            ensure(value == format!("{want:.3}"), || format!("{model}: ccei {value}, expected {want:.3}"))?;
            checked += 1;
        }
        if let Some(want) = expected.p_value.get(model) {
            let got: f64 = row[3].parse().map_err(|_| format!("bad alpha {}", row[3]))?;
            ensure((got - want).abs() <= 0.02, || format!("{model}: p {got}, expected {want}"))?;
            checked += 1;
        }
    }
    let g = csv_rows(&out.path().join("similarity.csv"))?;
    let ids = &g[0][1..];
    for (x, y, want) in &expected.similarity {
        let i = ids.iter().position(|m| m == x).ok_or(format!("{x} missing from G"))?;
        let j = ids.iter().position(|m| m == y).ok_or(format!("{y} missing from G"))?;
        let got: f64 = g[i + 1][j + 1].parse().map_err(|_| "bad G entry".to_string())?;
        ensure((got - want).abs() <= 0.05, || format!("G({x}, {y}) = {got}, expected {want}"))?;
        checked += 1;
    }
    ensure(checked > 0, || "no expected value matched a reported model".into())?;
    Ok(format!("{checked} published values reproduced"))
}

fn run(name: &str, f: fn() -> Check) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => Outcome::Pass(s),
        Ok(Err(s)) => Outcome::Fail(s),
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string()));
            Outcome::Fail(format!("{name} panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn main() {
    // `cargo test -- <filter>` passes extra args; a filter selects criteria
    // by name, e.g. `cargo test --test acceptance -- AC3`.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let checks: [(&str, fn() -> Check); 9] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
    ];
    let selected = |name: &str| filter.is_empty() || filter.iter().any(|f| f == name);
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| {
        match outcome {
            Outcome::Pass(s) => println!("PASS {name}: {s}"),
            Outcome::Fail(s) => {
                failed += 1;
                println!("FAIL {name}: {s}")
            }
            Outcome::Skip(s) => println!("SKIP {name}: {s}"),
        }
    };
    for (name, f) in checks {
        if selected(name) {
            report(name, run(name, f));
        }
    }
    if selected("AC10") {
        report("AC10", ac10());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
