#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use psm_core::dataset::{Dataset, Observation};
use psm_core::design::{Answer, Corner, PriceVector, RoundSpec};

/// Observation whose round offers only the chosen bundle.
pub fn obs(id: u32, corner: Corner, prices: [u32; 5], chosen: Answer) -> Observation {
    let budget = chosen.cost(corner, PriceVector::new(prices).unwrap());
    let round = RoundSpec {
        round_id: id,
        corner: Some(corner),
        prices: Some(PriceVector::new(prices).unwrap()),
        budget,
        options: Some(vec![chosen]),
        base_corner: None,
    };
    Observation::new(Arc::new(round), chosen).unwrap()
}

/// Random small dataset. Bundles come from a small pool so identical
/// bundles occur.
pub fn arb_dataset(min: usize, max: usize) -> impl Strategy<Value = Dataset> {
    let pool = prop::collection::vec(prop::array::uniform5(0u8..=5), 1..=6);
    (pool, prop::collection::vec((0u32..32, prop::array::uniform5(1u32..=3), any::<prop::sample::Index>()), min..=max))
        .prop_map(|(pool, rounds)| {
            let mut observations = Vec::new();
            for (i, (c, p, pick)) in rounds.into_iter().enumerate() {
                let corner = Corner::from_index(c);
                let mut chosen = Answer::new(pool[pick.index(pool.len())]).unwrap();
                if chosen.values() == corner.values() {
                    // keep own expenditure positive
                    chosen = Answer::new(corner.opposite().values()).unwrap();
                }
                observations.push(obs(i as u32 + 1, corner, p, chosen));
            }
            Dataset::new("rand", None, observations).unwrap()
        })
}

/// Costs `C[i][j]` computed directly from the definitions.
pub fn costs(d: &Dataset) -> Vec<Vec<u64>> {
    d.observations
        .iter()
        .map(|oi| {
            let o = oi.corner().values();
            let p = oi.prices().values();
            d.observations
                .iter()
                .map(|oj| {
                    let q = oj.chosen.values();
                    (0..5).map(|s| p[s] as u64 * (q[s] as i64 - o[s] as i64).unsigned_abs()).sum()
                })
                .collect()
        })
        .collect()
}

/// GARP at `num/den` by depth-first reachability.
pub fn garp_oracle(d: &Dataset, num: u64, den: u64) -> bool {
    let c = costs(d);
    let n = c.len();
    let same = |i: usize, j: usize| d.observations[i].chosen == d.observations[j].chosen;
    let weak = |i: usize, j: usize| num * c[i][i] >= den * c[i][j] || same(i, j);
    let strict = |i: usize, j: usize| num * c[i][i] > den * c[i][j] && !same(i, j);
    for r in 0..n {
        let mut seen = vec![false; n];
        let mut stack = vec![r];
        seen[r] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && weak(u, v) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        for k in 0..n {
            if k != r && seen[k] && strict(k, r) {
                return false;
            }
        }
    }
    true
}
