//! CSV and DOT exports. Every file starts with comment lines carrying the
//! tool version, the seed and hashes of the inputs.

use serde::Serialize;

use crate::heterogeneity::{NodeMetrics, Partition, SimilarityMatrix, ThresholdNetwork};
use crate::rationality::TestResult;
use crate::revealed::{ratio_to_f64, CceiResult};
use crate::utility::FitResult;

/// Provenance lines written at the top of every export.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Header {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// `(path, sha256)` of each input file.
    pub inputs: Vec<(String, String)>,
}

impl Header {
    pub fn render(&self, marker: &str) -> String {
        let mut s = format!("{marker} psm {} {}\n", self.version, self.command);
        if let Some(seed) = self.seed {
            s.push_str(&format!("{marker} seed: {seed}\n"));
        }
        for (path, hash) in &self.inputs {
            s.push_str(&format!("{marker} input: {path} sha256={hash}\n"));
        }
        s
    }
}

fn csv_body(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn with_header(h: &Header, body: String) -> String {
    h.render("#") + &body
}

/// One model's CCEI.
pub fn ccei_csv(h: &Header, rows: &[(String, usize, CceiResult)]) -> String {
    let rows = rows
        .iter()
        .map(|(id, n, c)| {
            vec![
                id.clone(),
                format!("{}/{}", c.value_exact.numer(), c.value_exact.denom()),
                format!("{:.3}", c.value_float),
                n.to_string(),
                c.garp_at_one.to_string(),
            ]
        })
        .collect();
    with_header(h, csv_body(&["model_id", "ccei_exact", "ccei_float", "n_obs", "garp_at_one"], rows))
}

/// Rationality table: CCEI with stars, p-value and observation count.
pub fn test_csv(h: &Header, rows: &[(String, TestResult)]) -> String {
    let rows = rows
        .iter()
        .map(|(provider, r)| {
            vec![
                provider.clone(),
                r.model_id.clone(),
                format!("{:.3}{}", ratio_to_f64(r.ccei_observed), r.stars()),
                format!("{:.3}", r.p_value),
                r.n_obs.to_string(),
            ]
        })
        .collect();
    with_header(h, csv_body(&["provider", "model", "ccei", "alpha", "n_obs"], rows))
}

/// Utility estimates.
pub fn fit_csv(h: &Header, rows: &[(String, FitResult)]) -> String {
    let rows = rows
        .iter()
        .map(|(id, f)| {
            let mut r = vec![id.clone()];
            r.extend(f.params.b.iter().map(|x| format!("{x:.2}")));
            r.extend(f.params.a.iter().map(|x| format!("{x:.2}")));
            r.push(format!("{:.6}", f.sse));
            r.push(f.converged.to_string());
            r.push(f.demand_mode.as_str().to_string());
            r
        })
        .collect();
    let header = [
        "model_id", "b1", "b2", "b3", "b4", "b5", "a1", "a2", "a3", "a4", "a5", "sse", "converged", "demand_mode",
    ];
    with_header(h, csv_body(&header, rows))
}

/// Partition into types: one row per model, types numbered from 1 in
/// extraction order.
pub fn partition_csv(h: &Header, p: &Partition) -> String {
    let rows = p
        .types
        .iter()
        .enumerate()
        .flat_map(|(t, ids)| ids.iter().map(move |id| vec![(t + 1).to_string(), id.clone()]))
        .collect();
    with_header(h, csv_body(&["type", "model_id"], rows))
}

/// Similarity matrix with model ids as header row and first column.
pub fn similarity_csv(h: &Header, g: &SimilarityMatrix) -> String {
    let mut header = vec![""];
    header.extend(g.model_ids.iter().map(String::as_str));
    let rows = g
        .model_ids
        .iter()
        .zip(&g.g)
        .map(|(id, row)| std::iter::once(id.clone()).chain(row.iter().map(|x| format!("{x:.3}"))).collect())
        .collect();
    with_header(h, csv_body(&header, rows))
}

pub fn adjacency_csv(h: &Header, net: &ThresholdNetwork) -> String {
    let mut header = vec![""];
    header.extend(net.model_ids.iter().map(String::as_str));
    let rows = net
        .model_ids
        .iter()
        .zip(&net.adjacency)
        .map(|(id, row)| std::iter::once(id.clone()).chain(row.iter().map(|&b| u8::from(b).to_string())).collect())
        .collect();
    with_header(h, csv_body(&header, rows))
}

pub fn metrics_csv(h: &Header, ids: &[String], metrics: &[NodeMetrics]) -> String {
    let rows = ids
        .iter()
        .zip(metrics)
        .map(|(id, m)| {
            vec![
                id.clone(),
                format!("{}", m.strength),
                m.clustering.map(|c| format!("{c:.6}")).unwrap_or_default(),
                format!("{:.6}", m.betweenness),
                format!("{:.6}", m.eigenvector),
            ]
        })
        .collect();
    with_header(h, csv_body(&["model_id", "strength", "clustering", "betweenness", "eigenvector"], rows))
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Undirected graph with one node per model.
pub fn network_dot(h: &Header, net: &ThresholdNetwork) -> String {
    let mut s = h.render("//");
    s.push_str(&format!("graph H {{\n  label={};\n", dot_id(&format!("alpha = {}", net.alpha))));
    for id in &net.model_ids {
        s.push_str(&format!("  {};\n", dot_id(id)));
    }
    for (i, j) in net.edges() {
        s.push_str(&format!("  {} -- {};\n", dot_id(&net.model_ids[i]), dot_id(&net.model_ids[j])));
    }
    s.push_str("}\n");
    s
}
