//! Helpers for the acceptance run: result comparison and line formatting.

use monoflow::flow::FlowResult;
use monoflow::index::IndexResult;
use monoflow_cli::report::{FlowEntry, IndexEntry};

/// Crossings closer than this in alpha count as the same crossing.
pub const ALPHA_MATCH: f64 = 5e-3;

/// `Ok` when two flow results agree on net flows and on every crossing
/// (direction, multiplicity, bulk flag, position up to [`ALPHA_MATCH`]).
pub fn same_flow(a: &FlowResult, b: &FlowResult) -> Result<(), String> {
    if a.net_flow != b.net_flow || a.net_flow_all != b.net_flow_all {
        return Err(format!(
            "net {} / {} (all {} / {})",
            a.net_flow, b.net_flow, a.net_flow_all, b.net_flow_all
        ));
    }
    if a.crossings.len() != b.crossings.len() {
        return Err(format!("{} vs {} crossings", a.crossings.len(), b.crossings.len()));
    }
    // multiset matching: near-coincident crossings may come out in either order
    let mut used = vec![false; b.crossings.len()];
    for x in &a.crossings {
        let best = b
            .crossings
            .iter()
            .enumerate()
            .filter(|(j, y)| {
                !used[*j] && (x.direction, x.multiplicity, x.bulk) == (y.direction, y.multiplicity, y.bulk)
            })
            .map(|(j, y)| (j, (x.alpha - y.alpha).abs()))
            .min_by(|p, q| p.1.total_cmp(&q.1));
        match best {
            Some((j, dist)) if dist <= ALPHA_MATCH => used[j] = true,
            _ => {
                return Err(format!(
                    "no partner for crossing at {} (direction {}, bulk {})",
                    x.alpha, x.direction, x.bulk
                ))
            }
        }
    }
    Ok(())
}

pub fn same_index(a: &IndexResult, b: &IndexResult) -> Result<(), String> {
    if a.value != b.value || a.stable != b.stable {
        return Err(format!("{} (stable {}) vs {} (stable {})", a.value, a.stable, b.value, b.stable));
    }
    Ok(())
}

/// Compare entries that may carry errors instead of results. Two errors
/// give `None`: there is no result to compare.
pub fn compare_flow_entries(a: &FlowEntry, b: &FlowEntry) -> Option<Result<(), String>> {
    match (&a.result, &b.result) {
        (Some(x), Some(y)) => Some(same_flow(x, y)),
        (None, None) => None,
        (Some(_), None) => Some(Err(format!("refined run failed: {}", b.error.clone().unwrap_or_default()))),
        (None, Some(_)) => Some(Err(format!("base run failed: {}", a.error.clone().unwrap_or_default()))),
    }
}

pub fn compare_index_entries(a: &IndexEntry, b: &IndexEntry) -> Option<Result<(), String>> {
    match (&a.result, &b.result) {
        (Some(x), Some(y)) => Some(same_index(x, y)),
        (None, None) => None,
        (Some(_), None) => Some(Err(format!("enlarged box failed: {}", b.error.clone().unwrap_or_default()))),
        (None, Some(_)) => Some(Err(format!("base box failed: {}", a.error.clone().unwrap_or_default()))),
    }
}

/// One acceptance line.
#[derive(Clone, Debug)]
pub struct Line {
    pub id: String,
    pub pass: bool,
    pub text: String,
}

impl Line {
    pub fn new(id: impl Into<String>, pass: bool, text: impl Into<String>) -> Self {
        Line { id: id.into(), pass, text: text.into() }
    }

    pub fn render(&self) -> String {
        format!("criterion {}: {} {}", self.id, if self.pass { "PASS" } else { "FAIL" }, self.text)
    }
}

pub fn show<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}
