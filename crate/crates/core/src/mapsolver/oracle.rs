//! Exact MAP solvers: exhaustive enumeration and chain dynamic programming.
//!
//! Both break ties toward the smallest lexicographic assignment, matching the
//! decoder's per-variable rule.

use crate::error::{Error, Result};
use crate::regiongraph::{Assignment, PotentialVector, RegionGraph};

const BRUTE_FORCE_LIMIT: usize = 1_000_000;

/// Exhaustive maximization of `sum_r theta_r(x_r)`.
pub fn map_bruteforce(
    graph: &RegionGraph,
    theta: &PotentialVector,
) -> Result<(f64, Assignment)> {
    if theta.len() != graph.total_slots() {
        return Err(Error::structure("theta length does not match graph layout"));
    }
    let assignments = graph.enumerate_assignments(BRUTE_FORCE_LIMIT)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_x: Option<Assignment> = None;
    for x in assignments {
        let score = graph.score_decomposed(theta, &x)?;
        if score > best {
            best = score;
            best_x = Some(x);
        }
    }
    Ok((best, best_x.expect("assignment space is never empty")))
}

/// Verify the graph is a chain: unary regions plus pairs `(k, k+1)` in order.
fn check_chain(graph: &RegionGraph) -> Result<()> {
    let k = graph.num_vars();
    let expected = k.saturating_sub(1);
    if graph.num_higher_regions() != expected {
        return Err(Error::structure(format!(
            "chain DP expects {} pair regions, graph has {}",
            expected,
            graph.num_higher_regions()
        )));
    }
    for (i, (_, region)) in graph.higher_regions().enumerate() {
        if region.vars != vec![i, i + 1] {
            return Err(Error::structure(format!(
                "chain DP expects pair region ({}, {}), got {:?}",
                i,
                i + 1,
                region.vars
            )));
        }
    }
    Ok(())
}

/// Exact chain MAP by backward dynamic programming with a forward greedy
/// readout, yielding the smallest-lexicographic maximizer.
#[allow(clippy::needless_range_loop)]
pub fn map_chain_dp(
    graph: &RegionGraph,
    theta: &PotentialVector,
) -> Result<(f64, Assignment)> {
    if theta.len() != graph.total_slots() {
        return Err(Error::structure("theta length does not match graph layout"));
    }
    check_chain(graph)?;
    let k = graph.num_vars();

    // value_to_go[v][s]: best completion score of variables v.. given x_v = s.
    let mut value_to_go: Vec<Vec<f64>> = vec![Vec::new(); k];
    value_to_go[k - 1] = graph.region_slice(theta, k - 1).to_vec();
    for v in (0..k.saturating_sub(1)).rev() {
        let d = graph.domain(v);
        let d_next = graph.domain(v + 1);
        let unary = graph.region_slice(theta, v);
        let pair_offset = graph.region_offset(k + v);
        let mut row = vec![0.0; d];
        for s in 0..d {
            let mut best = f64::NEG_INFINITY;
            for t in 0..d_next {
                let cand = theta.values[pair_offset + s * d_next + t] + value_to_go[v + 1][t];
                if cand > best {
                    best = cand;
                }
            }
            row[s] = unary[s] + best;
        }
        value_to_go[v] = row;
    }

    let value = value_to_go[0].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut labels = Vec::with_capacity(k);
    labels.push(crate::numeric::argmax(&value_to_go[0]));
    for v in 0..k - 1 {
        let d_next = graph.domain(v + 1);
        let pair_offset = graph.region_offset(k + v);
        let s = labels[v];
        let scores: Vec<f64> = (0..d_next)
            .map(|t| theta.values[pair_offset + s * d_next + t] + value_to_go[v + 1][t])
            .collect();
        labels.push(crate::numeric::argmax(&scores));
    }
    Ok((value, Assignment::new(labels)))
}
