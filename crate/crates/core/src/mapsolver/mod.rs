//! Discrete MAP machinery: the dual of the LP relaxation, block-coordinate
//! message passing, decoding, dual subgradients, and exact oracles.
//!
//! The discrete subproblem is `max_x sum_r theta_r(x_r)` with
//! `theta = lambda . f` (elementwise), plus an optional loss term. It is
//! handled through the standard dual of the local-marginal LP relaxation:
//! higher-order regions send messages `mu_{r->k}(x_k)` to their member
//! variables, reparameterizing beliefs
//!
//! ```text
//! beta_k(x_k) = theta_k(x_k) + sum_{r : k in r} mu_{r->k}(x_k)
//! beta_r(x_r) = theta_r(x_r) - sum_{k in r}    mu_{r->k}(x_k)
//! ```
//!
//! and the dual bound is `sum_k max beta_k + sum_r max beta_r`, an upper
//! bound on the true maximum for every `mu` (weak duality), tight on trees.

mod oracle;
mod spen;

pub use oracle::{map_bruteforce, map_chain_dp};
pub use spen::{spen_relaxed_infer, SpenConfig};

use crate::error::{Error, Result};
use crate::numeric;
use crate::regiongraph::{Assignment, PotentialVector, RegionGraph};

/// Dual variables: one table over `X_k` per (higher-order region, member).
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    /// `tables[h][pos][label]` for higher-order region ordinal `h` and member
    /// position `pos` within that region's variable list.
    tables: Vec<Vec<Vec<f64>>>,
}

impl MessageSet {
    /// All-zero messages for a graph.
    pub fn zeros(graph: &RegionGraph) -> Self {
        let tables = graph
            .higher_regions()
            .map(|(_, region)| {
                region.vars.iter().map(|&v| vec![0.0; graph.domain(v)]).collect()
            })
            .collect();
        MessageSet { tables }
    }

    pub fn num_regions(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, higher_ordinal: usize, member_pos: usize) -> &[f64] {
        &self.tables[higher_ordinal][member_pos]
    }

    pub fn table_mut(&mut self, higher_ordinal: usize, member_pos: usize) -> &mut Vec<f64> {
        &mut self.tables[higher_ordinal][member_pos]
    }

    fn check(&self, graph: &RegionGraph) -> Result<()> {
        if self.tables.len() != graph.num_higher_regions() {
            return Err(Error::structure(format!(
                "message set covers {} regions, graph has {} higher-order regions",
                self.tables.len(),
                graph.num_higher_regions()
            )));
        }
        Ok(())
    }
}

fn check_layout(graph: &RegionGraph, v: &PotentialVector, what: &str) -> Result<()> {
    if v.len() != graph.total_slots() {
        return Err(Error::structure(format!(
            "{what} has length {}, layout expects {}",
            v.len(),
            graph.total_slots()
        )));
    }
    Ok(())
}

/// `theta = lambda . f` elementwise, plus a loss vector when present.
///
/// With `lambda = 1` this recovers the classical potentials; with
/// `lambda = 0` only the loss term remains.
pub fn theta_from(
    lambda: &PotentialVector,
    f: &PotentialVector,
    loss: Option<&PotentialVector>,
) -> Result<PotentialVector> {
    if lambda.len() != f.len() {
        return Err(Error::structure(format!(
            "lambda has length {}, f has length {}",
            lambda.len(),
            f.len()
        )));
    }
    let mut values: Vec<f64> =
        lambda.values.iter().zip(&f.values).map(|(l, p)| l * p).collect();
    if let Some(loss) = loss {
        if loss.len() != f.len() {
            return Err(Error::structure(format!(
                "loss vector has length {}, f has length {}",
                loss.len(),
                f.len()
            )));
        }
        for (v, l) in values.iter_mut().zip(&loss.values) {
            *v += l;
        }
    }
    Ok(PotentialVector::from_values(values))
}

/// Message-adjusted local potentials, in the same flat layout as `theta`.
pub fn beliefs(
    graph: &RegionGraph,
    mu: &MessageSet,
    theta: &PotentialVector,
) -> Result<PotentialVector> {
    check_layout(graph, theta, "theta")?;
    mu.check(graph)?;
    let mut out = theta.clone();
    for (h, (r_idx, region)) in graph.higher_regions().enumerate() {
        let r_offset = graph.region_offset(r_idx);
        let r_size = graph.region_size(r_idx);
        // Period of each member's label in the mixed-radix slot index.
        let mut suffix = vec![1usize; region.vars.len() + 1];
        for pos in (0..region.vars.len()).rev() {
            suffix[pos] = suffix[pos + 1] * graph.domain(region.vars[pos]);
        }
        for (pos, &var) in region.vars.iter().enumerate() {
            let table = mu.table(h, pos);
            let unary_offset = graph.region_offset(var);
            for (s, &m) in table.iter().enumerate() {
                out.values[unary_offset + s] += m;
            }
            let d = graph.domain(var);
            for a in 0..r_size {
                let label = (a / suffix[pos + 1]) % d;
                out.values[r_offset + a] -= table[label];
            }
        }
    }
    Ok(out)
}

/// The relaxed dual bound: sum over regions of the belief maxima.
pub fn dual_value(
    graph: &RegionGraph,
    mu: &MessageSet,
    theta: &PotentialVector,
) -> Result<f64> {
    let b = beliefs(graph, mu, theta)?;
    let mut total = 0.0;
    for r in 0..graph.num_regions() {
        total += numeric::max(graph.region_slice(&b, r));
    }
    Ok(total)
}

/// Result of a dual minimization run.
#[derive(Debug, Clone)]
pub struct DualSolve {
    pub messages: MessageSet,
    /// Dual bound at the returned messages.
    pub dual_value: f64,
    pub sweeps_used: usize,
    /// Dual bound after each sweep, for logging.
    pub sweep_trace: Vec<f64>,
}

/// Block-coordinate descent on the dual.
///
/// One sweep visits every higher-order region in declared order; a region's
/// block update recomputes all of its outgoing messages simultaneously:
/// with `gamma_k(x_k) = theta_k(x_k) + sum_{r' != r, k in r'} mu_{r'->k}(x_k)`,
///
/// ```text
/// mu_{r->k}(x_k) <- -gamma_k(x_k)
///     + (1/|r|) max_{x_{r \ k}} [ theta_r(x_r) + sum_{k' in r} gamma_{k'}(x_{k'}) ]
/// ```
///
/// The bound is non-increasing across block updates. Stops when the per-sweep
/// decrease drops below `tol` or after `max_sweeps`.
pub fn minimize_dual(
    graph: &RegionGraph,
    theta: &PotentialVector,
    max_sweeps: usize,
    tol: f64,
) -> Result<DualSolve> {
    minimize_dual_from(graph, theta, MessageSet::zeros(graph), max_sweeps, tol, None)
}

/// [`minimize_dual`] with a warm start and an optional per-block-update
/// observer receiving the dual bound after every region block update.
pub fn minimize_dual_from(
    graph: &RegionGraph,
    theta: &PotentialVector,
    mut mu: MessageSet,
    max_sweeps: usize,
    tol: f64,
    mut observer: Option<&mut dyn FnMut(f64)>,
) -> Result<DualSolve> {
    check_layout(graph, theta, "theta")?;
    mu.check(graph)?;
    if max_sweeps == 0 {
        return Err(Error::structure("max_sweeps must be at least 1"));
    }
    let k = graph.num_vars();

    // Running unary beliefs: theta_k + incoming messages.
    let mut unary: Vec<Vec<f64>> = (0..k)
        .map(|v| graph.region_slice(theta, v).to_vec())
        .collect();
    for (h, (_, region)) in graph.higher_regions().enumerate() {
        for (pos, &var) in region.vars.iter().enumerate() {
            for (s, &m) in mu.table(h, pos).iter().enumerate() {
                unary[var][s] += m;
            }
        }
    }

    let higher: Vec<(usize, Vec<usize>)> = graph
        .higher_regions()
        .map(|(r_idx, region)| (r_idx, region.vars.clone()))
        .collect();

    let region_bound = |mu: &MessageSet, unary: &[Vec<f64>]| -> f64 {
        // Dual bound from the running unary beliefs plus region beliefs.
        let mut total = 0.0;
        for u in unary {
            total += numeric::max(u);
        }
        for (h, (r_idx, vars)) in higher.iter().enumerate() {
            let offset = graph.region_offset(*r_idx);
            let size = graph.region_size(*r_idx);
            let mut suffix = vec![1usize; vars.len() + 1];
            for pos in (0..vars.len()).rev() {
                suffix[pos] = suffix[pos + 1] * graph.domain(vars[pos]);
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..size {
                let mut v = theta.values[offset + a];
                for (pos, &var) in vars.iter().enumerate() {
                    let label = (a / suffix[pos + 1]) % graph.domain(var);
                    v -= mu.table(h, pos)[label];
                }
                if v > best {
                    best = v;
                }
            }
            total += best;
        }
        total
    };

    let mut current = region_bound(&mu, &unary);
    let mut sweeps_used = 0usize;
    let mut sweep_trace = Vec::new();

    for _sweep in 0..max_sweeps {
        let before_sweep = current;
        for (h, (r_idx, vars)) in higher.iter().enumerate() {
            let arity = vars.len();
            let offset = graph.region_offset(*r_idx);
            let size = graph.region_size(*r_idx);
            let mut suffix = vec![1usize; arity + 1];
            for pos in (0..arity).rev() {
                suffix[pos] = suffix[pos + 1] * graph.domain(vars[pos]);
            }
            // gamma excludes this region's own incoming messages.
            let gammas: Vec<Vec<f64>> = vars
                .iter()
                .enumerate()
                .map(|(pos, &var)| {
                    unary[var]
                        .iter()
                        .zip(mu.table(h, pos))
                        .map(|(u, m)| u - m)
                        .collect()
                })
                .collect();
            // maxfix[pos][s]: max of theta_r + sum gamma over assignments
            // fixing member pos to label s.
            let mut maxfix: Vec<Vec<f64>> = vars
                .iter()
                .map(|&var| vec![f64::NEG_INFINITY; graph.domain(var)])
                .collect();
            for a in 0..size {
                let mut q = theta.values[offset + a];
                for (pos, &var) in vars.iter().enumerate() {
                    let label = (a / suffix[pos + 1]) % graph.domain(var);
                    q += gammas[pos][label];
                }
                for (pos, &var) in vars.iter().enumerate() {
                    let label = (a / suffix[pos + 1]) % graph.domain(var);
                    if q > maxfix[pos][label] {
                        maxfix[pos][label] = q;
                    }
                }
            }
            let inv_arity = 1.0 / arity as f64;
            for (pos, &var) in vars.iter().enumerate() {
                for s in 0..graph.domain(var) {
                    let new_mu = -gammas[pos][s] + inv_arity * maxfix[pos][s];
                    let old_mu = mu.table(h, pos)[s];
                    mu.table_mut(h, pos)[s] = new_mu;
                    unary[var][s] += new_mu - old_mu;
                }
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs(region_bound(&mu, &unary));
            }
        }
        sweeps_used += 1;
        current = region_bound(&mu, &unary);
        sweep_trace.push(current);
        if before_sweep - current < tol {
            break;
        }
    }

    let value = dual_value(graph, &mu, theta)?;
    Ok(DualSolve { messages: mu, dual_value: value, sweeps_used, sweep_trace })
}

/// Decode a configuration from unary beliefs; ties break to the smallest
/// label.
pub fn decode(
    graph: &RegionGraph,
    mu: &MessageSet,
    theta: &PotentialVector,
) -> Result<Assignment> {
    let b = beliefs(graph, mu, theta)?;
    let labels = (0..graph.num_vars())
        .map(|v| numeric::argmax(graph.region_slice(&b, v)))
        .collect();
    Ok(Assignment::new(labels))
}

/// Subgradient of the dual bound with respect to `lambda`, at fixed messages.
///
/// Entry `(r, s)` is `f_(r,s)` when `s` is the tie-broken argmax of region
/// `r`'s belief, else zero; exactly one slot per region is active.
pub fn grad_lambda(
    graph: &RegionGraph,
    mu: &MessageSet,
    theta: &PotentialVector,
    f: &PotentialVector,
) -> Result<PotentialVector> {
    check_layout(graph, f, "f")?;
    let b = beliefs(graph, mu, theta)?;
    let mut out = PotentialVector::zeros(f.len());
    for r in 0..graph.num_regions() {
        let offset = graph.region_offset(r);
        let local = numeric::argmax(graph.region_slice(&b, r));
        out.values[offset + local] = f.values[offset + local];
    }
    Ok(out)
}
