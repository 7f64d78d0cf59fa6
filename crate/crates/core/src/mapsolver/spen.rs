//! Relaxed gradient-ascent inference over `[0,1]` soft labels, the
//! rounding-based alternative to the saddle-point procedure. Binary domains
//! only.

use rand::Rng;

use crate::error::{Error, Result};
use crate::regiongraph::{Assignment, PotentialVector, RegionGraph};
use crate::rng;
use crate::top::TopTransform;

#[derive(Debug, Clone, Copy)]
pub struct SpenConfig {
    pub steps: usize,
    pub step_size: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SpenConfig {
    fn default() -> Self {
        SpenConfig { steps: 100, step_size: 0.1, restarts: 5, seed: 0 }
    }
}

/// Per-variable probability of label 1.
fn soft_label(b: f64, label: usize) -> f64 {
    if label == 1 {
        b
    } else {
        1.0 - b
    }
}

/// Soft-masked vector: every slot is `f` times the product of its member
/// variables' soft-label probabilities.
fn soft_mask(graph: &RegionGraph, f: &PotentialVector, b: &[f64]) -> PotentialVector {
    let mut out = PotentialVector::zeros(f.len());
    for r in 0..graph.num_regions() {
        let offset = graph.region_offset(r);
        let size = graph.region_size(r);
        let vars = &graph.region(r).vars;
        let mut suffix = vec![1usize; vars.len() + 1];
        for pos in (0..vars.len()).rev() {
            suffix[pos] = suffix[pos + 1] * 2;
        }
        for a in 0..size {
            let mut prob = 1.0;
            for (pos, &var) in vars.iter().enumerate() {
                let label = (a / suffix[pos + 1]) % 2;
                prob *= soft_label(b[var], label);
            }
            out.values[offset + a] = f.values[offset + a] * prob;
        }
    }
    out
}

/// Chain rule from slot cotangents back to the soft labels.
fn soft_mask_backward(
    graph: &RegionGraph,
    f: &PotentialVector,
    b: &[f64],
    cotangent: &[f64],
) -> Vec<f64> {
    let mut grad = vec![0.0; b.len()];
    for r in 0..graph.num_regions() {
        let offset = graph.region_offset(r);
        let size = graph.region_size(r);
        let vars = &graph.region(r).vars;
        let mut suffix = vec![1usize; vars.len() + 1];
        for pos in (0..vars.len()).rev() {
            suffix[pos] = suffix[pos + 1] * 2;
        }
        for a in 0..size {
            let cot = cotangent[offset + a] * f.values[offset + a];
            if cot == 0.0 {
                continue;
            }
            for (pos, &var) in vars.iter().enumerate() {
                let label = (a / suffix[pos + 1]) % 2;
                // d prob / d b_var = sign * product of the other factors.
                let mut other = 1.0;
                for (pos2, &var2) in vars.iter().enumerate() {
                    if pos2 == pos {
                        continue;
                    }
                    let label2 = (a / suffix[pos2 + 1]) % 2;
                    other *= soft_label(b[var2], label2);
                }
                let sign = if label == 1 { 1.0 } else { -1.0 };
                grad[var] += cot * sign * other;
            }
        }
    }
    grad
}

/// Projected gradient ascent on `T(soft_mask(f, b))` over `b in [0,1]^K`,
/// rounding at 0.5; returns the best of `restarts` random initializations by
/// the transformed score of the rounded configuration.
pub fn spen_relaxed_infer(
    graph: &RegionGraph,
    f: &PotentialVector,
    top: &dyn TopTransform,
    cfg: &SpenConfig,
) -> Result<Assignment> {
    if f.len() != graph.total_slots() {
        return Err(Error::structure("f length does not match graph layout"));
    }
    for v in 0..graph.num_vars() {
        if graph.domain(v) != 2 {
            return Err(Error::structure(format!(
                "relaxed inference requires binary variables, variable {v} has domain {}",
                graph.domain(v)
            )));
        }
    }
    if cfg.restarts == 0 {
        return Err(Error::structure("restarts must be at least 1"));
    }

    let mut best_score = f64::NEG_INFINITY;
    let mut best: Option<Assignment> = None;
    for restart in 0..cfg.restarts {
        let mut r = rng::stream(cfg.seed, rng::ns::SPEN, restart as u64);
        let mut b: Vec<f64> = (0..graph.num_vars()).map(|_| r.gen_range(0.0..1.0)).collect();
        for _ in 0..cfg.steps {
            let soft = soft_mask(graph, f, &b);
            let g_slots = top.grad_y(&soft.values)?;
            let g = soft_mask_backward(graph, f, &b, &g_slots);
            for (bi, gi) in b.iter_mut().zip(&g) {
                *bi = (*bi + cfg.step_size * gi).clamp(0.0, 1.0);
            }
        }
        let labels: Vec<usize> = b.iter().map(|&v| usize::from(v >= 0.5)).collect();
        let x = Assignment::new(labels);
        let score = top.value(&graph.mask(f, &x)?.values)?;
        if score > best_score {
            best_score = score;
            best = Some(x);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapsolver::map_bruteforce;
    use crate::top::{QuadraticAnchorTop, SumTop};
    use rand::Rng;

    #[test]
    fn single_binary_variable_matches_brute_force() {
        let graph = RegionGraph::new(vec![2], vec![]).unwrap();
        let f = PotentialVector::from_values(vec![-0.4, 0.9]);
        let top = SumTop { dim: 2 };
        let cfg = SpenConfig { steps: 200, step_size: 0.2, restarts: 3, seed: 1 };
        let x = spen_relaxed_infer(&graph, &f, &top, &cfg).unwrap();
        let (_, exact) = map_bruteforce(&graph, &f).unwrap();
        assert_eq!(x, exact);
    }

    #[test]
    fn zero_potentials_is_deterministic_given_seed() {
        let graph = RegionGraph::build_chain(3, 2).unwrap();
        let f = PotentialVector::zeros(graph.total_slots());
        let top = SumTop { dim: graph.total_slots() };
        let cfg = SpenConfig { steps: 10, step_size: 0.1, restarts: 2, seed: 7 };
        let a = spen_relaxed_infer(&graph, &f, &top, &cfg).unwrap();
        let b = spen_relaxed_infer(&graph, &f, &top, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn concave_quadratic_on_two_binary_vars_matches_enumeration() {
        // Best of 5 restarts should find the global optimum in most trials.
        let graph = RegionGraph::build_chain(2, 2).unwrap();
        let d = graph.total_slots();
        let mut hits = 0;
        let trials = 5;
        for trial in 0..trials {
            let mut r = crate::rng::stream(trial, 77, 0);
            let f = PotentialVector::from_values((0..d).map(|_| r.gen_range(-1.0..1.0)).collect());
            let anchor: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
            let top = QuadraticAnchorTop { anchor };
            let cfg = SpenConfig { steps: 300, step_size: 0.2, restarts: 5, seed: trial };
            let x = spen_relaxed_infer(&graph, &f, &top, &cfg).unwrap();
            // Enumeration oracle on the transformed score.
            let mut best = f64::NEG_INFINITY;
            let mut best_x = None;
            for cand in graph.enumerate_assignments(16).unwrap() {
                let s = top.value(&graph.mask(&f, &cand).unwrap().values).unwrap();
                if s > best {
                    best = s;
                    best_x = Some(cand);
                }
            }
            if x == best_x.unwrap() {
                hits += 1;
            }
        }
        assert!(hits >= 4, "only {hits}/{trials} trials found the optimum");
    }

    #[test]
    fn non_binary_domain_rejected() {
        let graph = RegionGraph::build_chain(2, 3).unwrap();
        let f = PotentialVector::zeros(graph.total_slots());
        let top = SumTop { dim: graph.total_slots() };
        assert!(spen_relaxed_infer(&graph, &f, &top, &SpenConfig::default()).is_err());
    }
}
