//! Primal-dual saddle-point inference coupling the top transformation to the
//! discrete subproblem.
//!
//! The inference program is
//!
//! ```text
//! min_mu min_lambda ( max_y { T(y) - lambda' y } + H_D(mu, lambda) )
//! ```
//!
//! where `H_D` is the relaxed dual bound of `max_x lambda' H(x)`. Messages are
//! minimized once up front, then `n` outer iterations alternate a proximal
//! ascent step in `y` with a subgradient descent step in `lambda`, using the
//! extrapolated multiplier `lambda_bar = 2 lambda_i - lambda_{i-1}`. The last
//! `n/2` iterates of `y` and `lambda` are averaged, messages are re-solved at
//! the final `lambda_bar`, and a configuration is decoded from unary beliefs.

use crate::error::{Error, Result};
use crate::mapsolver::{
    decode, dual_value, grad_lambda, minimize_dual_from, theta_from, MessageSet,
};
use crate::numeric;
use crate::regiongraph::{Assignment, PotentialVector, RegionGraph};
use crate::top::TopTransform;

/// Step sizes and iteration controls for the saddle-point loop.
#[derive(Debug, Clone)]
pub struct SaddleConfig {
    pub alpha_y: f64,
    pub alpha_lambda: f64,
    /// Outer iterations `n`; must be even (averaging covers the last `n/2`).
    pub iterations: usize,
    pub prox_max_iters: usize,
    /// Damping of the inner fixed-point map; 1.0 is the undamped update.
    pub prox_step: f64,
    pub prox_tol: f64,
    /// Re-solve messages every this many outer iterations; 0 = never.
    pub resolve_mu_every: usize,
    pub mu_max_sweeps: usize,
    pub mu_tol: f64,
    /// Record the saddle objective each outer iteration (one extra `T` eval).
    pub record_trace: bool,
    /// Keep the averaged iterate window in the diagnostics.
    pub record_iterates: bool,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        SaddleConfig {
            alpha_y: 0.5,
            alpha_lambda: 0.5,
            iterations: 100,
            prox_max_iters: 50,
            prox_step: 1.0,
            prox_tol: 1e-8,
            resolve_mu_every: 0,
            mu_max_sweeps: 200,
            mu_tol: 1e-12,
            record_trace: true,
            record_iterates: false,
        }
    }
}

impl SaddleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_y <= 0.0 || self.alpha_lambda <= 0.0 {
            return Err(Error::structure("step sizes must be positive"));
        }
        if self.iterations == 0 || !self.iterations.is_multiple_of(2) {
            return Err(Error::structure("iteration count must be even and positive"));
        }
        if self.prox_max_iters == 0 {
            return Err(Error::structure("prox_max_iters must be at least 1"));
        }
        if !(self.prox_step > 0.0 && self.prox_step <= 1.0) {
            return Err(Error::structure("prox_step must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Non-fatal configuration notes (the step-product bound, mainly).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha_y * self.alpha_lambda > 1.0 {
            out.push(format!(
                "alpha_y * alpha_lambda = {:.3} exceeds 1; convergence is not guaranteed",
                self.alpha_y * self.alpha_lambda
            ));
        }
        out
    }
}

/// Outcome of a proximal `y` solve.
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub y: Vec<f64>,
    /// Infinity norm of the first-order residual at the returned iterate.
    pub residual: f64,
    pub iters_used: usize,
    pub hit_max_iters: bool,
}

/// Approximately solve
/// `argmax_y { T(y) - lambda_bar' y - ||y - y_prev||^2 / (2 alpha_y) }`
/// by damped fixed-point iteration of `y <- y_prev + alpha_y (grad T(y) - lambda_bar)`,
/// stopping when the first-order residual drops below `prox_tol`.
pub fn prox_y(
    top: &dyn TopTransform,
    lambda_bar: &[f64],
    y_prev: &[f64],
    alpha_y: f64,
    cfg: &SaddleConfig,
) -> Result<ProxResult> {
    let n = y_prev.len();
    let mut y = y_prev.to_vec();
    let mut residuals = Vec::new();
    let mut iters_used = 0usize;
    loop {
        let g = top.grad_y(&y)?;
        let mut residual = 0.0f64;
        for i in 0..n {
            let r = g[i] - lambda_bar[i] - (y[i] - y_prev[i]) / alpha_y;
            residual = residual.max(r.abs());
        }
        if !residual.is_finite() {
            return Err(Error::Numerical {
                iteration: iters_used,
                detail: "non-finite prox residual".into(),
                trace: residuals,
            });
        }
        residuals.push(residual);
        if residual <= cfg.prox_tol {
            return Ok(ProxResult { y, residual, iters_used, hit_max_iters: false });
        }
        if iters_used >= cfg.prox_max_iters {
            return Ok(ProxResult { y, residual, iters_used, hit_max_iters: true });
        }
        for i in 0..n {
            let target = y_prev[i] + alpha_y * (g[i] - lambda_bar[i]);
            y[i] = (1.0 - cfg.prox_step) * y[i] + cfg.prox_step * target;
        }
        iters_used += 1;
    }
}

/// Saddle objective `T(y) - lambda' y + H_D(mu, theta)`, for diagnostics.
pub fn saddle_objective(
    graph: &RegionGraph,
    top: &dyn TopTransform,
    y: &PotentialVector,
    lambda: &PotentialVector,
    mu: &MessageSet,
    theta: &PotentialVector,
) -> Result<f64> {
    Ok(top.value(&y.values)? - lambda.dot(y) + dual_value(graph, mu, theta)?)
}

/// Stored averaging window, available under `record_iterates`.
#[derive(Debug, Clone, Default)]
pub struct IterateWindow {
    pub y: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
}

/// Per-run diagnostics.
#[derive(Debug, Clone, Default)]
pub struct SaddleDiagnostics {
    /// Saddle objective per outer iteration (empty unless `record_trace`).
    pub objective_trace: Vec<f64>,
    pub prox_residuals: Vec<f64>,
    pub prox_iters: Vec<usize>,
    /// Outer iterations whose prox solve stopped on the iteration cap.
    pub prox_hit_max: usize,
    pub lambda_step_norms: Vec<f64>,
    /// Dual bound minus decoded score at the final multiplier.
    pub duality_gap: f64,
    pub initial_mu_sweeps: usize,
    pub final_mu_sweeps: usize,
    pub iterates: Option<IterateWindow>,
}

impl SaddleDiagnostics {
    /// Tab-separated trace: iteration, objective, prox residual, lambda-step
    /// norm. The objective column is `nan` when tracing was disabled.
    pub fn to_table(&self) -> String {
        let mut out = String::from("iteration\tobjective\tprox_residual\tlambda_step\n");
        let n = self.prox_residuals.len();
        for i in 0..n {
            let obj = self.objective_trace.get(i).copied().unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                i + 1,
                obj,
                self.prox_residuals[i],
                self.lambda_step_norms[i]
            ));
        }
        out
    }
}

/// Result of a saddle-point inference run.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub mu: MessageSet,
    /// Mean of the last `n/2` multiplier iterates.
    pub lambda: PotentialVector,
    /// Mean of the last `n/2` primal iterates.
    pub y: PotentialVector,
    pub assignment: Assignment,
    pub diagnostics: SaddleDiagnostics,
}

/// Run the full inference procedure.
///
/// `lambda0` defaults to all ones, so the initial discrete subproblem is
/// classical MAP on `f`; `y0` defaults to the dual subgradient at that point,
/// a belief-consistent warm start. A loss vector, when present, is added to
/// every `theta` construction (loss-augmented inference).
pub fn infer(
    graph: &RegionGraph,
    f: &PotentialVector,
    top: &dyn TopTransform,
    loss: Option<&PotentialVector>,
    cfg: &SaddleConfig,
    lambda0: Option<&PotentialVector>,
    y0: Option<&PotentialVector>,
) -> Result<InferenceResult> {
    cfg.validate()?;
    let d = graph.total_slots();
    if f.len() != d {
        return Err(Error::structure("f length does not match graph layout"));
    }
    if top.dim() != d {
        return Err(Error::structure(format!(
            "transformation expects dimension {}, graph layout has {}",
            top.dim(),
            d
        )));
    }
    let n = cfg.iterations;

    let mut lambda = match lambda0 {
        Some(l) => {
            if l.len() != d {
                return Err(Error::structure("lambda0 length does not match layout"));
            }
            l.clone()
        }
        None => PotentialVector::constant(d, 1.0),
    };

    let theta0 = theta_from(&lambda, f, loss)?;
    let initial = minimize_dual_from(
        graph,
        &theta0,
        MessageSet::zeros(graph),
        cfg.mu_max_sweeps,
        cfg.mu_tol,
        None,
    )?;
    let mut mu = initial.messages;
    let initial_mu_sweeps = initial.sweeps_used;

    let mut y = match y0 {
        Some(y) => {
            if y.len() != d {
                return Err(Error::structure("y0 length does not match layout"));
            }
            y.values.clone()
        }
        None => grad_lambda(graph, &mu, &theta0, f)?.values,
    };

    let mut lambda_bar = lambda.clone();
    let mut diag = SaddleDiagnostics {
        initial_mu_sweeps,
        iterates: cfg.record_iterates.then(IterateWindow::default),
        ..SaddleDiagnostics::default()
    };

    let half = n / 2;
    let mut y_sum = vec![0.0; d];
    let mut lambda_sum = vec![0.0; d];

    for i in 1..=n {
        let prox = prox_y(top, &lambda_bar.values, &y, cfg.alpha_y, cfg)?;
        y = prox.y;
        diag.prox_residuals.push(prox.residual);
        diag.prox_iters.push(prox.iters_used);
        if prox.hit_max_iters {
            diag.prox_hit_max += 1;
        }

        let theta_i = theta_from(&lambda, f, loss)?;
        let g = grad_lambda(graph, &mu, &theta_i, f)?;
        let mut step_norm = 0.0f64;
        let mut lambda_new = vec![0.0; d];
        for s in 0..d {
            let delta = cfg.alpha_lambda * (g.values[s] - y[s]);
            lambda_new[s] = lambda.values[s] - delta;
            step_norm = step_norm.max(delta.abs());
        }
        if !numeric::all_finite(&lambda_new) || !numeric::all_finite(&y) {
            return Err(Error::Numerical {
                iteration: i,
                detail: "non-finite saddle iterate".into(),
                trace: diag.objective_trace,
            });
        }
        for (bar, (&new, &old)) in
            lambda_bar.values.iter_mut().zip(lambda_new.iter().zip(&lambda.values))
        {
            *bar = 2.0 * new - old;
        }
        lambda = PotentialVector::from_values(lambda_new);
        diag.lambda_step_norms.push(step_norm);

        if i > half {
            numeric::axpy(1.0, &y, &mut y_sum);
            numeric::axpy(1.0, &lambda.values, &mut lambda_sum);
            if let Some(window) = diag.iterates.as_mut() {
                window.y.push(y.clone());
                window.lambda.push(lambda.values.clone());
            }
        }

        if cfg.record_trace {
            let theta_now = theta_from(&lambda, f, loss)?;
            let obj = top.value(&y)? - numeric::dot(&lambda.values, &y)
                + dual_value(graph, &mu, &theta_now)?;
            diag.objective_trace.push(obj);
        }

        if cfg.resolve_mu_every > 0 && i % cfg.resolve_mu_every == 0 {
            let theta_bar = theta_from(&lambda_bar, f, loss)?;
            let solve = minimize_dual_from(
                graph,
                &theta_bar,
                mu,
                cfg.mu_max_sweeps,
                cfg.mu_tol,
                None,
            )?;
            mu = solve.messages;
        }
    }

    let scale = 1.0 / half as f64;
    let y_avg = PotentialVector::from_values(y_sum.iter().map(|v| v * scale).collect());
    let lambda_avg =
        PotentialVector::from_values(lambda_sum.iter().map(|v| v * scale).collect());

    // Re-solve messages at the final extrapolated multiplier and decode.
    let theta_bar = theta_from(&lambda_bar, f, loss)?;
    let final_solve = minimize_dual_from(
        graph,
        &theta_bar,
        mu,
        cfg.mu_max_sweeps,
        cfg.mu_tol,
        None,
    )?;
    let mu = final_solve.messages;
    diag.final_mu_sweeps = final_solve.sweeps_used;
    let assignment = decode(graph, &mu, &theta_bar)?;
    let decoded_score = graph.score_decomposed(&theta_bar, &assignment)?;
    diag.duality_gap = final_solve.dual_value - decoded_score;

    Ok(InferenceResult { mu, lambda: lambda_avg, y: y_avg, assignment, diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapsolver::map_chain_dp;
    use crate::top::{QuadraticAnchorTop, SumTop, WeightedSumTop};
    use rand::Rng;

    fn quick_cfg(n: usize) -> SaddleConfig {
        SaddleConfig { iterations: n, prox_tol: 1e-10, ..SaddleConfig::default() }
    }

    #[test]
    fn prox_linear_transform_is_one_step() {
        // grad T constant: the closed form y = y_prev + alpha (a - lambda_bar).
        let a = [0.7, -0.3];
        let top = WeightedSumTop { weights: &a };
        let y_prev = [0.1, 0.2];
        let lambda_bar = [0.5, 0.5];
        let alpha = 0.5;
        let cfg = quick_cfg(2);
        let prox = prox_y(&top, &lambda_bar, &y_prev, alpha, &cfg).unwrap();
        for i in 0..2 {
            let closed = y_prev[i] + alpha * (a[i] - lambda_bar[i]);
            assert!((prox.y[i] - closed).abs() < 1e-12);
        }
        assert_eq!(prox.iters_used, 1);
        assert!(prox.residual <= cfg.prox_tol);
    }

    #[test]
    fn prox_quadratic_converges_to_analytic_solution() {
        // T(y) = -||y - a||^2 / 2 has prox solution
        // (y_prev + alpha (a - lambda_bar)) / (1 + alpha).
        let a = vec![1.0, -2.0, 0.5];
        let top = QuadraticAnchorTop { anchor: a.clone() };
        let y_prev = [0.0, 0.0, 1.0];
        let lambda_bar = [0.2, -0.1, 0.0];
        let alpha = 0.5;
        let cfg = SaddleConfig { prox_tol: 1e-12, prox_max_iters: 200, ..quick_cfg(2) };
        let prox = prox_y(&top, &lambda_bar, &y_prev, alpha, &cfg).unwrap();
        for i in 0..3 {
            let closed = (y_prev[i] + alpha * (a[i] - lambda_bar[i])) / (1.0 + alpha);
            assert!(
                (prox.y[i] - closed).abs() < 1e-8,
                "coord {i}: {} vs {}",
                prox.y[i],
                closed
            );
        }
        assert!(!prox.hit_max_iters);
    }

    #[test]
    fn prox_fixed_point_has_zero_residual() {
        // lambda_bar = grad T(y_prev) makes y_prev stationary.
        let a = vec![0.4, 0.9];
        let top = QuadraticAnchorTop { anchor: a.clone() };
        let y_prev = [0.1, 0.3];
        let lambda_bar: Vec<f64> = top.grad_y(&y_prev).unwrap();
        let prox = prox_y(&top, &lambda_bar, &y_prev, 0.5, &quick_cfg(2)).unwrap();
        assert_eq!(prox.iters_used, 0);
        assert_eq!(prox.residual, 0.0);
        assert_eq!(prox.y, y_prev.to_vec());
    }

    #[test]
    fn classical_reduction_decodes_exact_map_on_trees() {
        // T = sum, lambda0 = 1: theta equals f and the decoded configuration
        // matches the chain DP oracle.
        for seed in 0..20u64 {
            let graph = RegionGraph::build_chain(5, 3).unwrap();
            let mut r = crate::rng::stream(seed, 60, 0);
            let f = PotentialVector::from_values(
                (0..graph.total_slots()).map(|_| r.gen_range(-1.0..1.0)).collect(),
            );
            let top = SumTop { dim: graph.total_slots() };
            let cfg = SaddleConfig { record_trace: false, ..quick_cfg(40) };
            let res = infer(&graph, &f, &top, None, &cfg, None, None).unwrap();
            let (_, dp_x) = map_chain_dp(&graph, &f).unwrap();
            assert_eq!(res.assignment, dp_x, "seed {seed}");
            assert!(res.diagnostics.duality_gap.abs() < 1e-9);
        }
    }

    #[test]
    fn single_binary_variable_with_quadratic_transform() {
        // The Lagrangian dual of the discrete program is tight exactly when
        // one configuration's multiplier is self-consistent:
        //   x = 0 active at lambda = a - (f0, 0)  iff  (a0 - f0) f0 >= a1 f1
        //   x = 1 active at lambda = a - (0, f1)  iff  (a1 - f1) f1 >= a0 f0
        // On gap-free draws the decoded configuration must match the
        // enumeration oracle for T(mask(f, x)).
        let graph = RegionGraph::new(vec![2], vec![]).unwrap();
        let mut checked = 0;
        for seed in 0..200u64 {
            let mut r = crate::rng::stream(seed, 61, 0);
            let f0: f64 = r.gen_range(0.2..1.0);
            let f1: f64 = r.gen_range(0.2..1.0);
            let a0: f64 = r.gen_range(-1.0..1.0);
            let a1: f64 = r.gen_range(-1.0..1.0);
            let margin0 = (a0 - f0) * f0 - a1 * f1;
            let margin1 = (a1 - f1) * f1 - a0 * f0;
            if margin0.max(margin1) < 0.05 {
                continue; // duality gap (or near-tie): decoding undefined
            }
            checked += 1;
            let f = PotentialVector::from_values(vec![f0, f1]);
            let top = QuadraticAnchorTop { anchor: vec![a0, a1] };
            let cfg = SaddleConfig { record_trace: false, ..quick_cfg(200) };
            let res = infer(&graph, &f, &top, None, &cfg, None, None).unwrap();
            let mut best = f64::NEG_INFINITY;
            let mut best_x = None;
            for x in graph.enumerate_assignments(4).unwrap() {
                let v = top.value(&graph.mask(&f, &x).unwrap().values).unwrap();
                if v > best {
                    best = v;
                    best_x = Some(x);
                }
            }
            assert_eq!(res.assignment, best_x.unwrap(), "seed {seed}");
            if checked >= 10 {
                break;
            }
        }
        assert!(checked >= 10, "not enough gap-free draws");
    }

    #[test]
    fn zero_potentials_zero_transform_stay_at_zero_initialization() {
        let graph = RegionGraph::build_chain(2, 2).unwrap();
        let d = graph.total_slots();
        let f = PotentialVector::zeros(d);
        let weights = vec![0.0; d];
        let top = WeightedSumTop { weights: &weights };
        let zeros = PotentialVector::zeros(d);
        let cfg = quick_cfg(2);
        let res = infer(&graph, &f, &top, None, &cfg, Some(&zeros), Some(&zeros)).unwrap();
        assert!(res.y.values.iter().all(|&v| v == 0.0));
        assert!(res.lambda.values.iter().all(|&v| v == 0.0));
        assert_eq!(res.assignment.labels, vec![0, 0]);
    }

    #[test]
    fn averages_match_stored_iterates_bit_exactly() {
        let graph = RegionGraph::build_chain(3, 2).unwrap();
        let mut r = crate::rng::stream(3, 62, 0);
        let f = PotentialVector::from_values(
            (0..graph.total_slots()).map(|_| r.gen_range(-1.0..1.0)).collect(),
        );
        let anchor: Vec<f64> = (0..graph.total_slots()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let top = QuadraticAnchorTop { anchor };
        let cfg = SaddleConfig { record_iterates: true, ..quick_cfg(8) };
        let res = infer(&graph, &f, &top, None, &cfg, None, None).unwrap();
        let window = res.diagnostics.iterates.as_ref().unwrap();
        assert_eq!(window.y.len(), 4);
        let d = graph.total_slots();
        for s in 0..d {
            let mut ys = 0.0;
            let mut ls = 0.0;
            for i in 0..window.y.len() {
                ys += window.y[i][s];
                ls += window.lambda[i][s];
            }
            assert_eq!(res.y.values[s], ys * (1.0 / 4.0));
            assert_eq!(res.lambda.values[s], ls * (1.0 / 4.0));
        }
    }

    #[test]
    fn objective_invariant_under_constant_shift_of_transform() {
        struct Shifted<'a> {
            inner: &'a dyn TopTransform,
            shift: f64,
        }
        impl TopTransform for Shifted<'_> {
            fn dim(&self) -> usize {
                self.inner.dim()
            }
            fn value(&self, y: &[f64]) -> Result<f64> {
                Ok(self.inner.value(y)? + self.shift)
            }
            fn grad_y(&self, y: &[f64]) -> Result<Vec<f64>> {
                self.inner.grad_y(y)
            }
        }

        let graph = RegionGraph::build_chain(2, 2).unwrap();
        let d = graph.total_slots();
        let mut r = crate::rng::stream(4, 63, 0);
        let f = PotentialVector::from_values((0..d).map(|_| r.gen_range(-1.0..1.0)).collect());
        let lambda = PotentialVector::from_values((0..d).map(|_| r.gen_range(-1.0..1.0)).collect());
        let y = PotentialVector::from_values((0..d).map(|_| r.gen_range(-1.0..1.0)).collect());
        let theta = theta_from(&lambda, &f, None).unwrap();
        let mu = MessageSet::zeros(&graph);
        let base = SumTop { dim: d };
        let shifted = Shifted { inner: &base, shift: 3.25 };
        let o1 = saddle_objective(&graph, &base, &y, &lambda, &mu, &theta).unwrap();
        let o2 = saddle_objective(&graph, &shifted, &y, &lambda, &mu, &theta).unwrap();
        assert!((o2 - 3.25 - o1).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_hand_computation_on_one_variable() {
        // One binary variable: T = sum, y = (1, 2), lambda = (3, 4),
        // f = (5, 6). theta = (15, 24); objective = 3 - 11 + 24 = 16.
        let graph = RegionGraph::new(vec![2], vec![]).unwrap();
        let top = SumTop { dim: 2 };
        let y = PotentialVector::from_values(vec![1.0, 2.0]);
        let lambda = PotentialVector::from_values(vec![3.0, 4.0]);
        let f = PotentialVector::from_values(vec![5.0, 6.0]);
        let theta = theta_from(&lambda, &f, None).unwrap();
        let mu = MessageSet::zeros(&graph);
        let obj = saddle_objective(&graph, &top, &y, &lambda, &mu, &theta).unwrap();
        assert!((obj - 16.0).abs() < 1e-12);
    }

    #[test]
    fn odd_iteration_count_rejected() {
        let cfg = SaddleConfig { iterations: 3, ..SaddleConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SaddleConfig { iterations: 4, alpha_y: 1.5, alpha_lambda: 1.5, ..SaddleConfig::default() };
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.warnings().len(), 1);
    }

    #[test]
    fn loss_augmentation_moves_the_argmax() {
        // f = 0 with a Hamming loss against x_true: decoded configuration
        // differs from x_true everywhere.
        let graph = RegionGraph::build_chain(3, 2).unwrap();
        let d = graph.total_slots();
        let f = PotentialVector::zeros(d);
        let x_true = Assignment::new(vec![1, 0, 1]);
        let mut loss = PotentialVector::zeros(d);
        for v in 0..3 {
            for s in 0..2 {
                if s != x_true.labels[v] {
                    loss.values[graph.region_offset(v) + s] = 1.0;
                }
            }
        }
        let top = SumTop { dim: d };
        let cfg = SaddleConfig { record_trace: false, ..quick_cfg(20) };
        let res = infer(&graph, &f, &top, Some(&loss), &cfg, None, None).unwrap();
        for v in 0..3 {
            assert_ne!(res.assignment.labels[v], x_true.labels[v]);
        }
    }

    #[test]
    fn diagnostics_table_has_expected_shape() {
        let graph = RegionGraph::build_chain(2, 2).unwrap();
        let d = graph.total_slots();
        let f = PotentialVector::constant(d, 0.1);
        let top = SumTop { dim: d };
        let res = infer(&graph, &f, &top, None, &quick_cfg(4), None, None).unwrap();
        let table = res.diagnostics.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("iteration\t"));
        // prox residuals are bounded by the tolerance unless the cap was hit
        assert_eq!(res.diagnostics.prox_hit_max, 0);
        for &r in &res.diagnostics.prox_residuals {
            assert!(r <= 1e-10);
        }
    }
}
