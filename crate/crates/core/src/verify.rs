//! Independent checks on the solved games: closed form vs ODE integration,
//! stationarity and costate residuals, unilateral-deviation tests against the
//! unscaled costs, and the control-locality probe.
//!
//! Every check is deterministic given its seed; perturbation directions are
//! seeded piecewise-linear bumps (low-order sine mixtures sampled on the
//! output grid) normalized to unit L2 norm on `[0, t_f]`.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    evaluate_individual_cost, evaluate_social_cost, simulate, ControlledSolution, GameConfig,
};
use crate::error::{Error, Result};
use crate::graph;
use crate::matrix_functions::matrix_exponential;
use crate::nash::{build_boundary_matrix, NashSolution};
use crate::social::SocialSolution;

pub const STATIONARITY_TOLERANCE: f64 = 1e-12;
pub const COSTATE_ODE_TOLERANCE: f64 = 1e-5;
pub const TERMINAL_CONDITION_TOLERANCE: f64 = 1e-10;
/// Cost decreases are normalized by `1 + J_i` before this bound applies.
pub const DEVIATION_TOLERANCE: f64 = 1e-8;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const LOCALITY_THRESHOLD: f64 = 1e-10;

const COSTATE_FD_STEP: f64 = 1e-4;
const PONTRYAGIN_INTERIOR_POINTS: usize = 20;
const DIRECTION_MODES: usize = 6;

/// One named residual check: `pass` holds exactly when the maximum residual
/// is within tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub details: Vec<CheckDetail>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckDetail {
    pub label: String,
    pub residual: f64,
}

impl VerificationReport {
    fn new(check: impl Into<String>, tolerance: f64, details: Vec<CheckDetail>) -> Self {
        let max_residual = details
            .iter()
            .map(|d| d.residual)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0);
        VerificationReport {
            check: check.into(),
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
            details,
        }
    }
}

/// Memoizes a solution's control vector by exact time stamp; RK4 revisits the
/// same stage times across repeated simulations, so re-integration under
/// equilibrium controls costs one matrix exponential per distinct time.
struct CachedControls<'a> {
    solution: &'a dyn ControlledSolution,
    cache: RefCell<HashMap<u64, DVector<f64>>>,
}

impl<'a> CachedControls<'a> {
    fn new(solution: &'a dyn ControlledSolution) -> Self {
        CachedControls {
            solution,
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn control_at(&self, t: f64) -> Result<DVector<f64>> {
        let key = t.to_bits();
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let value = self.solution.control_at(t)?;
        self.cache.borrow_mut().insert(key, value.clone());
        Ok(value)
    }
}

/// Linear interpolation of node values on a uniform grid.
struct PiecewiseLinear<'a> {
    times: &'a [f64],
    values: Vec<f64>,
}

impl<'a> PiecewiseLinear<'a> {
    fn new(times: &'a [f64], values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        PiecewiseLinear { times, values }
    }

    fn eval(&self, t: f64) -> f64 {
        let m = self.times.len();
        let t0 = self.times[0];
        let h = (self.times[m - 1] - t0) / (m - 1) as f64;
        let pos = ((t - t0) / h).clamp(0.0, (m - 1) as f64);
        let k = (pos.floor() as usize).min(m - 2);
        let w = pos - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Exact L2 norm of the interpolant over the grid span.
    fn l2_norm(&self) -> f64 {
        let m = self.times.len();
        let h = (self.times[m - 1] - self.times[0]) / (m - 1) as f64;
        let mut acc = 0.0;
        for k in 0..m - 1 {
            let (a, b) = (self.values[k], self.values[k + 1]);
            acc += h / 3.0 * (a * a + a * b + b * b);
        }
        acc.sqrt()
    }
}

/// Re-integrates the dynamics under the solution's own controls and reports
/// the sup-norm deviation from the closed-form trajectory.
pub fn check_trajectory_oracle(
    sol: &dyn ControlledSolution,
    tolerance: f64,
) -> Result<VerificationReport> {
    let cached = CachedControls::new(sol);
    let integrated = simulate(sol.config(), |t| cached.control_at(t))?;
    let closed = sol.trajectory();
    let mut worst = CheckDetail {
        label: "grid node 0".into(),
        residual: 0.0,
    };
    for (k, (a, b)) in closed.opinions.iter().zip(&integrated.opinions).enumerate() {
        let r = (a - b).amax();
        if r > worst.residual {
            worst = CheckDetail {
                label: format!(
                    "{} trajectory, grid node {k} (t = {})",
                    sol.kind(),
                    closed.times[k]
                ),
                residual: r,
            };
        }
    }
    Ok(VerificationReport::new(
        format!("{}-trajectory-oracle", sol.kind()),
        tolerance,
        vec![worst],
    ))
}

/// The three stationarity checks at 20 interior grid points per agent:
/// control/costate identity, the costate ODE by central differences, and the
/// terminal condition.
#[derive(Debug, Clone, Serialize)]
pub struct PontryaginReport {
    pub stationarity: VerificationReport,
    pub costate_ode: VerificationReport,
    pub terminal: VerificationReport,
}

impl PontryaginReport {
    pub fn pass(&self) -> bool {
        self.stationarity.pass && self.costate_ode.pass && self.terminal.pass
    }
}

pub fn check_pontryagin(sol: &NashSolution) -> Result<PontryaginReport> {
    let cfg = &sol.config;
    let n = cfg.agent_count();
    let t_f = cfg.horizon();
    let times = &sol.trajectory.times;
    let m = times.len();

    let mut interior: Vec<usize> = (0..PONTRYAGIN_INTERIOR_POINTS)
        .map(|j| 1 + j * (m - 2) / PONTRYAGIN_INTERIOR_POINTS.max(1))
        .collect();
    interior.dedup();

    let mut stationarity = Vec::new();
    let mut costate_ode = Vec::new();
    for &k in &interior {
        let t = times[k];
        for i in 0..n {
            let lam_t = crate::nash::costate(sol, i, t)?;
            let u_policy = sol.policies[i].evaluate(t)?;
            let b = cfg.input_gains()[i];
            let r = cfg.control_weights()[i];
            stationarity.push(CheckDetail {
                label: format!("agent {i}, t = {t:.6}"),
                residual: (u_policy - (-(b / r) * lam_t[i])).abs(),
            });

            let lam_plus = crate::nash::costate(sol, i, t + COSTATE_FD_STEP)?;
            let lam_minus = crate::nash::costate(sol, i, t - COSTATE_FD_STEP)?;
            let derivative = (lam_plus - lam_minus) / (2.0 * COSTATE_FD_STEP);
            let residual = (derivative + sol.dynamics_matrix().transpose() * &lam_t).amax();
            costate_ode.push(CheckDetail {
                label: format!("agent {i}, t = {t:.6}"),
                residual,
            });
        }
    }

    let mut terminal = Vec::new();
    for i in 0..n {
        let lam_tf = crate::nash::costate(sol, i, t_f)?;
        let l = graph::agent_laplacian(cfg.graph(), i)?;
        let expected = l * &sol.terminal_state / cfg.graph().degree(i)? as f64;
        terminal.push(CheckDetail {
            label: format!("agent {i}, t = t_f"),
            residual: (lam_tf - expected).amax(),
        });
    }

    Ok(PontryaginReport {
        stationarity: VerificationReport::new(
            "pontryagin-stationarity",
            STATIONARITY_TOLERANCE,
            stationarity,
        ),
        costate_ode: VerificationReport::new(
            "pontryagin-costate-ode",
            COSTATE_ODE_TOLERANCE,
            costate_ode,
        ),
        terminal: VerificationReport::new(
            "pontryagin-terminal-condition",
            TERMINAL_CONDITION_TOLERANCE,
            terminal,
        ),
    })
}

/// Settings for the unilateral-deviation test.
#[derive(Debug, Clone)]
pub struct DeviationOptions {
    pub probe_agents: Vec<usize>,
    pub directions: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl DeviationOptions {
    pub fn standard(probe_agents: Vec<usize>, seed: u64) -> Self {
        DeviationOptions {
            probe_agents,
            directions: 20,
            epsilon: 1e-3,
            seed,
        }
    }
}

/// Outcome of the deviation test: normalized cost decreases (per probed
/// agent, direction, and sign) and the finite-difference gradient norms along
/// the probe directions.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub decrease: VerificationReport,
    pub gradient: VerificationReport,
}

impl DeviationReport {
    pub fn pass(&self) -> bool {
        self.decrease.pass && self.gradient.pass
    }
}

/// Perturbs each probed agent's discretized control along seeded
/// piecewise-linear directions, re-simulates with all opponents fixed at
/// equilibrium, and reports (a) the largest cost decrease relative to
/// `1 + J_i` and (b) the gradient of `J_i` along the probe directions by
/// central differences. Both the baseline and the perturbed costs flow
/// through the same `simulate` + cost pipeline, so the comparison is
/// independent of every closed-form ingredient.
pub fn check_nash_deviation(
    sol: &NashSolution,
    opts: &DeviationOptions,
) -> Result<DeviationReport> {
    if !opts.epsilon.is_finite() || opts.epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "deviation epsilon must be positive, got {}",
            opts.epsilon
        )));
    }
    let cfg = &sol.config;
    let n = cfg.agent_count();
    let times = sol.trajectory.times.clone();
    let grid_controls = sol
        .trajectory
        .controls
        .as_ref()
        .ok_or(Error::MissingControls)?;
    let cached = CachedControls::new(sol);

    let cost_with_own_control = |agent: usize, values: &[f64]| -> Result<f64> {
        let own = PiecewiseLinear::new(&times, values.to_vec());
        let traj = simulate(cfg, |t| {
            let mut u = cached.control_at(t)?;
            u[agent] = own.eval(t);
            Ok(u)
        })?;
        evaluate_individual_cost(cfg, agent, &traj)
    };

    let mut decrease_details = Vec::new();
    let mut gradient_details = Vec::new();
    for &agent in &opts.probe_agents {
        if agent >= n {
            return Err(Error::AgentOutOfRange { index: agent, n });
        }
        let equilibrium: Vec<f64> = grid_controls.iter().map(|u| u[agent]).collect();
        let baseline = cost_with_own_control(agent, &equilibrium)?;
        let scale = 1.0 + baseline.abs();

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(agent as u64));
        let mut gradient_sq = 0.0;
        for direction in 0..opts.directions {
            let bump = direction_bump(&times, cfg.horizon(), &mut rng);
            let plus: Vec<f64> = equilibrium
                .iter()
                .zip(&bump)
                .map(|(u, d)| u + opts.epsilon * d)
                .collect();
            let minus: Vec<f64> = equilibrium
                .iter()
                .zip(&bump)
                .map(|(u, d)| u - opts.epsilon * d)
                .collect();
            let cost_plus = cost_with_own_control(agent, &plus)?;
            let cost_minus = cost_with_own_control(agent, &minus)?;

            decrease_details.push(CheckDetail {
                label: format!("agent {agent}, direction {direction} (+)"),
                residual: (baseline - cost_plus) / scale,
            });
            decrease_details.push(CheckDetail {
                label: format!("agent {agent}, direction {direction} (-)"),
                residual: (baseline - cost_minus) / scale,
            });
            // The cost is exactly quadratic in the discretized control, so the
            // central difference is the exact directional derivative.
            let slope = (cost_plus - cost_minus) / (2.0 * opts.epsilon);
            gradient_sq += slope * slope;
        }
        gradient_details.push(CheckDetail {
            label: format!("agent {agent}, {} directions", opts.directions),
            residual: gradient_sq.sqrt(),
        });
    }

    Ok(DeviationReport {
        decrease: VerificationReport::new("nash-deviation", DEVIATION_TOLERANCE, decrease_details),
        gradient: VerificationReport::new(
            "nash-deviation-gradient",
            GRADIENT_TOLERANCE,
            gradient_details,
        ),
    })
}

/// Global-minimizer check for the centralized solution: perturbs the full
/// discretized control vector along seeded piecewise-linear directions
/// (jointly normalized to unit L2 norm across agents), re-simulates, and
/// reports the largest aggregate-cost decrease relative to `1 + J`.
pub fn check_social_deviation(
    sol: &SocialSolution,
    directions: usize,
    epsilon: f64,
    seed: u64,
) -> Result<VerificationReport> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "deviation epsilon must be positive, got {epsilon}"
        )));
    }
    let cfg = &sol.config;
    let n = cfg.agent_count();
    let times = sol.trajectory.times.clone();
    let grid_controls = sol
        .trajectory
        .controls
        .as_ref()
        .ok_or(Error::MissingControls)?;
    let equilibrium: Vec<Vec<f64>> = (0..n)
        .map(|i| grid_controls.iter().map(|u| u[i]).collect())
        .collect();

    let cost_of = |values: &[Vec<f64>]| -> Result<f64> {
        let interpolants: Vec<PiecewiseLinear> = values
            .iter()
            .map(|v| PiecewiseLinear::new(&times, v.clone()))
            .collect();
        let traj = simulate(cfg, |t| {
            Ok(DVector::from_iterator(
                n,
                interpolants.iter().map(|p| p.eval(t)),
            ))
        })?;
        evaluate_social_cost(cfg, &traj)
    };
    let baseline = cost_of(&equilibrium)?;
    let scale = 1.0 + baseline.abs();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut details = Vec::new();
    for direction in 0..directions {
        // One bump per agent, normalized jointly so the stacked perturbation
        // has unit L2 norm.
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| direction_bump(&times, cfg.horizon(), &mut rng))
            .collect();
        let joint_norm = raw.len() as f64;
        let bump: Vec<Vec<f64>> = raw
            .into_iter()
            .map(|b| b.into_iter().map(|v| v / joint_norm.sqrt()).collect())
            .collect();
        for sign in [1.0, -1.0] {
            let perturbed: Vec<Vec<f64>> = equilibrium
                .iter()
                .zip(&bump)
                .map(|(u, d)| {
                    u.iter()
                        .zip(d)
                        .map(|(ui, di)| ui + sign * epsilon * di)
                        .collect()
                })
                .collect();
            let cost = cost_of(&perturbed)?;
            details.push(CheckDetail {
                label: format!(
                    "direction {direction} ({})",
                    if sign > 0.0 { "+" } else { "-" }
                ),
                residual: (baseline - cost) / scale,
            });
        }
    }
    Ok(VerificationReport::new(
        "social-deviation",
        DEVIATION_TOLERANCE,
        details,
    ))
}

/// A random bump: a mixture of the first few sine modes (vanishing at both
/// endpoints), sampled on the grid and normalized to unit L2 norm as a
/// piecewise-linear function.
fn direction_bump(times: &[f64], horizon: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let coeffs: Vec<f64> = (0..DIRECTION_MODES)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * t / horizon).sin())
                    .sum()
            })
            .collect();
        let norm = PiecewiseLinear::new(times, values.clone()).l2_norm();
        if norm > 1e-8 {
            return values.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Empirical measurement of the locality claim: the sensitivity of agent
/// `i`'s equilibrium control to each entry of the initial opinion vector,
/// together with the non-neighbor entries exceeding the threshold. This is a
/// measurement, never an assertion.
#[derive(Debug, Clone, Serialize)]
pub struct LocalityProbe {
    pub agent: usize,
    /// `sensitivity[j]` = sup over the grid of `|d u_i(t) / d x0_j|`.
    pub sensitivity: Vec<f64>,
    /// Agents outside `{i} ∪ N_i` whose sensitivity exceeds the threshold.
    pub nonlocal_agents: Vec<usize>,
    /// Sup over the grid of the sensitivity to a uniform opinion shift;
    /// zero up to rounding because `L_i` annihilates constants.
    pub consensus_shift_residual: f64,
    pub threshold: f64,
}

pub fn locality_probe(cfg: &GameConfig, agent: usize) -> Result<LocalityProbe> {
    let n = cfg.agent_count();
    if agent >= n {
        return Err(Error::AgentOutOfRange { index: agent, n });
    }
    let t_f = cfg.horizon();
    let lambda = graph::dynamics_matrix(cfg.graph());
    let (boundary, _) = build_boundary_matrix(cfg)?;
    let lu_transposed = boundary.transpose().lu();
    let propagator = matrix_exponential(&(&lambda * t_f))?;
    let l_i = graph::agent_laplacian(cfg.graph(), agent)?;
    let coefficient = -cfg.input_gains()[agent]
        / (cfg.control_weights()[agent] * cfg.graph().degree(agent)? as f64);

    let mut sensitivity = vec![0.0f64; n];
    let mut consensus_shift_residual = 0.0f64;
    for &t in &cfg.time_grid() {
        // Row vector of u_i(t) as a linear functional of x0:
        // c * e_i^T e^{(t_f - t) Lambda^T} L_i H^{-1} e^{t_f Lambda}.
        let back = matrix_exponential(&(&lambda * (t_f - t)))?;
        let weighted = &l_i * back.column(agent);
        let solved = lu_transposed
            .solve(&weighted)
            .ok_or(Error::Numerical("boundary transpose solve failed".into()))?;
        let row = propagator.transpose() * solved * coefficient;
        for j in 0..n {
            sensitivity[j] = sensitivity[j].max(row[j].abs());
        }
        consensus_shift_residual = consensus_shift_residual.max(row.sum().abs());
    }

    let neighbors = cfg.graph().neighbors(agent)?;
    let nonlocal_agents = (0..n)
        .filter(|&j| j != agent && !neighbors.contains(&j) && sensitivity[j] > LOCALITY_THRESHOLD)
        .collect();
    Ok(LocalityProbe {
        agent,
        sensitivity,
        nonlocal_agents,
        consensus_shift_residual,
        threshold: LOCALITY_THRESHOLD,
    })
}
