//! Closed-form open-loop Nash equilibrium of the opinion formation game:
//! equilibrium controls, the equilibrium trajectory, costates, and the
//! boundary matrix `H(t_f) = I + Psi(t_f) Delta` whose invertibility is the
//! existence condition.
//!
//! The stationarity conditions are solved in the half-scaled convention
//! (`u_i = -(1/r_i) B_i^T lambda_i`, `lambda_i(t_f) = (1/|N_i|) L_i x(t_f)`),
//! which leaves the equilibrium of the unscaled costs unchanged; the
//! deviation tests in [`crate::verify`] check optimality against the unscaled
//! costs directly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::{
    evaluate_individual_cost, ControlledSolution, GameConfig, Provenance, Trajectory,
};
use crate::error::{Error, Result};
use crate::graph::{self, SocialGraph};
use crate::matrix_functions::{
    gramian_costate_action_on_grid, gramian_integral, matrix_exponential,
};

/// Condition-number threshold beyond which the boundary matrix is treated as
/// numerically singular and no unique equilibrium is reported.
pub const SINGULARITY_CONDITION_LIMIT: f64 = 1e12;

/// The closed-form equilibrium control of one agent, evaluable at any
/// `t` in `[0, t_f]`:
/// `u_i(t) = -(b_i / r_i) e_i^T e^{(t_f - t) Lambda^T} lambda_i(t_f)` with the
/// constant terminal costate precomputed.
#[derive(Debug, Clone)]
pub struct OpenLoopPolicy {
    agent: usize,
    horizon: f64,
    gain: f64,
    terminal_costate: DVector<f64>,
    dynamics: Arc<DMatrix<f64>>,
}

impl OpenLoopPolicy {
    pub fn agent(&self) -> usize {
        self.agent
    }

    /// Evaluates the equilibrium control at `t`; a fresh matrix exponential
    /// per call keeps the value exact at arbitrary times.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let t = clamp_to_horizon(t, self.horizon)?;
        let e = matrix_exponential(&(self.dynamics.transpose() * (self.horizon - t)))?;
        Ok(self.gain * (&e * &self.terminal_costate)[self.agent])
    }
}

/// The solved game: boundary matrix and its conditioning, terminal state,
/// per-agent policies, the sampled closed-form trajectory, and realized costs.
#[derive(Debug, Clone)]
pub struct NashSolution {
    pub config: GameConfig,
    pub boundary_matrix: DMatrix<f64>,
    pub condition: f64,
    pub terminal_state: DVector<f64>,
    pub policies: Vec<OpenLoopPolicy>,
    pub trajectory: Trajectory,
    pub costs: Vec<f64>,
    /// Column `i` holds `lambda_i(t_f) = (1/|N_i|) L_i x(t_f)`.
    pub terminal_costates: DMatrix<f64>,
    dynamics: Arc<DMatrix<f64>>,
    control_gains: DVector<f64>,
}

impl NashSolution {
    /// The dynamics matrix `Lambda` the solution was built from.
    pub fn dynamics_matrix(&self) -> &DMatrix<f64> {
        &self.dynamics
    }
}

fn clamp_to_horizon(t: f64, horizon: f64) -> Result<f64> {
    let slack = 1e-9 * (1.0 + horizon);
    if !t.is_finite() || t < -slack || t > horizon + slack {
        return Err(Error::OutsideHorizon { t, t_f: horizon });
    }
    Ok(t.clamp(0.0, horizon))
}

/// The `n^2 x n` vertical stack `[(1/|N_1|) L_1; ...; (1/|N_n|) L_n]` mapping
/// a terminal state to the stacked terminal costates.
pub fn build_delta(g: &SocialGraph) -> DMatrix<f64> {
    let n = g.agent_count();
    let mut delta = DMatrix::zeros(n * n, n);
    for i in 0..n {
        let block = graph::agent_laplacian(g, i).expect("valid index")
            / g.degree(i).expect("valid index") as f64;
        delta.view_mut((i * n, 0), (n, n)).copy_from(&block);
    }
    delta
}

fn boundary_matrix_at(cfg: &GameConfig, t: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = cfg.agent_count();
    let lambda = graph::dynamics_matrix(cfg.graph());
    let summands: Vec<DMatrix<f64>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<DMatrix<f64>> {
            let s = cfg.control_gramian_weight(i)?;
            let psi = gramian_integral(&lambda, &s, t)?.value;
            let l = graph::agent_laplacian(cfg.graph(), i)?;
            Ok(psi * l / cfg.graph().degree(i)? as f64)
        })
        .collect::<Result<_>>()?;
    let mut h = DMatrix::identity(n, n);
    for m in &summands {
        h += m;
    }
    let condition = condition_number(&h);
    if !condition.is_finite() || condition > SINGULARITY_CONDITION_LIMIT {
        return Err(Error::SingularBoundaryMatrix { condition });
    }
    Ok((h, condition))
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Assembles `H(t_f) = I + sum_i Psi_i(t_f) (1/|N_i|) L_i` and reports its
/// condition number; configurations past the singularity limit are rejected
/// since no unique open-loop equilibrium exists there.
pub fn build_boundary_matrix(cfg: &GameConfig) -> Result<(DMatrix<f64>, f64)> {
    boundary_matrix_at(cfg, cfg.horizon())
}

/// Solves the game: terminal state from the boundary system, per-agent
/// policies, the closed-form trajectory sampled on the output grid, and the
/// realized (unscaled) costs.
pub fn solve(cfg: &GameConfig) -> Result<NashSolution> {
    let n = cfg.agent_count();
    let t_f = cfg.horizon();
    let lambda = Arc::new(graph::dynamics_matrix(cfg.graph()));
    let (boundary, condition) = build_boundary_matrix(cfg)?;

    // x(t_f) solves H x(t_f) = e^{t_f Lambda} x_0; never form the inverse.
    let propagated = matrix_exponential(&(&*lambda * t_f))? * cfg.initial_opinions();
    let terminal_state = boundary
        .clone()
        .lu()
        .solve(&propagated)
        .ok_or(Error::SingularBoundaryMatrix { condition })?;

    let mut terminal_costates = DMatrix::zeros(n, n);
    for i in 0..n {
        let l = graph::agent_laplacian(cfg.graph(), i)?;
        let costate = l * &terminal_state / cfg.graph().degree(i)? as f64;
        terminal_costates.set_column(i, &costate);
    }

    let control_gains = DVector::from_iterator(
        n,
        cfg.input_gains()
            .iter()
            .zip(cfg.control_weights().iter())
            .map(|(b, r)| -b / r),
    );

    let policies = (0..n)
        .map(|i| OpenLoopPolicy {
            agent: i,
            horizon: t_f,
            gain: control_gains[i],
            terminal_costate: terminal_costates.column(i).into(),
            dynamics: Arc::clone(&lambda),
        })
        .collect();

    // Equilibrium trajectory by variation of constants:
    // x(t) = e^{t Lambda} x_0 - sum_i Psi_i(t) lambda_i(t), with the current
    // costates lambda_i(t) = e^{(t_f - t) Lambda^T} lambda_i(t_f). The printed
    // compact form that applies Psi(t) to the terminal costates only agrees
    // at t = t_f; this one satisfies the dynamics at every t.
    let times = cfg.time_grid();
    let terms: Vec<(DMatrix<f64>, DVector<f64>)> = (0..n)
        .map(|i| -> Result<_> {
            Ok((
                cfg.control_gramian_weight(i)?,
                terminal_costates.column(i).into(),
            ))
        })
        .collect::<Result<_>>()?;
    let costate_actions = gramian_costate_action_on_grid(&lambda, &terms, &times, t_f)?;

    let mut opinions = Vec::with_capacity(times.len());
    let mut controls = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let free_flow = matrix_exponential(&(&*lambda * t))? * cfg.initial_opinions();
        opinions.push(free_flow - &costate_actions[k]);
        controls.push(control_vector(
            &lambda,
            &terminal_costates,
            &control_gains,
            t_f,
            t,
        )?);
    }
    let trajectory = Trajectory {
        times,
        opinions,
        controls: Some(controls),
        provenance: Provenance::ClosedForm,
    };

    let costs = (0..n)
        .map(|i| evaluate_individual_cost(cfg, i, &trajectory))
        .collect::<Result<Vec<_>>>()?;

    Ok(NashSolution {
        config: cfg.clone(),
        boundary_matrix: boundary,
        condition,
        terminal_state,
        policies,
        trajectory,
        costs,
        terminal_costates,
        dynamics: lambda,
        control_gains,
    })
}

fn control_vector(
    dynamics: &DMatrix<f64>,
    terminal_costates: &DMatrix<f64>,
    gains: &DVector<f64>,
    horizon: f64,
    t: f64,
) -> Result<DVector<f64>> {
    let e = matrix_exponential(&(dynamics.transpose() * (horizon - t)))?;
    let propagated = e * terminal_costates;
    Ok(DVector::from_iterator(
        gains.len(),
        gains
            .iter()
            .enumerate()
            .map(|(i, g)| g * propagated[(i, i)]),
    ))
}

/// The costate of agent `i` at time `t`:
/// `lambda_i(t) = e^{(t_f - t) Lambda^T} lambda_i(t_f)`.
pub fn costate(sol: &NashSolution, i: usize, t: f64) -> Result<DVector<f64>> {
    let n = sol.config.agent_count();
    if i >= n {
        return Err(Error::AgentOutOfRange { index: i, n });
    }
    let t = clamp_to_horizon(t, sol.config.horizon())?;
    let e = matrix_exponential(&(sol.dynamics.transpose() * (sol.config.horizon() - t)))?;
    Ok(e * DVector::from(sol.terminal_costates.column(i)))
}

impl ControlledSolution for NashSolution {
    fn config(&self) -> &GameConfig {
        &self.config
    }

    fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    fn control_at(&self, t: f64) -> Result<DVector<f64>> {
        let t = clamp_to_horizon(t, self.config.horizon())?;
        control_vector(
            &self.dynamics,
            &self.terminal_costates,
            &self.control_gains,
            self.config.horizon(),
            t,
        )
    }

    fn kind(&self) -> &'static str {
        "nash"
    }
}
