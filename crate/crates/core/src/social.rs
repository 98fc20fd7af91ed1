//! Centralized social optimum: the single control vector minimizing the
//! aggregate cost `x(t_f)^T L x(t_f) + int u^T R u`, with boundary matrix
//! `H_hat(t_f) = I + Psi_hat(t_f) L`. Mirrors the equilibrium solver's
//! half-scaled stationarity convention; optimality against the unscaled cost
//! is checked by perturbation in [`crate::verify`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{
    evaluate_social_cost, ControlledSolution, GameConfig, Provenance, Trajectory,
};
use crate::error::{Error, Result};
use crate::graph;
use crate::matrix_functions::{
    gramian_costate_action_on_grid, gramian_integral, matrix_exponential,
};
use crate::nash::{self, SINGULARITY_CONDITION_LIMIT};

/// The solved centralized problem: boundary matrix `H_hat` and conditioning,
/// terminal state, the sampled optimal trajectory, and the realized cost.
#[derive(Debug, Clone)]
pub struct SocialSolution {
    pub config: GameConfig,
    pub boundary_matrix: DMatrix<f64>,
    pub condition: f64,
    pub terminal_state: DVector<f64>,
    pub trajectory: Trajectory,
    pub social_cost: f64,
    /// `lambda(t_f) = L x(t_f)`, the stacked terminal costate.
    pub terminal_costate: DVector<f64>,
    dynamics: Arc<DMatrix<f64>>,
    /// Diagonal of `R^-1 B^T`.
    control_gains: DVector<f64>,
}

/// `BR^-1B^T = diag(b_i^2 / r_i)`, the collective control weight; it equals
/// the sum of the per-agent rank-one weights `S_i`.
fn collective_weight(cfg: &GameConfig) -> DMatrix<f64> {
    let n = cfg.agent_count();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let b = cfg.input_gains()[i];
        s[(i, i)] = b * b / cfg.control_weights()[i];
    }
    s
}

/// Solves the centralized problem: `H_hat = I + Psi_hat(t_f) L`, the terminal
/// state from the boundary system, the optimal trajectory
/// `x(t) = e^{t Lambda} x_0 - Psi_hat(t) lambda(t)`, and the control
/// `u(t) = -R^-1 B^T e^{(t_f - t) Lambda^T} L x(t_f)` sampled on the grid.
pub fn solve_social(cfg: &GameConfig) -> Result<SocialSolution> {
    let n = cfg.agent_count();
    let t_f = cfg.horizon();
    let lambda = Arc::new(graph::dynamics_matrix(cfg.graph()));
    let l = graph::global_laplacian(cfg.graph());
    let s_hat = collective_weight(cfg);

    let psi_hat = gramian_integral(&lambda, &s_hat, t_f)?.value;
    let boundary = DMatrix::identity(n, n) + &psi_hat * &l;
    let condition = {
        let sv = boundary.clone().singular_values();
        let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    };
    if !condition.is_finite() || condition > SINGULARITY_CONDITION_LIMIT {
        return Err(Error::SingularBoundaryMatrix { condition });
    }

    let propagated = matrix_exponential(&(&*lambda * t_f))? * cfg.initial_opinions();
    let terminal_state = boundary
        .clone()
        .lu()
        .solve(&propagated)
        .ok_or(Error::SingularBoundaryMatrix { condition })?;
    let terminal_costate = &l * &terminal_state;

    let control_gains = DVector::from_iterator(
        n,
        cfg.input_gains()
            .iter()
            .zip(cfg.control_weights().iter())
            .map(|(b, r)| -b / r),
    );

    // Optimal trajectory by variation of constants: the Gramian acts on the
    // current costate e^{(t_f - t) Lambda^T} L x(t_f), not the terminal one
    // (the two agree only at t = t_f).
    let times = cfg.time_grid();
    let actions =
        gramian_costate_action_on_grid(&lambda, &[(s_hat, terminal_costate.clone())], &times, t_f)?;
    let mut opinions = Vec::with_capacity(times.len());
    let mut controls = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let free_flow = matrix_exponential(&(&*lambda * t))? * cfg.initial_opinions();
        opinions.push(free_flow - &actions[k]);
        controls.push(control_vector(
            &lambda,
            &terminal_costate,
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
    let social_cost = evaluate_social_cost(cfg, &trajectory)?;

    Ok(SocialSolution {
        config: cfg.clone(),
        boundary_matrix: boundary,
        condition,
        terminal_state,
        trajectory,
        social_cost,
        terminal_costate,
        dynamics: lambda,
        control_gains,
    })
}

fn control_vector(
    dynamics: &DMatrix<f64>,
    terminal_costate: &DVector<f64>,
    gains: &DVector<f64>,
    horizon: f64,
    t: f64,
) -> Result<DVector<f64>> {
    let e = matrix_exponential(&(dynamics.transpose() * (horizon - t)))?;
    Ok(gains.component_mul(&(e * terminal_costate)))
}

impl SocialSolution {
    /// The stacked costate `lambda(t) = e^{(t_f - t) Lambda^T} L x(t_f)`.
    pub fn costate(&self, t: f64) -> Result<DVector<f64>> {
        let t_f = self.config.horizon();
        let slack = 1e-9 * (1.0 + t_f);
        if !t.is_finite() || t < -slack || t > t_f + slack {
            return Err(Error::OutsideHorizon { t, t_f });
        }
        let t = t.clamp(0.0, t_f);
        let e = matrix_exponential(&(self.dynamics.transpose() * (t_f - t)))?;
        Ok(e * &self.terminal_costate)
    }
}

impl ControlledSolution for SocialSolution {
    fn config(&self) -> &GameConfig {
        &self.config
    }

    fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    fn control_at(&self, t: f64) -> Result<DVector<f64>> {
        let t_f = self.config.horizon();
        let slack = 1e-9 * (1.0 + t_f);
        if !t.is_finite() || t < -slack || t > t_f + slack {
            return Err(Error::OutsideHorizon { t, t_f });
        }
        control_vector(
            &self.dynamics,
            &self.terminal_costate,
            &self.control_gains,
            t_f,
            t.clamp(0.0, t_f),
        )
    }

    fn kind(&self) -> &'static str {
        "social"
    }
}

/// Evaluates the aggregate cost on the social-optimal trajectory and on the
/// equilibrium trajectory (with equilibrium controls); the first is never
/// larger up to quadrature noise, and the gap measures the equilibrium's
/// inefficiency.
pub fn social_vs_nash_gap(cfg: &GameConfig) -> Result<(f64, f64)> {
    let social = solve_social(cfg)?;
    let equilibrium = nash::solve(cfg)?;
    let at_nash = evaluate_social_cost(cfg, &equilibrium.trajectory)?;
    Ok((social.social_cost, at_nash))
}
