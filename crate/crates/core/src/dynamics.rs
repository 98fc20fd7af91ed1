//! Forward simulation of the discrete and continuous opinion dynamics under
//! arbitrary controls, and the quadratic cost functionals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{self, SocialGraph};
use crate::matrix_functions::matrix_exponential;

/// A fully validated game instance: graph, horizon, per-agent control
/// weights `r_i > 0`, input gains `b_i != 0`, initial opinions, and the
/// size of the output sampling grid.
#[derive(Debug, Clone)]
pub struct GameConfig {
    graph: SocialGraph,
    t_f: f64,
    r: DVector<f64>,
    b: DVector<f64>,
    x0: DVector<f64>,
    samples: usize,
}

impl GameConfig {
    pub fn new(
        graph: SocialGraph,
        t_f: f64,
        r: Vec<f64>,
        b: Vec<f64>,
        x0: Vec<f64>,
        samples: usize,
    ) -> Result<Self> {
        let n = graph.agent_count();
        if !(t_f.is_finite() && t_f > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon t_f must be positive, got {t_f}"
            )));
        }
        if r.len() != n {
            return Err(Error::InvalidConfig(format!(
                "r has {} entries for {n} agents",
                r.len()
            )));
        }
        if b.len() != n {
            return Err(Error::InvalidConfig(format!(
                "b has {} entries for {n} agents",
                b.len()
            )));
        }
        if x0.len() != n {
            return Err(Error::InvalidConfig(format!(
                "x0 has {} entries for {n} agents",
                x0.len()
            )));
        }
        if let Some(i) = r.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "r[{i}] = {} is not positive",
                r[i]
            )));
        }
        if let Some(i) = b.iter().position(|v| !(v.is_finite() && *v != 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "b[{i}] = {} must be nonzero",
                b[i]
            )));
        }
        if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("x0[{i}] is not finite")));
        }
        if samples < 2 {
            return Err(Error::InvalidConfig(format!(
                "sampling grid needs at least 2 points, got {samples}"
            )));
        }
        Ok(GameConfig {
            graph,
            t_f,
            r: DVector::from_vec(r),
            b: DVector::from_vec(b),
            x0: DVector::from_vec(x0),
            samples,
        })
    }

    pub fn graph(&self) -> &SocialGraph {
        &self.graph
    }

    pub fn agent_count(&self) -> usize {
        self.graph.agent_count()
    }

    pub fn horizon(&self) -> f64 {
        self.t_f
    }

    pub fn control_weights(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn input_gains(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn initial_opinions(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Uniform output grid over `[0, t_f]`; endpoints are exact.
    pub fn time_grid(&self) -> Vec<f64> {
        let m = (self.samples - 1) as f64;
        (0..self.samples).map(|k| self.t_f * k as f64 / m).collect()
    }

    /// `S_i = (1/r_i) B_i B_i^T`, the rank-one control weight of agent `i`.
    pub fn control_gramian_weight(&self, i: usize) -> Result<DMatrix<f64>> {
        let n = self.agent_count();
        if i >= n {
            return Err(Error::AgentOutOfRange { index: i, n });
        }
        let mut s = DMatrix::zeros(n, n);
        s[(i, i)] = self.b[i] * self.b[i] / self.r[i];
        Ok(s)
    }
}

/// Where a trajectory's samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Integrated,
    Discrete,
}

/// Sampled opinions (and optionally controls) on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub opinions: Vec<DVector<f64>>,
    pub controls: Option<Vec<DVector<f64>>>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.opinions.last().expect("trajectory is never empty")
    }

    pub fn initial_spread(&self) -> f64 {
        graph::spread(&self.opinions[0])
    }

    pub fn final_spread(&self) -> f64 {
        graph::spread(self.final_state())
    }

    /// Sup-norm distance between the opinion samples of two trajectories on
    /// the same grid.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.opinions
            .iter()
            .zip(&other.opinions)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

/// One synchronous step of the discrete opinion update: every agent adopts
/// the average opinion of her graph neighbors (self excluded).
pub fn discrete_hk_step(g: &SocialGraph, x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = g.agent_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mut next = DVector::zeros(n);
    for i in 0..n {
        let nbrs = g.neighbors(i)?;
        next[i] = nbrs.iter().map(|&j| x[j]).sum::<f64>() / nbrs.len() as f64;
    }
    Ok(next)
}

/// Integrates `x' = Lambda x + B u(t)` with classical RK4 on a fixed grid
/// refined `oversample`-fold between output samples. Controls are recorded at
/// the output grid nodes and the result is tagged `Integrated`.
pub fn simulate_with_oversample<F>(
    cfg: &GameConfig,
    control: F,
    oversample: usize,
) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<DVector<f64>>,
{
    assert!(oversample >= 1, "oversample factor must be at least 1");
    let lambda = graph::dynamics_matrix(cfg.graph());
    let b = cfg.input_gains();
    let times = cfg.time_grid();
    let n = cfg.agent_count();

    let eval = |t: f64| -> Result<DVector<f64>> {
        let u = control(t)?;
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteControl { t });
        }
        Ok(u)
    };
    let forcing = |u: &DVector<f64>| -> DVector<f64> { b.component_mul(u) };

    let mut x = cfg.initial_opinions().clone();
    let mut opinions = Vec::with_capacity(times.len());
    let mut controls = Vec::with_capacity(times.len());
    opinions.push(x.clone());
    controls.push(eval(times[0])?);

    for k in 0..times.len() - 1 {
        let h = (times[k + 1] - times[k]) / oversample as f64;
        for step in 0..oversample {
            let t = times[k] + step as f64 * h;
            let u0 = forcing(&eval(t)?);
            let um = forcing(&eval(t + 0.5 * h)?);
            let u1 = forcing(&eval(t + h)?);
            let k1 = &lambda * &x + &u0;
            let k2 = &lambda * (&x + &k1 * (0.5 * h)) + &um;
            let k3 = &lambda * (&x + &k2 * (0.5 * h)) + &um;
            let k4 = &lambda * (&x + &k3 * h) + &u1;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t: t + h });
            }
        }
        opinions.push(x.clone());
        controls.push(eval(times[k + 1])?);
    }
    Ok(Trajectory {
        times,
        opinions,
        controls: Some(controls),
        provenance: Provenance::Integrated,
    })
}

/// [`simulate_with_oversample`] at the default 10x refinement.
pub fn simulate<F>(cfg: &GameConfig, control: F) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<DVector<f64>>,
{
    simulate_with_oversample(cfg, control, 10)
}

/// Samples the uncontrolled flow `x(t) = e^{t Lambda} x_0` on the output grid.
pub fn uncontrolled_closed_form(cfg: &GameConfig) -> Result<Trajectory> {
    let lambda = graph::dynamics_matrix(cfg.graph());
    let times = cfg.time_grid();
    let n = cfg.agent_count();
    let mut opinions = Vec::with_capacity(times.len());
    for &t in &times {
        let e = matrix_exponential(&(&lambda * t))?;
        opinions.push(&e * cfg.initial_opinions());
    }
    let controls = Some(times.iter().map(|_| DVector::zeros(n)).collect());
    Ok(Trajectory {
        times,
        opinions,
        controls,
        provenance: Provenance::ClosedForm,
    })
}

fn simpson_integral(times: &[f64], values: &[f64]) -> Result<f64> {
    let m = times.len();
    if m < 3 || m.is_multiple_of(2) {
        return Err(Error::GridTooCoarse { points: m });
    }
    let h = (times[m - 1] - times[0]) / (m - 1) as f64;
    let mut acc = values[0] + values[m - 1];
    for (k, v) in values.iter().enumerate().take(m - 1).skip(1) {
        acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(acc * h / 3.0)
}

/// Agent `i`'s realized cost on a sampled trajectory: the neighbor-averaged
/// terminal disagreement plus the Simpson-quadratured control effort
/// `int r_i u_i^2`.
pub fn evaluate_individual_cost(cfg: &GameConfig, i: usize, traj: &Trajectory) -> Result<f64> {
    let n = cfg.agent_count();
    if i >= n {
        return Err(Error::AgentOutOfRange { index: i, n });
    }
    let controls = traj.controls.as_ref().ok_or(Error::MissingControls)?;
    let x_f = traj.final_state();
    let nbrs = cfg.graph().neighbors(i)?;
    let terminal = nbrs.iter().map(|&j| (x_f[i] - x_f[j]).powi(2)).sum::<f64>() / nbrs.len() as f64;
    let effort: Vec<f64> = controls
        .iter()
        .map(|u| cfg.control_weights()[i] * u[i] * u[i])
        .collect();
    Ok(terminal + simpson_integral(&traj.times, &effort)?)
}

/// The aggregate cost `x(t_f)^T L x(t_f) + int u^T R u`, with `L` the global
/// Laplacian and `R = diag(r)`.
pub fn evaluate_social_cost(cfg: &GameConfig, traj: &Trajectory) -> Result<f64> {
    let controls = traj.controls.as_ref().ok_or(Error::MissingControls)?;
    let l = graph::global_laplacian(cfg.graph());
    let x_f = traj.final_state();
    let terminal = (x_f.transpose() * &l * x_f)[(0, 0)];
    let r = cfg.control_weights();
    let effort: Vec<f64> = controls
        .iter()
        .map(|u| u.iter().zip(r.iter()).map(|(ui, ri)| ri * ui * ui).sum())
        .collect();
    Ok(terminal + simpson_integral(&traj.times, &effort)?)
}

/// Common surface of the Nash and social solutions: enough to re-integrate
/// the dynamics under the solution's own controls and compare.
pub trait ControlledSolution {
    fn config(&self) -> &GameConfig;
    fn trajectory(&self) -> &Trajectory;
    /// The full control vector at an arbitrary `t` in `[0, t_f]`.
    fn control_at(&self, t: f64) -> Result<DVector<f64>>;
    fn kind(&self) -> &'static str;
}
