//! Dense matrix-function kernels: the matrix exponential and the Gramian-type
//! integrals `Psi_i(t) = int_0^t e^{s Lambda} S_i e^{s Lambda^T} ds` behind
//! every closed form in the solvers.
//!
//! The primary Gramian evaluator exponentiates the 2n x 2n block matrix
//! `[[-Lambda, S], [0, Lambda^T]]` and reads off the relevant block product;
//! large upper limits are handled by interval doubling, which keeps the
//! intermediate exponentials well conditioned. An adaptive-Simpson quadrature
//! of the integrand is kept alongside as a structurally independent oracle.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Scaling-and-squaring thresholds for the [m/m] diagonal Pade approximants.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Computes `e^M` by scaling and squaring with diagonal Pade approximants,
/// order chosen from the 1-norm of the input.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquareMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    let norm = one_norm(m);
    if norm <= THETA_3 {
        return pade_low(m, &PADE_3);
    }
    if norm <= THETA_5 {
        return pade_low(m, &PADE_5);
    }
    if norm <= THETA_7 {
        return pade_low(m, &PADE_7);
    }
    if norm <= THETA_9 {
        return pade_low(m, &PADE_9);
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as u32;
    let scaled = m / 2f64.powi(s as i32);
    let mut x = pade_13(&scaled)?;
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Diagonal Pade approximant of order 3/5/7/9: even powers feed both the
/// numerator and denominator, then one linear solve.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::identity(n, n);
    let a2 = a * a;
    let mut even_pows = vec![eye.clone(), a2.clone()];
    while even_pows.len() < b.len() / 2 {
        let next = even_pows.last().unwrap() * &a2;
        even_pows.push(next);
    }
    let mut u_inner = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for (k, pow) in even_pows.iter().enumerate() {
        u_inner += pow * b[2 * k + 1];
        v += pow * b[2 * k];
    }
    let u = a * u_inner;
    pade_solve(u, v)
}

fn pade_13(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::identity(n, n);
    let b = &PADE_13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_high = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u_low = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &eye * b[1];
    let u = a * (u_high + u_low);
    let v_high = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_high + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &eye * b[0];
    pade_solve(u, v)
}

fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let denom = &v - &u;
    let numer = v + u;
    denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Numerical("Pade denominator is singular".into()))
}

/// How a Gramian value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramianMethod {
    BlockExponential,
    Quadrature,
}

/// A symmetric PSD Gramian value together with its provenance.
#[derive(Debug, Clone)]
pub struct GramianResult {
    pub value: DMatrix<f64>,
    pub method: GramianMethod,
    pub t: f64,
}

fn check_gramian_inputs(dynamics: &DMatrix<f64>, weight: &DMatrix<f64>, t: f64) -> Result<usize> {
    if dynamics.nrows() != dynamics.ncols() {
        return Err(Error::NonSquareMatrix {
            rows: dynamics.nrows(),
            cols: dynamics.ncols(),
        });
    }
    let n = dynamics.nrows();
    if weight.nrows() != n || weight.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weight.nrows(),
        });
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    let scale = weight.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (weight[(i, j)] - weight[(j, i)]).abs() > 1e-12 * (1.0 + scale) {
                return Err(Error::NonSymmetric);
            }
        }
    }
    Ok(n)
}

/// `int_0^t e^{s Lambda} S e^{s Lambda^T} ds` via the block-exponential
/// identity. The base interval is chosen so that `||Lambda|| * tau <= 1`,
/// then the Gramian is doubled up to `t` with
/// `G(2 tau) = G(tau) + Phi G(tau) Phi^T`, `Phi(2 tau) = Phi(tau)^2`.
pub fn gramian_integral(
    dynamics: &DMatrix<f64>,
    weight: &DMatrix<f64>,
    t: f64,
) -> Result<GramianResult> {
    let n = check_gramian_inputs(dynamics, weight, t)?;
    if t == 0.0 {
        return Ok(GramianResult {
            value: DMatrix::zeros(n, n),
            method: GramianMethod::BlockExponential,
            t,
        });
    }
    let doublings = (one_norm(dynamics) * t).log2().ceil().max(0.0) as u32;
    let tau = t / 2f64.powi(doublings as i32);

    // Van Loan block: e^{tau C} with C = [[-Lambda, S], [0, Lambda^T]] has
    // e^{tau Lambda^T} in the lower-right block and
    // int_0^tau e^{-Lambda (tau - s)} S e^{Lambda^T s} ds in the upper-right;
    // multiplying the latter by e^{tau Lambda} yields the Gramian over [0, tau].
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-dynamics * tau));
    block.view_mut((0, n), (n, n)).copy_from(&(weight * tau));
    block
        .view_mut((n, n), (n, n))
        .copy_from(&(dynamics.transpose() * tau));
    let exp_block = matrix_exponential(&block)?;
    let mut phi: DMatrix<f64> = exp_block.view((n, n), (n, n)).transpose();
    let mut gram = &phi * exp_block.view((0, n), (n, n));
    symmetrize(&mut gram);

    for _ in 0..doublings {
        gram = &gram + &phi * &gram * phi.transpose();
        symmetrize(&mut gram);
        phi = &phi * &phi;
    }
    Ok(GramianResult {
        value: gram,
        method: GramianMethod::BlockExponential,
        t,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let sym = (&*m + m.transpose()) * 0.5;
    m.copy_from(&sym);
}

/// Independent oracle for [`gramian_integral`]: adaptive Simpson quadrature of
/// the matrix integrand with entrywise error control. `abs_tol` is the target
/// absolute tolerance; a floor of a few ulps of the integrand scale keeps the
/// recursion from chasing rounding noise on large-norm instances.
pub fn gramian_quadrature(
    dynamics: &DMatrix<f64>,
    weight: &DMatrix<f64>,
    t: f64,
    abs_tol: f64,
) -> Result<GramianResult> {
    let n = check_gramian_inputs(dynamics, weight, t)?;
    if t == 0.0 {
        return Ok(GramianResult {
            value: DMatrix::zeros(n, n),
            method: GramianMethod::Quadrature,
            t,
        });
    }
    let integrand = |s: f64| -> Result<DMatrix<f64>> {
        let e = matrix_exponential(&(dynamics * s))?;
        Ok(&e * weight * e.transpose())
    };
    let f_lo = integrand(0.0)?;
    let f_mid = integrand(0.5 * t)?;
    let f_hi = integrand(t)?;
    let whole = simpson_slice(&f_lo, &f_mid, &f_hi, t);
    let scale = whole.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = abs_tol.max(16.0 * f64::EPSILON * scale);
    let value = adaptive_simpson(&integrand, 0.0, t, &f_lo, &f_mid, &f_hi, &whole, tol, 30)?;
    Ok(GramianResult {
        value,
        method: GramianMethod::Quadrature,
        t,
    })
}

fn simpson_slice(
    f_lo: &DMatrix<f64>,
    f_mid: &DMatrix<f64>,
    f_hi: &DMatrix<f64>,
    width: f64,
) -> DMatrix<f64> {
    (f_lo + f_mid * 4.0 + f_hi) * (width / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F>(
    integrand: &F,
    a: f64,
    b: f64,
    f_a: &DMatrix<f64>,
    f_mid: &DMatrix<f64>,
    f_b: &DMatrix<f64>,
    whole: &DMatrix<f64>,
    tol: f64,
    depth: u32,
) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> Result<DMatrix<f64>>,
{
    let mid = 0.5 * (a + b);
    let f_lq = integrand(0.5 * (a + mid))?;
    let f_rq = integrand(0.5 * (mid + b))?;
    let left = simpson_slice(f_a, &f_lq, f_mid, mid - a);
    let right = simpson_slice(f_mid, &f_rq, f_b, b - mid);
    let refined = &left + &right;
    let err = (&refined - whole)
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if depth == 0 || err <= 15.0 * tol {
        // Richardson extrapolation of the two Simpson levels.
        return Ok(&refined + (refined.clone() - whole) / 15.0);
    }
    let l = adaptive_simpson(
        integrand,
        a,
        mid,
        f_a,
        &f_lq,
        f_mid,
        &left,
        0.5 * tol,
        depth - 1,
    )?;
    let r = adaptive_simpson(
        integrand,
        mid,
        b,
        f_mid,
        &f_rq,
        f_b,
        &right,
        0.5 * tol,
        depth - 1,
    )?;
    Ok(l + r)
}

/// Horizontal stack `[Psi_1(t), ..., Psi_n(t)]` (n x n^2); the per-agent
/// Gramians are independent and evaluated in parallel.
pub fn stacked_psi(
    dynamics: &DMatrix<f64>,
    weights: &[DMatrix<f64>],
    t: f64,
) -> Result<DMatrix<f64>> {
    let n = dynamics.nrows();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: weights.len(),
        });
    }
    let blocks: Vec<DMatrix<f64>> = weights
        .par_iter()
        .map(|s| gramian_integral(dynamics, s, t).map(|g| g.value))
        .collect::<Result<_>>()?;
    let mut stacked = DMatrix::zeros(n, n * n);
    for (i, block) in blocks.iter().enumerate() {
        stacked.view_mut((0, i * n), (n, n)).copy_from(block);
    }
    Ok(stacked)
}

/// Evaluates `y_k = sum_j Psi_j(t_k) e^{(t_f - t_k) Lambda^T} v_j` on a
/// uniform grid, where `Psi_j(t) = int_0^t e^{s Lambda} S_j e^{s Lambda^T} ds`.
/// This is the costate response that closes the solved trajectories:
/// `x(t_k) = e^{t_k Lambda} x_0 - y_k`.
///
/// Splitting each prefix into grid slices and merging the back-propagation
/// into the slice costates turns the evaluation into the exact convolution
/// `y_k = sum_{j<k} e^{t_j Lambda} w_{k-j}` with
/// `w_m = sum_j G_{delta,j} e^{(t_f - t_m) Lambda^T} v_j`; every factor stays
/// bounded for generator-type `Lambda`, so no growing exponentials meet.
pub(crate) fn gramian_costate_action_on_grid(
    dynamics: &DMatrix<f64>,
    terms: &[(DMatrix<f64>, nalgebra::DVector<f64>)],
    times: &[f64],
    horizon: f64,
) -> Result<Vec<nalgebra::DVector<f64>>> {
    let n = dynamics.nrows();
    if times.len() < 2 {
        return Ok(times.iter().map(|_| nalgebra::DVector::zeros(n)).collect());
    }
    let k_max = times.len();
    let delta = (times[k_max - 1] - times[0]) / (k_max - 1) as f64;
    let slices: Vec<DMatrix<f64>> = terms
        .par_iter()
        .map(|(s, _)| gramian_integral(dynamics, s, delta).map(|g| g.value))
        .collect::<Result<_>>()?;

    let transposed = dynamics.transpose();
    let lagged: Vec<nalgebra::DVector<f64>> = times
        .par_iter()
        .map(|&t_m| -> Result<nalgebra::DVector<f64>> {
            let back = matrix_exponential(&(&transposed * (horizon - t_m)))?;
            let mut w = nalgebra::DVector::zeros(n);
            for (slice, (_, v)) in slices.iter().zip(terms) {
                w += slice * (&back * v);
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    let forward: Vec<DMatrix<f64>> = times[..k_max - 1]
        .par_iter()
        .map(|&t_j| matrix_exponential(&(dynamics * t_j)))
        .collect::<Result<_>>()?;

    (0..k_max)
        .into_par_iter()
        .map(|k| -> Result<nalgebra::DVector<f64>> {
            let mut y = nalgebra::DVector::zeros(n);
            for j in 0..k {
                y += &forward[j] * &lagged[k - j];
            }
            Ok(y)
        })
        .collect()
}
