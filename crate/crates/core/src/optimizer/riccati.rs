//! Descent direction from the linear-quadratic subproblem
//!
//! ```text
//! minimize   Σ_{t=0..T} aₜᵀzₜ + bₜᵀvₜ + ½zₜᵀQₙzₜ + ½vₜᵀRₙvₜ
//! subject to z_{t+1} = Ãₜzₜ + B̃ₜvₜ,  z₀ = 0
//! ```
//!
//! solved by a backward Riccati sweep and a forward rollout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DescentProblem {
    /// `Ãₜ` for `t = 0..=T` (the last entry is never used).
    pub a_tilde: Vec<DMatrix<f64>>,
    pub b_tilde: Vec<DMatrix<f64>>,
    /// `aₜ = ∇ₓJ`
    pub grad_x: Vec<DVector<f64>>,
    /// `bₜ = ∇ᵤJ`
    pub grad_u: Vec<DVector<f64>>,
    pub q_n: DMatrix<f64>,
    pub r_n: DMatrix<f64>,
}

impl DescentProblem {
    pub fn new(
        a_tilde: Vec<DMatrix<f64>>,
        b_tilde: Vec<DMatrix<f64>>,
        grad_x: Vec<DVector<f64>>,
        grad_u: Vec<DVector<f64>>,
        q_n: DMatrix<f64>,
        r_n: DMatrix<f64>,
    ) -> Result<Self> {
        let len = a_tilde.len();
        if len == 0 || b_tilde.len() != len || grad_x.len() != len || grad_u.len() != len {
            return Err(Error::arg("descent problem sequences must be nonempty and of equal length"));
        }
        check_weights(&q_n, &r_n)?;
        Ok(Self {
            a_tilde,
            b_tilde,
            grad_x,
            grad_u,
            q_n,
            r_n,
        })
    }

    pub fn horizon(&self) -> usize {
        self.a_tilde.len() - 1
    }
}

/// `Qₙ` symmetric PSD, `Rₙ` symmetric PD.
pub fn check_weights(q_n: &DMatrix<f64>, r_n: &DMatrix<f64>) -> Result<()> {
    let sym = |m: &DMatrix<f64>| m.is_square() && (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
    if !sym(q_n) || SymmetricEigen::new(q_n.clone()).eigenvalues.min() < -1e-12 {
        return Err(Error::WeightConfig("Q_n must be symmetric positive semi-definite".into()));
    }
    if !sym(r_n) || r_n.clone().cholesky().is_none() {
        return Err(Error::WeightConfig("R_n must be symmetric positive definite".into()));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub p: Vec<DMatrix<f64>>,
    pub r: Vec<DVector<f64>>,
    /// Feedback gains `𝒦ₜ`; `𝒦_T` is zero.
    pub gains: Vec<DMatrix<f64>>,
    /// `Γₜ = Rₙ + B̃ₜᵀP_{t+1}B̃ₜ`; `Γ_T = Rₙ`.
    pub gamma: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentDirection {
    pub z: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
}

fn chol_gamma(gamma: &DMatrix<f64>, t: usize) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    gamma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::WeightConfig(format!("Gamma_{t} is not positive definite")))
}

/// Backward sweep
///
/// ```text
/// P_T = Qₙ,  r_T = a_T
/// Γₜ = Rₙ + B̃ᵀP_{t+1}B̃
/// 𝒦ₜ = Γₜ⁻¹B̃ᵀP_{t+1}Ã
/// Pₜ = Qₙ + ÃᵀP_{t+1}Ã − 𝒦ₜᵀΓₜ𝒦ₜ
/// rₜ = aₜ + (Ãᵀ − 𝒦ₜᵀB̃ᵀ)r_{t+1} − 𝒦ₜᵀbₜ
/// ```
pub fn solve_riccati(dp: &DescentProblem) -> Result<RiccatiSolution> {
    let horizon = dp.horizon();
    let n = dp.q_n.nrows();
    let m = dp.r_n.nrows();
    let mut p = vec![DMatrix::zeros(n, n); horizon + 1];
    let mut r = vec![DVector::zeros(n); horizon + 1];
    let mut gains = vec![DMatrix::zeros(m, n); horizon + 1];
    let mut gamma = vec![dp.r_n.clone(); horizon + 1];

    p[horizon] = dp.q_n.clone();
    r[horizon] = dp.grad_x[horizon].clone();
    for t in (0..horizon).rev() {
        let a = &dp.a_tilde[t];
        let b = &dp.b_tilde[t];
        let p_next = &p[t + 1];
        let bt_p = b.transpose() * p_next;
        let g = &dp.r_n + &bt_p * b;
        let chol = chol_gamma(&g, t)?;
        let k = chol.solve(&(&bt_p * a));
        let mut p_t = &dp.q_n + a.transpose() * p_next * a - k.transpose() * &g * &k;
        p_t = (&p_t + p_t.transpose()) * 0.5;
        let closed = a.transpose() - k.transpose() * b.transpose();
        r[t] = &dp.grad_x[t] + closed * &r[t + 1] - k.transpose() * &dp.grad_u[t];
        p[t] = p_t;
        gains[t] = k;
        gamma[t] = g;
    }
    Ok(RiccatiSolution { p, r, gains, gamma })
}

/// Gains only; the affine terms do not enter.
pub fn lqr_gains(
    a_tilde: &[DMatrix<f64>],
    b_tilde: &[DMatrix<f64>],
    q_n: &DMatrix<f64>,
    r_n: &DMatrix<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    let horizon = a_tilde.len().saturating_sub(1);
    let n = q_n.nrows();
    let m = r_n.nrows();
    let mut gains = vec![DMatrix::zeros(m, n); horizon + 1];
    let mut p_next = q_n.clone();
    for t in (0..horizon).rev() {
        let (a, b) = (&a_tilde[t], &b_tilde[t]);
        let bt_p = b.transpose() * &p_next;
        let g = r_n + &bt_p * b;
        let k = chol_gamma(&g, t)?.solve(&(&bt_p * a));
        let p_t = q_n + a.transpose() * &p_next * a - k.transpose() * &g * &k;
        p_next = (&p_t + p_t.transpose()) * 0.5;
        gains[t] = k;
    }
    Ok(gains)
}

/// Solves the subproblem: backward sweep, then
/// `vₜ = −𝒦ₜzₜ − Γₜ⁻¹(B̃ₜᵀr_{t+1} + bₜ)`, `z_{t+1} = Ãₜzₜ + B̃ₜvₜ`, and at the
/// last knot `v_T = −Rₙ⁻¹b_T`.
pub fn descent_direction(dp: &DescentProblem) -> Result<(DescentDirection, RiccatiSolution)> {
    let sol = solve_riccati(dp)?;
    let horizon = dp.horizon();
    let n = dp.q_n.nrows();
    let mut z = Vec::with_capacity(horizon + 1);
    let mut v = Vec::with_capacity(horizon + 1);
    z.push(DVector::zeros(n));
    for t in 0..horizon {
        let b = &dp.b_tilde[t];
        let rhs = b.transpose() * &sol.r[t + 1] + &dp.grad_u[t];
        let ff = chol_gamma(&sol.gamma[t], t)?.solve(&rhs);
        let vt = -(&sol.gains[t] * &z[t]) - ff;
        let zn = &dp.a_tilde[t] * &z[t] + b * &vt;
        v.push(vt);
        z.push(zn);
    }
    let v_last = -chol_gamma(&dp.r_n, horizon)?.solve(&dp.grad_u[horizon]);
    v.push(v_last);
    Ok((DescentDirection { z, v }, sol))
}
