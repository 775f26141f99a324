//! Riccati synthesis and feasibility certification for the sign-uncertain
//! state-feedback game.
//!
//! The fixed point solved here is
//!
//! ```text
//! |x|^2_P = min_u max_v { |x|^2_Q + |u|^2_R - gamma^2 |Ax + Bu - v|^2 + |v|^2_P }
//! ```
//!
//! iterated as `P_{k+1} = Q + A^T S_k A - A^T S_k B (R + B^T S_k B)^{-1} B^T S_k A`
//! with `S_k = (I - gamma^{-2} P_k)^{-1} P_k`. Feasibility of the adaptive
//! game is reported at three separate levels (necessary lower bound,
//! Riccati solvability, certified sufficiency) because solvability in the
//! gap between the first and third is genuinely undetermined.

use crate::error::{Error, Result};
use crate::mat::{Matrix, SymmetricMatrix};

/// Problem data for the zero-sum game: dynamics `x+ = iAx + Bu + w` with
/// unknown `i` in {-1, +1}, stage cost `|x|^2_Q + |u|^2_R - gamma^2 |w|^2`.
#[derive(Debug, Clone)]
pub struct GameSpec {
    a: Matrix,
    b: Matrix,
    q: SymmetricMatrix,
    r: SymmetricMatrix,
    gamma: f64,
}

impl GameSpec {
    pub fn new(
        a: Matrix,
        b: Matrix,
        q: SymmetricMatrix,
        r: SymmetricMatrix,
        gamma: f64,
    ) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::dim("state matrix A must be square"));
        }
        if b.rows() != n {
            return Err(Error::dim("input matrix B must have as many rows as A"));
        }
        let m = b.cols();
        if q.dim() != n {
            return Err(Error::dim("Q must match the state dimension"));
        }
        if r.dim() != m {
            return Err(Error::dim("R must match the input dimension"));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::InvalidArgument("gamma must be positive and finite".into()));
        }
        if q.psd_margin()? <= q.psd_tolerance() {
            return Err(Error::InvalidArgument("Q must be positive definite".into()));
        }
        if r.psd_margin()? <= r.psd_tolerance() {
            return Err(Error::InvalidArgument("R must be positive definite".into()));
        }
        Ok(Self { a, b, q, r, gamma })
    }

    /// Scalar convenience constructor.
    pub fn scalar(a: f64, b: f64, q: f64, r: f64, gamma: f64) -> Result<Self> {
        Self::new(
            Matrix::new(1, 1, vec![a])?,
            Matrix::new(1, 1, vec![b])?,
            SymmetricMatrix::new(1, vec![q])?,
            SymmetricMatrix::new(1, vec![r])?,
            gamma,
        )
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.q.clone(), self.r.clone(), gamma)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn q(&self) -> &SymmetricMatrix {
        &self.q
    }

    pub fn r(&self) -> &SymmetricMatrix {
        &self.r
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_sq(&self) -> f64 {
        self.gamma * self.gamma
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension m.
    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }
}

/// Converged Riccati fixed point with derived quantities.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Fixed point, 0 < P < gamma^2 I.
    pub p: SymmetricMatrix,
    /// S = (P^{-1} - gamma^{-2} I)^{-1}, computed as (I - gamma^{-2}P)^{-1}P.
    pub s: SymmetricMatrix,
    /// T = Q + A^T S A.
    pub t: SymmetricMatrix,
    /// State-feedback gain K = (R + B^T S B)^{-1} B^T S A.
    pub k: Matrix,
    pub iterations: usize,
    /// Max-abs change of the final iteration step.
    pub residual: f64,
}

impl RiccatiSolution {
    /// T - P, the curvature of the saturation denominator `|x|^2_{T-P}`.
    pub fn t_minus_p(&self) -> SymmetricMatrix {
        self.t.sub(&self.p).expect("T and P share a dimension")
    }
}

/// `S = (I - gamma^{-2} P)^{-1} P`; well-defined for any iterate with
/// P < gamma^2 I, including P = 0.
fn s_from_p(p: &SymmetricMatrix, gamma_sq: f64) -> Result<SymmetricMatrix> {
    let n = p.dim();
    let m = SymmetricMatrix::identity(n).sub(&p.scale(1.0 / gamma_sq))?;
    let minv = m.sym_inverse()?;
    let sp = minv.to_matrix().mul(&p.to_matrix())?;
    SymmetricMatrix::from_matrix(&sp)
}

/// One step of the Riccati recursion from `p`.
fn riccati_step(spec: &GameSpec, p: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let s = s_from_p(p, spec.gamma_sq())?;
    let at = spec.a.transpose();
    let sa = s.to_matrix().mul(&spec.a)?;
    let sb = s.to_matrix().mul(&spec.b)?;
    let g = SymmetricMatrix::from_matrix(
        &spec.r.to_matrix().add(&spec.b.transpose().mul(&sb)?)?,
    )?;
    let ginv = g.sym_inverse()?;
    let atsa = at.mul(&sa)?;
    let atsb = at.mul(&sb)?;
    let correction = atsb.mul(&ginv.to_matrix())?.mul(&atsb.transpose())?;
    let next = spec.q.to_matrix().add(&atsa)?.sub(&correction)?;
    SymmetricMatrix::from_matrix(&next)
}

/// Max-abs change of one more recursion step from the solution's P;
/// small values certify that P is a genuine fixed point for this spec.
pub fn riccati_residual(spec: &GameSpec, sol: &RiccatiSolution) -> Result<f64> {
    riccati_step(spec, &sol.p)?.max_abs_diff(&sol.p)
}

/// `K = (R + B^T S B)^{-1} B^T S A`, the sign-known state-feedback gain.
pub fn gain(spec: &GameSpec, s: &SymmetricMatrix) -> Result<Matrix> {
    let sb = s.to_matrix().mul(&spec.b)?;
    let g = SymmetricMatrix::from_matrix(
        &spec.r.to_matrix().add(&spec.b.transpose().mul(&sb)?)?,
    )?;
    let ginv = g.sym_inverse()?;
    let bsa = spec.b.transpose().mul(&s.to_matrix())?.mul(&spec.a)?;
    ginv.to_matrix().mul(&bsa)
}

/// Runs the recursion from P_0 = 0, recording every iterate.
/// Fails with an infeasibility report when an iterate violates
/// P_k < gamma^2 I, and with non-convergence at the step limit.
pub(crate) fn riccati_iterates(
    spec: &GameSpec,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<SymmetricMatrix>> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = spec.state_dim();
    let gamma_sq = spec.gamma_sq();
    let mut iterates = vec![SymmetricMatrix::zeros(n)];
    let mut residual = f64::INFINITY;
    for iter in 0..max_iter {
        let p = iterates.last().unwrap();
        let cap_margin = SymmetricMatrix::scaled_identity(n, gamma_sq).sub(p)?.psd_margin()?;
        if cap_margin <= p.psd_tolerance().max(1e-12 * gamma_sq) {
            return Err(Error::Infeasible {
                iteration: iter,
                constraint: format!(
                    "iterate violates P < gamma^2 I (margin {cap_margin:.3e})"
                ),
                iterate: p.clone(),
            });
        }
        let next = riccati_step(spec, p)?;
        if !next.max_abs().is_finite() {
            return Err(Error::Infeasible {
                iteration: iter,
                constraint: "iteration diverged to non-finite values".into(),
                iterate: p.clone(),
            });
        }
        residual = next.max_abs_diff(p)?;
        iterates.push(next);
        if residual < tol {
            return Ok(iterates);
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual })
}

/// Solves the game Riccati equation by value recursion from P_0 = 0.
pub fn solve_riccati(spec: &GameSpec, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    let iterates = riccati_iterates(spec, tol, max_iter)?;
    let iterations = iterates.len() - 1;
    let p = iterates.last().unwrap().clone();
    let residual = p.max_abs_diff(&iterates[iterates.len() - 2])?;

    let gamma_sq = spec.gamma_sq();
    let n = spec.state_dim();
    if p.psd_margin()? < -p.psd_tolerance() {
        return Err(Error::Numerical("converged P is not positive semi-definite".into()));
    }
    let cap = SymmetricMatrix::scaled_identity(n, gamma_sq).sub(&p)?;
    if cap.psd_margin()? <= cap.psd_tolerance() {
        return Err(Error::Infeasible {
            iteration: iterations,
            constraint: "converged P does not satisfy P < gamma^2 I".into(),
            iterate: p,
        });
    }

    let s = s_from_p(&p, gamma_sq)?;
    let t = SymmetricMatrix::from_matrix(
        &spec.q.to_matrix().add(&spec.a.transpose().mul(&s.to_matrix())?.mul(&spec.a)?)?,
    )?;
    let k = gain(spec, &s)?;

    // T - P must equal both K^T B^T S A and K^T (R + B^T S B) K; a gap
    // here means the converged triple is numerically inconsistent.
    let tp = t.sub(&p)?;
    let kbsa = k.transpose().mul(&spec.b.transpose())?.mul(&s.to_matrix())?.mul(&spec.a)?;
    let g = spec.r.to_matrix().add(&spec.b.transpose().mul(&s.to_matrix())?.mul(&spec.b)?)?;
    let kgk = k.transpose().mul(&g)?.mul(&k)?;
    let scale = tp.max_abs().max(1.0);
    if tp.to_matrix().max_abs_diff(&kbsa)? > 1e-8 * scale
        || tp.to_matrix().max_abs_diff(&kgk)? > 1e-8 * scale
    {
        return Err(Error::Numerical(
            "gain identity T - P = K^T B^T S A = K^T (R + B^T S B) K failed".into(),
        ));
    }

    Ok(RiccatiSolution { p, s, t, k, iterations, residual })
}

/// Outcome of the sufficiency certificate.
#[derive(Debug, Clone, Copy)]
pub struct ConditionIiCheck {
    pub feasible: bool,
    /// Smallest eigenvalue of the "+"-sign difference matrix.
    pub margin_plus: f64,
    /// Smallest eigenvalue of the "-"-sign difference matrix.
    pub margin_minus: f64,
}

/// Checks the explicit-law sufficiency certificate
/// `(g2I-P)(T-P)^{-1}(g2I-P) >= (I +/- BKA^{-1})(g2I-P)(I +/- BKA^{-1})^T`
/// for both signs and reports the signed semi-definiteness margins.
pub fn check_condition_ii(spec: &GameSpec, sol: &RiccatiSolution) -> Result<ConditionIiCheck> {
    let n = spec.state_dim();
    let a_inv = spec.a.inverse().map_err(|_| {
        Error::InvalidArgument("the sufficiency certificate requires invertible A".into())
    })?;
    let tp = sol.t_minus_p();
    let tp_inv = match tp.sym_inverse() {
        Ok(inv) => inv,
        Err(Error::Singular { min_abs_eigenvalue }) => {
            return Err(Error::Degenerate(format!(
                "T - P is numerically singular (smallest |eigenvalue| {min_abs_eigenvalue:.3e})"
            )))
        }
        Err(e) => return Err(e),
    };
    let cap = SymmetricMatrix::scaled_identity(n, spec.gamma_sq()).sub(&sol.p)?;

    let lhs = cap.to_matrix().mul(&tp_inv.to_matrix())?.mul(&cap.to_matrix())?;
    let bka = spec.b.mul(&sol.k)?.mul(&a_inv)?;

    let margin_for = |sign: f64| -> Result<f64> {
        let factor = Matrix::identity(n).add(&bka.scale(sign))?;
        let rhs = factor.mul(&cap.to_matrix())?.mul(&factor.transpose())?;
        let diff = SymmetricMatrix::from_matrix(&lhs.sub(&rhs)?)?;
        diff.psd_margin()
    };
    let margin_plus = margin_for(1.0)?;
    let margin_minus = margin_for(-1.0)?;

    let tol = cap.psd_tolerance().max(1e-9);
    Ok(ConditionIiCheck {
        feasible: margin_plus >= -tol && margin_minus >= -tol,
        margin_plus,
        margin_minus,
    })
}

/// Outcome of the necessary lower-bound check.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundCheck {
    pub necessary_ok: bool,
    /// Smallest eigenvalue of `gamma^2 I - T`.
    pub margin: f64,
}

/// The game has no finite value unless `0 < P < gamma^2 I` and `T <= gamma^2 I`.
pub fn check_lower_bound(spec: &GameSpec, sol: &RiccatiSolution) -> Result<LowerBoundCheck> {
    let n = spec.state_dim();
    let gamma_sq = spec.gamma_sq();
    let margin = SymmetricMatrix::scaled_identity(n, gamma_sq).sub(&sol.t)?.psd_margin()?;
    let tol = sol.t.psd_tolerance().max(1e-9);
    let p_pos = sol.p.psd_margin()? > -tol;
    let p_cap = SymmetricMatrix::scaled_identity(n, gamma_sq).sub(&sol.p)?.psd_margin()? > -tol;
    Ok(LowerBoundCheck { necessary_ok: margin >= -tol && p_pos && p_cap, margin })
}

/// Which feasibility boundary a gamma search targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaCriterion {
    /// Sufficiency certificate for the explicit adaptive law.
    ConditionIi,
    /// Necessary condition `T <= gamma^2 I` (plus `0 < P < gamma^2 I`).
    LowerBound,
}

/// Evaluates the chosen criterion at one gamma. Riccati failure of any
/// kind counts as infeasible; solver errors unrelated to feasibility
/// propagate.
pub fn criterion_feasible(
    a: &Matrix,
    b: &Matrix,
    q: &SymmetricMatrix,
    r: &SymmetricMatrix,
    criterion: GammaCriterion,
    gamma: f64,
) -> Result<bool> {
    let spec = GameSpec::new(a.clone(), b.clone(), q.clone(), r.clone(), gamma)?;
    let sol = match solve_riccati(&spec, 1e-12, 100_000) {
        Ok(sol) => sol,
        Err(Error::Infeasible { .. }) | Err(Error::NonConvergence { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    match criterion {
        GammaCriterion::ConditionIi => match check_condition_ii(&spec, &sol) {
            Ok(c) => Ok(c.feasible),
            Err(Error::Degenerate(_)) => Ok(false),
            Err(e) => Err(e),
        },
        GammaCriterion::LowerBound => Ok(check_lower_bound(&spec, &sol)?.necessary_ok),
    }
}

/// Bisects for the critical gamma at which `criterion` flips from
/// infeasible to feasible. The bracket is validated by sampling 16
/// points; a non-monotone feasibility pattern is rejected.
pub fn gamma_search(
    a: &Matrix,
    b: &Matrix,
    q: &SymmetricMatrix,
    r: &SymmetricMatrix,
    criterion: GammaCriterion,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo && tol > 0.0) {
        return Err(Error::InvalidArgument(
            "bracket must satisfy 0 < gamma_lo < gamma_hi with tol > 0".into(),
        ));
    }
    if criterion_feasible(a, b, q, r, criterion, lo)? {
        return Err(Error::InvalidArgument(format!(
            "criterion already feasible at gamma_lo = {lo}"
        )));
    }
    if !criterion_feasible(a, b, q, r, criterion, hi)? {
        return Err(Error::InvalidArgument(format!(
            "criterion still infeasible at gamma_hi = {hi}"
        )));
    }

    // Feasibility must be monotone across the bracket for bisection to
    // mean anything: one false-to-true transition, never back.
    let samples = 16;
    let mut last = false;
    let mut flips = 0;
    for i in 0..samples {
        let g = lo + (hi - lo) * (i as f64 + 0.5) / samples as f64;
        let f = criterion_feasible(a, b, q, r, criterion, g)?;
        if i > 0 && f != last {
            flips += 1;
        }
        if i > 0 && last && !f {
            return Err(Error::AmbiguousBracket(format!(
                "feasibility flips back to infeasible near gamma = {g}"
            )));
        }
        last = f;
    }
    if flips > 1 {
        return Err(Error::AmbiguousBracket("multiple feasibility transitions sampled".into()));
    }

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if criterion_feasible(a, b, q, r, criterion, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
