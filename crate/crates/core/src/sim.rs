//! Closed-loop simulation of the explicit adaptive controller against
//! configurable adversaries, with dissipation accounting.
//!
//! The controller is
//!
//! ```text
//! u_t = sat( gamma^2 sum_{tau<t} (B u_tau - x_{tau+1})^T A x_tau / |x_t|^2_{T-P} ) K x_t
//! ```
//!
//! which interpolates between the two sign-known state-feedback laws
//! while the collected evidence is inconclusive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mat::{quad_form, sat, trace_inner, Matrix, SymmetricMatrix};
use crate::riccati::{GameSpec, RiccatiSolution};
use crate::value_fn::{v_star, ClosedFormValue, InfoMatrix};

/// The unknown sign hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Sign::Plus)
        } else if v == -1.0 {
            Ok(Sign::Minus)
        } else {
            Err(Error::InvalidArgument(format!("sign must be +1 or -1, got {v}")))
        }
    }
}

/// Running information state: the data matrix Z and its cached
/// upper-right block (the sign evidence).
#[derive(Debug, Clone)]
pub struct InfoState {
    z: SymmetricMatrix,
    evidence: Matrix,
    t: usize,
}

impl InfoState {
    /// Empty record, Z = 0.
    pub fn new(state_dim: usize) -> Self {
        Self {
            z: SymmetricMatrix::zeros(2 * state_dim),
            evidence: Matrix::zeros(state_dim, state_dim),
            t: 0,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.evidence.rows()
    }

    pub fn z(&self) -> &SymmetricMatrix {
        &self.z
    }

    /// `sum (B u_tau - x_{tau+1}) x_tau^T`, equal to the upper-right block of Z.
    pub fn evidence(&self) -> &Matrix {
        &self.evidence
    }

    pub fn step_count(&self) -> usize {
        self.t
    }

    pub fn info_matrix(&self) -> Result<InfoMatrix> {
        InfoMatrix::new(self.z.clone())
    }
}

/// Rank-one data update for one observed transition.
pub fn update_info(
    info: &InfoState,
    x: &[f64],
    u: &[f64],
    x_next: &[f64],
    b: &Matrix,
) -> Result<InfoState> {
    let n = info.state_dim();
    if x.len() != n || x_next.len() != n {
        return Err(Error::dim("state dimension mismatch in data update"));
    }
    if u.len() != b.cols() || b.rows() != n {
        return Err(Error::dim("input dimension mismatch in data update"));
    }
    let bu = b.mul_vec(u)?;
    let mut stacked = Vec::with_capacity(2 * n);
    for i in 0..n {
        stacked.push(bu[i] - x_next[i]);
    }
    stacked.extend_from_slice(x);
    let z = info.z.add_outer(&stacked)?;
    let mut evidence = info.evidence.clone();
    for (i, si) in stacked.iter().take(n).enumerate() {
        for (j, xj) in x.iter().enumerate() {
            evidence.set(i, j, evidence.get(i, j) + si * xj);
        }
    }
    Ok(InfoState { z, evidence, t: info.t + 1 })
}

/// The explicit adaptive control law. Returns zero input at `x = 0`,
/// where the saturation argument is 0/0 and `K x` vanishes anyway.
pub fn controller_u(
    spec: &GameSpec,
    sol: &RiccatiSolution,
    x: &[f64],
    info: &InfoState,
) -> Result<Vec<f64>> {
    if x.len() != spec.state_dim() || info.state_dim() != spec.state_dim() {
        return Err(Error::dim("controller input dimension mismatch"));
    }
    let denom = quad_form(x, &sol.t_minus_p())?;
    let kx = sol.k.mul_vec(x)?;
    if denom <= 0.0 {
        return Ok(vec![0.0; kx.len()]);
    }
    let numer = spec.gamma_sq() * trace_inner(spec.a(), info.evidence())?;
    let scale = sat(numer / denom)?;
    Ok(kx.iter().map(|v| scale * v).collect())
}

/// Worst-case next state `(I - gamma^{-2} P)^{-1} (iAx + Bu)`, the argmax
/// of the strictly concave `|v|^2_P - gamma^2 |iAx + Bu - v|^2`.
pub fn worst_case_v(
    spec: &GameSpec,
    sol: &RiccatiSolution,
    x: &[f64],
    u: &[f64],
    sign_guess: Sign,
) -> Result<Vec<f64>> {
    let n = spec.state_dim();
    let cap = SymmetricMatrix::scaled_identity(n, spec.gamma_sq()).sub(&sol.p)?;
    if cap.psd_margin()? <= cap.psd_tolerance() {
        return Err(Error::InfeasibleAdversary(
            "worst-case disturbance needs P strictly below gamma^2 I".into(),
        ));
    }
    let m = SymmetricMatrix::identity(n).sub(&sol.p.scale(1.0 / spec.gamma_sq()))?;
    let minv = m.sym_inverse()?;
    let drift = predicted_drift(spec, x, u, sign_guess.value())?;
    minv.to_matrix().mul_vec(&drift)
}

/// `iAx + Bu`.
fn predicted_drift(spec: &GameSpec, x: &[f64], u: &[f64], i: f64) -> Result<Vec<f64>> {
    let ax = spec.a().mul_vec(x)?;
    let bu = spec.b().mul_vec(u)?;
    Ok(ax.iter().zip(&bu).map(|(a, b)| i * a + b).collect())
}

/// Disturbance policies for the maximizing player.
#[derive(Debug, Clone)]
pub enum AdversaryPolicy {
    Zero,
    Constant { w: Vec<f64> },
    /// Componentwise uniform in [-bound, bound], reproducible per seed.
    RandomBounded { bound: f64, seed: u64 },
    /// Plays the saddle-point disturbance for its own sign hypothesis,
    /// which may differ from the plant's actual sign.
    WorstCase { sign: Sign },
}

/// Time-indexed closed-loop record. `states` is one longer than
/// `inputs`; `payoffs[t]` is the running sum of
/// `|x|^2_Q + |u|^2_R - gamma^2 |w|^2` through step t.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    pub sign: Sign,
    pub payoffs: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    /// Largest residual of `x_{t+1} = iAx_t + Bu_t + w_t` over the record.
    pub fn reconstruction_residual(&self, spec: &GameSpec) -> Result<f64> {
        let mut worst = 0.0f64;
        for t in 0..self.horizon() {
            let drift =
                predicted_drift(spec, &self.states[t], &self.inputs[t], self.sign.value())?;
            for (i, d) in drift.iter().enumerate() {
                let predicted = d + self.disturbances[t][i];
                worst = worst.max((self.states[t + 1][i] - predicted).abs());
            }
        }
        Ok(worst)
    }

    /// CSV with header `t,x0..,u0..,w0..,payoff_prefix`; the final row
    /// carries the terminal state with empty input/disturbance fields.
    /// Values use shortest round-trip decimal rendering.
    pub fn to_csv(&self) -> String {
        let n = self.states[0].len();
        let m = if self.inputs.is_empty() { 0 } else { self.inputs[0].len() };
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",x{i}"));
        }
        for i in 0..m {
            out.push_str(&format!(",u{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",w{i}"));
        }
        out.push_str(",payoff_prefix\n");
        for t in 0..self.states.len() {
            out.push_str(&t.to_string());
            for v in &self.states[t] {
                out.push_str(&format!(",{v}"));
            }
            if t < self.horizon() {
                for v in &self.inputs[t] {
                    out.push_str(&format!(",{v}"));
                }
                for v in &self.disturbances[t] {
                    out.push_str(&format!(",{v}"));
                }
                out.push_str(&format!(",{}\n", self.payoffs[t]));
            } else {
                for _ in 0..(m + n + 1) {
                    out.push(',');
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses a trajectory CSV produced by [`Trajectory::to_csv`].
    pub fn from_csv(text: &str, state_dim: usize, input_dim: usize, sign: Sign) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty trajectory CSV".into()))?;
        let expected_cols = 1 + state_dim + input_dim + state_dim + 1;
        if header.split(',').count() != expected_cols {
            return Err(Error::InvalidArgument("trajectory CSV header mismatch".into()));
        }
        let mut states = Vec::new();
        let mut inputs = Vec::new();
        let mut disturbances = Vec::new();
        let mut payoffs = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected_cols {
                return Err(Error::InvalidArgument("trajectory CSV row width mismatch".into()));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad CSV number: {s}")))
            };
            let x: Result<Vec<f64>> = fields[1..1 + state_dim].iter().map(|s| parse(s)).collect();
            states.push(x?);
            if !fields[1 + state_dim].is_empty() {
                let u: Result<Vec<f64>> = fields[1 + state_dim..1 + state_dim + input_dim]
                    .iter()
                    .map(|s| parse(s))
                    .collect();
                inputs.push(u?);
                let w: Result<Vec<f64>> = fields
                    [1 + state_dim + input_dim..1 + 2 * state_dim + input_dim]
                    .iter()
                    .map(|s| parse(s))
                    .collect();
                disturbances.push(w?);
                payoffs.push(parse(fields[expected_cols - 1])?);
            }
        }
        Ok(Self { states, inputs, disturbances, sign, payoffs })
    }
}

const STATE_EXPLOSION: f64 = 1e9;

/// Rolls the closed loop for `horizon` steps: controller from the
/// explicit law, disturbance from the adversary, plant sign fixed.
pub fn simulate(
    spec: &GameSpec,
    sol: &RiccatiSolution,
    x0: &[f64],
    sign: Sign,
    adversary: &AdversaryPolicy,
    horizon: usize,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let n = spec.state_dim();
    if x0.len() != n {
        return Err(Error::dim("initial state dimension mismatch"));
    }
    if let AdversaryPolicy::Constant { w } = adversary {
        if w.len() != n {
            return Err(Error::dim("constant disturbance dimension mismatch"));
        }
    }

    let mut rng = match adversary {
        AdversaryPolicy::RandomBounded { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };

    let mut info = InfoState::new(n);
    let mut x = x0.to_vec();
    let mut states = vec![x.clone()];
    let mut inputs = Vec::with_capacity(horizon);
    let mut disturbances = Vec::with_capacity(horizon);
    let mut payoffs = Vec::with_capacity(horizon);
    let mut running = 0.0;

    for step in 0..horizon {
        let u = controller_u(spec, sol, &x, &info)?;
        let w = match adversary {
            AdversaryPolicy::Zero => vec![0.0; n],
            AdversaryPolicy::Constant { w } => w.clone(),
            AdversaryPolicy::RandomBounded { bound, .. } => {
                let rng = rng.as_mut().unwrap();
                (0..n).map(|_| rng.random_range(-bound..=*bound)).collect()
            }
            AdversaryPolicy::WorstCase { sign: adv_sign } => {
                let v = worst_case_v(spec, sol, &x, &u, *adv_sign)?;
                let drift = predicted_drift(spec, &x, &u, adv_sign.value())?;
                v.iter().zip(&drift).map(|(v, d)| v - d).collect()
            }
        };
        let drift = predicted_drift(spec, &x, &u, sign.value())?;
        let x_next: Vec<f64> = drift.iter().zip(&w).map(|(d, w)| d + w).collect();

        running += quad_form(&x, spec.q())?;
        running += quad_form(&u, spec.r())?;
        running -= spec.gamma_sq() * w.iter().map(|v| v * v).sum::<f64>();
        payoffs.push(running);

        info = update_info(&info, &x, &u, &x_next, spec.b())?;
        let norm = x_next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > STATE_EXPLOSION {
            return Err(Error::Divergence { step, state_norm: norm });
        }
        inputs.push(u);
        disturbances.push(w);
        states.push(x_next.clone());
        x = x_next;
    }

    Ok(Trajectory { states, inputs, disturbances, sign, payoffs })
}

/// Outcome of the for-all-prefixes payoff bound.
#[derive(Debug, Clone, Copy)]
pub struct DissipationCheck {
    pub ok: bool,
    /// Max prefix payoff minus the value bound; at most ~0 for a
    /// correctly synthesized controller.
    pub worst_slack: f64,
}

/// Every prefix payoff must stay below `V*(x0, 0) + 1e-6`.
pub fn dissipation_check(traj: &Trajectory, cf: &ClosedFormValue) -> Result<DissipationCheck> {
    let x0 = &traj.states[0];
    let bound = v_star(cf, x0, &InfoMatrix::zero(x0.len()))?;
    let mut worst = f64::NEG_INFINITY;
    for &p in &traj.payoffs {
        worst = worst.max(p - bound);
    }
    Ok(DissipationCheck { ok: worst <= 1e-6, worst_slack: worst })
}
