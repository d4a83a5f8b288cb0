//! Model instance: cost weight, horizon, affine supply dynamics, quadratic
//! terminal cost and the initial distribution of agents.
//!
//! The Hamiltonian is fixed to `H(p) = p² / (2c)`, the Legendre transform of
//! the trading cost `L(v) = c v² / 2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ansatz::Ansatz;
use crate::error::{Error, Result};

/// A scalar coefficient as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeFn {
    Constant(f64),
    /// Samples on a uniform grid over `[0, t_end]`, linearly interpolated.
    Tabulated {
        t_end: f64,
        values: Vec<f64>,
    },
}

impl TimeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(v) => *v,
            TimeFn::Tabulated { t_end, values } => {
                let (i, s) = Self::locate(*t_end, values.len(), t);
                if s == 0.0 {
                    values[i]
                } else {
                    values[i] + s * (values[i + 1] - values[i])
                }
            }
        }
    }

    /// Time derivative; piecewise constant for tabulated coefficients.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(_) => 0.0,
            TimeFn::Tabulated { t_end, values } => {
                let n = values.len() - 1;
                let h = t_end / n as f64;
                let i = ((t / h).floor().max(0.0) as usize).min(n - 1);
                (values[i + 1] - values[i]) / h
            }
        }
    }

    fn locate(t_end: f64, len: usize, t: f64) -> (usize, f64) {
        let n = len - 1;
        let u = (t / t_end).clamp(0.0, 1.0) * n as f64;
        let i = (u.floor() as usize).min(n);
        if i == n {
            (n, 0.0)
        } else {
            (i, u - i as f64)
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeFn::Constant(_))
    }

    /// True when the coefficient vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            TimeFn::Constant(v) => *v == 0.0,
            TimeFn::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    fn problems(&self, name: &str, horizon: f64, out: &mut Vec<String>) {
        match self {
            TimeFn::Constant(v) => {
                if !v.is_finite() {
                    out.push(format!("{name} must be finite"));
                }
            }
            TimeFn::Tabulated { t_end, values } => {
                if values.len() < 2 {
                    out.push(format!("{name} needs at least two tabulated samples"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    out.push(format!("{name} must be finite"));
                }
                if (t_end - horizon).abs() > 1e-12 * horizon.abs().max(1.0) {
                    out.push(format!("{name} table must cover [0, T]"));
                }
            }
        }
    }
}

impl From<f64> for TimeFn {
    fn from(v: f64) -> Self {
        TimeFn::Constant(v)
    }
}

/// `k0(t) + k1(t) q + k2(t) w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCoeff {
    pub k0: TimeFn,
    pub k1: TimeFn,
    pub k2: TimeFn,
}

impl AffineCoeff {
    pub fn constant(k0: f64, k1: f64, k2: f64) -> Self {
        AffineCoeff {
            k0: k0.into(),
            k1: k1.into(),
            k2: k2.into(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0, 0.0)
    }

    pub fn components(&self, t: f64) -> [f64; 3] {
        [self.k0.eval(t), self.k1.eval(t), self.k2.eval(t)]
    }

    pub fn derivatives(&self, t: f64) -> [f64; 3] {
        [
            self.k0.derivative(t),
            self.k1.derivative(t),
            self.k2.derivative(t),
        ]
    }

    pub fn eval(&self, t: f64, q: f64, w: f64) -> f64 {
        let [k0, k1, k2] = self.components(t);
        k0 + k1 * q + k2 * w
    }

    pub fn is_zero(&self) -> bool {
        self.k0.is_zero() && self.k1.is_zero() && self.k2.is_zero()
    }

    fn problems(&self, name: &str, horizon: f64, out: &mut Vec<String>) {
        self.k0.problems(&format!("{name}.k0"), horizon, out);
        self.k1.problems(&format!("{name}.k1"), horizon, out);
        self.k2.problems(&format!("{name}.k2"), horizon, out);
    }
}

/// Quadratic terminal cost
/// `Ψ = c0 + c1·(x,q,w) + c2[0] x² + c2[1] xq + c2[2] xw + c2[3] q² + c2[4] qw + c2[5] w²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TerminalCost {
    pub c0: f64,
    pub c1: [f64; 3],
    pub c2: [f64; 6],
}

impl TerminalCost {
    /// `Ψ(x) = (x - alpha)²`.
    pub fn storage_target(alpha: f64) -> Self {
        TerminalCost {
            c0: alpha * alpha,
            c1: [0.0 - 2.0 * alpha, 0.0, 0.0],
            c2: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn eval(&self, x: f64, q: f64, w: f64) -> f64 {
        let [c11, c12, c13] = self.c1;
        let [c21, c22, c23, c24, c25, c26] = self.c2;
        self.c0
            + c11 * x
            + c12 * q
            + c13 * w
            + c21 * x * x
            + c22 * x * q
            + c23 * x * w
            + c24 * q * q
            + c25 * q * w
            + c26 * w * w
    }

    /// The cost with the holdings argument shifted, `Ψ(x - alpha, q, w)`.
    pub fn shifted(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return *self;
        }
        let [c11, c12, c13] = self.c1;
        let [c21, c22, c23, ..] = self.c2;
        TerminalCost {
            c0: self.c0 - c11 * alpha + c21 * alpha * alpha,
            c1: [
                c11 - 2.0 * c21 * alpha,
                c12 - c22 * alpha,
                c13 - c23 * alpha,
            ],
            c2: self.c2,
        }
    }
}

/// Where initial holdings are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Sampler {
    Gaussian { mean: f64, variance: f64 },
    Samples { values: Vec<f64> },
}

/// Initial distribution of agent holdings.
///
/// The analytic pipeline uses only `mean`; the sampler feeds the particle
/// simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub mean: f64,
    pub sampler: Sampler,
    pub seed: u64,
}

impl InitialDistribution {
    pub fn standard_normal(seed: u64) -> Self {
        InitialDistribution {
            mean: 0.0,
            sampler: Sampler::Gaussian {
                mean: 0.0,
                variance: 1.0,
            },
            seed,
        }
    }

    /// Draws `n` i.i.d. holdings. With `centered`, the sample is shifted so
    /// that its empirical mean is `self.mean`.
    pub fn draw(&self, n: usize, centered: bool) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut xs: Vec<f64> = match &self.sampler {
            Sampler::Gaussian { mean, variance } => {
                let normal = Normal::new(*mean, variance.sqrt()).expect("validated variance");
                (0..n).map(|_| normal.sample(&mut rng)).collect()
            }
            Sampler::Samples { values } if values.len() == n => values.clone(),
            Sampler::Samples { values } => {
                let pick =
                    rand::distr::Uniform::new(0, values.len()).expect("non-empty sample list");
                (0..n).map(|_| values[pick.sample(&mut rng)]).collect()
            }
        };
        if centered && n > 0 {
            let shift = self.mean - xs.iter().sum::<f64>() / n as f64;
            for x in &mut xs {
                *x += shift;
            }
        }
        xs
    }

    fn problems(&self, out: &mut Vec<String>) {
        if !self.mean.is_finite() {
            out.push("agents.mean must be finite".into());
        }
        match &self.sampler {
            Sampler::Gaussian { mean, variance } => {
                if !mean.is_finite() || !variance.is_finite() || *variance < 0.0 {
                    out.push(
                        "gaussian sampler needs a finite mean and a non-negative variance".into(),
                    );
                } else if (mean - self.mean).abs() > 1e-12 * self.mean.abs().max(1.0) {
                    out.push("agents.mean disagrees with the gaussian sampler mean".into());
                }
            }
            Sampler::Samples { values } => {
                if values.is_empty() {
                    out.push("sample list must not be empty".into());
                } else if values.iter().any(|v| !v.is_finite()) {
                    out.push("sample list must be finite".into());
                }
            }
        }
    }
}

/// One linear-quadratic price-formation problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Quadratic trading-cost weight.
    pub c: f64,
    pub horizon: f64,
    pub supply_drift: AffineCoeff,
    pub supply_vol: AffineCoeff,
    pub terminal: TerminalCost,
    /// Initial supply.
    pub q_bar: f64,
    pub agents: InitialDistribution,
}

/// Outcome of [`validate`]; an empty list means the model is usable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationResult {
    pub violations: Vec<String>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl ModelSpec {
    /// Unit cost weight and horizon, `Ψ = (x - alpha)²`, standard normal
    /// agents, `q̄ = 1` and mean-reverting supply `dQ = (1 - Q) dt + Q dW`.
    pub fn storage_target(alpha: f64) -> Self {
        ModelSpec {
            c: 1.0,
            horizon: 1.0,
            supply_drift: AffineCoeff::constant(1.0, -1.0, 0.0),
            supply_vol: AffineCoeff::constant(0.0, 1.0, 0.0),
            terminal: TerminalCost::storage_target(alpha),
            q_bar: 1.0,
            agents: InitialDistribution::standard_normal(0),
        }
    }

    pub fn validated(self) -> Result<Self> {
        let report = validate(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::Validation(report.violations))
        }
    }

    /// Price drift coefficients `b^P_i = -c b^S_i`.
    pub fn price_drift(&self, t: f64) -> [f64; 3] {
        self.supply_drift.components(t).map(|b| -self.c * b)
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        ModelSpec {
            terminal: self.terminal.shifted(alpha),
            ..self.clone()
        }
    }
}

pub fn validate(spec: &ModelSpec) -> ValidationResult {
    let mut v = Vec::new();
    if !(spec.c > 0.0) || !spec.c.is_finite() {
        v.push("c must be positive".to_string());
    }
    if !(spec.horizon > 0.0) || !spec.horizon.is_finite() {
        v.push("T must be positive".to_string());
    }
    if !spec.q_bar.is_finite() {
        v.push("q_bar must be finite".to_string());
    }
    spec.supply_drift
        .problems("supply_drift", spec.horizon, &mut v);
    spec.supply_vol.problems("supply_vol", spec.horizon, &mut v);
    let t = &spec.terminal;
    if !t.c0.is_finite() || t.c1.iter().chain(t.c2.iter()).any(|c| !c.is_finite()) {
        v.push("terminal cost coefficients must be finite".to_string());
    }
    spec.agents.problems(&mut v);
    ValidationResult { violations: v }
}

/// Terminal data for the coefficient ODEs: the Taylor coefficients of Ψ at
/// the origin, so that the ansatz equals Ψ at `t = T`.
pub fn psi_to_terminal_conditions(terminal: &TerminalCost) -> Ansatz {
    let [c11, c12, c13] = terminal.c1;
    let [c21, c22, c23, c24, c25, c26] = terminal.c2;
    Ansatz([terminal.c0, c11, c12, c13, c21, c22, c23, c24, c25, c26])
}
