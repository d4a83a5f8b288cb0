//! Backward solution of the ten coefficient ODEs of the quadratic ansatz,
//! the feedback price coefficients, and the initial price.
//!
//! The system is integrated from the terminal data at `t = T` down to `t = 0`
//! with classical RK4 on a uniform grid. Every node also stores the exact
//! first and second time derivatives of the coefficients (right-hand side and
//! its derivative along the flow), so that evaluation between nodes is a
//! quintic Hermite interpolant whose slope at the nodes is the ODE itself.

mod dual;
mod hermite;
pub mod hjb;

use std::io::Write;
use std::sync::Arc;

use crate::ansatz::{Ansatz, A1_1, A2_1, A2_2, A2_3, NAMES};
use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::model::{psi_to_terminal_conditions, AffineCoeff, ModelSpec};

pub use dual::{Dual, Scalar};
pub use hjb::{halton_states, hjb_residual, HjbStats};

/// Abort when `1 + a2_3` drops below this value.
pub const SINGULARITY_FLOOR: f64 = 1e-6;
/// Abort when any coefficient exceeds this magnitude.
pub const OVERFLOW_GUARD: f64 = 1e12;
/// Slack allowed when evaluating at times just outside `[0, T]`.
pub const TIME_SLACK: f64 = 1e-12;

/// Right-hand side of the coefficient system, generic over the scalar so the
/// same transcription serves plain evaluation and forward differentiation.
///
/// `b` and `s` are the supply drift and volatility coefficients `(k0, k1, k2)`.
pub fn system_rhs<S: Scalar>(c: f64, b: [S; 3], s: [S; 3], a: &[S; 10]) -> [S; 10] {
    let cc = S::from(c);
    let one = S::from(1.0);
    let two = S::from(2.0);
    let four = S::from(4.0);
    let half = S::from(0.5);
    let quarter = S::from(0.25);
    let [_a0, a11, a12, a13, a21, a22, a23, a24, a25, a26] = *a;
    let [b0, b1, b2] = b;
    let [s0, s1, s2] = s;
    // c + a2_2 and 1 + a2_3 appear in every volatility term
    let g = a22 + cc;
    let d = a23 + one;

    let d21 = two * a21 * a21 / cc;
    let d22 = (cc * cc * a23 * b1 - cc * a22 * b1 + two * a21 * a22) / cc;
    let d23 = (cc * cc * a23 * b2 - cc * a22 * b2 + two * a21 + two * a21 * a23) / cc;
    let d11 = (cc * cc * a23 * b0 - cc * a22 * b0 + two * a11 * a21) / cc;
    let d24 = cc * a25 * b1 - two * a24 * b1
        + a25 * g * s1 * s1 / d
        + quarter * (-(four * a26 * g * g * s1 * s1) / (d * d) - four * a24 * s1 * s1)
        + a22 * a22 / (two * cc);
    let d25 = two * cc * a26 * b1 + cc * a25 * b2 - a25 * b1 - two * a24 * b2
        + half * (-(four * a26 * g * g * s1 * s2) / (d * d) - four * a24 * s1 * s2)
        + two * a25 * g * s1 * s2 / d
        + a22 * d / cc;
    let d26 = two * cc * a26 * b2 - a25 * b2
        + quarter * (-(four * a26 * g * g * s2 * s2) / (d * d) - four * a24 * s2 * s2)
        + a25 * g * s2 * s2 / d
        + d * d / (two * cc);
    let d0 = cc * a13 * b0 - a12 * b0
        + a25 * g * s0 * s0 / d
        + half * (-(two * a26 * g * g * s0 * s0) / (d * d) - two * a24 * s0 * s0)
        + a11 * a11 / (two * cc);
    let d12 = cc * a25 * b0 + cc * a13 * b1 - two * a24 * b0 - a12 * b1
        + two * a25 * g * s0 * s1 / d
        + half * (-(four * a26 * g * g * s0 * s1) / (d * d) - four * a24 * s0 * s1)
        + a11 * a22 / cc;
    let d13 = two * cc * a26 * b0 + cc * a13 * b2 - a25 * b0 - a12 * b2
        + half * (-(four * a26 * g * g * s0 * s2) / (d * d) - four * a24 * s0 * s2)
        + two * a25 * g * s0 * s2 / d
        + a11 * d / cc;

    [d0, d11, d12, d13, d21, d22, d23, d24, d25, d26]
}

/// `d/dt` of the coefficients at time `t`.
pub fn rhs(spec: &ModelSpec, t: f64, a: &Ansatz) -> Ansatz {
    Ansatz(system_rhs(
        spec.c,
        spec.supply_drift.components(t),
        spec.supply_vol.components(t),
        &a.0,
    ))
}

/// `d²/dt²` of the coefficients at time `t`, i.e. the derivative of [`rhs`]
/// along the solution.
pub fn rhs_rate(spec: &ModelSpec, t: f64, a: &Ansatz) -> Ansatz {
    let slope = rhs(spec, t, a);
    let lift = |c: &AffineCoeff| {
        let v = c.components(t);
        let d = c.derivatives(t);
        [
            Dual::new(v[0], d[0]),
            Dual::new(v[1], d[1]),
            Dual::new(v[2], d[2]),
        ]
    };
    let mut y = [Dual::from(0.0); 10];
    for i in 0..10 {
        y[i] = Dual::new(a[i], slope[i]);
    }
    let out = system_rhs(spec.c, lift(&spec.supply_drift), lift(&spec.supply_vol), &y);
    Ansatz(out.map(|d| d.du))
}

/// `a2_1(t) = c c2_1 / (c + 2 c2_1 (T - t))`.
pub fn a21_closed_form(c: f64, c21: f64, horizon: f64, t: f64) -> Result<f64> {
    let den = c + 2.0 * c21 * (horizon - t);
    // den is monotone in t, so its minimum over [t, T] is at one end
    if den <= 0.0 {
        return Err(Error::RiccatiBlowUp {
            time: riccati_blow_up_time(c, c21, horizon).unwrap_or(t),
        });
    }
    Ok(c * c21 / den)
}

/// Time at which `a2_1` explodes when integrating backward, if it does so
/// inside `[0, T]`.
pub fn riccati_blow_up_time(c: f64, c21: f64, horizon: f64) -> Option<f64> {
    if c21 >= 0.0 {
        return None;
    }
    let t_star = horizon - c / (2.0 * c21.abs());
    (t_star >= 0.0).then_some(t_star)
}

fn check_state(t: f64, a: &Ansatz) -> Result<()> {
    let d = 1.0 + a[A2_3];
    if !(d >= SINGULARITY_FLOOR) {
        return Err(Error::Singularity { time: t, value: d });
    }
    Ok(())
}

fn check_magnitude(t: f64, a: &Ansatz) -> Result<()> {
    if !a.is_finite() || a.max_abs() > OVERFLOW_GUARD {
        return Err(Error::Overflow {
            what: "ansatz coefficient".into(),
            time: t,
        });
    }
    Ok(())
}

fn rk4_step(spec: &ModelSpec, t: f64, y: &Ansatz, h: f64) -> Result<Ansatz> {
    let axpy = |y: &Ansatz, k: &Ansatz, s: f64| {
        let mut out = *y;
        for i in 0..10 {
            out[i] += s * k[i];
        }
        out
    };
    check_state(t, y)?;
    let k1 = rhs(spec, t, y);
    let y2 = axpy(y, &k1, 0.5 * h);
    check_state(t + 0.5 * h, &y2)?;
    let k2 = rhs(spec, t + 0.5 * h, &y2);
    let y3 = axpy(y, &k2, 0.5 * h);
    check_state(t + 0.5 * h, &y3)?;
    let k3 = rhs(spec, t + 0.5 * h, &y3);
    let y4 = axpy(y, &k3, h);
    check_state(t + h, &y4)?;
    let k4 = rhs(spec, t + h, &y4);
    let mut out = *y;
    for i in 0..10 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Uniform grid `0 = t_0 < ... < t_n = T` with `n = ceil(T / step)`.
pub fn uniform_grid(horizon: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {step}"
        )));
    }
    let n = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    let h = horizon / n as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    grid.push(horizon);
    Ok(grid)
}

/// Time-sampled ansatz coefficients over `[0, T]`.
#[derive(Debug, Clone)]
pub struct CoefficientPath {
    times: Vec<f64>,
    step: f64,
    values: Vec<Ansatz>,
    slopes: Vec<Ansatz>,
    rates: Vec<Ansatz>,
}

impl CoefficientPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[Ansatz] {
        &self.values
    }

    /// ODE right-hand side at each node.
    pub fn slopes(&self) -> &[Ansatz] {
        &self.slopes
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn initial(&self) -> &Ansatz {
        &self.values[0]
    }

    pub fn terminal(&self) -> &Ansatz {
        self.values.last().expect("non-empty grid")
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let end = self.horizon();
        if !(t >= -TIME_SLACK && t <= end + TIME_SLACK) {
            return Err(Error::OutOfRange { t, start: 0.0, end });
        }
        let n = self.times.len() - 1;
        if t >= end {
            return Ok((n, 0.0));
        }
        if t <= 0.0 {
            return Ok((0, 0.0));
        }
        let i = ((t / self.step).floor() as usize).min(n - 1);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if t < t0 {
            // floor rounded up past a node
            let i = i - 1;
            return Ok((i, (t - self.times[i]) / (t0 - self.times[i])));
        }
        if t >= t1 {
            return Ok((i + 1, 0.0));
        }
        Ok((i, (t - t0) / (t1 - t0)))
    }

    fn blend(&self, i: usize, w: [f64; 6], scale: f64) -> Ansatz {
        let h = self.times[i + 1] - self.times[i];
        let (v0, v1) = (&self.values[i], &self.values[i + 1]);
        let (d0, d1) = (&self.slopes[i], &self.slopes[i + 1]);
        let (r0, r1) = (&self.rates[i], &self.rates[i + 1]);
        let mut out = Ansatz::ZERO;
        for k in 0..10 {
            out[k] = (w[0] * v0[k]
                + w[1] * h * d0[k]
                + w[2] * h * h * r0[k]
                + w[3] * v1[k]
                + w[4] * h * d1[k]
                + w[5] * h * h * r1[k])
                * scale;
        }
        out
    }

    /// Coefficients at `t`; exact at grid nodes.
    pub fn eval(&self, t: f64) -> Result<Ansatz> {
        let (i, s) = self.locate(t)?;
        if s == 0.0 {
            return Ok(self.values[i]);
        }
        Ok(self.blend(i, hermite::weights(s), 1.0))
    }

    /// Coefficients and their time derivative at `t`.
    pub fn eval_with_rate(&self, t: f64) -> Result<(Ansatz, Ansatz)> {
        let (i, s) = self.locate(t)?;
        if s == 0.0 {
            return Ok((self.values[i], self.slopes[i]));
        }
        let h = self.times[i + 1] - self.times[i];
        Ok((
            self.blend(i, hermite::weights(s), 1.0),
            self.blend(i, hermite::slope_weights(s), 1.0 / h),
        ))
    }

    /// CSV with columns `t, a0, a1_1, ..., a2_6`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,{}", NAMES.join(","))?;
        for (t, a) in self.times.iter().zip(&self.values) {
            write!(out, "{}", fmt17(*t))?;
            for v in a.0 {
                write!(out, ",{}", fmt17(v))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Integrates the full ten-equation system backward from `T` with RK4.
pub fn solve_coefficients(spec: &ModelSpec, step: f64) -> Result<CoefficientPath> {
    let report = crate::model::validate(spec);
    if !report.is_ok() {
        return Err(Error::Validation(report.violations));
    }
    let times = uniform_grid(spec.horizon, step)?;
    let n = times.len() - 1;
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "step {step} gives {n} intervals on [0, {}]; at least 10 are required",
            spec.horizon
        )));
    }
    if let Some(time) = riccati_blow_up_time(spec.c, spec.terminal.c2[0], spec.horizon) {
        return Err(Error::RiccatiBlowUp { time });
    }

    let mut values = vec![Ansatz::ZERO; n + 1];
    values[n] = psi_to_terminal_conditions(&spec.terminal);
    check_state(spec.horizon, &values[n])?;
    for i in (0..n).rev() {
        let h = times[i] - times[i + 1];
        let next = rk4_step(spec, times[i + 1], &values[i + 1], h)?;
        check_magnitude(times[i], &next)?;
        check_state(times[i], &next)?;
        values[i] = next;
    }
    let slopes: Vec<Ansatz> = times
        .iter()
        .zip(&values)
        .map(|(t, a)| rhs(spec, *t, a))
        .collect();
    let rates: Vec<Ansatz> = times
        .iter()
        .zip(&values)
        .map(|(t, a)| rhs_rate(spec, *t, a))
        .collect();
    Ok(CoefficientPath {
        step: spec.horizon / n as f64,
        times,
        values,
        slopes,
        rates,
    })
}

/// Solves the linear `(a2_2, a2_3)` block on `grid` (increasing, ending at
/// `T`) with RK4, feeding it the closed-form `a2_1`.
pub fn solve_a22_a23(spec: &ModelSpec, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    if n < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "grid must be strictly increasing".into(),
        ));
    }
    if (grid[n - 1] - spec.horizon).abs() > TIME_SLACK {
        return Err(Error::InvalidArgument("grid must end at T".into()));
    }
    let c = spec.c;
    let c21 = spec.terminal.c2[0];
    let f = |t: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        let a21 = a21_closed_form(c, c21, spec.horizon, t)?;
        let [_, b1, b2] = spec.supply_drift.components(t);
        let k = 2.0 * a21 / c;
        Ok([
            (-b1 + k) * y[0] + c * b1 * y[1],
            -b2 * y[0] + (c * b2 + k) * y[1] + k,
        ])
    };
    let mut a22 = vec![0.0; n];
    let mut a23 = vec![0.0; n];
    a22[n - 1] = spec.terminal.c2[1];
    a23[n - 1] = spec.terminal.c2[2];
    for i in (0..n - 1).rev() {
        let (t, h) = (grid[i + 1], grid[i] - grid[i + 1]);
        let y = [a22[i + 1], a23[i + 1]];
        let k1 = f(t, y)?;
        let k2 = f(
            t + 0.5 * h,
            [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
        )?;
        let k3 = f(
            t + 0.5 * h,
            [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]],
        )?;
        let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]])?;
        a22[i] = y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        a23[i] = y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    Ok((a22, a23))
}

/// Feedback price coefficients and initial price.
///
/// `b^P_i = -c b^S_i` and `σ^P_i(t) = -σ^S_i(t) (c + a2_2(t)) / (1 + a2_3(t))`.
#[derive(Debug, Clone)]
pub struct PricingRule {
    pub c: f64,
    pub price_drift: AffineCoeff,
    pub supply_vol: AffineCoeff,
    pub w_bar: f64,
    coeffs: Arc<CoefficientPath>,
}

impl PricingRule {
    /// `(c + a2_2(t)) / (1 + a2_3(t))`, the factor mapping supply volatility
    /// to (minus) price volatility.
    pub fn vol_gain(&self, t: f64) -> Result<f64> {
        let a = self.coeffs.eval(t)?;
        gain(self.c, &a, t)
    }

    pub fn price_drift_at(&self, t: f64) -> [f64; 3] {
        self.price_drift.components(t)
    }

    pub fn price_vol_at(&self, t: f64) -> Result<[f64; 3]> {
        let k = self.vol_gain(t)?;
        Ok(self.supply_vol.components(t).map(|s| -s * k))
    }

    pub fn coefficients(&self) -> &Arc<CoefficientPath> {
        &self.coeffs
    }
}

pub(crate) fn gain(c: f64, a: &Ansatz, t: f64) -> Result<f64> {
    let d = 1.0 + a[A2_3];
    if !(d.abs() >= SINGULARITY_FLOOR) {
        return Err(Error::Singularity { time: t, value: d });
    }
    Ok((c + a[A2_2]) / d)
}

pub fn derive_pricing_rule(spec: &ModelSpec, coeffs: Arc<CoefficientPath>) -> Result<PricingRule> {
    let a = *coeffs.initial();
    let d = 1.0 + a[A2_3];
    if !(d.abs() >= SINGULARITY_FLOOR) {
        return Err(Error::Singularity {
            time: 0.0,
            value: d,
        });
    }
    let w_bar = -(a[A1_1] + 2.0 * a[A2_1] * spec.agents.mean + (a[A2_2] + spec.c) * spec.q_bar) / d;
    let price_drift = AffineCoeff {
        k0: scale_fn(&spec.supply_drift.k0, -spec.c),
        k1: scale_fn(&spec.supply_drift.k1, -spec.c),
        k2: scale_fn(&spec.supply_drift.k2, -spec.c),
    };
    Ok(PricingRule {
        c: spec.c,
        price_drift,
        supply_vol: spec.supply_vol.clone(),
        w_bar,
        coeffs,
    })
}

fn scale_fn(f: &crate::model::TimeFn, s: f64) -> crate::model::TimeFn {
    use crate::model::TimeFn;
    match f {
        TimeFn::Constant(v) => TimeFn::Constant(s * v),
        TimeFn::Tabulated { t_end, values } => TimeFn::Tabulated {
            t_end: *t_end,
            values: values.iter().map(|v| s * v).collect(),
        },
    }
}
