//! Embedded Dormand-Prince 5(4) stepping machinery on 2x2 matrix states,
//! with PI step-size control and 4th-order dense output. Coefficients are
//! the standard DOPRI5 tableau.

use nalgebra::Matrix2;

use crate::error::{Error, Result};

pub(crate) const STAGES: usize = 7;

// The flows integrated here are autonomous, so the tableau's c nodes never
// appear: stages only need the A rows.
const A: [[f64; 6]; STAGES] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// b - b_hat, applied to the stages to get the embedded error estimate.
const E: [f64; STAGES] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dense-output weights for the 4th-order continuous extension.
const D: [f64; STAGES] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
/// Step-ratio clamp: h may shrink by at most 1/FAC_SHRINK and grow by at
/// most FAC_GROW per step.
const FAC_SHRINK: f64 = 5.0;
const FAC_GROW: f64 = 10.0;
/// PI controller exponents for order 5.
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

pub(crate) type State = Matrix2<f64>;

/// One accepted step's stages plus everything needed to interpolate.
pub(crate) struct AcceptedStep {
    pub t0: f64,
    pub h: f64,
    pub y1: State,
    /// FSAL stage: f(t0 + h, y1), reusable as the next step's k1.
    pub k_last: State,
    rcont: [State; 5],
}

impl AcceptedStep {
    /// Evaluates the 4th-order interpolant at `t` in [t0, t0 + h].
    pub fn eval(&self, t: f64) -> State {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        self.rcont[0]
            + (self.rcont[1]
                + (self.rcont[2] + (self.rcont[3] + self.rcont[4] * theta1) * theta) * theta1)
                * theta
    }
}

pub(crate) struct Controller {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    err_old: f64,
}

impl Controller {
    pub fn new(rel_tol: f64, abs_tol: f64, max_step: f64) -> Self {
        Self { rel_tol, abs_tol, max_step, err_old: 1e-4 }
    }

    fn scaled_error(&self, err: &State, y0: &State, y1: &State) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            let sc = self.abs_tol + self.rel_tol * y0[i].abs().max(y1[i].abs());
            let e = err[i] / sc;
            acc += e * e;
        }
        (acc / 4.0).sqrt()
    }

    /// Classic automatic initial step-size selection from the state and
    /// slope magnitudes at t0.
    pub fn initial_step(&self, f: impl Fn(&State) -> State, y0: &State, t_span: f64) -> f64 {
        let k0 = f(y0);
        let sc = |y: &State, i: usize| self.abs_tol + self.rel_tol * y[i].abs();
        let norm = |v: &State, yref: &State| {
            let mut acc = 0.0;
            for i in 0..4 {
                let e = v[i] / sc(yref, i);
                acc += e * e;
            }
            (acc / 4.0).sqrt()
        };
        let d0 = norm(y0, y0);
        let d1 = norm(&k0, y0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(t_span);
        let y1 = y0 + k0 * h0;
        let k1 = f(&y1);
        let d2 = norm(&(k1 - k0), y0) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(t_span).min(self.max_step)
    }

    /// Takes accepted or rejected attempts until one step succeeds.
    /// `k1` must hold f(t, y) on entry (FSAL chaining).
    pub fn step(
        &mut self,
        f: impl Fn(&State) -> State,
        t: f64,
        y: &State,
        k1: &State,
        h_try: f64,
    ) -> Result<(AcceptedStep, f64)> {
        let mut h = h_try.min(self.max_step);
        loop {
            if h <= f64::EPSILON * t.abs().max(1.0) || !h.is_finite() {
                return Err(Error::StepSizeUnderflow { t, step: h });
            }
            let mut k = [State::zeros(); STAGES];
            k[0] = *k1;
            let mut y1 = *y;
            for s in 1..STAGES {
                let mut ys = *y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    ys += kj * (A[s][j] * h);
                }
                k[s] = f(&ys);
                if s == STAGES - 1 {
                    // The 5th-order weights equal the last A row, so the
                    // final stage input is already the solution (FSAL).
                    y1 = ys;
                }
            }
            let mut err_est = State::zeros();
            for (j, kj) in k.iter().enumerate() {
                err_est += kj * (E[j] * h);
            }
            let err = self.scaled_error(&err_est, y, &y1);

            if err <= 1.0 && err.is_finite() {
                // accept; PI growth uses the previous error too
                let fac = (err.powf(EXPO) / self.err_old.powf(BETA) / SAFETY)
                    .clamp(1.0 / FAC_GROW, FAC_SHRINK);
                let h_next = (h / fac).min(self.max_step);
                self.err_old = err.max(1e-4);

                let dy = y1 - y;
                let bspl = k[0] * h - dy;
                let mut rcont5 = State::zeros();
                for (j, kj) in k.iter().enumerate() {
                    rcont5 += kj * (D[j] * h);
                }
                let step = AcceptedStep {
                    t0: t,
                    h,
                    y1,
                    k_last: k[6],
                    rcont: [*y, dy, bspl, dy - k[6] * h - bspl, rcont5],
                };
                return Ok((step, h_next));
            }
            // reject and shrink (NaN error estimates shrink at the clamp)
            let shrink = if err.is_finite() {
                (err.powf(EXPO) / SAFETY).min(FAC_SHRINK)
            } else {
                FAC_SHRINK
            };
            h /= shrink;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Matrix-valued linear test problem with a closed-form solution:
    // y' = a*y gives y(t) = y0 * exp(a t) entrywise.
    fn integrate_linear(a: f64, t_end: f64, rel_tol: f64) -> (State, Vec<(f64, State)>) {
        let f = move |y: &State| y * a;
        let y0 = State::new(1.0, 0.5, 0.5, 2.0);
        let mut ctl = Controller::new(rel_tol, 1e-14, f64::INFINITY);
        let mut t = 0.0;
        let mut y = y0;
        let mut k1 = f(&y);
        let mut h = ctl.initial_step(f, &y, t_end);
        let mut dense_probes = Vec::new();
        while t < t_end {
            h = h.min(t_end - t);
            let (step, h_next) = ctl.step(f, t, &y, &k1, h).unwrap();
            let tm = step.t0 + 0.37 * step.h;
            dense_probes.push((tm, step.eval(tm)));
            t = step.t0 + step.h;
            y = step.y1;
            k1 = step.k_last;
            h = h_next;
        }
        (y, dense_probes)
    }

    #[test]
    fn exponential_decay_to_tolerance() {
        let (y, probes) = integrate_linear(-1.3, 5.0, 1e-9);
        let exact = (-1.3f64 * 5.0).exp();
        assert_relative_eq!(y[(0, 0)], exact, max_relative = 1e-8);
        assert_relative_eq!(y[(1, 1)], 2.0 * exact, max_relative = 1e-8);
        for (tm, ym) in probes {
            let ex = (-1.3f64 * tm).exp();
            assert_relative_eq!(ym[(0, 0)], ex, max_relative = 1e-6);
        }
    }

    #[test]
    fn rejects_vanishing_steps() {
        // An rhs that only produces NaN keeps every attempt rejected, so
        // the shrink loop must bottom out in a clean error.
        let f = |_: &State| State::from_element(f64::NAN);
        let y0 = State::from_element(1.4);
        let mut ctl = Controller::new(1e-8, 1e-12, f64::INFINITY);
        let k1 = State::from_element(1.0);
        let out = ctl.step(f, 0.0, &y0, &k1, 1.0);
        assert!(matches!(out, Err(Error::StepSizeUnderflow { .. })));
    }
}
