//! Dormand–Prince 5(4) with embedded error estimate, for two-component
//! autonomous-in-form systems `y' = f(t, y)`.

pub(crate) type State = [f64; 2];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus the embedded fourth-order ones.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepFailure {
    Underflow { t: f64 },
    NonFinite { t: f64 },
}

/// One accepted step, with enough information for cubic Hermite interpolation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub t0: f64,
    pub y0: State,
    pub dy0: State,
    pub t1: f64,
    pub y1: State,
    pub dy1: State,
}

impl Step {
    /// Cubic Hermite interpolant of component `k` at `t`.
    pub fn interpolate(&self, k: usize, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y0[k] + h10 * h * self.dy0[k] + h01 * self.y1[k] + h11 * h * self.dy1[k]
    }

    /// Time in `[t0, t1]` where component `k` first equals `level`, assuming
    /// it is bracketed by the endpoint values.
    pub fn crossing(&self, k: usize, level: f64) -> f64 {
        let (mut lo, mut hi) = (self.t0, self.t1);
        let rising = self.y1[k] >= self.y0[k];
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let above = self.interpolate(k, mid) >= level;
            if above == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub(crate) struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Next trial step, carried across calls.
    pub h: f64,
}

impl Dopri5 {
    pub fn new(tol: f64, h_max: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_max,
            h: 0.0,
        }
    }

    /// Integrates from `(t, y)` to `t_end`, calling `on_step` after every
    /// accepted step. Returns the final state.
    pub fn run<F, S>(
        &mut self,
        mut f: F,
        mut t: f64,
        mut y: State,
        t_end: f64,
        mut on_step: S,
    ) -> Result<State, StepFailure>
    where
        F: FnMut(f64, &State) -> State,
        S: FnMut(&Step),
    {
        let mut k1 = f(t, &y);
        if self.h <= 0.0 {
            self.h = self.initial_step(&y, &k1).min(self.h_max);
        }
        while t < t_end {
            let h_min = 1e-12 * t.abs().max(1.0);
            let last = t + self.h >= t_end;
            let h = if last { t_end - t } else { self.h };
            if h < h_min && !last {
                return Err(StepFailure::Underflow { t });
            }

            let stage = |y: &State, terms: &[(f64, &State)]| -> State {
                let mut out = *y;
                for (a, k) in terms {
                    out[0] += h * a * k[0];
                    out[1] += h * a * k[1];
                }
                out
            };
            let k2 = f(t + C2 * h, &stage(&y, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &stage(&y, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &stage(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * h, &stage(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + h, &stage(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = stage(&y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + h, &y_new);

            let mut err: f64 = 0.0;
            for i in 0..2 {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
                if h <= h_min {
                    return Err(StepFailure::NonFinite { t });
                }
                self.h = 0.25 * h;
                continue;
            }

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                let t_new = if last { t_end } else { t + h };
                on_step(&Step {
                    t0: t,
                    y0: y,
                    dy0: k1,
                    t1: t_new,
                    y1: y_new,
                    dy1: k7,
                });
                t = t_new;
                y = y_new;
                k1 = k7;
                // A clipped final step says nothing about the natural size.
                if !last {
                    self.h = (h * factor).min(self.h_max);
                }
            } else {
                self.h = h * factor.min(1.0);
                if self.h < h_min {
                    return Err(StepFailure::Underflow { t });
                }
            }
        }
        Ok(y)
    }

    fn initial_step(&self, y: &State, dy: &State) -> f64 {
        let scale = |i: usize| self.atol + self.rtol * y[i].abs();
        let d0 = (0..2).map(|i| (y[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..2).map(|i| (dy[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
        if d0 < 1e-5 || d1 < 1e-5 {
            1e-3
        } else {
            (0.01 * d0 / d1).max(1e-6)
        }
    }
}
