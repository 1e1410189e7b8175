//! Classic fourth-order Runge-Kutta with step-doubling error control and
//! cubic-Hermite dense output. Small and allocation-free on purpose: the
//! valve/tank subsystem is at most three components and gets stepped millions
//! of times per run.

use crate::scalar::Scalar;

fn rk4_step<T: Scalar, const N: usize>(
    f: &mut impl FnMut(T, &[T; N]) -> [T; N],
    t: T,
    y: &[T; N],
    h: T,
) -> [T; N] {
    let half = T::lit(0.5);
    let sixth = T::lit(1.0 / 6.0);
    let k1 = f(t, y);
    let mut y2 = *y;
    for i in 0..N {
        y2[i] = y[i] + half * h * k1[i];
    }
    let k2 = f(t + half * h, &y2);
    let mut y3 = *y;
    for i in 0..N {
        y3[i] = y[i] + half * h * k2[i];
    }
    let k3 = f(t + half * h, &y3);
    let mut y4 = *y;
    for i in 0..N {
        y4[i] = y[i] + h * k3[i];
    }
    let k4 = f(t + h, &y4);
    let mut out = *y;
    for i in 0..N {
        out[i] = y[i] + h * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

/// One accepted adaptive substep.
#[derive(Debug, Clone, Copy)]
pub struct AcceptedStep<T, const N: usize> {
    pub t0: T,
    pub y0: [T; N],
    pub f0: [T; N],
    pub t1: T,
    pub y1: [T; N],
    pub f1: [T; N],
}

impl<T: Scalar, const N: usize> AcceptedStep<T, N> {
    /// Cubic Hermite interpolation of component `idx` at time `t`.
    pub fn interpolate(&self, idx: usize, t: T) -> T {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        h00 * self.y0[idx] + h10 * h * self.f0[idx] + h01 * self.y1[idx] + h11 * h * self.f1[idx]
    }

    /// Locate `t` in (t0, t1] where component `idx` equals `target`,
    /// by bisection on the Hermite interpolant to the given tolerance in the
    /// component value. Returns `t1` if no bracketing is found.
    pub fn locate_crossing(&self, idx: usize, target: T, value_tol: T) -> T {
        let g = |t: T| self.interpolate(idx, t) - target;
        let mut lo = self.t0;
        let mut hi = self.t1;
        let mut g_lo = self.y0[idx] - target;
        let g_hi = self.y1[idx] - target;
        if (g_lo <= T::zero()) == (g_hi <= T::zero()) {
            return self.t1;
        }
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            let g_mid = g(mid);
            if g_mid.abs() <= value_tol {
                return mid;
            }
            if (g_lo <= T::zero()) == (g_mid <= T::zero()) {
                lo = mid;
                g_lo = g_mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / T::lit(2.0)
    }

    /// Earliest time in (t0, t1] where component `idx` reaches `target` from
    /// the side it starts on, including interior excursions that recross
    /// before the endpoint. `positive_direction` selects crossings where the
    /// component increases through the target. Scans the dense output on a
    /// fine grid for the first bracket, then bisects it.
    pub fn locate_first_crossing(
        &self,
        idx: usize,
        target: T,
        positive_direction: bool,
        value_tol: T,
    ) -> Option<T> {
        let span = self.t1 - self.t0;
        let beyond = |v: T| {
            if positive_direction {
                v >= target
            } else {
                v <= target
            }
        };
        let n = 64;
        let mut t_prev = self.t0;
        for k in 1..=n {
            let t = self.t0 + span * T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
            let v = if k == n { self.y1[idx] } else { self.interpolate(idx, t) };
            if beyond(v) {
                // Bisect [t_prev, t] down to the value tolerance.
                let mut lo = t_prev;
                let mut hi = t;
                for _ in 0..200 {
                    let mid = (lo + hi) / T::lit(2.0);
                    let vm = self.interpolate(idx, mid);
                    if (vm - target).abs() <= value_tol {
                        return Some(mid);
                    }
                    if beyond(vm) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some((lo + hi) / T::lit(2.0));
            }
            t_prev = t;
        }
        None
    }
}

/// Error-controlled RK4 via step doubling (one full step against two half
/// steps, Richardson estimate).
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveRk4<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub h: T,
    pub h_min: T,
}

impl<T: Scalar> AdaptiveRk4<T> {
    pub fn new(rel_tol: T, h_init: T) -> Self {
        Self { rel_tol, abs_tol: T::lit(1e-300), h: h_init, h_min: T::lit(1e-15) }
    }

    /// Advance one accepted substep from (t, y), not exceeding `t_end`.
    pub fn step<const N: usize>(
        &mut self,
        f: &mut impl FnMut(T, &[T; N]) -> [T; N],
        t: T,
        y: &[T; N],
        t_end: T,
        scale: &[T; N],
    ) -> AcceptedStep<T, N> {
        let half = T::lit(0.5);
        loop {
            let h = self.h.min(t_end - t).max(self.h_min);
            let full = rk4_step(f, t, y, h);
            let mid = rk4_step(f, t, y, h * half);
            let fine = rk4_step(f, t + h * half, &mid, h * half);

            let mut err = T::zero();
            for i in 0..N {
                let tol = self.abs_tol + self.rel_tol * (y[i].abs().max(fine[i].abs()) + scale[i]);
                err = err.max((fine[i] - full[i]).abs() / (T::lit(15.0) * tol));
            }

            if err <= T::one() || h <= self.h_min * T::lit(2.0) {
                let growth = if err > T::zero() {
                    (T::one() / err).powf(T::lit(0.2)).min(T::lit(4.0)).max(T::lit(0.1))
                } else {
                    T::lit(4.0)
                };
                self.h = (h * T::lit(0.9) * growth).max(self.h_min);
                let f0 = f(t, y);
                let f1 = f(t + h, &fine);
                return AcceptedStep { t0: t, y0: *y, f0, t1: t + h, y1: fine, f1 };
            }
            self.h = (h * T::lit(0.9) * (T::one() / err).powf(T::lit(0.2)).max(T::lit(0.1)))
                .max(self.h_min);
        }
    }
}
