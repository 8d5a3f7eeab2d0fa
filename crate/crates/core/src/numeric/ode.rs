//! Explicit Runge-Kutta steppers on fixed-size states.

pub type State<const N: usize> = [f64; N];

fn axpy<const N: usize>(y: &State<N>, h: f64, k: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (c, kv) in k {
        for i in 0..N {
            out[i] += h * c * kv[i];
        }
    }
    out
}

/// One classical fourth-order step.
pub fn rk4_step<const N: usize, E>(
    f: &mut impl FnMut(f64, &State<N>) -> Result<State<N>, E>,
    t: f64,
    y: &State<N>,
    h: f64,
) -> Result<State<N>, E> {
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]))?;
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]))?;
    let k4 = f(t + h, &axpy(y, h, &[(1.0, &k3)]))?;
    Ok(axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

/// One Dormand-Prince 5(4) step: fifth-order solution and embedded error vector.
pub fn dopri_step<const N: usize, E>(
    f: &mut impl FnMut(f64, &State<N>) -> Result<State<N>, E>,
    t: f64,
    y: &State<N>,
    h: f64,
) -> Result<(State<N>, State<N>), E> {
    let k1 = f(t, y)?;
    let k2 = f(t + h / 5.0, &axpy(y, h, &[(1.0 / 5.0, &k1)]))?;
    let k3 = f(t + 3.0 * h / 10.0, &axpy(y, h, &[(3.0 / 40.0, &k1), (9.0 / 40.0, &k2)]))?;
    let k4 = f(t + 4.0 * h / 5.0, &axpy(y, h, &[(44.0 / 45.0, &k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]))?;
    let k5 = f(
        t + 8.0 * h / 9.0,
        &axpy(
            y,
            h,
            &[(19372.0 / 6561.0, &k1), (-25360.0 / 2187.0, &k2), (64448.0 / 6561.0, &k3), (-212.0 / 729.0, &k4)],
        ),
    )?;
    let k6 = f(
        t + h,
        &axpy(
            y,
            h,
            &[
                (9017.0 / 3168.0, &k1),
                (-355.0 / 33.0, &k2),
                (46732.0 / 5247.0, &k3),
                (49.0 / 176.0, &k4),
                (-5103.0 / 18656.0, &k5),
            ],
        ),
    )?;
    let y5 = axpy(
        y,
        h,
        &[
            (35.0 / 384.0, &k1),
            (500.0 / 1113.0, &k3),
            (125.0 / 192.0, &k4),
            (-2187.0 / 6784.0, &k5),
            (11.0 / 84.0, &k6),
        ],
    );
    let k7 = f(t + h, &y5)?;
    let e = [
        (71.0 / 57600.0, &k1),
        (-71.0 / 16695.0, &k3),
        (71.0 / 1920.0, &k4),
        (-17253.0 / 339200.0, &k5),
        (22.0 / 525.0, &k6),
        (-1.0 / 40.0, &k7),
    ];
    let zero = [0.0; N];
    let err = axpy(&zero, h, &e);
    Ok((y5, err))
}

/// Max-norm of `err` relative to `atol + rtol * |y|`.
pub fn error_ratio<const N: usize>(err: &State<N>, y: &State<N>, atol: f64, rtol: f64) -> f64 {
    (0..N).map(|i| err[i].abs() / (atol + rtol * y[i].abs())).fold(0.0, f64::max)
}

/// Step-size factor for an accepted or rejected step with the given error ratio.
pub fn step_factor(ratio: f64) -> f64 {
    if ratio == 0.0 {
        5.0
    } else {
        (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrateError<E> {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step limit reached at t = {t}")]
    StepLimit { t: f64 },
    #[error(transparent)]
    Rhs(E),
}

/// Adaptive integration from `t0` to `t1` with local error `<= tol`
/// (mixed absolute/relative).
pub fn integrate_adaptive<const N: usize, E>(
    f: &mut impl FnMut(f64, &State<N>) -> Result<State<N>, E>,
    t0: f64,
    y0: State<N>,
    t1: f64,
    tol: f64,
) -> Result<State<N>, IntegrateError<E>> {
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = 0.05 * span.abs();
    let h_min = 1e-14 * span.abs().max(1.0);
    for _ in 0..1_000_000 {
        if (t1 - t) * dir <= 0.0 {
            return Ok(y);
        }
        h = h.min((t1 - t).abs());
        let (y5, err) = dopri_step(f, t, &y, dir * h).map_err(IntegrateError::Rhs)?;
        let ratio = error_ratio(&err, &y5, tol, tol);
        if ratio <= 1.0 {
            t += dir * h;
            if (t1 - t) * dir < h_min {
                t = t1;
            }
            y = y5;
        }
        h *= step_factor(ratio);
        if h < h_min {
            return Err(IntegrateError::StepUnderflow { t });
        }
    }
    Err(IntegrateError::StepLimit { t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn rk4_is_fourth_order() {
        let mut f = |_t: f64, y: &State<1>| -> Result<State<1>, Infallible> { Ok([y[0]]) };
        let mut err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0];
            for i in 0..n {
                y = rk4_step(&mut f, i as f64 * h, &y, h).unwrap();
            }
            (y[0] - 1f64.exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn adaptive_harmonic_oscillator() {
        let mut f = |_t: f64, y: &State<2>| -> Result<State<2>, Infallible> { Ok([y[1], -y[0]]) };
        let y = integrate_adaptive(&mut f, 0.0, [1.0, 0.0], 10.0, 1e-11).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8);
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
        let back = integrate_adaptive(&mut f, 10.0, y, 0.0, 1e-11).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rhs_errors_propagate() {
        let mut f = |t: f64, y: &State<1>| if t > 0.5 { Err("boom") } else { Ok([y[0]]) };
        let r = integrate_adaptive(&mut f, 0.0, [1.0], 1.0, 1e-8);
        assert_eq!(r, Err(IntegrateError::Rhs("boom")));
    }
}
