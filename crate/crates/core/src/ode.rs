//! Adaptive Dormand–Prince 5(4) integrator.
//!
//! Steps are clipped so that every requested output time is hit exactly; no
//! dense-output interpolation is involved, so sampled values carry the same
//! error control as the steps themselves.

use crate::error::{Error, Result};

/// A first-order system `dy/dt = f(t, y)` over a flat real state vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Called on every accepted state, e.g. to restore a symmetry lost to
    /// roundoff.
    fn project(&self, _y: &mut [f64]) {}

    /// Short description of a state, attached to step-underflow errors.
    fn describe(&self, _t: f64, _y: &[f64]) -> String {
        String::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub reltol: f64,
    pub abstol: f64,
    /// First trial step; estimated from the initial derivative when `None`.
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: u64,
}

impl StepControl {
    pub fn new(reltol: f64, abstol: f64) -> Self {
        StepControl {
            reltol,
            abstol,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("reltol", self.reltol), ("abstol", self.abstol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

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

// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

/// Integrates `sys` from `(t0, y0)` to `t_end`.
///
/// `on_output` receives `(t, y)` at `t0`, at every time in `outputs` (which
/// must be increasing and inside `(t0, t_end]`), at `t_end`, and after every
/// accepted step when `every_step` is set.
#[allow(clippy::too_many_arguments)]
pub fn integrate<S, F>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    outputs: &[f64],
    every_step: bool,
    control: &StepControl,
    mut on_output: F,
) -> Result<StepStats>
where
    S: OdeSystem + ?Sized,
    F: FnMut(f64, &[f64]) -> Result<()>,
{
    control.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::domain(format!("state length {} != system dim {n}", y0.len())));
    }
    if !(t_end > t0) {
        return Err(Error::domain(format!("t_end = {t_end} must exceed t0 = {t0}")));
    }
    let mut stops: Vec<f64> = outputs.iter().copied().filter(|&t| t > t0 && t < t_end).collect();
    if stops.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("output times must be increasing"));
    }
    stops.dedup();
    stops.push(t_end);

    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    sys.project(&mut y);
    let mut t = t0;
    on_output(t, &y)?;

    let mut st = Stages {
        k: std::array::from_fn(|_| vec![0.0; n]),
        tmp: vec![0.0; n],
        y_new: vec![0.0; n],
    };
    sys.rhs(t, &y, &mut st.k[0])?;
    stats.rhs_evals += 1;

    let mut h = match control.initial_step {
        Some(h) => h,
        // the estimate collapses for states starting at zero under a tiny abstol;
        // too large a trial step is merely rejected
        None => initial_step(sys, t, &y, &st.k[0], control, &mut stats)?.max(1e-6 * (t_end - t0)),
    }
    .min(control.max_step)
    .min(t_end - t0);

    let mut next_stop = 0usize;
    let mut last_rejected = false;
    while next_stop < stops.len() {
        if stats.accepted + stats.rejected >= control.max_steps {
            return Err(Error::Numeric(format!(
                "step budget of {} exhausted at t = {t}",
                control.max_steps
            )));
        }
        let target = stops[next_stop];
        let mut h_try = h;
        let clipped = t + h_try >= target;
        if clipped {
            h_try = target - t;
        }
        if h_try <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiff {
                t,
                step: h_try,
                diagnostic: sys.describe(t, &y),
            });
        }

        let err = attempt(sys, t, &y, h_try, &mut st, control)?;
        stats.rhs_evals += 6;

        if err <= 1.0 {
            stats.accepted += 1;
            t = if clipped { target } else { t + h_try };
            std::mem::swap(&mut y, &mut st.y_new);
            sys.project(&mut y);
            // FSAL: the last stage is the derivative at the new point
            st.k.swap(0, 6);
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            let grow = if last_rejected { grow.min(1.0) } else { grow };
            // a clipped step says nothing about how large the next may be
            h = if clipped { h.max(h_try * grow) } else { h_try * grow }.min(control.max_step);
            last_rejected = false;
            if clipped {
                next_stop += 1;
                on_output(t, &y)?;
            } else if every_step {
                on_output(t, &y)?;
            }
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if !h.is_finite() {
                h = 0.1 * h_try;
            }
        }
    }
    Ok(stats)
}

/// One Dormand–Prince step of size `h`; leaves the proposed state in
/// `st.y_new`, its derivative in `st.k[6]`, and returns the scaled error norm.
fn attempt<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    st: &mut Stages,
    control: &StepControl,
) -> Result<f64> {
    let n = y.len();
    let Stages { k, tmp, y_new } = st;
    let [k1, k2, k3, k4, k5, k6, k7] = k;

    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    sys.rhs(t + C2 * h, tmp, k2)?;
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    sys.rhs(t + C3 * h, tmp, k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    sys.rhs(t + C4 * h, tmp, k4)?;
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    sys.rhs(t + C5 * h, tmp, k5)?;
    for i in 0..n {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    sys.rhs(t + h, tmp, k6)?;
    for i in 0..n {
        y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    sys.rhs(t + h, y_new, k7)?;

    let mut acc = 0.0;
    for i in 0..n {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = control.abstol + control.reltol * y[i].abs().max(y_new[i].abs());
        let r = e / scale;
        acc += r * r;
    }
    let err = (acc / n as f64).sqrt();
    if !err.is_finite() {
        // force a rejection and a smaller step
        return Ok(1e10);
    }
    Ok(err)
}

/// Starting step from the size of the state and its first two derivatives.
fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    f0: &[f64],
    control: &StepControl,
    stats: &mut StepStats,
) -> Result<f64> {
    let n = y.len();
    let scale: Vec<f64> = y.iter().map(|v| control.abstol + control.reltol * v.abs()).collect();
    let rms =
        |v: &[f64]| -> f64 { (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt() };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t + h0, &y1, &mut f1)?;
    stats.rhs_evals += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = -self.0 * y[0];
            Ok(())
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn exponential_decay_hits_requested_times() {
        let stops = [0.5, 1.0, 2.0];
        let mut seen = Vec::new();
        integrate(
            &Decay(1.3),
            0.0,
            &[2.0],
            3.0,
            &stops,
            false,
            &StepControl::new(1e-10, 1e-12),
            |t, y| {
                seen.push((t, y[0]));
                Ok(())
            },
        )
        .unwrap();
        let times: Vec<f64> = seen.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.5, 1.0, 2.0, 3.0]);
        for (t, y) in seen {
            let want = 2.0 * (-1.3 * t).exp();
            assert!((y - want).abs() < 1e-9 * want.max(1e-3), "t={t}: {y} vs {want}");
        }
    }

    #[test]
    fn harmonic_oscillator_period() {
        let tp = 2.0 * std::f64::consts::PI;
        let mut last = vec![];
        integrate(
            &Oscillator,
            0.0,
            &[1.0, 0.0],
            10.0 * tp,
            &[],
            false,
            &StepControl::new(1e-11, 1e-13),
            |_, y| {
                last = y.to_vec();
                Ok(())
            },
        )
        .unwrap();
        assert!((last[0] - 1.0).abs() < 1e-8 && last[1].abs() < 1e-8, "{last:?}");
    }

    #[test]
    fn every_step_reports_accepted_steps() {
        let mut count = 0u64;
        let stats = integrate(
            &Decay(1.0),
            0.0,
            &[1.0],
            5.0,
            &[],
            true,
            &StepControl::new(1e-8, 1e-10),
            |_, _| {
                count += 1;
                Ok(())
            },
        )
        .unwrap();
        // initial point + every accepted step (the last one lands on t_end)
        assert_eq!(count, stats.accepted + 1);
    }

    struct Blowup;
    impl OdeSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[0] * y[0];
            Ok(())
        }
    }

    #[test]
    fn finite_time_singularity_is_reported_as_stiffness() {
        // y = 1/(1 − t) blows up at t = 1
        let res = integrate(
            &Blowup,
            0.0,
            &[1.0],
            2.0,
            &[],
            false,
            &StepControl::new(1e-8, 1e-10),
            |_, _| Ok(()),
        );
        match res {
            Err(Error::Stiff { t, .. }) => assert!((t - 1.0).abs() < 1e-3),
            other => panic!("expected stiffness error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerances() {
        let r = integrate(
            &Decay(1.0),
            0.0,
            &[1.0],
            1.0,
            &[],
            false,
            &StepControl::new(0.0, 1e-10),
            |_, _| Ok(()),
        );
        assert!(r.is_err());
    }
}
