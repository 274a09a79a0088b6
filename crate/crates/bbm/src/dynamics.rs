//! Finite-dimensional dynamics of the soliton parameters and the separation law.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, BbmError, Result};
use crate::profiles::InteractionConstants;

/// Separation scale `Y0 = |ln(mu0^2 / alpha)|`.
pub fn separation_scale(mu0: f64, alpha: f64) -> f64 {
    (mu0 * mu0 / alpha).ln().abs()
}

/// Speed scale recovered from `Y0`: `mu0 = sqrt(alpha e^{-Y0})`.
pub fn speed_scale(y0: f64, alpha: f64) -> f64 {
    (alpha * (-y0).exp()).sqrt()
}

/// Closed-form separation `Y(t) = Y0 + 2 ln cosh(mu0 t)` and its derivative.
pub fn closed_y(t: f64, y0: f64, mu0: f64) -> (f64, f64) {
    let z = (mu0 * t).abs();
    // ln cosh z = z + ln(1 + e^{-2z}) - ln 2, stable for large z.
    let lncosh = z + (-2.0 * z).exp().ln_1p() - std::f64::consts::LN_2;
    (y0 + 2.0 * lncosh, 2.0 * mu0 * (mu0 * t).tanh())
}

/// Reduced separation dynamics `Y'' = 2 alpha e^{-Y}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub y: f64,
    pub dy: f64,
    pub y0: f64,
    pub mu0: f64,
}

impl ReducedState {
    /// State on the closed-form solution at time `t`.
    pub fn on_closed_form(t: f64, mu0: f64, alpha: f64) -> Result<Self> {
        if mu0 <= 0.0 || alpha <= 0.0 {
            return Err(invalid("mu0 and alpha must be positive"));
        }
        let y0 = separation_scale(mu0, alpha);
        let (y, dy) = closed_y(t, y0, mu0);
        Ok(Self { y, dy, y0, mu0 })
    }

    /// `dY^2 + 4 alpha e^{-Y}`, equal to `4 mu0^2` on exact solutions.
    pub fn first_integral(&self, alpha: f64) -> f64 {
        self.dy * self.dy + 4.0 * alpha * (-self.y).exp()
    }
}

/// Integrates the reduced ODE with classical RK4 and returns the samples at every step.
pub fn integrate_reduced(
    start: ReducedState,
    alpha: f64,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<(f64, ReducedState)>> {
    let steps = step_count(t0, t1, dt)?;
    let h = (t1 - t0) / steps as f64;
    let f = |s: [f64; 2]| [s[1], 2.0 * alpha * (-s[0]).exp()];
    let mut s = [start.y, start.dy];
    let mut out = Vec::with_capacity(steps + 1);
    out.push((t0, start));
    for i in 1..=steps {
        s = rk4(&f, s, h);
        let t = t0 + i as f64 * h;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(BbmError::NonFinite { time: t });
        }
        out.push((t, ReducedState { y: s[0], dy: s[1], ..start }));
    }
    Ok(out)
}

/// Soliton speeds and positions `(mu1, mu2, y1, y2)`, soliton 1 on the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub mu1: f64,
    pub mu2: f64,
    pub y1: f64,
    pub y2: f64,
}

impl PairParams {
    pub fn new(mu1: f64, mu2: f64, y1: f64, y2: f64) -> Self {
        Self { mu1, mu2, y1, y2 }
    }

    pub fn separation(&self) -> f64 {
        self.y1 - self.y2
    }

    pub fn relative_speed(&self) -> f64 {
        self.mu1 - self.mu2
    }

    pub fn speed_sum(&self) -> f64 {
        self.mu1 + self.mu2
    }

    pub fn position_sum(&self) -> f64 {
        self.y1 + self.y2
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.mu1, self.mu2, self.y1, self.y2]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Symmetric parameters on the closed-form separation law at time `t`.
    pub fn symmetric_on_closed_form(t: f64, mu0: f64, alpha: f64) -> Self {
        let (y, dy) = closed_y(t, separation_scale(mu0, alpha), mu0);
        Self::new(0.5 * dy, -0.5 * dy, 0.5 * y, -0.5 * y)
    }
}

/// Which terms of the parameter system are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhsOrder {
    /// All terms `M_j`, `N_j`.
    Full,
    /// Only the attraction `alpha e^{-y}`.
    Leading,
}

/// Forcing terms `(M1, M2, N1, N2)`.
pub fn forcing(p: &PairParams, c: &InteractionConstants) -> [f64; 4] {
    let y = p.separation();
    let e = (-y).exp();
    let m1 = c.alpha * e + c.beta * p.mu1 * y * e + c.delta * p.mu1 * e;
    let m2 = -c.alpha * e - c.beta * p.mu2 * y * e - c.delta * p.mu2 * e;
    let n1 = c.a * e + c.b1 * p.mu1 * y * e + c.d1 * p.mu1 * e;
    let n2 = c.a * e + c.b2 * p.mu2 * y * e + c.d2 * p.mu2 * e;
    [m1, m2, n1, n2]
}

/// Time derivative `(mu1', mu2', y1', y2') = (M1, M2, mu1 - N1, mu2 - N2)`.
pub fn ode_rhs(p: &PairParams, c: &InteractionConstants, order: RhsOrder) -> PairParams {
    match order {
        RhsOrder::Full => {
            let [m1, m2, n1, n2] = forcing(p, c);
            PairParams::new(m1, m2, p.mu1 - n1, p.mu2 - n2)
        }
        RhsOrder::Leading => {
            let m = c.alpha * (-p.separation()).exp();
            PairParams::new(m, -m, p.mu1, p.mu2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PairParams>,
    /// Step-halving error estimate per unit time.
    pub error_per_unit_time: f64,
}

impl Trajectory {
    /// CSV with columns `t, mu1, mu2, y1, y2, Y_closed, separation`.
    pub fn to_csv(&self, y0: f64, mu0: f64) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| invalid(e.to_string());
        w.write_record(["t", "mu1", "mu2", "y1", "y2", "Y_closed", "separation"]).map_err(io)?;
        for (t, p) in self.times.iter().zip(&self.states) {
            let yc = closed_y(*t, y0, mu0).0;
            let row = [*t, p.mu1, p.mu2, p.y1, p.y2, yc, p.separation()];
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
    }

    /// Number of sign changes of `mu1 - mu2`.
    pub fn relative_speed_sign_changes(&self) -> usize {
        sign_changes(self.states.iter().map(|p| p.relative_speed()))
    }
}

/// Counts strict sign changes, ignoring exact zeros.
pub fn sign_changes(values: impl IntoIterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for v in values {
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
    }
    count
}

/// Integrates the parameter system with RK4, reporting a step-halving error estimate.
pub fn integrate_full(
    initial: PairParams,
    c: &InteractionConstants,
    order: RhsOrder,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = step_count(t0, t1, dt)?;
    let coarse = integrate_fixed(initial, c, order, t0, t1, steps)?;
    let fine = integrate_fixed(initial, c, order, t0, t1, 2 * steps)?;
    let mut err = 0.0f64;
    for (i, s) in coarse.1.iter().enumerate() {
        let f = fine.1[2 * i].to_array();
        let d = s.to_array().iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        err = err.max(d);
    }
    let span = (t1 - t0).abs().max(1.0);
    let times = fine.0;
    let states = fine.1;
    Ok(Trajectory { times, states, error_per_unit_time: err / span })
}

fn integrate_fixed(
    initial: PairParams,
    c: &InteractionConstants,
    order: RhsOrder,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<(Vec<f64>, Vec<PairParams>)> {
    let h = (t1 - t0) / steps as f64;
    let f = |s: [f64; 4]| ode_rhs(&PairParams::from_array(s), c, order).to_array();
    let mut s = initial.to_array();
    let mut times = vec![t0];
    let mut states = vec![initial];
    for i in 1..=steps {
        s = rk4(&f, s, h);
        let t = t0 + i as f64 * h;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(BbmError::NonFinite { time: t });
        }
        times.push(t);
        states.push(PairParams::from_array(s));
    }
    Ok((times, states))
}

fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !t0.is_finite() || !t1.is_finite() {
        return Err(invalid("time span must be finite and dt positive"));
    }
    Ok(((t1 - t0).abs() / dt).ceil().max(1.0) as usize)
}

fn rk4<const N: usize>(f: &impl Fn([f64; N]) -> [f64; N], s: [f64; N], h: f64) -> [f64; N] {
    let add = |a: [f64; N], b: [f64; N], w: f64| std::array::from_fn(|i| a[i] + w * b[i]);
    let k1 = f(s);
    let k2 = f(add(s, k1, 0.5 * h));
    let k3 = f(add(s, k2, 0.5 * h));
    let k4 = f(add(s, k3, h));
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constants() -> InteractionConstants {
        InteractionConstants {
            alpha: 16.0,
            beta: 8.0,
            delta: -32.0,
            a: 4.0,
            b1: -3.3,
            b2: -3.1,
            d1: -61.0,
            d2: -60.0,
            theta: 1.0 / 3.0,
            theta_a: 12.0,
            theta_b: 0.0,
            theta_d: 0.0,
        }
    }

    #[test]
    fn closed_form_basics() {
        let (y, dy) = closed_y(0.0, 7.0, 0.1);
        assert_eq!((y, dy), (7.0, 0.0));
        for t in [-300.0, -100.0, -30.0] {
            let (_, dy) = closed_y(t, 7.0, 0.1);
            assert!((dy + 0.2).abs() <= 0.2 * 2.0 * (-0.2 * t.abs()).exp() + 1e-16);
        }
        for i in -200..=200 {
            let t = i as f64;
            let (y, _) = closed_y(t, 7.0, 0.1);
            let gap = y - (7.0 + 0.2 * t.abs() - 2.0 * std::f64::consts::LN_2);
            assert!(gap >= -1e-12 && gap <= 2.0 * (-0.2 * t.abs()).exp() + 1e-12);
        }
    }

    #[test]
    fn rhs_examples() {
        let c = constants();
        let p = PairParams::new(0.0, 0.0, 4.0, -4.0);
        let d = ode_rhs(&p, &c, RhsOrder::Full);
        let e = (-8.0f64).exp();
        assert_abs_diff_eq!(d.mu1, 16.0 * e, epsilon = 1e-18);
        assert_eq!(d.mu1, -d.mu2);
        assert_abs_diff_eq!(d.y1, -4.0 * e, epsilon = 1e-18);
        assert_abs_diff_eq!(d.y2, -4.0 * e, epsilon = 1e-18);
        // Antisymmetric data: the attraction cancels pairwise and the speed-dependent
        // terms add up to (mu1 - mu2)(beta y + delta) e^{-y}.
        let q = PairParams::new(0.07, -0.07, 3.0, -3.0);
        let d = ode_rhs(&q, &c, RhsOrder::Full);
        let expected = 0.14 * (8.0 * 6.0 - 32.0) * (-6.0f64).exp();
        assert_abs_diff_eq!(d.mu1 + d.mu2, expected, epsilon = 1e-16);
        let d = ode_rhs(&q, &c, RhsOrder::Leading);
        assert_eq!(d.mu1 + d.mu2, 0.0);
        let far = ode_rhs(&PairParams::new(0.1, -0.1, 500.0, -500.0), &c, RhsOrder::Full);
        assert!(far.mu1.abs() < 1e-300 && (far.y1 - 0.1).abs() < 1e-300);
    }

    #[test]
    fn first_integral_conserved() {
        let (mu0, alpha) = (0.1, 16.0);
        let s = ReducedState::on_closed_form(-80.0, mu0, alpha).unwrap();
        let path = integrate_reduced(s, alpha, -80.0, 80.0, 0.01).unwrap();
        for (_, r) in &path {
            assert!((r.first_integral(alpha) - 4.0 * mu0 * mu0).abs() < 1e-10);
        }
        let (_, end) = path.last().unwrap();
        assert!((end.y - s.y).abs() < 1e-8);
        assert!((end.dy + s.dy).abs() < 1e-9);
    }

    #[test]
    fn reduced_integrator_fourth_order() {
        let alpha = 16.0;
        let s = ReducedState::on_closed_form(-40.0, 0.2, alpha).unwrap();
        let err = |dt: f64| {
            let (t, r) = *integrate_reduced(s, alpha, -40.0, 20.0, dt).unwrap().last().unwrap();
            (r.y - closed_y(t, s.y0, s.mu0).0).abs()
        };
        let order = (err(0.2) / err(0.1)).log2();
        assert!(order > 3.8, "{order}");
    }

    #[test]
    fn csv_columns() {
        let c = constants();
        let p = PairParams::symmetric_on_closed_form(-10.0, 0.2, c.alpha);
        let tr = integrate_full(p, &c, RhsOrder::Full, -10.0, 10.0, 0.05).unwrap();
        let csv = tr.to_csv(separation_scale(0.2, c.alpha), 0.2).unwrap();
        assert!(csv.starts_with("t,mu1,mu2,y1,y2,Y_closed,separation\n"));
        assert_eq!(csv.lines().count(), tr.times.len() + 1);
        assert!(tr.error_per_unit_time < 1e-10);
    }

    #[test]
    fn sign_change_counting() {
        assert_eq!(sign_changes([-1.0, -0.5, 0.0, 0.2, 0.1]), 1);
        assert_eq!(sign_changes([1.0, -1.0, 1.0]), 2);
    }
}
