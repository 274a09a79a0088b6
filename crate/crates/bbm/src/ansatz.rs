//! Two-soliton ansatz `V0`, its cut-off version `V`, and the residual `E0` of `V0`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{forcing, integrate_full, speed_scale, PairParams, RhsOrder};
use crate::error::{invalid, BbmError, Result};
use crate::grid::{resample_spectrum, Grid, GridFunction, Spectral};
use crate::profiles::{Profile, ProfileFamily};
use crate::soliton::{lambda_q_jet, q_derivs, soliton_jet};

/// Upper bound `y <= K Y0` of the modulation regime.
pub const SEPARATION_FACTOR: f64 = 2.0;

/// The weighted sup is taken over `x - y1 <= WEIGHT_WINDOW`. Beyond it the weight exceeds
/// `e^10` and multiplies the roundoff floor of third spectral derivatives, while the true
/// weighted residual keeps decaying like `e^{-(x - y1)/2}`.
pub const WEIGHT_WINDOW: f64 = 20.0;

/// Smooth monotone cut-off: 0 on `s <= 0`, 1 on `s >= 1/2`,
/// `psi(s) = f(2s) / (f(2s) + f(1 - 2s))` with `f(t) = exp(-1/t)` for `t > 0`.
pub fn cutoff(s: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (f(2.0 * s), f(1.0 - 2.0 * s));
    if a == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Parameters of the ansatz together with the separation scale `Y0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzState {
    pub gamma: PairParams,
    pub y0: f64,
}

impl AnsatzState {
    /// Checks the modulation-regime bounds for the speed scale `sqrt(alpha e^{-Y0})`.
    pub fn new(gamma: PairParams, y0: f64, alpha: f64) -> Result<Self> {
        let mu0 = speed_scale(y0, alpha);
        let fail = |m: String| Err(BbmError::OutsideModulation(m));
        if gamma.separation() < y0 - 1.0 {
            return fail(format!("separation {} below Y0 - 1", gamma.separation()));
        }
        if gamma.mu1.abs() > 2.0 * mu0 || gamma.mu2.abs() > 2.0 * mu0 {
            return fail(format!("speeds ({}, {}) exceed 2 mu0 = {}", gamma.mu1, gamma.mu2, 2.0 * mu0));
        }
        if gamma.speed_sum().abs() > y0 * y0 * (-y0).exp() {
            return fail(format!("speed sum {} too large", gamma.speed_sum()));
        }
        if gamma.position_sum().abs() > y0.powi(4) * (-0.5 * y0).exp() {
            return fail(format!("position sum {} too large", gamma.position_sum()));
        }
        Ok(Self { gamma, y0 })
    }
}

/// Values and first three derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Jet([f64; 4]);

impl Jet {
    fn product(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        Jet([
            a[0] * b[0],
            a[1] * b[0] + a[0] * b[1],
            a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
            a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3],
        ])
    }

    /// Derivative jet; its third derivative is not available and is left at zero.
    fn prime(self) -> Jet {
        Jet([self.0[1], self.0[2], self.0[3], 0.0])
    }

    /// `(1 - lambda d^2) f`.
    fn helmholtz(self, lambda: f64) -> f64 {
        self.0[0] - lambda * self.0[2]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(o.0.map(|v| self * v))
    }
}

/// Evaluates profiles of a family at shifted points of an arbitrary grid with the same spacing.
pub struct Ansatz {
    family: ProfileFamily,
    sp: Spectral,
    spectra: [Vec<Complex64>; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Which {
    A1,
    A2,
    B1,
    B2,
    D1,
    D2,
}

/// Everything needed pointwise to assemble `V0` and `E0`.
struct Fields {
    xs: Vec<f64>,
    profiles: [Vec<Jet>; 6],
}

impl Ansatz {
    pub fn new(family: ProfileFamily) -> Self {
        let sp = Spectral::new(family.grid);
        let p = &family.profiles;
        let spectra = [&p.a1, &p.a2, &p.b1, &p.b2, &p.d1, &p.d2].map(|q| sp.forward(q.decaying.values()));
        Self { family, sp, spectra }
    }

    pub fn family(&self) -> &ProfileFamily {
        &self.family
    }

    fn profile(&self, w: Which) -> &Profile {
        let p = &self.family.profiles;
        match w {
            Which::A1 => &p.a1,
            Which::A2 => &p.a2,
            Which::B1 => &p.b1,
            Which::B2 => &p.b2,
            Which::D1 => &p.d1,
            Which::D2 => &p.d2,
        }
    }

    /// Jets of the full profile `P(x - shift)` on `target`.
    fn profile_jets(&self, w: Which, target: &Grid, shift: f64) -> Result<Vec<Jet>> {
        let d = resample_spectrum(&self.sp, &self.spectra[w as usize], 0..=3, target, shift)?;
        let p = self.profile(w);
        Ok((0..target.n)
            .map(|i| {
                let t = p.tail_jet(target.x(i) - shift);
                Jet(std::array::from_fn(|k| d[k][i] + t[k]))
            })
            .collect())
    }

    fn fields(&self, gamma: &PairParams, target: &Grid) -> Result<Fields> {
        use Which::*;
        let (y1, y2) = (gamma.y1, gamma.y2);
        let profiles = [
            self.profile_jets(A1, target, y1)?,
            self.profile_jets(A2, target, y2)?,
            self.profile_jets(B1, target, y1)?,
            self.profile_jets(B2, target, y2)?,
            self.profile_jets(D1, target, y1)?,
            self.profile_jets(D2, target, y2)?,
        ];
        Ok(Fields { xs: target.points(), profiles })
    }

    /// `V0` on `target` (spacing must match the family grid).
    pub fn assemble_v0(&self, state: &AnsatzState, target: &Grid) -> Result<GridFunction> {
        let f = self.fields(&state.gamma, target)?;
        let values = (0..f.xs.len()).map(|i| self.point(state, &f, i).v.0[0]).collect();
        GridFunction::new(*target, values)
    }

    /// `V = V0 psi(e^{-Y0/2} x + 1)`.
    pub fn assemble_v(&self, state: &AnsatzState, target: &Grid) -> Result<GridFunction> {
        let v0 = self.assemble_v0(state, target)?;
        let s = (-0.5 * state.y0).exp();
        let values = v0
            .values()
            .iter()
            .zip(target.points())
            .map(|(v, x)| v * cutoff(s * x + 1.0))
            .collect();
        GridFunction::new(*target, values)
    }

    /// `E0` of `V0` on `target`, with the soliton traveling-wave identities removed analytically.
    pub fn residual(&self, state: &AnsatzState, target: &Grid) -> Result<GridFunction> {
        let f = self.fields(&state.gamma, target)?;
        let values = (0..f.xs.len()).map(|i| self.point(state, &f, i).e0).collect();
        GridFunction::new(*target, values)
    }

    fn point(&self, state: &AnsatzState, f: &Fields, i: usize) -> PointValues {
        let fam = &self.family;
        let c = &fam.constants;
        let l = fam.lambda;
        let g = &state.gamma;
        let x = f.xs[i];
        let y = g.separation();
        let (mu1, mu2) = (g.mu1, g.mu2);
        let h = (-y).exp();
        let gy = y * h;
        let dgy = (1.0 - y) * h;
        let [a1, a2, b1, b2, d1, d2] = [0, 1, 2, 3, 4, 5].map(|k| f.profiles[k][i]);
        let (s1, s2) = (x - g.y1, x - g.y2);
        let r1 = Jet(soliton_jet(mu1, l, s1));
        let r2 = Jet(soliton_jet(mu2, l, s2));
        let lr1 = Jet(lambda_q_jet(mu1, l, s1));
        let lr2 = Jet(lambda_q_jet(mu2, l, s2));
        let qd1 = q_derivs(s1);
        let qd2 = q_derivs(s2);
        let q1 = Jet([qd1[0], qd1[1], qd1[2], qd1[3]]);
        let q2 = Jet([qd2[0], qd2[1], qd2[2], qd2[3]]);
        let dq1 = Jet([qd1[1], qd1[2], qd1[3], qd1[4]]);
        let dq2 = Jet([qd2[1], qd2[2], qd2[3], qd2[4]]);
        let xj = Jet([x, 1.0, 0.0, 0.0]);
        let xqq = xj.product(q1).product(q2);
        let mu = mu1 - mu2;

        let a = h * (a1 + a2);
        let bsum = mu1 * b1 + mu2 * b2;
        let dsum = mu1 * d1 + mu2 * d2;
        let w = a + (c.theta * mu) * xqq + gy * bsum + h * dsum;

        let dmu1_w = c.theta * xqq + gy * b1 + h * d1;
        let dmu2_w = (-c.theta) * xqq + gy * b2 + h * d2;
        let dmu1 = lr1 + dmu1_w;
        let dmu2 = lr2 + dmu2_w;
        let dy1_w = (-1.0 * a) - h * a1.prime()
            - (c.theta * mu) * xj.product(dq1).product(q2)
            + dgy * bsum
            - (gy * mu1) * b1.prime()
            - h * dsum
            - (h * mu1) * d1.prime();
        let dy2_w = a - h * a2.prime() - (c.theta * mu) * xj.product(q1).product(dq2) - dgy * bsum
            - (gy * mu2) * b2.prime()
            + h * dsum
            - (h * mu2) * d2.prime();

        let [m1, m2, n1, n2] = forcing(g, c);
        let time = (m1 * dmu1 + n1 * r1.prime() + (mu1 - n1) * dy1_w).helmholtz(l)
            + (m2 * dmu2 + n2 * r2.prime() + (mu2 - n2) * dy2_w).helmholtz(l);
        let rr = r1.product(r2);
        let rw = (r1 + r2).product(w);
        let e0 = time + w.0[3] - w.0[1] + 2.0 * rr.0[1] + 2.0 * rw.0[1] + 2.0 * w.0[0] * w.0[1];
        PointValues {
            v: r1 + r2 + w,
            e0,
            solitons: r1.0[0] + r2.0[0],
            w: w.0[0],
            soliton_tangents: [lr1.0[0], lr2.0[0], -r1.0[1], -r2.0[1]],
            w_tangents: [dmu1_w.0[0], dmu2_w.0[0], dy1_w.0[0], dy2_w.0[0]],
        }
    }

    /// `R1 + R2 + psi W` and its derivatives in `(mu1, mu2, y1, y2)`. The cut-off acts on the
    /// correction only, so the soliton tails are never truncated at moderate `Y0`.
    pub fn tracking_field(&self, state: &AnsatzState, target: &Grid) -> Result<TrackingField> {
        let f = self.fields(&state.gamma, target)?;
        let s = (-0.5 * state.y0).exp();
        let n = f.xs.len();
        let mut v = Vec::with_capacity(n);
        let mut tangents: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
        for i in 0..n {
            let p = self.point(state, &f, i);
            let psi = cutoff(s * f.xs[i] + 1.0);
            v.push(p.solitons + psi * p.w);
            for (k, t) in tangents.iter_mut().enumerate() {
                t.push(p.soliton_tangents[k] + psi * p.w_tangents[k]);
            }
        }
        Ok(TrackingField { v: GridFunction::new(*target, v)?, tangents })
    }

    /// Grid of the family spacing covering both solitons with 40 units of margin.
    pub fn scan_grid(&self, gamma: &PairParams) -> Result<Grid> {
        let dx = self.family.grid.dx();
        let lo = gamma.y2 - 40.0;
        let hi = gamma.y1 + 40.0;
        let mut n = ((hi - lo) / dx).ceil() as usize;
        n += n % 2;
        Grid::new(lo, n as f64 * dx, n)
    }

    /// `sup (1 + e^{(x - y1)/2}) |E0| / (e^{-Y0} e^{-y})` at one parameter point.
    pub fn normalized_residual(&self, state: &AnsatzState) -> Result<f64> {
        let grid = self.scan_grid(&state.gamma)?;
        let e0 = self.residual(state, &grid)?;
        let g = state.gamma;
        let sup = e0
            .values()
            .iter()
            .zip(grid.points())
            .filter(|(_, x)| x - g.y1 <= WEIGHT_WINDOW)
            .map(|(e, x)| (1.0 + (0.5 * (x - g.y1)).exp()) * e.abs())
            .fold(0.0, f64::max);
        Ok(sup / (-state.y0 - g.separation()).exp())
    }
}

struct PointValues {
    v: Jet,
    e0: f64,
    solitons: f64,
    w: f64,
    soliton_tangents: [f64; 4],
    w_tangents: [f64; 4],
}

/// A two-soliton field on a grid with its derivatives in `(mu1, mu2, y1, y2)`.
#[derive(Debug, Clone)]
pub struct TrackingField {
    pub v: GridFunction,
    pub tangents: [Vec<f64>; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualScan {
    pub y0: f64,
    pub separations: Vec<f64>,
    pub normalized: Vec<f64>,
    pub sup: f64,
}

/// Symmetric trajectory of the parameter system through `(0, 0, Y0/2, -Y0/2)` at `t = 0`,
/// run in both time directions until the separation reaches `K Y0`; `samples` states per side.
pub fn symmetric_trajectory(family: &ProfileFamily, y0: f64, samples: usize) -> Result<Vec<PairParams>> {
    let c = family.constants;
    let mu0 = speed_scale(y0, c.alpha);
    let start = PairParams::new(0.0, 0.0, 0.5 * y0, -0.5 * y0);
    // Y(t) ~ Y0 + 2 mu0 |t| - 2 ln 2 reaches K Y0 before this time.
    let t_end = ((SEPARATION_FACTOR - 1.0) * y0 + 2.0) / (2.0 * mu0) * 1.2;
    let dt = 0.005 / mu0;
    let mut out = Vec::new();
    for dir in [-1.0, 1.0] {
        let tr = integrate_full(start, &c, RhsOrder::Full, 0.0, dir * t_end, dt)?;
        let inside: Vec<PairParams> = tr
            .states
            .into_iter()
            .filter(|p| p.separation() <= SEPARATION_FACTOR * y0)
            .collect();
        let stride = (inside.len() / samples.max(1)).max(1);
        out.extend(inside.into_iter().step_by(stride));
    }
    Ok(out)
}

/// Normalized residual along a trajectory.
pub fn residual_scan(ansatz: &Ansatz, y0: f64, trajectory: &[PairParams]) -> Result<ResidualScan> {
    if trajectory.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    let alpha = ansatz.family().constants.alpha;
    let mut separations = Vec::with_capacity(trajectory.len());
    let mut normalized = Vec::with_capacity(trajectory.len());
    for g in trajectory {
        let state = AnsatzState::new(*g, y0, alpha)?;
        separations.push(g.separation());
        normalized.push(ansatz.normalized_residual(&state)?);
    }
    let sup = normalized.iter().cloned().fold(0.0, f64::max);
    Ok(ResidualScan { y0, separations, normalized, sup })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(-1.0), 0.0);
        assert_eq!(cutoff(0.0), 0.0);
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(2.0), 1.0);
        assert!((cutoff(0.25) - 0.5).abs() < 1e-15);
        let mut last = 0.0;
        for i in 0..=100 {
            let v = cutoff(i as f64 / 200.0);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn jet_product_rule() {
        let f = |x: f64| [x.sin(), x.cos(), -x.sin(), -x.cos()];
        let g = |x: f64| [x.exp(), x.exp(), x.exp(), x.exp()];
        let x = 0.7;
        let p = Jet(f(x)).product(Jet(g(x)));
        let h = 1e-3;
        let fg = |x: f64| x.sin() * x.exp();
        let d3 = (fg(x + 2.0 * h) - 2.0 * fg(x + h) + 2.0 * fg(x - h) - fg(x - 2.0 * h)) / (2.0 * h * h * h);
        assert!((p.0[3] - d3).abs() < 1e-5);
        assert!((p.0[1] - (x.cos() + x.sin()) * x.exp()).abs() < 1e-14);
    }
}
