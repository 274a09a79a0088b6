//! Modulation around a two-soliton family: decomposition `u = V(Gamma) + eps`, tracking of
//! `Gamma(t)`, the functionals `F_+`, `F_-`, `J_j`, and the post-collision defect report.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzState, TrackingField};
use crate::dynamics::{closed_y, forcing, separation_scale, PairParams};
use crate::error::{invalid, BbmError, Result};
use crate::evolver::DriftReport;
use crate::grid::{dot, h1_norm, Grid, GridFunction, Spectral};
use crate::linear::constrained_rayleigh_minimum;
use crate::profiles::{ClosedForms, InteractionConstants};
use crate::soliton::{
    energy_with, lambda_q_jet, mass_with, q_derivs, soliton_energy, soliton_jet, soliton_mass, width_scale,
    ModelParams,
};

/// Newton stops once every orthogonality integral is below this.
pub const ORTHOGONALITY_TOL: f64 = 1e-11;
/// `J_j` needs `|eps| < RIGHT_DECAY_TOL` beyond `y1 + RIGHT_DECAY_OFFSET`.
pub const RIGHT_DECAY_TOL: f64 = 1e-8;
pub const RIGHT_DECAY_OFFSET: f64 = 40.0;
/// Below this separation the two translation directions are not distinguishable.
pub const MIN_SEPARATION: f64 = 1.0;
/// Relative determinant below which the Newton jacobian is treated as singular.
const SINGULAR_DET: f64 = 1e-8;
const MAX_NEWTON: usize = 40;

/// A two-parameter-per-soliton family of fields with known parameter derivatives.
pub trait PairFamily {
    fn lambda(&self) -> f64;
    fn field(&self, gamma: &PairParams, grid: &Grid) -> Result<TrackingField>;
}

/// `Q_{mu1}(x - y1) + Q_{mu2}(x - y2)`.
#[derive(Debug, Clone, Copy)]
pub struct PlainPair {
    pub lambda: f64,
}

impl PairFamily for PlainPair {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn field(&self, g: &PairParams, grid: &Grid) -> Result<TrackingField> {
        let l = self.lambda;
        let xs = grid.points();
        let mut v = Vec::with_capacity(xs.len());
        let mut t: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(xs.len()));
        for x in xs {
            let r1 = soliton_jet(g.mu1, l, x - g.y1);
            let r2 = soliton_jet(g.mu2, l, x - g.y2);
            v.push(r1[0] + r2[0]);
            t[0].push(lambda_q_jet(g.mu1, l, x - g.y1)[0]);
            t[1].push(lambda_q_jet(g.mu2, l, x - g.y2)[0]);
            t[2].push(-r1[1]);
            t[3].push(-r2[1]);
        }
        Ok(TrackingField { v: GridFunction::new(*grid, v)?, tangents: t })
    }
}

/// The interaction ansatz at separation scale `y0`.
pub struct AnsatzPair<'a> {
    pub ansatz: &'a Ansatz,
    pub y0: f64,
}

impl PairFamily for AnsatzPair<'_> {
    fn lambda(&self) -> f64 {
        self.ansatz.family().lambda
    }

    fn field(&self, gamma: &PairParams, grid: &Grid) -> Result<TrackingField> {
        self.ansatz.tracking_field(&AnsatzState { gamma: *gamma, y0: self.y0 }, grid)
    }
}

/// `Q_mu(s)` and its first four derivatives.
fn soliton_derivs(mu: f64, lambda: f64, s: f64) -> [f64; 5] {
    let c = width_scale(mu, lambda);
    let d = q_derivs(c * s);
    let mut cn = 1.0 + mu;
    std::array::from_fn(|n| {
        let v = cn * d[n];
        cn *= c;
        v
    })
}

/// The four constraint directions `(1 - lambda d^2) R_j`, `(1 - lambda d^2) R_j'` (order
/// `R1, R2, R1', R2'`) and their derivatives in the parameters of the same soliton.
struct Constraints {
    phi: [Vec<f64>; 4],
    /// `d_mu` and `d_y` of each direction.
    dphi: [[Vec<f64>; 2]; 4],
}

fn constraints(g: &PairParams, lambda: f64, grid: &Grid) -> Constraints {
    let xs = grid.points();
    let n = xs.len();
    let mut phi: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut dphi: [[Vec<f64>; 2]; 4] = std::array::from_fn(|_| [Vec::with_capacity(n), Vec::with_capacity(n)]);
    for x in xs {
        for (j, (mu, y)) in [(g.mu1, g.y1), (g.mu2, g.y2)].into_iter().enumerate() {
            let r = soliton_derivs(mu, lambda, x - y);
            let lr = lambda_q_jet(mu, lambda, x - y);
            phi[j].push(r[0] - lambda * r[2]);
            phi[j + 2].push(r[1] - lambda * r[3]);
            dphi[j][0].push(lr[0] - lambda * lr[2]);
            dphi[j][1].push(-(r[1] - lambda * r[3]));
            dphi[j + 2][0].push(lr[1] - lambda * lr[3]);
            dphi[j + 2][1].push(-(r[2] - lambda * r[4]));
        }
    }
    Constraints { phi, dphi }
}

/// Orthogonality directions at `gamma`, in the order `R1, R2, R1', R2'`.
pub fn constraint_directions(gamma: &PairParams, lambda: f64, grid: &Grid) -> [Vec<f64>; 4] {
    constraints(gamma, lambda, grid).phi
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub gamma: PairParams,
    pub v: GridFunction,
    pub epsilon: GridFunction,
    pub h1_norm: f64,
    pub orthogonality_residuals: [f64; 4],
    pub iterations: usize,
    /// Largest parameter difference between restarts from perturbed guesses and the
    /// returned fixed point; `None` when no restarts were run.
    pub restart_spread: Option<f64>,
    pub restart_failures: usize,
}

impl DecompositionResult {
    pub fn max_residual(&self) -> f64 {
        self.orthogonality_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Guess perturbations used to check that the fixed point is unique in its basin.
pub const RESTART_PERTURBATIONS: [[f64; 4]; 4] =
    [[0.0, 0.0, 0.5, 0.0], [0.0, 0.0, -0.5, 0.0], [0.0, 0.0, 0.0, 0.5], [0.0, 0.0, 0.0, -0.5]];

/// Newton decomposition with restarts from `RESTART_PERTURBATIONS`.
pub fn decompose(u: &GridFunction, family: &dyn PairFamily, guess: PairParams) -> Result<DecompositionResult> {
    let mut best = newton(u, family, guess)?;
    let mut spread = 0.0f64;
    let mut failures = 0;
    for p in RESTART_PERTURBATIONS {
        let start = add(&guess, p);
        match newton(u, family, start) {
            Ok(r) => {
                let (a, b) = (r.gamma.to_array(), best.gamma.to_array());
                spread = (0..4).map(|i| (a[i] - b[i]).abs()).fold(spread, f64::max);
            }
            Err(_) => failures += 1,
        }
    }
    best.restart_spread = Some(spread);
    best.restart_failures = failures;
    Ok(best)
}

/// Newton decomposition from a single (warm) start.
pub fn decompose_warm(u: &GridFunction, family: &dyn PairFamily, guess: PairParams) -> Result<DecompositionResult> {
    newton(u, family, guess)
}

fn add(g: &PairParams, p: [f64; 4]) -> PairParams {
    let a = g.to_array();
    PairParams::from_array(std::array::from_fn(|i| a[i] + p[i]))
}

fn newton(u: &GridFunction, family: &dyn PairFamily, guess: PairParams) -> Result<DecompositionResult> {
    let grid = *u.grid();
    let dx = grid.dx();
    let lambda = family.lambda();
    let mut gamma = guess;
    for it in 0..MAX_NEWTON {
        let a = gamma.to_array();
        if !a.iter().all(|v| v.is_finite()) {
            return Err(BbmError::OutsideModulation("Newton iterate is not finite".into()));
        }
        if gamma.separation() < MIN_SEPARATION {
            return Err(BbmError::OutsideModulation(format!(
                "separation {:.3} below {MIN_SEPARATION}",
                gamma.separation()
            )));
        }
        let field = family.field(&gamma, &grid)?;
        let eps = u.axpy(-1.0, &field.v);
        let c = constraints(&gamma, lambda, &grid);
        let g: [f64; 4] = std::array::from_fn(|k| dot(eps.values(), &c.phi[k]) * dx);
        let mut jac = Matrix4::<f64>::zeros();
        for k in 0..4 {
            let own = k % 2;
            for m in 0..4 {
                let mut v = -dot(&field.tangents[m], &c.phi[k]) * dx;
                if m % 2 == own {
                    v += dot(eps.values(), &c.dphi[k][m / 2]) * dx;
                }
                jac[(k, m)] = v;
            }
        }
        let scale: f64 = (0..4).map(|k| jac.row(k).norm()).product();
        let det = jac.determinant();
        if !(det.abs() > SINGULAR_DET * scale) {
            return Err(BbmError::SingularJacobian { det: det / scale });
        }
        if g.iter().all(|r| r.abs() < ORTHOGONALITY_TOL) {
            let sp = Spectral::new(grid);
            let h1 = h1_norm(&sp, eps.values());
            return Ok(DecompositionResult {
                gamma,
                v: field.v,
                epsilon: eps,
                h1_norm: h1,
                orthogonality_residuals: g,
                iterations: it,
                restart_spread: None,
                restart_failures: 0,
            });
        }
        let step = jac.lu().solve(&(-Vector4::from(g))).ok_or(BbmError::SingularJacobian { det: 0.0 })?;
        if step.iter().take(2).any(|s| s.abs() > 0.5) || step.iter().skip(2).any(|s| s.abs() > 5.0) {
            return Err(BbmError::OutsideModulation(format!("Newton step {:?} too large", step.as_slice())));
        }
        gamma = add(&gamma, std::array::from_fn(|i| step[i]));
    }
    Err(BbmError::OutsideModulation(format!("Newton did not converge in {MAX_NEWTON} iterations")))
}

/// `int eps^2 + eps'^2` by quadrature with a spectral derivative; agrees with the
/// Fourier-side norm up to roundoff.
pub fn h1_norm_quadrature(eps: &GridFunction) -> f64 {
    let d = eps.derivative(1);
    let s: f64 = eps.values().iter().zip(d.values()).map(|(e, de)| e * e + de * de).sum();
    (s * eps.grid().dx()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub gamma: PairParams,
    pub h1_norm: f64,
    pub max_residual: f64,
}

/// Measured rates against the parameter system at one interior snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub t: f64,
    pub separation: f64,
    pub gamma_dot: PairParams,
    /// `dmu_j/dt - M_j`.
    pub speed_drift: [f64; 2],
    /// `mu_j - dy_j/dt - N_j`.
    pub position_drift: [f64; 2],
    /// `e^{-y}`, the unit in which the drifts are reported.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingLoss {
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSeries {
    pub points: Vec<TrackPoint>,
    pub rates: Vec<RatePoint>,
    pub lost: Option<TrackingLoss>,
}

impl TrackSeries {
    /// Time and value of the smallest separation, refined by a parabola through the
    /// three snapshots around the discrete minimum.
    pub fn min_separation(&self) -> Option<(f64, f64)> {
        let p = &self.points;
        let i = (0..p.len()).min_by(|&a, &b| p[a].gamma.separation().total_cmp(&p[b].gamma.separation()))?;
        if i == 0 || i + 1 >= p.len() {
            return Some((p[i].t, p[i].gamma.separation()));
        }
        let (t0, t1, t2) = (p[i - 1].t, p[i].t, p[i + 1].t);
        let (f0, f1, f2) = (p[i - 1].gamma.separation(), p[i].gamma.separation(), p[i + 1].gamma.separation());
        let h = t1 - t0;
        let curv = f0 - 2.0 * f1 + f2;
        if curv <= 0.0 || (t2 - t1 - h).abs() > 1e-9 * h {
            return Some((t1, f1));
        }
        let off = 0.5 * h * (f0 - f2) / curv;
        Some((t1 + off, f1 - (f0 - f2).powi(2) / (8.0 * curv)))
    }

    /// Cubic interpolation of one parameter at `t` from the four nearest snapshots.
    pub fn interpolate(&self, t: f64, component: usize) -> Option<f64> {
        let p = &self.points;
        if p.len() < 4 || t < p[0].t || t > p[p.len() - 1].t {
            return None;
        }
        let j = p.partition_point(|q| q.t <= t).clamp(2, p.len() - 2);
        let w = &p[j - 2..j + 2];
        let mut acc = 0.0;
        for (a, qa) in w.iter().enumerate() {
            let mut l = 1.0;
            for (b, qb) in w.iter().enumerate() {
                if a != b {
                    l *= (t - qb.t) / (qa.t - qb.t);
                }
            }
            acc += l * qa.gamma.to_array()[component];
        }
        Some(acc)
    }

    /// First time where `mu1 - mu2` changes sign, refined on the cubic interpolant.
    pub fn speed_crossing(&self) -> Option<f64> {
        let p = &self.points;
        let mu = |q: &TrackPoint| q.gamma.relative_speed();
        let i = p.windows(2).position(|w| mu(&w[0]) * mu(&w[1]) <= 0.0 && mu(&w[0]) != mu(&w[1]))?;
        let f = |t: f64| Some(self.interpolate(t, 0)? - self.interpolate(t, 1)?);
        let (mut a, mut b) = (p[i].t, p[i + 1].t);
        let mut fa = f(a)?;
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            let fm = f(m)?;
            if fa * fm <= 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        Some(0.5 * (a + b))
    }

    /// Largest `|mu1(t) - mu2(2 tc - t)|` over tracked times whose mirror is tracked.
    pub fn mirror_speed_error(&self, tc: f64) -> f64 {
        self.points
            .iter()
            .filter_map(|q| self.interpolate(2.0 * tc - q.t, 1).map(|m| (q.gamma.mu1 - m).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest `|y(t) - Y(t - tc)|` against the closed-form separation.
    pub fn tracking_error(&self, tc: f64, y0: f64, mu0: f64) -> f64 {
        self.points
            .iter()
            .map(|q| (q.gamma.separation() - closed_y(q.t - tc, y0, mu0).0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| invalid(e.to_string());
        w.write_record(["t", "mu1", "mu2", "y1", "y2", "separation", "h1_eps", "residual"]).map_err(io)?;
        for q in &self.points {
            let g = q.gamma;
            let row = [q.t, g.mu1, g.mu2, g.y1, g.y2, g.separation(), q.h1_norm, q.max_residual];
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| invalid(e.to_string()))?).map_err(|e| invalid(e.to_string()))
    }
}

/// Warm-started decomposition of successive snapshots.
pub struct Tracker<'a> {
    family: &'a dyn PairFamily,
    constants: InteractionConstants,
    last: PairParams,
    points: Vec<TrackPoint>,
    lost: Option<TrackingLoss>,
    last_decomposition: Option<DecompositionResult>,
}

impl<'a> Tracker<'a> {
    pub fn new(family: &'a dyn PairFamily, constants: InteractionConstants, guess: PairParams) -> Self {
        Self { family, constants, last: guess, points: Vec::new(), lost: None, last_decomposition: None }
    }

    pub fn is_lost(&self) -> bool {
        self.lost.is_some()
    }

    pub fn last_decomposition(&self) -> Option<&DecompositionResult> {
        self.last_decomposition.as_ref()
    }

    /// Decomposes one snapshot; after a failure the tracker stops and records where.
    pub fn observe(&mut self, t: f64, u: &GridFunction) {
        if self.lost.is_some() {
            return;
        }
        match decompose_warm(u, self.family, self.last) {
            Ok(d) => {
                self.last = d.gamma;
                self.points.push(TrackPoint { t, gamma: d.gamma, h1_norm: d.h1_norm, max_residual: d.max_residual() });
                self.last_decomposition = Some(d);
            }
            Err(e) => {
                log::warn!("tracking lost at t = {t:.3}: {e}");
                self.lost = Some(TrackingLoss { t, reason: e.to_string() });
            }
        }
    }

    pub fn finish(self) -> TrackSeries {
        let rates = rates(&self.points, &self.constants);
        TrackSeries { points: self.points, rates, lost: self.lost }
    }
}

/// Tracks a stored series of snapshots.
pub fn track(
    series: &[(f64, GridFunction)],
    family: &dyn PairFamily,
    constants: InteractionConstants,
    guess: PairParams,
) -> TrackSeries {
    let mut tr = Tracker::new(family, constants, guess);
    for (t, u) in series {
        tr.observe(*t, u);
    }
    tr.finish()
}

/// Centered five-point derivatives at interior points of uniformly spaced snapshots.
fn rates(points: &[TrackPoint], c: &InteractionConstants) -> Vec<RatePoint> {
    let mut out = Vec::new();
    for i in 2..points.len().saturating_sub(2) {
        let w = &points[i - 2..=i + 2];
        let h = w[1].t - w[0].t;
        if w.windows(2).any(|p| ((p[1].t - p[0].t) - h).abs() > 1e-9 * h.abs()) {
            continue;
        }
        let a: Vec<[f64; 4]> = w.iter().map(|p| p.gamma.to_array()).collect();
        let d: [f64; 4] = std::array::from_fn(|k| (a[0][k] - 8.0 * a[1][k] + 8.0 * a[3][k] - a[4][k]) / (12.0 * h));
        let g = points[i].gamma;
        let [m1, m2, n1, n2] = forcing(&g, c);
        out.push(RatePoint {
            t: points[i].t,
            separation: g.separation(),
            gamma_dot: PairParams::from_array(d),
            speed_drift: [d[0] - m1, d[1] - m2],
            position_drift: [g.mu1 - d[2] - n1, g.mu2 - d[3] - n2],
            scale: (-g.separation()).exp(),
        });
    }
    out
}

/// Steepness of the monotonicity weight `phi(x) = (2/pi) arctan(e^{8 rho x})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub rho: f64,
}

impl DiagnosticsConfig {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0 / 32.0) {
            return Err(invalid(format!("rho = {rho} must lie in (0, 1/32)")));
        }
        Ok(Self { rho })
    }

    pub fn weight(&self, x: f64) -> f64 {
        std::f64::consts::FRAC_2_PI * (8.0 * self.rho * x).exp().atan()
    }
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { rho: 1.0 / 64.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

/// Pointwise weights `(a, b)` so that the functional is
/// `int (eps'^2 + eps^2 - cubic) a + (lambda eps'^2 + eps^2) b`.
fn branch_weights(g: &PairParams, cfg: &DiagnosticsConfig, branch: Branch, x: f64) -> (f64, f64) {
    let p = cfg.weight(x);
    match branch {
        Branch::Plus => (1.0, g.mu1 * p + g.mu2 * (1.0 - p)),
        Branch::Minus => {
            let (s1, s2) = ((1.0 + g.mu1).powi(-2), (1.0 + g.mu2).powi(-2));
            (s1 * p + s2 * (1.0 - p), g.mu1 * s1 * p + g.mu2 * s2 * (1.0 - p))
        }
    }
}

/// `F_+` or `F_-` of a decomposition.
pub fn eval_f(d: &DecompositionResult, lambda: f64, cfg: &DiagnosticsConfig, branch: Branch) -> f64 {
    let eps = &d.epsilon;
    let de = eps.derivative(1);
    let grid = eps.grid();
    let s: f64 = grid
        .points()
        .iter()
        .zip(eps.values())
        .zip(de.values())
        .zip(d.v.values())
        .map(|(((x, e), de), v)| {
            let (a, b) = branch_weights(&d.gamma, cfg, branch, *x);
            let cubic = (e + v).powi(3) - v.powi(3) - 3.0 * v * v * e;
            a * (de * de + e * e - 2.0 / 3.0 * cubic) + b * (lambda * de * de + e * e)
        })
        .sum();
    s * grid.dx()
}

/// Lower bound `c` with `F >= c |eps|_{H1}^2` for the quadratic part of the functional on
/// fields satisfying the four orthogonality conditions.
pub fn coercivity_constant(d: &DecompositionResult, lambda: f64, cfg: &DiagnosticsConfig, branch: Branch) -> f64 {
    let grid = *d.epsilon.grid();
    let sp = Spectral::new(grid);
    let xs = grid.points();
    let w: Vec<(f64, f64)> = xs.iter().map(|&x| branch_weights(&d.gamma, cfg, branch, x)).collect();
    let v = d.v.values();
    let apply = |f: &[f64]| -> Vec<f64> {
        let df = sp.derivative(f, 1);
        let flux: Vec<f64> = df.iter().zip(&w).map(|(g, (a, b))| (a + lambda * b) * g).collect();
        let dflux = sp.derivative(&flux, 1);
        (0..f.len()).map(|i| -dflux[i] + (w[i].0 * (1.0 - 2.0 * v[i]) + w[i].1) * f[i]).collect()
    };
    let cons = constraint_directions(&d.gamma, lambda, &grid);
    constrained_rayleigh_minimum(&sp, apply, &cons)
}

/// `int_{-inf}^s Lambda Q_mu`.
pub fn lambda_q_antiderivative(mu: f64, lambda: f64, s: f64) -> f64 {
    let c = width_scale(mu, lambda);
    let dc = (1.0 - lambda) / (2.0 * c * (1.0 + lambda * mu).powi(2));
    let a = 1.0 + mu;
    let z = 0.5 * c * s;
    // 1 + tanh z without cancellation for z << 0.
    let one_plus_tanh = 2.0 / (1.0 + (-2.0 * z).exp());
    let sech2 = 1.0 / z.cosh().powi(2);
    (1.0 / c - a * dc / (c * c)) * 3.0 * one_plus_tanh + a / c * 3.0 * sech2 * 0.5 * s * dc
}

/// `int [(1 - lambda d^2) Lambda Q] Q`.
pub fn j_normalization(lambda: f64) -> f64 {
    0.3 * (15.0 + 10.0 * lambda - lambda * lambda)
}

/// `J_j` for soliton `j` (1 or 2). Refused when `eps` has not decayed beyond `y1 + 40`,
/// where `J_j` tends to a nonzero constant.
pub fn eval_j(d: &DecompositionResult, lambda: f64, j: usize) -> Result<f64> {
    let (mu, y) = match j {
        1 => (d.gamma.mu1, d.gamma.y1),
        2 => (d.gamma.mu2, d.gamma.y2),
        _ => return Err(invalid(format!("soliton index {j} must be 1 or 2"))),
    };
    let eps = &d.epsilon;
    let xs = eps.grid().points();
    let edge = d.gamma.y1 + RIGHT_DECAY_OFFSET;
    let tail = xs.iter().zip(eps.values()).filter(|(x, _)| **x > edge).fold(0.0f64, |m, (_, e)| m.max(e.abs()));
    if tail > RIGHT_DECAY_TOL {
        return Err(BbmError::IllDefined(format!("|eps| = {tail:.2e} beyond y1 + {RIGHT_DECAY_OFFSET}")));
    }
    let s: f64 = xs
        .iter()
        .zip(eps.values())
        .map(|(x, e)| {
            let hj = lambda_q_antiderivative(mu, lambda, x - y) - lambda * lambda_q_jet(mu, lambda, x - y)[1];
            e * hj
        })
        .sum();
    Ok(s * eps.grid().dx() / j_normalization(lambda))
}

/// Head-on collision prepared from two separated solitons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionSetup {
    pub lambda: f64,
    pub mu0: f64,
    pub y0: f64,
    pub start_separation: f64,
    /// Start time on the closed-form clock, so the collision happens near `t = 0`.
    pub t_start: f64,
    pub grid: Grid,
}

impl CollisionSetup {
    pub fn new(lambda: f64, mu0: f64, start_separation: f64, grid: Grid) -> Result<Self> {
        ModelParams::new(lambda)?;
        if !(mu0 > 0.0 && mu0 <= 0.25) {
            return Err(invalid(format!("mu0 = {mu0} must lie in (0, 0.25]")));
        }
        let y0 = separation_scale(mu0, ClosedForms::new(lambda).alpha);
        if start_separation < y0 + 1000f64.ln() {
            return Err(invalid(format!(
                "start separation {start_separation} must exceed Y0 + ln 1000 = {}",
                y0 + 1000f64.ln()
            )));
        }
        if grid.length < 4.0 * start_separation + 80.0 {
            return Err(invalid(format!("domain length {} below 4 s + 80", grid.length)));
        }
        let t_start = -((0.5 * (start_separation - y0)).exp().acosh()) / mu0;
        Ok(Self { lambda, mu0, y0, start_separation, t_start, grid })
    }

    /// `Q_{mu0}(x + s/2) + Q_{-mu0}(x - s/2)`.
    pub fn initial_data(&self) -> GridFunction {
        let (m, h, l) = (self.mu0, 0.5 * self.start_separation, self.lambda);
        GridFunction::from_fn(self.grid, |x| soliton_jet(m, l, x + h)[0] + soliton_jet(-m, l, x - h)[0])
    }

    /// Parameters of the initial data; soliton 1 is the right one.
    pub fn initial_gamma(&self) -> PairParams {
        let h = 0.5 * self.start_separation;
        PairParams::new(-self.mu0, self.mu0, h, -h)
    }

    /// Size of the neglected interaction at the start, `e^{-s}`.
    pub fn preparation_error(&self) -> f64 {
        (-self.start_separation).exp()
    }

    /// Duration that brings the pair back to the start separation on the closed-form clock.
    pub fn symmetric_duration(&self) -> f64 {
        -2.0 * self.t_start
    }
}

/// Inputs to the post-collision report.
pub struct DefectInput<'a> {
    pub setup: &'a CollisionSetup,
    /// Final time on the collision clock.
    pub t_final: f64,
    pub final_state: &'a GridFunction,
    pub track: &'a TrackSeries,
    pub drift: DriftReport,
    pub initial_mass: f64,
    pub initial_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub lambda: f64,
    pub mu0: f64,
    pub y0: f64,
    pub min_separation: f64,
    pub t_collision: f64,
    /// `|w|_{H1}` over the whole periodic domain.
    pub defect_h1: f64,
    /// `|w|_{H1}` restricted to `x > -0.99 (t - t_collision)`.
    pub defect_h1_window: f64,
    pub mu1_plus: f64,
    pub mu2_plus: f64,
    /// `(mu1+, mu2+)` solved from the mass and energy balance with the measured `M(w)`, `E(w)`.
    pub mu_plus_balance: [f64; 2],
    pub final_separation: f64,
    pub tracking_error: f64,
    pub mirror_speed_error: f64,
    pub preparation_error: f64,
    pub drift: DriftReport,
    pub tracking_lost: Option<TrackingLoss>,
}

impl CollisionReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }
}

/// Post-collision fit against the plain two-soliton family and the resulting defect.
pub fn defect_report(input: &DefectInput) -> Result<CollisionReport> {
    let setup = input.setup;
    let l = setup.lambda;
    let u = input.final_state;
    let (t_collision, min_separation) = input
        .track
        .min_separation()
        .ok_or_else(|| BbmError::IllDefined("empty tracking series".into()))?;
    let guess = input.track.points.last().map(|p| p.gamma).unwrap_or(PairParams::new(
        setup.mu0,
        -setup.mu0,
        0.5 * setup.start_separation,
        -0.5 * setup.start_separation,
    ));
    if guess.separation() < setup.y0 + 10.0 {
        return Err(BbmError::IllDefined(format!(
            "final separation {:.2} below Y0 + 10 = {:.2}",
            guess.separation(),
            setup.y0 + 10.0
        )));
    }
    let fit = decompose_warm(u, &PlainPair { lambda: l }, guess)?;
    let w = &fit.epsilon;
    let sp = Spectral::new(*w.grid());
    let dw = sp.derivative(w.values(), 1);
    let edge = -0.99 * (input.t_final - t_collision);
    let window: f64 = w
        .grid()
        .points()
        .iter()
        .zip(w.values().iter().zip(&dw))
        .filter(|(x, _)| **x > edge)
        .map(|(_, (v, d))| v * v + d * d)
        .sum::<f64>()
        * w.grid().dx();
    let mw = mass_with(&sp, w.values(), l);
    let ew = energy_with(&sp, w.values());
    let balance = speeds_from_balance(l, input.initial_mass - mw, input.initial_energy - ew, [fit.gamma.mu1, fit.gamma.mu2])?;
    Ok(CollisionReport {
        lambda: l,
        mu0: setup.mu0,
        y0: setup.y0,
        min_separation,
        t_collision,
        defect_h1: fit.h1_norm,
        defect_h1_window: window.sqrt(),
        mu1_plus: fit.gamma.mu1,
        mu2_plus: fit.gamma.mu2,
        mu_plus_balance: balance,
        final_separation: fit.gamma.separation(),
        tracking_error: input.track.tracking_error(t_collision, setup.y0, setup.mu0),
        mirror_speed_error: input.track.mirror_speed_error(input.track.speed_crossing().unwrap_or(t_collision)),
        preparation_error: setup.preparation_error(),
        drift: input.drift,
        tracking_lost: input.track.lost.clone(),
    })
}

/// Solves `M(Q_m1) + M(Q_m2) = mass`, `E(Q_m1) + E(Q_m2) = energy` by Newton from `start`.
pub fn speeds_from_balance(lambda: f64, mass: f64, energy: f64, start: [f64; 2]) -> Result<[f64; 2]> {
    let m = ModelParams::new(lambda)?;
    let f = |a: f64, b: f64| {
        [soliton_mass(a, &m) + soliton_mass(b, &m) - mass, soliton_energy(a, &m) + soliton_energy(b, &m) - energy]
    };
    let h = 1e-6;
    let dm = |a: f64| (soliton_mass(a + h, &m) - soliton_mass(a - h, &m)) / (2.0 * h);
    let de = |a: f64| (soliton_energy(a + h, &m) - soliton_energy(a - h, &m)) / (2.0 * h);
    let [mut a, mut b] = start;
    for _ in 0..50 {
        let r = f(a, b);
        let (j11, j12, j21, j22) = (dm(a), dm(b), de(a), de(b));
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-14 {
            return Err(BbmError::SingularJacobian { det });
        }
        let da = (r[0] * j22 - r[1] * j12) / det;
        let db = (j11 * r[1] - j21 * r[0]) / det;
        a -= da;
        b -= db;
        if da.abs().max(db.abs()) < 1e-15 {
            return Ok([a, b]);
        }
    }
    let r = f(a, b);
    if r[0].abs().max(r[1].abs()) < 1e-12 {
        Ok([a, b])
    } else {
        Err(BbmError::IllDefined("mass and energy balance has no nearby solution".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_properties() {
        let c = DiagnosticsConfig::default();
        for x in [-30.0, -2.0, 0.0, 1.5, 40.0] {
            assert!((c.weight(-x) - (1.0 - c.weight(x))).abs() < 1e-15);
        }
        assert!(DiagnosticsConfig::new(1.0 / 32.0).is_err());
        assert!(DiagnosticsConfig::new(0.0).is_err());
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        for (mu, l) in [(0.0, 0.5), (0.13, 0.0), (-0.2, 0.8)] {
            let n = 200_000;
            let (a, b) = (-60.0, 7.0);
            let h = (b - a) / n as f64;
            // Simpson's rule.
            let f = |s: f64| lambda_q_jet(mu, l, s)[0];
            let mut acc = f(a) + f(b);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            let quad = acc * h / 3.0;
            assert!((quad - lambda_q_antiderivative(mu, l, b)).abs() < 1e-10);
        }
        // Total integral at mu = 0 is 3 (1 + lambda).
        assert!((lambda_q_antiderivative(0.0, 0.4, 200.0) - 4.2).abs() < 1e-12);
    }

    #[test]
    fn balance_recovers_soliton_speeds() {
        let m = ModelParams::new(0.5).unwrap();
        let (a, b): (f64, f64) = (0.153, -0.148);
        let mass = soliton_mass(a, &m) + soliton_mass(b, &m);
        let energy = soliton_energy(a, &m) + soliton_energy(b, &m);
        let r = speeds_from_balance(0.5, mass, energy, [0.15, -0.15]).unwrap();
        assert!((r[0] - a).abs() < 1e-10 && (r[1] - b).abs() < 1e-10);
    }
}
