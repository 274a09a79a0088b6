//! Correction profiles `A_j`, `B_j`, `D_j` of the two-soliton ansatz and the interaction constants.
//!
//! Every profile is a decaying grid part plus a closed-form bounded tail built from
//! `Q'/Q = -tanh(x/2)`. Each is obtained from an equation `(-L P)' + k (1 - lambda d^2) Lambda Q
//! + c (1 - lambda d^2) Q' = g` by fixing the constants that make `g` compatible, integrating
//! once from the left and inverting `L`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{dot, Grid, GridFunction, Spectral};
use crate::linear::{antiderivative, LinearOperator};
use crate::soliton::{lambda2_q_raw, lambda_q_jet, q_derivs, q_log_derivative, ModelParams};

pub const FAMILY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailKind {
    None,
    /// `coefficient * Q'/Q`.
    Odd,
    /// `coefficient * (1 + Q'/Q)`.
    Shifted,
}

impl TailKind {
    /// Tail shape and its first three derivatives at `s`.
    pub fn jet(self, s: f64) -> [f64; 4] {
        let d = q_derivs(s);
        let w = q_log_derivative(s);
        let der = [-d[0] / 3.0, -d[1] / 3.0, -d[2] / 3.0];
        match self {
            TailKind::None => [0.0; 4],
            TailKind::Odd => [w, der[0], der[1], der[2]],
            TailKind::Shifted => [1.0 + w, der[0], der[1], der[2]],
        }
    }

    /// `(-L tail)'` for a unit coefficient.
    fn forcing(self, s: f64) -> f64 {
        let d = q_derivs(s);
        let odd = 2.0 * d[0] - 5.0 / 3.0 * d[0] * d[0];
        match self {
            TailKind::None => 0.0,
            TailKind::Odd => odd,
            TailKind::Shifted => odd + 2.0 * d[1],
        }
    }

    fn limits(self) -> (f64, f64) {
        match self {
            TailKind::None => (0.0, 0.0),
            TailKind::Odd => (1.0, -1.0),
            TailKind::Shifted => (2.0, 0.0),
        }
    }
}

/// Decaying grid part plus a closed-form tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub decaying: GridFunction,
    pub tail_coefficient: f64,
    pub tail_kind: TailKind,
}

impl Profile {
    pub fn tail_jet(&self, s: f64) -> [f64; 4] {
        let j = self.tail_kind.jet(s);
        [0, 1, 2, 3].map(|i| self.tail_coefficient * j[i])
    }

    /// Full profile on its own grid.
    pub fn full_values(&self) -> Vec<f64> {
        let g = self.decaying.grid();
        self.decaying
            .values()
            .iter()
            .zip(g.points())
            .map(|(v, x)| v + self.tail_coefficient * self.tail_kind.jet(x)[0])
            .collect()
    }

    /// Limits at `-inf` and `+inf`.
    pub fn limits(&self) -> (f64, f64) {
        let (l, r) = self.tail_kind.limits();
        (self.tail_coefficient * l, self.tail_coefficient * r)
    }

    /// Mirror image `x -> -x`.
    pub fn reflected(&self) -> Profile {
        let (decaying, c) = match self.tail_kind {
            TailKind::Odd => (reflect(&self.decaying), -self.tail_coefficient),
            _ => panic!("only odd-tailed profiles are reflected"),
        };
        Profile { decaying, tail_coefficient: c, tail_kind: TailKind::Odd }
    }
}

/// `f(-x)` on a centered grid.
pub fn reflect(f: &GridFunction) -> GridFunction {
    let v = reflect_values(f.values());
    GridFunction::new(*f.grid(), v).expect("same grid")
}

fn reflect_values(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| v[(n - i) % n]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionConstants {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub d1: f64,
    pub d2: f64,
    pub theta: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub theta_d: f64,
}

/// Closed forms of the constants that have one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForms {
    pub alpha: f64,
    pub theta_a: f64,
    pub beta: f64,
    pub theta_b: f64,
    pub theta: f64,
    /// `theta = 1 - lambda - theta_A / 18` with the closed-form `theta_A`.
    pub theta_from_theta_a: f64,
}

impl ClosedForms {
    pub fn new(lambda: f64) -> Self {
        let d = 15.0 + 10.0 * lambda - lambda * lambda;
        let theta_a = 36.0 * (5.0 - lambda * lambda) / d;
        Self {
            alpha: 240.0 / d,
            theta_a,
            beta: 120.0 * (1.0 - lambda) / d,
            theta_b: 144.0 * lambda * lambda / d,
            theta: (1.0 + lambda) * (5.0 - 10.0 * lambda + lambda * lambda) / d,
            theta_from_theta_a: 1.0 - lambda - theta_a / 18.0,
        }
    }
}

/// `|theta_closed - (1 - lambda - theta_A/18)|`.
pub fn theta_consistency(lambda: f64) -> f64 {
    let c = ClosedForms::new(lambda);
    (c.theta - c.theta_from_theta_a).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub closed_forms: ClosedForms,
    /// `b1 - b2` from the reduced equation of `B_1(x) - B_2(-x)`, solved independently.
    pub b_gap_pairing: f64,
    /// `b1 - b2` from the pairing identity evaluated with the exact integrals.
    pub b_gap_closed: f64,
    /// `d1 - d2` by the same two routes.
    pub d_gap_pairing: f64,
    pub d_gap_closed: f64,
    /// Largest orthogonality defect over all six profiles.
    pub orthogonality: f64,
    /// Largest residual of the six profile equations.
    pub equation_residual: f64,
    /// `max |S_2(x) + S_1(-x)|` for the D-layer sources.
    pub source_antisymmetry: f64,
    /// Largest `|decaying part|` at the box edge.
    pub edge_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub a1: Profile,
    pub a2: Profile,
    pub b1: Profile,
    pub b2: Profile,
    pub d1: Profile,
    pub d2: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFamily {
    pub schema_version: u32,
    pub lambda: f64,
    pub grid: Grid,
    pub constants: InteractionConstants,
    pub profiles: Profiles,
    pub diagnostics: BuildDiagnostics,
}

impl ProfileFamily {
    /// Builds the family on a centered grid of half-width 60 with 2048 points.
    /// Finer grids only amplify roundoff in the third-derivative equation check.
    pub fn build(lambda: f64) -> Result<Self> {
        Self::build_on(lambda, Grid::centered(60.0, 2048)?)
    }

    /// Builds the family on a centered grid of half-width at least 60 with spacing `dx`.
    pub fn build_with_spacing(lambda: f64, dx: f64) -> Result<Self> {
        Self::build_on(lambda, Grid::with_spacing(60.0, dx)?)
    }

    pub fn build_on(lambda: f64, grid: Grid) -> Result<Self> {
        ModelParams::new(lambda)?;
        if (grid.start + 0.5 * grid.length).abs() > 1e-12 * grid.length {
            return Err(invalid("profile grid must be centered at 0"));
        }
        if grid.dx() > 0.1 || grid.length < 80.0 {
            return Err(invalid("profile grid needs spacing <= 0.1 and half-width >= 40"));
        }
        Builder::new(lambda, grid)?.run()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fam: Self = serde_json::from_str(s).map_err(|e| invalid(e.to_string()))?;
        if fam.schema_version != FAMILY_SCHEMA_VERSION {
            return Err(invalid(format!("unsupported family schema {}", fam.schema_version)));
        }
        Ok(fam)
    }

    /// Copy with the D layer removed, used to measure what it contributes.
    pub fn without_d_layer(&self) -> Self {
        let mut f = self.clone();
        let zero = |p: &Profile| Profile {
            decaying: GridFunction::zeros(*p.decaying.grid()),
            tail_coefficient: 0.0,
            tail_kind: TailKind::None,
        };
        f.profiles.d1 = zero(&self.profiles.d1);
        f.profiles.d2 = zero(&self.profiles.d2);
        f.constants.delta = 0.0;
        f.constants.d1 = 0.0;
        f.constants.d2 = 0.0;
        f.constants.theta_d = 0.0;
        f
    }
}

struct Builder {
    lambda: f64,
    grid: Grid,
    sp: Spectral,
    op: LinearOperator,
    xs: Vec<f64>,
    q: Vec<[f64; 5]>,
    /// `(1 - lambda d^2) Q`.
    hq: Vec<f64>,
    /// `(1 - lambda d^2) Q'`.
    hdq: Vec<f64>,
    lq: Vec<f64>,
    /// `(1 - lambda d^2) Lambda Q`.
    hlq: Vec<f64>,
    dx: f64,
}

/// Result of one profile solve.
struct Solved {
    profile: Profile,
    kernel_coefficient: f64,
}

impl Builder {
    fn new(lambda: f64, grid: Grid) -> Result<Self> {
        let sp = Spectral::new(grid);
        let op = LinearOperator::new(grid, lambda, 0.0)?;
        let xs = grid.points();
        let q: Vec<[f64; 5]> = xs.iter().map(|&x| q_derivs(x)).collect();
        let hq = q.iter().map(|d| d[0] - lambda * d[2]).collect();
        let hdq = q.iter().map(|d| d[1] - lambda * d[3]).collect();
        let lqj: Vec<[f64; 4]> = xs.iter().map(|&x| lambda_q_jet(0.0, lambda, x)).collect();
        let lq = lqj.iter().map(|j| j[0]).collect();
        let hlq = lqj.iter().map(|j| j[0] - lambda * j[2]).collect();
        Ok(Self { lambda, grid, sp, op, xs, q, hq, hdq, lq, hlq, dx: grid.dx() })
    }

    fn int(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.dx
    }

    fn ip(&self, f: &[f64], g: &[f64]) -> f64 {
        dot(f, g) * self.dx
    }

    fn col(&self, i: usize) -> Vec<f64> {
        self.q.iter().map(|d| d[i]).collect()
    }

    fn tail_values(&self, kind: TailKind, coef: f64) -> Vec<f64> {
        self.xs.iter().map(|&x| coef * kind.jet(x)[0]).collect()
    }

    fn tail_forcing(&self, kind: TailKind, coef: f64) -> Vec<f64> {
        self.xs.iter().map(|&x| coef * kind.forcing(x)).collect()
    }

    /// Solves `(-L P)' + kappa (1 - lambda d^2) Q' = g + (-L tail)'`-compatible data:
    /// `g` is the decaying forcing of the decaying part with the kernel term removed.
    /// Fixes `kappa` by `int (P + shift)(1 - lambda d^2) Q = 0` and the kernel component by
    /// `int P (1 - lambda d^2) Q' = 0`.
    fn solve_profile(&self, g: &[f64], kind: TailKind, coef: f64, shift: f64) -> Result<Solved> {
        let (z, _) = antiderivative(&self.sp, g)?;
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let base = self.op.solve(&neg)?;
        let tail = self.tail_values(kind, coef);
        let with_tail: Vec<f64> = base.iter().zip(&tail).map(|(b, t)| b + t).collect();
        let dq = self.col(1);
        let c = -self.ip(&with_tail, &self.hdq) / self.ip(&dq, &self.hdq);
        let shifted: Vec<f64> = with_tail.iter().map(|v| v + shift).collect();
        let kappa = self.ip(&shifted, &self.hq) / self.ip(&self.lq, &self.hq);
        let decaying: Vec<f64> =
            (0..base.len()).map(|i| base[i] - kappa * self.lq[i] + c * dq[i]).collect();
        Ok(Solved {
            profile: Profile {
                decaying: GridFunction::new(self.grid, decaying)?,
                tail_coefficient: coef,
                tail_kind: kind,
            },
            kernel_coefficient: kappa,
        })
    }

    /// `(-L P)' + k hlq + kappa hdq - rhs` in sup norm.
    fn equation_residual(&self, p: &Profile, k: f64, kappa: f64, rhs: &[f64]) -> f64 {
        let lp = self.op.apply(p.decaying.values());
        let neg: Vec<f64> = lp.iter().map(|v| -v).collect();
        let d = self.sp.derivative(&neg, 1);
        let forcing = self.tail_forcing(p.tail_kind, p.tail_coefficient);
        (0..d.len())
            .map(|i| (d[i] + forcing[i] + k * self.hlq[i] + kappa * self.hdq[i] - rhs[i]).abs())
            .fold(0.0, f64::max)
    }

    fn orthogonality(&self, p: &Profile, shift: f64) -> f64 {
        let full: Vec<f64> = p.full_values();
        let a = self.ip(&full, &self.hdq);
        let shifted: Vec<f64> = full.iter().map(|v| v + shift).collect();
        let b = self.ip(&shifted, &self.hq);
        a.abs().max(b.abs())
    }

    fn run(self) -> Result<ProfileFamily> {
        let l = self.lambda;
        let n = self.xs.len();
        let q = self.col(0);
        let dq = self.col(1);
        let q_sq: Vec<f64> = q.iter().map(|v| v * v).collect();
        let qhlq = self.ip(&q, &self.hlq);
        let int_lq = self.int(&self.lq);

        // A layer.
        let alpha = 12.0 * self.ip(&q, &q) / qhlq;
        let theta_a = 0.5 * (0..n).map(|i| -alpha * self.hlq[i] + 12.0 * q[i]).sum::<f64>() * self.dx;
        let theta = 1.0 - l - theta_a / 18.0;
        let rhs_a: Vec<f64> =
            (0..n).map(|i| 12.0 * (q[i] + dq[i]) - 2.0 * theta_a * dq[i]).collect();
        let g_a: Vec<f64> = (0..n)
            .map(|i| rhs_a[i] - alpha * self.hlq[i] - theta_a * TailKind::Odd.forcing(self.xs[i]))
            .collect();
        let sa = self.solve_profile(&g_a, TailKind::Odd, theta_a, theta_a)?;
        let a = sa.kernel_coefficient;
        let a1 = sa.profile;
        let a2 = a1.reflected();

        // B layer.
        let qdq: Vec<f64> = (0..n).map(|i| q[i] + dq[i]).collect();
        let e0: Vec<f64> = (0..n).map(|i| -q_sq[i] + 3.0 * qdq[i]).collect();
        let e1: Vec<f64> =
            (0..n).map(|i| -2.0 * q[i] * dq[i] + 6.0 * qdq[i] - 4.0 * q_sq[i]).collect();
        let z_b: Vec<f64> = (0..n)
            .map(|i| 6.0 * (1.0 - l) * qdq[i] + 6.0 * theta * (3.0 * qdq[i] - e1[i] - e0[i]))
            .collect();
        let beta = self.ip(&z_b, &q) / qhlq;
        let theta_b = 0.5 * (self.int(&z_b) - beta * int_lq);
        let g_b1: Vec<f64> = (0..n)
            .map(|i| z_b[i] - beta * self.hlq[i] - theta_b * TailKind::Shifted.forcing(self.xs[i]))
            .collect();
        let sb1 = self.solve_profile(&g_b1, TailKind::Shifted, theta_b, 0.0)?;
        let z_b_ref = reflect_values(&z_b);
        let rhs_b2: Vec<f64> = (0..n).map(|i| -z_b_ref[i] + 4.0 * theta_b * dq[i]).collect();
        let g_b2: Vec<f64> = (0..n)
            .map(|i| rhs_b2[i] + beta * self.hlq[i] + theta_b * TailKind::Shifted.forcing(self.xs[i]))
            .collect();
        let sb2 = self.solve_profile(&g_b2, TailKind::Shifted, -theta_b, -2.0 * theta_b)?;
        let (b1, b2) = (sb1.kernel_coefficient, sb2.kernel_coefficient);

        // Independent route for b1 - b2 through B(x) = B_1(x) - B_2(-x) - 2 theta_B.
        // Independent route for the kernel gaps through P(x) = P_1(x) - P_2(-x) - 2 theta,
        // which satisfies L P = 8 theta Q + (p1 - p2)(1 - lambda d^2) Q.
        let f = self.op.solve(&q)?;
        let gap_per_theta =
            (8.0 * self.ip(&f, &self.hq) + 24.0) / self.ip(&self.lq, &self.hq);
        let gap_closed_per_theta = -12.0 * (1.0 + l) / (0.3 * (15.0 + 10.0 * l - l * l));

        // D layer sources.
        let s_f: Vec<f64> = (0..n)
            .map(|i| {
                let x = self.xs[i];
                6.0 * (1.0 - l) * (-qdq[i] + x * (q_sq[i] - 3.0 * qdq[i]))
            })
            .collect();
        let s_tilde: Vec<f64> = (0..n)
            .map(|i| {
                let x = self.xs[i];
                -12.0 * theta * (e0[i] - x * e1[i] - x * e0[i] + 3.0 * x * qdq[i] - 6.0 * qdq[i])
            })
            .collect();
        let s1 = self.a_layer_source(&a1, theta_a, 1.0);
        let s2 = self.a_layer_source(&a2, theta_a, -1.0);
        let s1_ref = reflect_values(&s1);
        let source_antisymmetry =
            (0..n).map(|i| (s2[i] + s1_ref[i]).abs()).fold(0.0, f64::max);
        let corr: Vec<f64> = (0..n)
            .map(|i| alpha * lambda2_q_raw(0.0, l, self.xs[i]) + a * lambda_q_jet(0.0, l, self.xs[i])[1])
            .collect();
        let hcorr = self.sp.helmholtz(&corr, l);
        let s: Vec<f64> = (0..n).map(|i| -s_f[i] - s1[i] - s_tilde[i] - hcorr[i]).collect();

        let delta = self.ip(&s, &q) / qhlq;
        let theta_d = 0.5 * (self.int(&s) - delta * int_lq);
        let g_d1: Vec<f64> = (0..n)
            .map(|i| s[i] - delta * self.hlq[i] - theta_d * TailKind::Shifted.forcing(self.xs[i]))
            .collect();
        let sd1 = self.solve_profile(&g_d1, TailKind::Shifted, theta_d, 0.0)?;
        let s_ref = reflect_values(&s);
        let rhs_d2: Vec<f64> = (0..n).map(|i| -s_ref[i] + 4.0 * theta_d * dq[i]).collect();
        let g_d2: Vec<f64> = (0..n)
            .map(|i| rhs_d2[i] + delta * self.hlq[i] + theta_d * TailKind::Shifted.forcing(self.xs[i]))
            .collect();
        let sd2 = self.solve_profile(&g_d2, TailKind::Shifted, -theta_d, -2.0 * theta_d)?;
        let (d1, d2) = (sd1.kernel_coefficient, sd2.kernel_coefficient);

        let profiles = Profiles {
            a1,
            a2,
            b1: sb1.profile,
            b2: sb2.profile,
            d1: sd1.profile,
            d2: sd2.profile,
        };
        let rhs_a2: Vec<f64> =
            (0..n).map(|i| -12.0 * (q[i] - dq[i]) - 2.0 * theta_a * dq[i]).collect();
        let equation_residual = [
            self.equation_residual(&profiles.a1, alpha, a, &rhs_a),
            self.equation_residual(&profiles.a2, -alpha, a, &rhs_a2),
            self.equation_residual(&profiles.b1, beta, b1, &z_b),
            self.equation_residual(&profiles.b2, -beta, b2, &rhs_b2),
            self.equation_residual(&profiles.d1, delta, d1, &s),
            self.equation_residual(&profiles.d2, -delta, d2, &rhs_d2),
        ]
        ;
        let equation_residual = equation_residual.into_iter().fold(0.0, f64::max);
        let orthogonality = [
            self.orthogonality(&profiles.a1, theta_a),
            self.orthogonality(&profiles.b1, 0.0),
            self.orthogonality(&profiles.b2, -2.0 * theta_b),
            self.orthogonality(&profiles.d1, 0.0),
            self.orthogonality(&profiles.d2, -2.0 * theta_d),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let edge_magnitude = [&profiles.a1, &profiles.b1, &profiles.b2, &profiles.d1, &profiles.d2]
            .iter()
            .map(|p| {
                let v = p.decaying.values();
                v[0].abs().max(v[n - 1].abs())
            })
            .fold(0.0, f64::max);

        Ok(ProfileFamily {
            schema_version: FAMILY_SCHEMA_VERSION,
            lambda: l,
            grid: self.grid,
            constants: InteractionConstants {
                alpha,
                beta,
                delta,
                a,
                b1,
                b2,
                d1,
                d2,
                theta,
                theta_a,
                theta_b,
                theta_d,
            },
            profiles,
            diagnostics: BuildDiagnostics {
                closed_forms: ClosedForms::new(l),
                b_gap_pairing: gap_per_theta * theta_b,
                b_gap_closed: gap_closed_per_theta * theta_b,
                d_gap_pairing: gap_per_theta * theta_d,
                d_gap_closed: gap_closed_per_theta * theta_d,
                orthogonality,
                equation_residual,
                source_antisymmetry,
                edge_magnitude,
            },
        })
    }

    /// Source left by the A layer at order `mu e^{-y}`:
    /// `2(Lambda Q (A + theta_A))' -+ (2/3) theta_A Q - (2/3) lambda theta_A Q' -+ 2(1 - lambda d^2) A_hat - (1 - lambda d^2) A'`,
    /// upper signs for the right soliton (`side = 1`).
    fn a_layer_source(&self, p: &Profile, theta_a: f64, side: f64) -> Vec<f64> {
        let l = self.lambda;
        let n = self.xs.len();
        let full = p.full_values();
        let prod: Vec<f64> = (0..n).map(|i| self.lq[i] * (full[i] + theta_a)).collect();
        let dprod = self.sp.derivative(&prod, 1);
        let hat = p.decaying.values();
        let hhat = self.sp.helmholtz(hat, l);
        let dhat = self.sp.derivative(hat, 1);
        let dfull: Vec<f64> =
            (0..n).map(|i| dhat[i] + p.tail_coefficient * p.tail_kind.jet(self.xs[i])[1]).collect();
        let hdfull = self.sp.helmholtz(&dfull, l);
        (0..n)
            .map(|i| {
                let d = &self.q[i];
                2.0 * dprod[i] - side * 2.0 / 3.0 * theta_a * d[0] - 2.0 / 3.0 * l * theta_a * d[1]
                    - side * 2.0 * hhat[i]
                    - hdfull[i]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn theta_formulas_agree() {
        assert_abs_diff_eq!(ClosedForms::new(0.0).theta, 1.0 / 3.0, epsilon = 1e-15);
        assert!(theta_consistency(0.0) < 1e-12);
        assert!(theta_consistency(0.5) < 1e-12);
        for i in 0..99 {
            assert!(theta_consistency(i as f64 / 99.0) < 1e-12);
        }
    }

    #[test]
    fn exponential_tail_identity() {
        for x in [-8.0f64, -1.0, 0.0, 2.0, 9.0] {
            let d = q_derivs(x);
            let direct = (-x).exp() * 2.0 * d[0] * d[1];
            let stable = -2.0 * d[0] * d[1] + 6.0 * (d[0] + d[1]) - 4.0 * d[0] * d[0];
            assert_abs_diff_eq!(direct, stable, epsilon = 1e-12);
        }
    }

    #[test]
    fn tail_jets_are_derivatives() {
        let h = 1e-5;
        for kind in [TailKind::Odd, TailKind::Shifted] {
            for s in [-3.0, 0.2, 4.0] {
                let a = kind.jet(s);
                let p = kind.jet(s + h);
                let m = kind.jet(s - h);
                for k in 0..3 {
                    assert_abs_diff_eq!((p[k] - m[k]) / (2.0 * h), a[k + 1], epsilon = 1e-8);
                }
            }
        }
    }
}

