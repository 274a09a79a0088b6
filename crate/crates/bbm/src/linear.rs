//! The linearized operator `L_mu v = -(1 + lambda mu) v'' + (1 + mu) v - 2 Q_mu v`
//! on a truncated periodic box: application, constrained inversion, spectrum and coercivity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, BbmError, Result};
use crate::grid::{dot, Grid, GridFunction, Spectral};
use crate::krylov::{gmres, lanczos, pcg};
use crate::soliton::soliton_jet;

const SOLVE_TOL: f64 = 1e-13;
const EIGEN_SHIFT: f64 = 2.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub domain_halfwidth: f64,
    pub num_points: usize,
    pub lambda: f64,
}

impl OperatorConfig {
    pub fn new(domain_halfwidth: f64, num_points: usize, lambda: f64) -> Result<Self> {
        if domain_halfwidth < 40.0 {
            return Err(invalid("operator half-width must be at least 40"));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(invalid(format!("lambda = {lambda} must lie in [0, 1)")));
        }
        let cfg = Self { domain_halfwidth, num_points, lambda };
        if cfg.grid()?.dx() > 0.1 {
            return Err(invalid("operator grid spacing must not exceed 0.1"));
        }
        Ok(cfg)
    }

    /// Half-width 60 with 4096 points.
    pub fn standard(lambda: f64) -> Result<Self> {
        Self::new(60.0, 4096, lambda)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::centered(self.domain_halfwidth, self.num_points)
    }
}

/// `L_mu` with its kernel `Q_mu'` and the constraint direction `(1 - lambda d^2) Q_mu'`.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    sp: Spectral,
    lambda: f64,
    mu: f64,
    qmu: Vec<f64>,
    kernel: Vec<f64>,
    constraint: Vec<f64>,
}

impl LinearOperator {
    pub fn new(grid: Grid, lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > -1.0) {
            return Err(invalid("mu must exceed -1"));
        }
        let sp = Spectral::new(grid);
        let xs = grid.points();
        let jets: Vec<[f64; 4]> = xs.iter().map(|&x| soliton_jet(mu, lambda, x)).collect();
        let qmu = jets.iter().map(|j| j[0]).collect();
        let kernel: Vec<f64> = jets.iter().map(|j| j[1]).collect();
        let constraint = jets.iter().map(|j| j[1] - lambda * j[3]).collect();
        Ok(Self { sp, lambda, mu, qmu, kernel, constraint })
    }

    pub fn from_config(cfg: &OperatorConfig) -> Result<Self> {
        Self::new(cfg.grid()?, cfg.lambda, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        self.sp.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn q(&self) -> &[f64] {
        &self.qmu
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn constraint(&self) -> &[f64] {
        &self.constraint
    }

    fn coeffs(&self) -> (f64, f64) {
        (1.0 + self.lambda * self.mu, 1.0 + self.mu)
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let (a, b) = self.coeffs();
        let f2 = self.sp.derivative(f, 2);
        f.iter()
            .zip(&f2)
            .zip(&self.qmu)
            .map(|((fi, f2i), qi)| -a * f2i + b * fi - 2.0 * qi * fi)
            .collect()
    }

    fn shifted_precond(&self, shift: f64) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        let (a, b) = self.coeffs();
        move |r: &[f64]| {
            self.sp.apply_symbol(r, |k| num_complex::Complex64::new(1.0 / (a * k * k + b + shift), 0.0))
        }
    }

    /// Solves `L f = h` with `int f (1 - lambda d^2) Q_mu' = 0` through the bordered system.
    pub fn solve(&self, h: &[f64]) -> Result<Vec<f64>> {
        let n = h.len();
        let dx = self.grid().dx();
        let projection = dot(h, &self.kernel) * dx;
        if projection.abs() > 1e-9 {
            return Err(BbmError::KernelObstruction { projection });
        }
        let c = &self.constraint;
        let a = |v: &[f64]| {
            let (f, s) = v.split_at(n);
            let mut out = self.apply(f);
            for (o, ci) in out.iter_mut().zip(c) {
                *o += s[0] * ci;
            }
            out.push(dot(f, c) * dx);
            out
        };
        let pre = self.shifted_precond(0.0);
        let m_inv = |v: &[f64]| {
            let mut out = pre(&v[..n]);
            out.push(v[n]);
            out
        };
        let mut rhs = h.to_vec();
        rhs.push(0.0);
        let (mut sol, _) = gmres(a, m_inv, &rhs, SOLVE_TOL, 300, 3000)?;
        sol.truncate(n);
        Ok(sol)
    }

    /// The `count` lowest eigenpairs, eigenvectors normalized in `L2` with positive largest entry.
    pub fn lowest_eigenpairs(&self, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.grid().n;
        let dx = self.grid().dx();
        let pre = self.shifted_precond(EIGEN_SHIFT);
        let mut failure = None;
        let op = |v: &[f64]| {
            let shifted = |f: &[f64]| {
                let mut o = self.apply(f);
                for (oi, fi) in o.iter_mut().zip(f) {
                    *oi += EIGEN_SHIFT * fi;
                }
                o
            };
            match pcg(shifted, &pre, v, 1e-15, 500) {
                Ok((x, _)) => x,
                Err(BbmError::SolverStalled { residual, .. }) if residual < 1e-12 => {
                    pcg(shifted, &pre, v, residual * 1.01, 1000).map(|r| r.0).unwrap_or_default()
                }
                Err(e) => {
                    failure = Some(e);
                    vec![0.0; v.len()]
                }
            }
        };
        let start: Vec<f64> = self.grid().points().iter().map(|&x| (-0.05 * x * x).exp() * (1.0 + 0.3 * x)).collect();
        let pairs = lanczos(op, &start, 60, |_| {});
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(pairs
            .iter()
            .rev()
            .take(count)
            .map(|p| {
                let nrm = (dot(&p.vector, &p.vector) * dx).sqrt();
                let peak = p.vector.iter().cloned().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
                let s = peak.signum() / nrm;
                let v: Vec<f64> = p.vector.iter().map(|x| x * s).collect();
                debug_assert_eq!(v.len(), n);
                (1.0 / p.value - EIGEN_SHIFT, v)
            })
            .collect())
    }

    /// Minimum of `(L f, f)/|f|_{H1}^2` over `f` orthogonal to the given directions.
    pub fn rayleigh_minimum(&self, constraints: &[Vec<f64>]) -> f64 {
        let sp = &self.sp;
        constrained_rayleigh_minimum(sp, |f| self.apply(f), constraints)
    }

    /// Minimum of `(L f, f)/|f|_{H1}^2` over `f` orthogonal to `(1 - lambda d^2) Q` and `(1 - lambda d^2) Q'`.
    pub fn constrained_coercivity(&self) -> f64 {
        let hq = self.sp.helmholtz(&self.qmu, self.lambda);
        self.rayleigh_minimum(&[hq, self.constraint.clone()])
    }
}

/// Minimum of `(A f, f)/|f|_{H1}^2` over `f` with `int f c = 0` for every constraint `c`,
/// computed by Lanczos on `H^{-1/2} A H^{-1/2}` restricted to the constrained subspace.
pub fn constrained_rayleigh_minimum(
    sp: &Spectral,
    apply_a: impl Fn(&[f64]) -> Vec<f64>,
    constraints: &[Vec<f64>],
) -> f64 {
    use num_complex::Complex64;
    let half_inv = |v: &[f64]| sp.apply_symbol(v, |k| Complex64::new((1.0 + k * k).powf(-0.5), 0.0));
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for c in constraints {
        let mut d = half_inv(c);
        for _ in 0..2 {
            for e in &dirs {
                let p = dot(&d, e);
                d.iter_mut().zip(e).for_each(|(di, ei)| *di -= p * ei);
            }
        }
        let nd = dot(&d, &d).sqrt();
        if nd > 0.0 {
            d.iter_mut().for_each(|v| *v /= nd);
            dirs.push(d);
        }
    }
    let project = |v: &mut Vec<f64>| {
        for _ in 0..2 {
            for e in &dirs {
                let p = dot(v, e);
                v.iter_mut().zip(e).for_each(|(vi, ei)| *vi -= p * ei);
            }
        }
    };
    let op = |g: &[f64]| half_inv(&apply_a(&half_inv(g)));
    let start: Vec<f64> = sp
        .grid()
        .points()
        .iter()
        .map(|&x| (-0.02 * x * x).exp() * (1.0 + 0.2 * x + 0.05 * x * x))
        .collect();
    let pairs = lanczos(op, &start, 150, project);
    pairs[0].value
}

pub fn apply_l(f: &GridFunction, mu: f64, lambda: f64) -> Result<GridFunction> {
    let op = LinearOperator::new(*f.grid(), lambda, mu)?;
    GridFunction::new(*f.grid(), op.apply(f.values()))
}

pub fn solve_l(h: &GridFunction, lambda: f64) -> Result<GridFunction> {
    let op = LinearOperator::new(*h.grid(), lambda, 0.0)?;
    GridFunction::new(*h.grid(), op.solve(h.values())?)
}

pub fn lowest_eigenpair(cfg: &OperatorConfig) -> Result<(f64, GridFunction)> {
    let op = LinearOperator::from_config(cfg)?;
    let (v, f) = op.lowest_eigenpairs(1)?.remove(0);
    Ok((v, GridFunction::new(cfg.grid()?, f)?))
}

pub fn constrained_coercivity(lambda: f64) -> Result<f64> {
    Ok(LinearOperator::from_config(&OperatorConfig::standard(lambda)?)?.constrained_coercivity())
}

/// Decaying antiderivative `Z(x) = int_{-inf}^x g` with the measured total integral.
#[derive(Debug, Clone)]
pub struct Antiderivative {
    pub z: GridFunction,
    pub total: f64,
}

pub fn integrate_from_left(g: &GridFunction) -> Result<Antiderivative> {
    let sp = Spectral::new(*g.grid());
    let (z, total) = antiderivative(&sp, g.values())?;
    Ok(Antiderivative { z: GridFunction::new(*g.grid(), z)?, total })
}

pub(crate) fn antiderivative(sp: &Spectral, g: &[f64]) -> Result<(Vec<f64>, f64)> {
    use num_complex::Complex64;
    let total = g.iter().sum::<f64>() * sp.grid().dx();
    if total.abs() > 1e-7 {
        return Err(BbmError::MeanObstruction { mean: total });
    }
    let p = sp.apply_symbol(g, |k| if k == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, -1.0 / k) });
    let p0 = p[0];
    Ok((p.iter().map(|v| v - p0).collect(), total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::{lambda_q_jet, q, q_derivs};
    use proptest::prelude::*;

    fn op(lambda: f64) -> LinearOperator {
        LinearOperator::from_config(&OperatorConfig::standard(lambda).unwrap()).unwrap()
    }

    fn sample(g: &Grid, f: impl Fn(f64) -> f64) -> Vec<f64> {
        g.points().into_iter().map(f).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn config_validation() {
        assert!(OperatorConfig::new(30.0, 4096, 0.0).is_err());
        assert!(OperatorConfig::new(60.0, 512, 0.0).is_err());
        assert!(OperatorConfig::new(60.0, 4096, 1.0).is_err());
    }

    #[test]
    fn apply_examples() {
        let l = op(0.3);
        let g = *l.grid();
        let dq = sample(&g, |x| q_derivs(x)[1]);
        assert!(l.apply(&dq).iter().all(|v| v.abs() < 1e-10));
        let q32 = sample(&g, |x| q(x).powf(1.5));
        let lq32 = l.apply(&q32);
        assert!(max_diff(&lq32, &q32.iter().map(|v| -1.25 * v).collect::<Vec<_>>()) < 1e-10);
        let qv = sample(&g, q);
        let lq = l.apply(&qv);
        assert!(max_diff(&lq, &qv.iter().map(|v| -v * v).collect::<Vec<_>>()) < 1e-10);
    }

    #[test]
    fn l_mu_identities() {
        let (lambda, mu) = (0.5, 0.2);
        let g = Grid::centered(60.0, 4096).unwrap();
        let l = LinearOperator::new(g, lambda, mu).unwrap();
        let jets: Vec<[f64; 4]> = g.points().iter().map(|&x| soliton_jet(mu, lambda, x)).collect();
        let qm: Vec<f64> = jets.iter().map(|j| j[0]).collect();
        let lq = l.apply(&qm);
        assert!(max_diff(&lq, &qm.iter().map(|v| -v * v).collect::<Vec<_>>()) < 1e-10);
        let lam: Vec<f64> = g.points().iter().map(|&x| lambda_q_jet(mu, lambda, x)[0]).collect();
        let hq: Vec<f64> = jets.iter().map(|j| -(j[0] - lambda * j[2])).collect();
        assert!(max_diff(&l.apply(&lam), &hq) < 1e-10);
    }

    #[test]
    fn solve_examples() {
        for lambda in [0.0, 0.25, 0.5, 0.75] {
            let l = op(lambda);
            let g = *l.grid();
            let h: Vec<f64> = sample(&g, |x| {
                let d = soliton_jet(0.0, lambda, x);
                -(d[0] - lambda * d[2])
            });
            let f = l.solve(&h).unwrap();
            let lam = sample(&g, |x| lambda_q_jet(0.0, lambda, x)[0]);
            assert!(max_diff(&f, &lam) < 1e-8, "lambda {lambda}: {:e}", max_diff(&f, &lam));
        }
        let l = op(0.5);
        let g = *l.grid();
        assert!(l.solve(&vec![0.0; g.n]).unwrap().iter().all(|v| *v == 0.0));
        let q32 = sample(&g, |x| q(x).powf(1.5));
        let f = l.solve(&q32).unwrap();
        assert!(max_diff(&f, &q32.iter().map(|v| -0.8 * v).collect::<Vec<_>>()) < 1e-8);
        let dq = sample(&g, |x| q_derivs(x)[1]);
        assert!(matches!(l.solve(&dq), Err(BbmError::KernelObstruction { .. })));
    }

    #[test]
    fn spectrum() {
        let l = op(0.0);
        let pairs = l.lowest_eigenpairs(3).unwrap();
        let dx = l.grid().dx();
        assert!((pairs[0].0 + 1.25).abs() < 1e-8, "{}", pairs[0].0);
        assert!(pairs[1].0.abs() < 1e-8, "{}", pairs[1].0);
        assert!((pairs[2].0 - 0.75).abs() < 1e-8, "{}", pairs[2].0);
        let angle = |v: &[f64], w: &[f64]| {
            let c = dot(v, w) / (dot(v, v) * dot(w, w)).sqrt();
            c.abs().min(1.0).acos()
        };
        let g = *l.grid();
        assert!(angle(&pairs[0].1, &sample(&g, |x| q(x).powf(1.5))) < 1e-6);
        assert!(angle(&pairs[1].1, &sample(&g, |x| q_derivs(x)[1])) < 1e-6);
        assert!((dot(&pairs[0].1, &pairs[0].1) * dx - 1.0).abs() < 1e-12);
        let fine = LinearOperator::new(Grid::centered(60.0, 8192).unwrap(), 0.0, 0.0).unwrap();
        let e2 = fine.lowest_eigenpairs(1).unwrap()[0].0;
        assert!((e2 - pairs[0].0).abs() < 1e-9);
    }

    #[test]
    fn coercivity() {
        for lambda in [0.0, 0.5] {
            let l = op(lambda);
            let c = l.constrained_coercivity();
            assert!(c > 0.0, "lambda {lambda}: {c}");
            assert!(l.rayleigh_minimum(&[]) < 0.0);
        }
    }

    #[test]
    fn antiderivatives() {
        let g = Grid::centered(60.0, 4096).unwrap();
        let dq = GridFunction::from_fn(g, |x| q_derivs(x)[1]);
        let z = integrate_from_left(&dq).unwrap();
        let qg = GridFunction::from_fn(g, q);
        assert!(max_diff(z.z.values(), qg.values()) < 1e-10);
        let bump = GridFunction::from_fn(g, |x| q(x) - 6.0 / (std::f64::consts::PI * x.cosh()));
        let zb = integrate_from_left(&bump).unwrap();
        assert!(zb.z.values()[0].abs() < 1e-9 && zb.z.values()[g.n - 1].abs() < 1e-9);
        assert!(matches!(
            integrate_from_left(&qg),
            Err(BbmError::MeanObstruction { mean }) if (mean - 6.0).abs() < 1e-10
        ));
    }

    #[test]
    fn parity_preserved() {
        let l = op(0.5);
        let g = *l.grid();
        let even = sample(&g, |x| (-(x * x) / 4.0).exp() * (1.0 - 0.3 * x * x));
        let odd = sample(&g, |x| x * (-(x * x) / 3.0).exp());
        let odd: Vec<f64> = {
            let p = dot(&odd, l.kernel()) / dot(l.kernel(), l.kernel());
            odd.iter().zip(l.kernel()).map(|(o, k)| o - p * k).collect()
        };
        let n = g.n;
        let fe = l.solve(&even).unwrap();
        let fo = l.solve(&odd).unwrap();
        for i in 1..n / 2 {
            assert!((fe[i] - fe[n - i]).abs() < 1e-10);
            assert!((fo[i] + fo[n - i]).abs() < 1e-10);
        }
        assert!(max_diff(&l.apply(&fo), &odd) < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn self_adjoint(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-5.0f64..5.0, 6)) {
            let l = LinearOperator::new(Grid::centered(40.0, 1024).unwrap(), 0.4, 0.0).unwrap();
            let g = *l.grid();
            let f = sample(&g, |x| a[0] * (-(x - b[0]).powi(2)).exp() + a[1] * (-(x - b[1]).powi(2) / 2.0).exp() + a[2] * x * (-(x - b[2]).powi(2) / 3.0).exp());
            let h = sample(&g, |x| a[3] * (-(x - b[3]).powi(2)).exp() + a[4] * (-(x - b[4]).powi(2) / 2.0).exp() + a[5] / (x - b[5]).cosh());
            let lhs = dot(&l.apply(&f), &h);
            let rhs = dot(&f, &l.apply(&h));
            prop_assert!((lhs - rhs).abs() * g.dx() < 1e-10);
        }
    }
}
