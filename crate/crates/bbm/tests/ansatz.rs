use bbm::ansatz::{cutoff, residual_scan, symmetric_trajectory, Ansatz, AnsatzState};
use bbm::dynamics::{forcing, PairParams};
use bbm::grid::{h1_norm, Grid, Spectral};
use bbm::profiles::ProfileFamily;
use bbm::soliton::soliton_jet;

fn state(g: PairParams, y0: f64) -> AnsatzState {
    AnsatzState { gamma: g, y0 }
}

#[test]
fn zero_speeds_leave_only_the_a_layer() {
    let fam = ProfileFamily::build(0.5).unwrap();
    let an = Ansatz::new(fam.clone());
    let fgrid = fam.grid;
    let dx = fgrid.dx();
    let (y1, y2) = (100.0 * dx, -88.0 * dx);
    let y = y1 - y2;
    let g = PairParams::new(0.0, 0.0, y1, y2);
    let v0 = an.assemble_v0(&state(g, y), &fgrid).unwrap();
    let h = (-y).exp();
    let a1 = fam.profiles.a1.full_values();
    let a2 = fam.profiles.a2.full_values();
    let n = fgrid.n;
    let mut compared = 0;
    for i in 100..n - 100 {
        let x = fgrid.x(i);
        let expected = soliton_jet(0.0, 0.5, x - y1)[0]
            + soliton_jet(0.0, 0.5, x - y2)[0]
            + h * (a1[i - 100] + a2[i + 88]);
        assert!((v0.values()[i] - expected).abs() < 1e-13, "{x}");
        compared += 1;
    }
    assert!(compared > 1000);
}

#[test]
fn cutoff_region() {
    let fam = ProfileFamily::build(0.5).unwrap();
    let an = Ansatz::new(fam.clone());
    let y0 = 8.0;
    let g = PairParams::new(0.02, -0.02, 4.0, -4.0);
    let dx = fam.grid.dx();
    let n = 2 * ((120.0 / dx) as usize);
    let grid = Grid::new(-(n as f64) * dx + 50.0, n as f64 * dx, n).unwrap();
    let v0 = an.assemble_v0(&state(g, y0), &grid).unwrap();
    let v = an.assemble_v(&state(g, y0), &grid).unwrap();
    let edge = (0.5 * y0).exp();
    for (i, x) in grid.points().into_iter().enumerate() {
        if x >= -0.5 * edge {
            assert_eq!(v.values()[i], v0.values()[i]);
        }
        if x <= -edge {
            assert_eq!(v.values()[i], 0.0);
        }
    }
    assert_eq!(cutoff(0.5), 1.0);
}

/// `V - R1 - R2` in sup and H^1 norms relative to `e^{-y}` and `sqrt(y) e^{-y}`.
#[test]
fn closeness_to_two_solitons() {
    let fam = ProfileFamily::build(0.5).unwrap();
    let an = Ansatz::new(fam.clone());
    let y0: f64 = 10.0;
    let mu0 = (fam.constants.alpha * (-y0).exp()).sqrt();
    let dx = fam.grid.dx();
    let mut sup_ratio = vec![];
    let mut h1_ratio = vec![];
    for k in 0..=10 {
        let y = 10.0 + k as f64;
        let g = PairParams::new(mu0, -mu0, 0.5 * y, -0.5 * y);
        let lo = -(0.5 * y0).exp() - 20.0;
        let n = (((0.5 * y + 40.0 - lo) / dx) as usize + 1) & !1;
        let grid = Grid::new(lo, n as f64 * dx, n).unwrap();
        let v = an.assemble_v(&AnsatzState::new(g, y0, fam.constants.alpha).unwrap(), &grid).unwrap();
        let diff: Vec<f64> = v
            .values()
            .iter()
            .zip(grid.points())
            .map(|(v, x)| v - soliton_jet(mu0, 0.5, x - g.y1)[0] - soliton_jet(-mu0, 0.5, x - g.y2)[0])
            .collect();
        let sup = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h1 = h1_norm(&Spectral::new(grid), &diff);
        sup_ratio.push(sup * y.exp());
        h1_ratio.push(h1 * y.exp() / y.sqrt());
    }
    let spread = |r: &[f64]| r.iter().cloned().fold(0.0, f64::max) / r.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread(&sup_ratio) < 2.0, "{sup_ratio:?}");
    assert!(spread(&h1_ratio) < 2.0, "{h1_ratio:?}");
}

/// Independent evaluation of `E0` from its definition with finite differences in the
/// parameters and in space, without removing the soliton identities.
#[test]
fn residual_matches_direct_definition() {
    let l = 0.5;
    let fam = ProfileFamily::build(l).unwrap();
    let an = Ansatz::new(fam.clone());
    let c = fam.constants;
    let y0 = 6.0;
    let g = PairParams::new(0.05, -0.04, 3.05, -2.95);
    let st = AnsatzState::new(g, y0, c.alpha).unwrap();
    let grid = an.scan_grid(&g).unwrap();
    let dx = grid.dx();
    let e0 = an.residual(&st, &grid).unwrap();
    let v = |p: PairParams| an.assemble_v0(&state(p, y0), &grid).unwrap().into_values();
    let dp = 1e-3;
    let param_derivative = |k: usize| {
        let at = |s: f64| {
            let mut a = g.to_array();
            a[k] += s * dp;
            v(PairParams::from_array(a))
        };
        let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
        (0..p1.len()).map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * dp)).collect::<Vec<f64>>()
    };
    let dmu: Vec<Vec<f64>> = (0..2).map(param_derivative).collect();
    let dy: Vec<Vec<f64>> = (2..4).map(param_derivative).collect();
    let [m1, m2, n1, n2] = forcing(&g, &c);
    let v0 = v(g);
    let n = v0.len();
    let time: Vec<f64> = (0..n)
        .map(|i| m1 * dmu[0][i] + m2 * dmu[1][i] + (g.mu1 - n1) * dy[0][i] + (g.mu2 - n2) * dy[1][i])
        .collect();
    let flux: Vec<f64> = (0..n).map(|i| -v0[i] + v0[i] * v0[i]).collect();
    // Sixth-order centered differences.
    let d1 = |f: &[f64], i: usize| {
        (45.0 * (f[i + 1] - f[i - 1]) - 9.0 * (f[i + 2] - f[i - 2]) + (f[i + 3] - f[i - 3])) / (60.0 * dx)
    };
    let d2 = |f: &[f64], i: usize| {
        (-490.0 * f[i] + 270.0 * (f[i + 1] + f[i - 1]) - 27.0 * (f[i + 2] + f[i - 2]) + 2.0 * (f[i + 3] + f[i - 3]))
            / (180.0 * dx * dx)
    };
    let d3 = |f: &[f64], i: usize| {
        (-488.0 * (f[i + 1] - f[i - 1]) + 338.0 * (f[i + 2] - f[i - 2]) - 72.0 * (f[i + 3] - f[i - 3])
            + 7.0 * (f[i + 4] - f[i - 4]))
            / (240.0 * dx * dx * dx)
    };
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 10..n - 10 {
        let direct = time[i] - l * d2(&time, i) + d3(&v0, i) + d1(&flux, i);
        worst = worst.max((direct - e0.values()[i]).abs());
        scale = scale.max(e0.values()[i].abs());
    }
    assert!(scale > 1e-6, "{scale}");
    assert!(worst < 1e-4 * scale, "{worst} vs {scale}");
}

#[test]
fn residual_beyond_window_is_at_noise_floor() {
    let fam = ProfileFamily::build(0.0).unwrap();
    let an = Ansatz::new(fam.clone());
    let y0 = 12.0;
    let tr = symmetric_trajectory(&fam, y0, 4).unwrap();
    for g in &tr {
        let grid = an.scan_grid(g).unwrap();
        let e = an.residual(&state(*g, y0), &grid).unwrap();
        let h = (-g.separation()).exp();
        let far = e
            .values()
            .iter()
            .zip(grid.points())
            .filter(|(_, x)| x - g.y1 > bbm::ansatz::WEIGHT_WINDOW)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
        assert!(far < 1e-8 * h, "{far} {h}");
    }
}

#[test]
fn state_bounds_are_enforced() {
    let alpha = 16.0;
    assert!(AnsatzState::new(PairParams::new(0.0, 0.0, 3.0, -3.0), 10.0, alpha).is_err());
    assert!(AnsatzState::new(PairParams::new(0.5, -0.5, 5.0, -5.0), 10.0, alpha).is_err());
    assert!(AnsatzState::new(PairParams::new(0.01, -0.01, 5.0, -5.0), 10.0, alpha).is_ok());
}

fn scan(lambda: f64) -> (Vec<f64>, f64) {
    let fam = ProfileFamily::build(lambda).unwrap();
    let full = Ansatz::new(fam.clone());
    let ablated = Ansatz::new(fam.without_d_layer());
    let mut sups = vec![];
    let mut ablation = 0.0;
    for y0 in [10.0, 12.0, 14.0] {
        let tr = symmetric_trajectory(&fam, y0, 20).unwrap();
        let s = residual_scan(&full, y0, &tr).unwrap().sup;
        if y0 == 12.0 {
            ablation = residual_scan(&ablated, y0, &tr).unwrap().sup / s;
        }
        sups.push(s);
    }
    (sups, ablation)
}

#[test]
fn residual_hierarchy() {
    for lambda in [0.0, 0.5] {
        let (sups, ablation) = scan(lambda);
        // Growth in Y0 slower than e^{Y0/4}.
        assert!(sups[2] / sups[0] < 1f64.exp(), "{lambda} {sups:?}");
        assert!(sups.windows(2).all(|w| (w[1] / w[0]).ln() / 2.0 < 0.25), "{sups:?}");
        assert!(ablation >= 5.0, "{lambda} {ablation}");
    }
}
