use bbm::evolver::{soliton_shape_error, Evolution, Evolver, EvolverConfig};
use bbm::grid::{Grid, GridFunction};
use bbm::soliton::soliton_jet;

const MU: f64 = 0.2;
const START: f64 = -5.0;

fn soliton(g: Grid, mu: f64, lambda: f64, y: f64) -> GridFunction {
    GridFunction::from_fn(g, |x| soliton_jet(mu, lambda, x - y)[0])
}

fn run(lambda: f64, n: usize, dt: Option<f64>, t: f64) -> (Evolution, GridFunction) {
    let g = Grid::centered(40.0, n).unwrap();
    let u0 = soliton(g, MU, lambda, START);
    let mut cfg = EvolverConfig::new(lambda, g).unwrap();
    if let Some(dt) = dt {
        cfg = cfg.with_dt(dt);
    }
    let out = Evolver::new(cfg).unwrap().evolve(&u0, t, 100, |_, _| Ok(())).unwrap();
    (out, u0)
}

fn shape_error(out: &Evolution, lambda: f64, t: f64) -> f64 {
    soliton_shape_error(&out.final_state, MU, lambda, START + MU * t).unwrap().1
}

fn center_of_mass(u: &GridFunction) -> f64 {
    let xs = u.grid().points();
    let w: f64 = u.values().iter().sum();
    xs.iter().zip(u.values()).map(|(x, v)| x * v).sum::<f64>() / w
}

fn l2_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.axpy(-1.0, b).l2_norm()
}

#[test]
fn single_soliton_translates() {
    for (lambda, n) in [(0.5, 1024), (0.0, 512)] {
        let t = 50.0;
        let (out, _) = run(lambda, n, None, t);
        let err = shape_error(&out, lambda, t);
        let drift = out.drift();
        assert!(err < 1e-6, "lambda {lambda}: shape error {err:e}");
        assert!(drift.max() < 1e-9, "lambda {lambda}: drift {drift:?}");
        assert_eq!(out.seam_warnings, 0);
    }
}

#[test]
fn fourth_order_in_time() {
    // Explicit scheme for lambda > 0, integrating factor for KdV.
    for (lambda, dt) in [(0.5, 0.04), (0.0, 0.01)] {
        let t = 50.0;
        let (coarse, _) = run(lambda, 512, Some(dt), t);
        let (fine, _) = run(lambda, 512, Some(dt / 2.0), t);
        let order = (shape_error(&coarse, lambda, t) / shape_error(&fine, lambda, t)).log2();
        assert!(order > 3.5, "lambda {lambda}: observed order {order}");
        let ratio = coarse.drift().mass / fine.drift().mass;
        assert!(ratio >= 16.0, "lambda {lambda}: drift ratio {ratio}");
    }
}

#[test]
fn center_of_mass_moves_at_the_soliton_speed() {
    for (lambda, n) in [(0.5, 1024), (0.0, 512)] {
        let t = 50.0;
        let (out, u0) = run(lambda, n, None, t);
        let speed = (center_of_mass(&out.final_state) - center_of_mass(&u0)) / t;
        assert!((speed - MU).abs() < 1e-6, "lambda {lambda}: speed {speed}");
    }
}

#[test]
fn forward_then_backward_returns() {
    let g = Grid::centered(40.0, 512).unwrap();
    let u0 = soliton(g, MU, 0.5, START);
    let ev = Evolver::new(EvolverConfig::new(0.5, g).unwrap()).unwrap();
    assert_eq!(ev.scheme_name(), "rk4");
    let fwd = ev.evolve(&u0, 10.0, 100, |_, _| Ok(())).unwrap();
    let back = ev.evolve(&fwd.final_state, -10.0, 100, |_, _| Ok(())).unwrap();
    let err = l2_diff(&back.final_state, &u0);
    assert!(err < 1e-7, "reversibility {err:e}");
}

#[test]
fn spectral_convergence_in_space() {
    for lambda in [0.5, 0.0] {
        let coarse = Grid::centered(40.0, 512).unwrap();
        let fine = Grid::centered(40.0, 1024).unwrap();
        let dt = if lambda > 0.0 { 0.005 } else { 0.0025 };
        let evolve = |g: Grid| {
            let cfg = EvolverConfig::new(lambda, g).unwrap().with_dt(dt);
            Evolver::new(cfg).unwrap().evolve(&soliton(g, MU, lambda, START), 10.0, 100, |_, _| Ok(())).unwrap()
        };
        let a = evolve(coarse).final_state;
        let b = evolve(fine).final_state;
        let sub: Vec<f64> = b.values().iter().step_by(2).copied().collect();
        let diff = l2_diff(&a, &GridFunction::new(coarse, sub).unwrap());
        assert!(diff < 1e-9, "lambda {lambda}: resolution change {diff:e}");
    }
}

#[test]
fn two_soliton_collision_conserves() {
    for (lambda, n) in [(0.5, 2048), (0.0, 2048)] {
        let g = Grid::centered(80.0, n).unwrap();
        let mu0 = 0.2;
        let u0 = GridFunction::from_fn(g, |x| {
            soliton_jet(-mu0, lambda, x - 12.0)[0] + soliton_jet(mu0, lambda, x + 12.0)[0]
        });
        let ev = Evolver::new(EvolverConfig::new(lambda, g).unwrap()).unwrap();
        let mut peak = 0.0f64;
        let out = ev
            .evolve(&u0, 100.0, 200, |_, u| {
                peak = peak.max(u.max_abs());
                Ok(())
            })
            .unwrap();
        let drift = out.drift();
        assert!(drift.max() < 1e-8, "lambda {lambda}: drift {drift:?}");
        assert!(peak.is_finite());
    }
}

#[test]
fn seam_contact_is_reported() {
    let g = Grid::centered(20.0, 256).unwrap();
    let u0 = soliton(g, MU, 0.5, 15.0);
    let ev = Evolver::new(EvolverConfig::new(0.5, g).unwrap()).unwrap();
    let out = ev.evolve(&u0, 10.0, 50, |_, _| Ok(())).unwrap();
    assert!(out.seam_warnings > 0);
}
