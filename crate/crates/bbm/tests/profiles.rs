use bbm::grid::Grid;
use bbm::profiles::{reflect, theta_consistency, ClosedForms, Profile, ProfileFamily};
use bbm::soliton::{lambda_q_jet, q_derivs};

fn near(p: &Profile, x: f64) -> f64 {
    let g = p.decaying.grid();
    let i = ((x - g.start) / g.dx()).round() as usize;
    p.full_values()[i]
}

fn family(lambda: f64) -> ProfileFamily {
    ProfileFamily::build(lambda).expect("family builds")
}

#[test]
fn a_layer_constants_and_limits() {
    let f = family(0.0);
    assert!((f.constants.alpha - 16.0).abs() < 1e-8);
    assert!((f.constants.theta_a - 12.0).abs() < 1e-8);
    let f = family(0.5);
    assert!((f.constants.alpha - 240.0 / 19.75).abs() < 1e-8);
    assert!((f.constants.theta_a - ClosedForms::new(0.5).theta_a).abs() < 1e-8);
    let t = f.constants.theta_a;
    assert!((near(&f.profiles.a1, 40.0) + t).abs() < 1e-6);
    assert!((near(&f.profiles.a1, -40.0) - t).abs() < 1e-6);
    assert!((near(&f.profiles.a2, 40.0) - t).abs() < 1e-6);
}

#[test]
fn a2_mirrors_a1() {
    let f = family(0.5);
    let a1 = f.profiles.a1.full_values();
    let a2 = f.profiles.a2.full_values();
    let n = a1.len();
    let dev = (1..n).map(|i| (a2[i] - a1[n - i]).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-10, "{dev}");
    let r = reflect(&f.profiles.a1.decaying);
    assert_eq!(r.values(), f.profiles.a2.decaying.values());
}

#[test]
fn b_layer_at_kdv() {
    let f = family(0.0);
    assert!((f.constants.beta - 8.0).abs() < 1e-8);
    assert!(f.constants.theta_b.abs() < 1e-8);
    assert!((f.constants.b1 - f.constants.b2).abs() < 1e-8);
}

#[test]
fn b_layer_limits_follow_integrated_equation() {
    let l = 0.5;
    let f = family(l);
    let c = ClosedForms::new(l);
    assert!((f.constants.beta - c.beta).abs() < 1e-8);
    assert!((f.constants.theta_b - c.theta_b).abs() < 1e-8);
    // Integrating the B_1 equation over the line gives B_1(-inf) = int Z - beta int Lambda Q,
    // which is 2 theta_B = 288 lambda^2 / (15 + 10 lambda - lambda^2).
    let expected = 288.0 * l * l / 19.75;
    assert!((near(&f.profiles.b1, -40.0) - expected).abs() < 1e-6);
    assert!(near(&f.profiles.b1, 40.0).abs() < 1e-6);
    assert!((near(&f.profiles.b2, -40.0) + expected).abs() < 1e-6);
    assert!(near(&f.profiles.b2, 40.0).abs() < 1e-6);
}

#[test]
fn kernel_gap_routes_agree() {
    let f = family(0.5);
    let gap = f.constants.b1 - f.constants.b2;
    assert!(gap.abs() > 100.0 * 1e-13);
    assert!((gap - f.diagnostics.b_gap_pairing).abs() < 1e-6, "{gap} {:?}", f.diagnostics);
    assert!((gap - f.diagnostics.b_gap_closed).abs() < 1e-6);
    let dgap = f.constants.d1 - f.constants.d2;
    assert!((dgap - f.diagnostics.d_gap_pairing).abs() < 1e-6);
    assert!((dgap - f.diagnostics.d_gap_closed).abs() < 1e-6);
}

#[test]
fn construction_diagnostics() {
    for l in [0.0, 0.25, 0.5, 0.75] {
        let f = family(l);
        let d = &f.diagnostics;
        assert!(d.orthogonality < 1e-9, "{l} {d:?}");
        assert!(d.equation_residual < 1e-8, "{l} {d:?}");
        assert!(d.source_antisymmetry < 1e-9, "{l} {d:?}");
        assert!(d.edge_magnitude < 1e-8, "{l} {d:?}");
        assert!((f.constants.theta - d.closed_forms.theta).abs() < 1e-8);
        assert!(near(&f.profiles.d1, 40.0).abs() < 1e-6);
        assert!(near(&f.profiles.d2, 40.0).abs() < 1e-6);
    }
}

#[test]
fn d_layer_stable_under_refinement() {
    for l in [0.0, 0.5] {
        let a = family(l).constants;
        let b = ProfileFamily::build_on(l, Grid::centered(70.0, 2800).unwrap()).unwrap().constants;
        for (x, y) in [(a.delta, b.delta), (a.theta_d, b.theta_d), (a.d1, b.d1), (a.d2, b.d2)] {
            assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()), "{x} {y}");
        }
    }
}

#[test]
fn orthogonality_of_a1_by_direct_quadrature() {
    let l = 0.25;
    let f = family(l);
    let g = f.grid;
    let a1 = f.profiles.a1.full_values();
    let (mut s1, mut s2) = (0.0, 0.0);
    for (i, x) in g.points().into_iter().enumerate() {
        let d = q_derivs(x);
        s1 += a1[i] * (d[1] - l * d[3]);
        s2 += (a1[i] + f.constants.theta_a) * (d[0] - l * d[2]);
    }
    assert!((s1 * g.dx()).abs() < 1e-9 && (s2 * g.dx()).abs() < 1e-9);
    let _ = lambda_q_jet(0.0, l, 0.0);
}

#[test]
fn theta_identity_sweep() {
    let worst = (0..99).map(|i| theta_consistency(i as f64 / 99.0)).fold(0.0, f64::max);
    assert!(worst < 1e-12);
}

#[test]
fn family_json_roundtrip() {
    let f = family(0.25);
    let s = f.to_json().unwrap();
    let g = ProfileFamily::from_json(&s).unwrap();
    assert_eq!(f, g);
    assert!(ProfileFamily::from_json(&s.replace("\"schema_version\":1", "\"schema_version\":9")).is_err());
}
