//! One runner per experiment kind, each producing artifacts and checks.

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use bbm::dynamics::{closed_y, integrate_full, integrate_reduced, separation_scale, PairParams, ReducedState, RhsOrder, Trajectory};
use bbm::evolver::{soliton_shape_error, Evolution, Evolver, EvolverConfig};
use bbm::grid::{Grid, GridFunction};
use bbm::profiles::{theta_consistency, ProfileFamily};
use bbm::soliton::{identity_suite, soliton_jet, ModelParams};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::pipeline::{run_collision, CollisionOutcome};
use crate::plan::{CollisionPlan, Plan, SolitonPlan};
use crate::report::{csv_table, Artifacts, Check, RunReport, REPORT_SCHEMA_VERSION};
use crate::tolerances as tol;

/// Initial position of the single soliton.
pub const SOLITON_START: f64 = -5.0;

pub fn execute(cfg: &ExperimentConfig, plan: &Plan) -> Result<Artifacts> {
    let lambda = cfg.lambda;
    let (constants_json, series_csv, checks, details, preparation_error) = match cfg.kind {
        ExperimentKind::Identities => {
            let r = identity_suite(&ModelParams::new(lambda)?);
            let checks = r.checks.iter().map(|c| Check::below(&c.name, c.deviation, tol::IDENTITY, true)).collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["name", "computed", "expected", "deviation"])?;
            for c in &r.checks {
                w.write_record([c.name.clone(), c.computed.to_string(), c.expected.to_string(), c.deviation.to_string()])?;
            }
            let series = String::from_utf8(w.into_inner()?)?;
            (family_json(lambda)?, series, checks, serde_json::to_value(&r)?, 0.0)
        }
        ExperimentKind::Profiles => {
            let fam = ProfileFamily::build(lambda)?;
            let checks = profile_checks(&fam);
            let p = &fam.profiles;
            let cols = [&p.a1, &p.a2, &p.b1, &p.b2, &p.d1, &p.d2].map(|q| q.full_values());
            let rows = fam.grid.points().into_iter().enumerate().map(|(i, x)| {
                let mut r = vec![x];
                r.extend(cols.iter().map(|c| c[i]));
                r
            });
            let series = csv_table(&["x", "A1", "A2", "B1", "B2", "D1", "D2"], rows)?;
            let details = json!({ "constants": fam.constants, "diagnostics": fam.diagnostics });
            (fam.to_json()?, series, checks, details, 0.0)
        }
        ExperimentKind::SingleSoliton => {
            let sp = plan.soliton.as_ref().context("plan has no soliton run")?;
            let (out, shape) = soliton_run(lambda, sp)?;
            let drift = out.drift();
            let checks = vec![
                Check::below("shape_error", shape, tol::SHAPE, true),
                Check::below("mass_drift", drift.mass, tol::DRIFT, true),
                Check::below("energy_drift", drift.energy, tol::DRIFT, true),
            ];
            let rows = out.series.iter().map(|s| vec![s.t, s.mass, s.energy, s.seam]);
            let series = csv_table(&["t", "mass", "energy", "seam"], rows)?;
            let details = json!({ "shape_error": shape, "drift": drift, "seam_warnings": out.seam_warnings });
            (family_json(lambda)?, series, checks, details, 0.0)
        }
        ExperimentKind::OdeCompare => {
            let fam = ProfileFamily::build(lambda)?;
            let cmp = ode_compare(&fam, cfg.mu0)?;
            let checks = vec![
                Check::below("first_integral", cmp.first_integral_error, tol::FIRST_INTEGRAL, true),
                Check::below("integration_error_per_unit_time", cmp.trajectory.error_per_unit_time, 1e-10, true),
                Check::equals("speed_sign_changes", cmp.sign_changes as f64, 1.0, false),
            ];
            let y0 = separation_scale(cfg.mu0, fam.constants.alpha);
            let series = cmp.trajectory.to_csv(y0, cfg.mu0)?;
            let details = json!({ "sup_gap": cmp.sup_gap, "first_integral_error": cmp.first_integral_error });
            (fam.to_json()?, series, checks, details, 0.0)
        }
        ExperimentKind::Collision => {
            let cp = plan.collisions.first().context("plan has no collision")?;
            let out = collision(lambda, cp)?;
            let checks = collision_checks(&out);
            let details = collision_details(&out)?;
            (out.family.to_json()?, out.track.to_csv()?, checks, details, out.report.preparation_error)
        }
        ExperimentKind::Sweep => {
            let sw = sweep(lambda, &plan.collisions)?;
            let mut checks: Vec<Check> = sw.outcomes.iter().flat_map(collision_checks).collect();
            checks.push(slope_check(sw.slope));
            let rows = sw.outcomes.iter().map(|o| {
                let r = &o.report;
                vec![r.mu0, r.y0, r.min_separation, r.defect_h1, r.defect_h1_window, r.mu1_plus, r.mu2_plus, o.drift_floor()]
            });
            let header = ["mu0", "y0", "min_separation", "defect_h1", "defect_h1_window", "mu1_plus", "mu2_plus", "drift_floor"];
            let series = csv_table(&header, rows)?;
            let runs = sw.outcomes.iter().map(collision_details).collect::<Result<Vec<_>>>()?;
            let details = json!({ "slope": sw.slope, "window_slope": sw.window_slope, "runs": runs });
            let prep = sw.outcomes.iter().map(|o| o.report.preparation_error).fold(0.0, f64::max);
            (family_json(lambda)?, series, checks, details, prep)
        }
    };
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: cfg.kind,
        lambda,
        mu0: cfg.mu0,
        preparation_error,
        checks,
        details,
    };
    Ok(Artifacts { constants_json, series_csv, report })
}

fn family_json(lambda: f64) -> Result<String> {
    Ok(ProfileFamily::build(lambda)?.to_json()?)
}

/// Interaction constants against closed forms and the two routes to `b1 - b2`.
pub fn profile_checks(fam: &ProfileFamily) -> Vec<Check> {
    let c = &fam.constants;
    let cf = &fam.diagnostics.closed_forms;
    let mut checks: Vec<Check> = [
        ("alpha", c.alpha, cf.alpha),
        ("theta_a", c.theta_a, cf.theta_a),
        ("beta", c.beta, cf.beta),
        ("theta_b", c.theta_b, cf.theta_b),
        ("theta", c.theta, cf.theta),
    ]
    .into_iter()
    .map(|(n, a, b)| Check::below(n, (a - b).abs(), tol::CONSTANTS, true))
    .collect();
    checks.push(Check::below("theta_consistency", theta_consistency(fam.lambda), tol::THETA_CONSISTENCY, true));
    let gap = c.b1 - c.b2;
    if fam.lambda == 0.0 {
        checks.push(Check::below("b1_minus_b2", gap.abs(), tol::CONSTANTS, true));
    } else {
        checks.push(Check::above("b1_minus_b2", gap.abs(), tol::GAP_FACTOR * tol::SOLVER, true));
        let routes = (gap - fam.diagnostics.b_gap_pairing).abs().max((gap - fam.diagnostics.b_gap_closed).abs());
        checks.push(Check::below("b_gap_routes", routes, tol::GAP_ROUTES, true));
    }
    checks
}

/// Evolves `Q_mu(x - start)` and returns the run with its recentered shape error.
pub fn soliton_run(lambda: f64, p: &SolitonPlan) -> Result<(Evolution, f64)> {
    let g = Grid::centered(p.halfwidth, p.grid_points)?;
    let u0 = GridFunction::from_fn(g, |x| soliton_jet(p.mu, lambda, x - SOLITON_START)[0]);
    let cfg = EvolverConfig::new(lambda, g)?.with_dt(p.dt);
    let out = Evolver::new(cfg)?.evolve(&u0, p.t_final, 100, |_, _| Ok(()))?;
    let (_, err) = soliton_shape_error(&out.final_state, p.mu, lambda, SOLITON_START + p.mu * p.t_final)?;
    Ok((out, err))
}

#[derive(Debug, Clone)]
pub struct OdeComparison {
    pub trajectory: Trajectory,
    /// `sup_t |y1 - y2 - Y(t)|`.
    pub sup_gap: f64,
    pub sign_changes: usize,
    /// Largest `|dY^2 + 4 alpha e^{-Y} - 4 mu0^2|` along the reduced flow.
    pub first_integral_error: f64,
}

/// Full parameter system against the closed-form separation on `|t| <= 8 / mu0`.
pub fn ode_compare(fam: &ProfileFamily, mu0: f64) -> Result<OdeComparison> {
    let c = fam.constants;
    let t0 = -8.0 / mu0;
    let start = PairParams::symmetric_on_closed_form(t0, mu0, c.alpha);
    let trajectory = integrate_full(start, &c, RhsOrder::Full, t0, -t0, 0.005 / mu0)?;
    let y0 = separation_scale(mu0, c.alpha);
    let sup_gap = trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(t, p)| (p.separation() - closed_y(*t, y0, mu0).0).abs())
        .fold(0.0, f64::max);
    let sign_changes = trajectory.relative_speed_sign_changes();
    let r0 = ReducedState::on_closed_form(t0, mu0, c.alpha)?;
    let path = integrate_reduced(r0, c.alpha, t0, -t0, 0.001 / mu0)?;
    let first_integral_error =
        path.iter().map(|(_, r)| (r.first_integral(c.alpha) - 4.0 * mu0 * mu0).abs()).fold(0.0, f64::max);
    Ok(OdeComparison { trajectory, sup_gap, sign_changes, first_integral_error })
}

pub fn collision(lambda: f64, p: &CollisionPlan) -> Result<CollisionOutcome> {
    run_collision(&p.run(lambda)?).with_context(|| format!("collision at lambda {lambda}, mu0 {}", p.mu0))
}

/// Hard invariants plus the elasticity checks for one collision.
pub fn collision_checks(o: &CollisionOutcome) -> Vec<Check> {
    let r = &o.report;
    let tag = |n: &str| format!("mu0={}:{n}", r.mu0);
    let floor = o.drift_floor();
    let mut checks = vec![
        Check::below(tag("drift"), r.drift.max(), tol::COLLISION_DRIFT, true),
        Check::equals(tag("tracking_complete"), r.tracking_lost.is_none() as u8 as f64, 1.0, true),
        Check::equals(tag("speed_sign_changes"), o.speed_sign_changes() as f64, 1.0, false),
    ];
    if r.lambda == 0.0 {
        checks.push(Check::below(tag("defect_h1_over_floor"), r.defect_h1 / floor, tol::ELASTIC_FACTOR, false));
    } else {
        checks.push(Check::above(tag("defect_h1_over_floor"), r.defect_h1 / floor, tol::INELASTIC_FACTOR, false));
        checks.push(Check::below(
            tag("min_separation_rel_gap"),
            (r.min_separation - r.y0).abs() / r.y0,
            tol::MIN_SEPARATION_REL,
            false,
        ));
        checks.push(Check::above(tag("mu1_plus_minus_mu0"), r.mu1_plus - r.mu0, 0.0, false));
        checks.push(Check::above(tag("minus_mu2_plus_minus_mu0"), -r.mu2_plus - r.mu0, 0.0, false));
        checks.push(Check::below(tag("balance_route_disagreement"), balance_disagreement(o), tol::BALANCE_AGREEMENT, false));
    }
    checks
}

/// Relative disagreement of the speed gains `mu1+ - mu0`, `-mu2+ - mu0` between the two routes.
pub fn balance_disagreement(o: &CollisionOutcome) -> f64 {
    let r = &o.report;
    let direct = [r.mu1_plus - r.mu0, -r.mu2_plus - r.mu0];
    let balance = [r.mu_plus_balance[0] - r.mu0, -r.mu_plus_balance[1] - r.mu0];
    (0..2).map(|i| (direct[i] - balance[i]).abs() / direct[i].abs()).fold(0.0, f64::max)
}

pub fn slope_check(slope: f64) -> Check {
    let (lo, hi) = tol::DEFECT_SLOPE;
    let mut c = Check::above("defect_slope", slope, lo, false);
    c.passed = (lo..=hi).contains(&slope);
    c
}

#[derive(Serialize)]
struct CollisionDetails<'a> {
    report: &'a bbm::modulation::CollisionReport,
    drift_floor: f64,
    speed_sign_changes: usize,
    speed_crossing: Option<f64>,
    tracked_points: usize,
}

fn collision_details(o: &CollisionOutcome) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(CollisionDetails {
        report: &o.report,
        drift_floor: o.drift_floor(),
        speed_sign_changes: o.speed_sign_changes(),
        speed_crossing: o.track.speed_crossing(),
        tracked_points: o.track.points.len(),
    })?)
}

pub struct SweepOutcome {
    pub outcomes: Vec<CollisionOutcome>,
    /// Least-squares slope of `ln defect_h1` against `ln mu0`.
    pub slope: f64,
    /// The same for the windowed defect.
    pub window_slope: f64,
}

/// Runs the collisions on worker threads, then fits the slopes.
pub fn sweep(lambda: f64, plans: &[CollisionPlan]) -> Result<SweepOutcome> {
    let outcomes = plans.par_iter().map(|p| collision(lambda, p)).collect::<Result<Vec<_>>>()?;
    let mu: Vec<f64> = outcomes.iter().map(|o| o.report.mu0).collect();
    let full: Vec<f64> = outcomes.iter().map(|o| o.report.defect_h1).collect();
    let window: Vec<f64> = outcomes.iter().map(|o| o.report.defect_h1_window).collect();
    Ok(SweepOutcome { slope: log_log_slope(&mu, &full), window_slope: log_log_slope(&mu, &window), outcomes })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
