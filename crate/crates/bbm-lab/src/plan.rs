//! Grid, time step and duration sizing with a cost estimate.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bbm::dynamics::separation_scale;
use bbm::evolver::EvolverConfig;
use bbm::grid::Grid;
use bbm::modulation::CollisionSetup;
use bbm::profiles::ClosedForms;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::pipeline::CollisionRun;

/// Largest grid spacing for collision runs.
pub const MAX_DX: f64 = 400.0 / 4096.0;
/// Grid sizes are rounded up to a multiple of this.
pub const GRID_QUANTUM: usize = 512;
pub const DEFAULT_START_SEPARATION: f64 = 40.0;
/// Room kept beyond the solitons and the radiation front.
pub const DOMAIN_MARGIN: f64 = 40.0;
/// Seconds per step per `N log2 N`, measured for the integrating-factor scheme (the slower one).
pub const STEP_COST: f64 = 1.4e-8;
pub const FAMILY_BUILD_SECONDS: f64 = 2.0;
/// Largest time between tracked snapshots.
pub const SNAPSHOT_SPACING: f64 = 0.5;

/// Single-soliton run parameters.
pub const SOLITON_HALFWIDTH: f64 = 40.0;
pub const SOLITON_GRID: usize = 1024;
pub const SOLITON_DURATION: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionPlan {
    pub mu0: f64,
    pub y0: f64,
    pub start_separation: f64,
    pub t_start: f64,
    pub t_span: f64,
    pub halfwidth: f64,
    pub grid_points: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub snapshot_every: usize,
    pub expected_seconds: f64,
}

impl CollisionPlan {
    pub fn run(&self, lambda: f64) -> Result<CollisionRun> {
        let grid = Grid::centered(self.halfwidth, self.grid_points)?;
        let setup = CollisionSetup::new(lambda, self.mu0, self.start_separation, grid)?;
        Ok(CollisionRun { setup, dt: self.dt, snapshot_every: self.snapshot_every })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonPlan {
    pub mu: f64,
    pub halfwidth: f64,
    pub grid_points: usize,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub expected_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub kind: ExperimentKind,
    pub lambda: f64,
    pub collisions: Vec<CollisionPlan>,
    pub soliton: Option<SolitonPlan>,
    pub expected_seconds: f64,
    pub budget_seconds: f64,
}

impl Plan {
    /// Pretty JSON; identical configurations give identical bytes.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).context("serializing plan")
    }
}

fn step_seconds(n: usize, steps: usize) -> f64 {
    steps as f64 * n as f64 * (n as f64).log2() * STEP_COST
}

fn default_dt(lambda: f64, grid: Grid) -> Result<f64> {
    Ok(EvolverConfig::new(lambda, grid)?.dt)
}

/// Sizes one collision: duration from the closed-form clock, domain from the duration.
pub fn plan_collision(cfg: &ExperimentConfig, mu0: f64) -> Result<CollisionPlan> {
    let lambda = cfg.lambda;
    let y0 = separation_scale(mu0, ClosedForms::new(lambda).alpha);
    let s = cfg.start_separation.unwrap_or(DEFAULT_START_SEPARATION);
    let t_start = -((0.5 * (s - y0)).exp().acosh()) / mu0;
    let t_span = -2.0 * t_start;
    // Radiation leaves at speed at most 1; keep half of it on the torus before it wraps.
    let halfwidth = cfg.halfwidth.unwrap_or((2.0 * s + DOMAIN_MARGIN).max(0.5 * t_span + DOMAIN_MARGIN));
    let grid_points = match cfg.grid {
        Some(n) => n,
        None => {
            let n = (2.0 * halfwidth / MAX_DX).ceil() as usize;
            n.div_ceil(GRID_QUANTUM) * GRID_QUANTUM
        }
    };
    let grid = Grid::centered(halfwidth, grid_points)?;
    CollisionSetup::new(lambda, mu0, s, grid).context("collision setup")?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => default_dt(lambda, grid)?,
    };
    let steps = (t_span / dt).ceil() as usize;
    let snapshot_every = (((0.1 / mu0).min(SNAPSHOT_SPACING) / dt).floor() as usize).max(1);
    let expected_seconds = FAMILY_BUILD_SECONDS + step_seconds(grid_points, steps);
    Ok(CollisionPlan {
        mu0,
        y0,
        start_separation: s,
        t_start,
        t_span,
        halfwidth,
        grid_points,
        dx: grid.dx(),
        dt,
        steps,
        snapshot_every,
        expected_seconds,
    })
}

fn plan_soliton(cfg: &ExperimentConfig) -> Result<SolitonPlan> {
    let halfwidth = cfg.halfwidth.unwrap_or(SOLITON_HALFWIDTH);
    let grid_points = cfg.grid.unwrap_or(SOLITON_GRID);
    let grid = Grid::centered(halfwidth, grid_points)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => default_dt(cfg.lambda, grid)?,
    };
    let steps = (SOLITON_DURATION / dt).ceil() as usize;
    Ok(SolitonPlan {
        mu: cfg.mu0,
        halfwidth,
        grid_points,
        dt,
        t_final: SOLITON_DURATION,
        steps,
        expected_seconds: step_seconds(grid_points, steps),
    })
}

/// Names the factor that pushes a collision over budget, relative to a reference run.
fn binding_constraint(p: &CollisionPlan) -> String {
    let factors = [
        (p.t_span / 200.0, format!("duration t_span = {:.1} (scales like 1/mu0)", p.t_span)),
        (p.grid_points as f64 / 4096.0, format!("grid N = {} (spacing <= {MAX_DX} over half-width {:.1})", p.grid_points, p.halfwidth)),
        (0.01 / p.dt, format!("time step dt = {:.3e}", p.dt)),
    ];
    factors.into_iter().max_by(|a, b| a.0.total_cmp(&b.0)).map(|f| f.1).unwrap_or_default()
}

pub fn plan(cfg: &ExperimentConfig) -> Result<Plan> {
    let (collisions, soliton, fixed) = match cfg.kind {
        ExperimentKind::Identities => (vec![], None, 1.0),
        ExperimentKind::Profiles => (vec![], None, FAMILY_BUILD_SECONDS),
        ExperimentKind::OdeCompare => (vec![], None, FAMILY_BUILD_SECONDS + 5.0),
        ExperimentKind::SingleSoliton => (vec![], Some(plan_soliton(cfg)?), 0.0),
        ExperimentKind::Collision => (vec![plan_collision(cfg, cfg.mu0)?], None, 0.0),
        ExperimentKind::Sweep => {
            let runs = cfg.mu0_list.iter().map(|&m| plan_collision(cfg, m)).collect::<Result<Vec<_>>>()?;
            (runs, None, 0.0)
        }
    };
    let expected_seconds = fixed
        + collisions.iter().map(|c| c.expected_seconds).sum::<f64>()
        + soliton.as_ref().map_or(0.0, |s| s.expected_seconds);
    if expected_seconds > cfg.budget_seconds {
        let worst = collisions.iter().max_by(|a, b| a.expected_seconds.total_cmp(&b.expected_seconds));
        let constraint = match (worst, &soliton) {
            (Some(c), _) => binding_constraint(c),
            (None, Some(s)) => format!("{} steps on {} points", s.steps, s.grid_points),
            _ => "fixed setup cost".into(),
        };
        bail!(
            "plan needs about {expected_seconds:.0} s, over the budget of {:.0} s; binding constraint: {constraint}",
            cfg.budget_seconds
        );
    }
    Ok(Plan { kind: cfg.kind, lambda: cfg.lambda, collisions, soliton, expected_seconds, budget_seconds: cfg.budget_seconds })
}
