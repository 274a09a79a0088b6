//! Profile building, PDE run, tracking and report for one collision.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use bbm::ansatz::Ansatz;
use bbm::dynamics::sign_changes;
use bbm::evolver::{Evolver, EvolverConfig};
use bbm::modulation::{defect_report, AnsatzPair, CollisionReport, CollisionSetup, DefectInput, TrackSeries, Tracker};
use bbm::profiles::ProfileFamily;
use bbm::soliton::{conserved_energy, conserved_mass, ModelParams};

/// A fully resolved collision run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRun {
    pub setup: CollisionSetup,
    pub dt: f64,
    /// Evolver steps between tracked snapshots.
    pub snapshot_every: usize,
}

impl CollisionRun {
    pub fn duration(&self) -> f64 {
        self.setup.symmetric_duration()
    }

    pub fn steps(&self) -> usize {
        (self.duration() / self.dt).ceil() as usize
    }
}

pub struct CollisionOutcome {
    pub report: CollisionReport,
    pub track: TrackSeries,
    pub family: ProfileFamily,
    /// `|u0|_{H1}`, the scale that turns relative drift into an H1 floor.
    pub initial_h1: f64,
}

impl CollisionOutcome {
    /// Relative conservation drift expressed on the H1 scale of the data.
    pub fn drift_floor(&self) -> f64 {
        self.report.drift.max() * self.initial_h1
    }

    /// Sign changes of the tracked `mu1 - mu2`.
    pub fn speed_sign_changes(&self) -> usize {
        sign_changes(self.track.points.iter().map(|p| p.gamma.relative_speed()))
    }
}

/// Builds the profile family on the run's spacing, evolves, tracks and fits the outgoing pair.
pub fn run_collision(run: &CollisionRun) -> Result<CollisionOutcome> {
    let setup: &CollisionSetup = &run.setup;
    let grid = setup.grid;
    let family = ProfileFamily::build_with_spacing(setup.lambda, grid.dx()).context("building profile family")?;
    let ansatz = Ansatz::new(family.clone());
    let pair = AnsatzPair { ansatz: &ansatz, y0: setup.y0 };
    let cfg = EvolverConfig::new(setup.lambda, grid)?.with_dt(run.dt);
    let evolver = Evolver::new(cfg).context("configuring evolver")?;
    let u0 = setup.initial_data();
    let model = ModelParams::new(setup.lambda)?;
    let (mass, energy) = (conserved_mass(&u0, &model), conserved_energy(&u0));
    let initial_h1 = u0.h1_norm();
    let mut tracker = Tracker::new(&pair, family.constants, setup.initial_gamma());
    let t0 = setup.t_start;
    let out = evolver
        .evolve(&u0, run.duration(), run.snapshot_every, |t, u| {
            tracker.observe(t0 + t, u);
            Ok(())
        })
        .context("evolving the collision")?;
    let track = tracker.finish();
    let report = defect_report(&DefectInput {
        setup,
        t_final: t0 + run.duration(),
        final_state: &out.final_state,
        track: &track,
        drift: out.drift(),
        initial_mass: mass,
        initial_energy: energy,
    })
    .context("fitting the outgoing solitons")?;
    Ok(CollisionOutcome { report, track, family, initial_h1 })
}
