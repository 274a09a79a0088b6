//! Pinned acceptance thresholds.

pub const IDENTITY: f64 = 1e-8;
pub const IDENTITY_LAMBDAS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

pub const GROUND_STATE_EIGENVALUE: f64 = -1.25;
pub const EIGENVALUE: f64 = 1e-8;
pub const EIGENVECTOR_ANGLE: f64 = 1e-6;
pub const INVERSION: f64 = 1e-8;

pub const CONSTANTS: f64 = 1e-8;
pub const THETA_CONSISTENCY: f64 = 1e-12;
/// Tolerance of the bordered profile solves; the `b1 - b2` gap must exceed 100 times this.
pub const SOLVER: f64 = 1e-13;
pub const GAP_FACTOR: f64 = 100.0;
pub const GAP_ROUTES: f64 = 1e-6;

/// The residual may grow by less than `e` from `Y0 = 10` to `Y0 = 14`.
pub const RESIDUAL_GROWTH: f64 = std::f64::consts::E;
/// Largest admissible growth rate of the normalized residual in `Y0`.
pub const RESIDUAL_SLOPE: f64 = 0.25;
pub const ABLATION_FACTOR: f64 = 5.0;
pub const RESIDUAL_Y0: [f64; 3] = [10.0, 12.0, 14.0];

pub const SHAPE: f64 = 1e-6;
pub const DRIFT: f64 = 1e-9;
pub const TIME_ORDER: f64 = 3.5;

pub const FIRST_INTEGRAL: f64 = 1e-10;
pub const ENVELOPE_SLACK: f64 = 1e-12;

/// Elastic case: defect at most this many drift floors.
pub const ELASTIC_FACTOR: f64 = 10.0;
/// Inelastic case: defect at least this many drift floors.
pub const INELASTIC_FACTOR: f64 = 100.0;
pub const MIN_SEPARATION_REL: f64 = 0.1;
pub const DEFECT_SLOPE: (f64, f64) = (2.0, 3.3);
pub const SWEEP_SPEEDS: [f64; 3] = [0.2, 0.15, 0.1];
pub const BALANCE_AGREEMENT: f64 = 0.1;
/// Hard bound on conservation drift in collision runs.
pub const COLLISION_DRIFT: f64 = 1e-8;

pub const DECOMPOSITION: f64 = 1e-10;
pub const ORTHOGONALITY: f64 = 1e-11;

pub const BBMC_ROUNDTRIP: f64 = 1e-12;
