//! Threshold sharpness per observer, angle optimization and full tables.
//!
//! For fixed measurement directions the value of observer `m` is affine in
//! its own sharpness: the terms without the sequential wing do not depend on
//! `λ_m`, every other term scales with it. That makes bisection on `λ_m`
//! exact, and it also means the best directions for observer `m` do not
//! depend on `λ_m`, so angles are optimized once at `λ_m = 1`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{observer_value, propagate, Scenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::inequalities::{InequalityKind, SteeringDirection};
use crate::measurement::{SettingTriple, Sharpness};
use crate::qop::{BlochDirection, DensityMatrix};
use crate::states::{build_state, StateSpec};

/// Smallest sharpness probed by the bisection (stands in for `0⁺`).
const LAMBDA_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    /// Keep the given directions (`X, Y, Z` by default).
    FixedXyz,
    /// Coordinate-wise grid over each direction, then local refinement.
    GridRefine,
    /// Grid refinement followed by a Nelder-Mead polish of all six angles.
    NelderMead,
}

impl std::str::FromStr for Optimizer {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed-xyz" => Ok(Optimizer::FixedXyz),
            "grid-refine" => Ok(Optimizer::GridRefine),
            "nelder-mead" => Ok(Optimizer::NelderMead),
            _ => Err(format!(
                "unknown optimizer `{s}` (expected fixed-xyz, grid-refine or nelder-mead)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub theta_samples: usize,
    pub phi_samples: usize,
}

impl AngleGrid {
    pub fn new(theta_samples: usize, phi_samples: usize) -> Result<Self> {
        if theta_samples < 2 || phi_samples < 2 {
            return Err(Error::InvalidConfig(format!(
                "angle grid needs at least 2 samples per angle, got {theta_samples}x{phi_samples}"
            )));
        }
        Ok(Self {
            theta_samples,
            phi_samples,
        })
    }

    /// `n` samples over `θ ∈ [0, π]` and `2n - 1` over `φ ∈ [0, 2π]`, so the
    /// spacing is the same on both angles.
    pub fn with_resolution(n: usize) -> Result<Self> {
        Self::new(n, (2 * n).saturating_sub(1))
    }
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self {
            theta_samples: 13,
            phi_samples: 25,
        }
    }
}

/// Sharpness used for predecessors while building a table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredecessorRule {
    /// Each predecessor sits just above its own threshold, so every earlier
    /// observer still violates.
    AtThreshold,
    /// Every predecessor uses this sharpness, violating or not.
    Fixed(Sharpness),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Bisection width on `λ`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub optimizer: Optimizer,
    pub grid: AngleGrid,
    pub refinement_rounds: usize,
    /// A value counts as violating only below `-violation_margin`.
    pub violation_margin: f64,
    pub predecessor_rule: PredecessorRule,
    /// Hard cap on table length.
    pub max_rows: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 100,
            optimizer: Optimizer::FixedXyz,
            grid: AngleGrid::default(),
            refinement_rounds: 2,
            violation_margin: 1e-9,
            predecessor_rule: PredecessorRule::AtThreshold,
            max_rows: 32,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 || self.max_rows == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations and max_rows must be positive".into(),
            ));
        }
        if self.violation_margin.is_nan() || self.violation_margin < 0.0 {
            return Err(Error::InvalidConfig("violation_margin must be >= 0".into()));
        }
        AngleGrid::new(self.grid.theta_samples, self.grid.phi_samples)?;
        Ok(())
    }

    fn violates(&self, value: f64) -> bool {
        value < -self.violation_margin
    }
}

/// Everything fixed before observer `m` chooses its sharpness.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdProblem {
    pub scenario: Scenario,
    pub inequality: InequalityKind,
    pub state: StateSpec,
    pub predecessors: Vec<SettingTriple>,
    /// Starting directions of observer `m`.
    pub directions: [BlochDirection; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    /// Smallest sampled sharpness that still violates; within the bisection
    /// tolerance above the true root.
    pub lambda: f64,
    pub directions: [BlochDirection; 3],
    pub value_at_one: f64,
}

pub fn threshold_lambda(problem: &ThresholdProblem, config: &SearchConfig) -> Result<Option<Threshold>> {
    config.validate()?;
    let wing = problem.scenario.sequential_wing();
    let rho = propagate(&build_state(&problem.state)?, wing, &problem.predecessors)?;
    let start = SettingTriple::new(problem.directions, Sharpness::PROJECTIVE);
    let (best, _) = minimize_triple(&rho, problem.scenario, problem.inequality, start, config)?;
    let value = |lambda: f64| -> Result<f64> {
        let triple = best.with_lambda(Sharpness::new(lambda)?);
        observer_value(&rho, problem.scenario, problem.inequality, &triple)
    };

    let at_one = value(1.0)?;
    if !config.violates(at_one) {
        return Ok(None);
    }
    let at_zero = value(LAMBDA_FLOOR)?;
    if at_one >= at_zero {
        return Err(Error::NotMonotone { at_zero, at_one });
    }
    let found = |lambda| Threshold {
        lambda,
        directions: best.directions,
        value_at_one: at_one,
    };
    if config.violates(at_zero) {
        return Ok(Some(found(LAMBDA_FLOOR)));
    }

    let (mut lo, mut hi) = (LAMBDA_FLOOR, 1.0);
    for _ in 0..config.max_iterations {
        if hi - lo <= config.tolerance {
            return Ok(Some(found(hi)));
        }
        let mid = 0.5 * (lo + hi);
        if config.violates(value(mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi - lo <= config.tolerance {
        return Ok(Some(found(hi)));
    }
    Err(Error::NoConvergence {
        iterations: config.max_iterations,
        lo,
        hi,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub m: usize,
    /// `None` means no sharpness lets observer `m` violate.
    pub lambda_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub scenario: Scenario,
    pub direction: SteeringDirection,
    pub inequality: InequalityKind,
    pub state: String,
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    /// Number of observers that can violate in sequence.
    pub fn max_observers(&self) -> usize {
        self.rows.iter().take_while(|r| r.lambda_min.is_some()).count()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.lambda_min).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,lambda_min,status\n");
        for row in &self.rows {
            match row.lambda_min {
                Some(l) => out.push_str(&format!("{},{:.4},valid\n", row.m, l)),
                None => out.push_str(&format!("{},,none\n", row.m)),
            }
        }
        out
    }
}

pub fn build_table(
    scenario: Scenario,
    direction: SteeringDirection,
    inequality: InequalityKind,
    state: &StateSpec,
    config: &SearchConfig,
) -> Result<ThresholdTable> {
    config.validate()?;
    if inequality.direction() != direction {
        return Err(Error::InvalidScenario(format!(
            "inequality {inequality} detects {} steering, not {direction}",
            inequality.direction()
        )));
    }
    let xyz = SettingTriple::xyz(Sharpness::PROJECTIVE).directions;
    let mut predecessors = Vec::new();
    let mut rows = Vec::new();
    for m in 1..=config.max_rows {
        let problem = ThresholdProblem {
            scenario,
            inequality,
            state: state.clone(),
            predecessors: predecessors.clone(),
            directions: xyz,
        };
        match threshold_lambda(&problem, config)? {
            None => {
                rows.push(ThresholdRow { m, lambda_min: None });
                break;
            }
            Some(t) => {
                rows.push(ThresholdRow {
                    m,
                    lambda_min: Some(t.lambda),
                });
                let pinned = match config.predecessor_rule {
                    PredecessorRule::AtThreshold => Sharpness::new((t.lambda + config.tolerance).min(1.0))?,
                    PredecessorRule::Fixed(l) => l,
                };
                predecessors.push(SettingTriple::new(t.directions, pinned));
            }
        }
    }
    Ok(ThresholdTable {
        scenario,
        direction,
        inequality,
        state: state.label().to_string(),
        rows,
    })
}

pub fn max_observers(
    scenario: Scenario,
    direction: SteeringDirection,
    inequality: InequalityKind,
    state: &StateSpec,
    config: &SearchConfig,
) -> Result<usize> {
    Ok(build_table(scenario, direction, inequality, state, config)?.max_observers())
}

/// Best directions for observer `m` (1-based) of `spec`, with the observer's
/// own sharpness and the predecessors taken from the spec.
pub fn optimize_angles(
    spec: &ScenarioSpec,
    m: usize,
    config: &SearchConfig,
) -> Result<(SettingTriple, f64)> {
    spec.validate()?;
    config.validate()?;
    if m == 0 || m > spec.observers.len() {
        return Err(Error::InvalidScenario(format!(
            "observer {m} does not exist (spec has {})",
            spec.observers.len()
        )));
    }
    let rho = propagate(
        &build_state(&spec.state)?,
        spec.sequential_wing(),
        &spec.observers[..m - 1],
    )?;
    minimize_triple(&rho, spec.scenario, spec.inequality, spec.observers[m - 1], config)
}

fn minimize_triple(
    rho: &DensityMatrix,
    scenario: Scenario,
    inequality: InequalityKind,
    start: SettingTriple,
    config: &SearchConfig,
) -> Result<(SettingTriple, f64)> {
    let objective = |t: &SettingTriple| observer_value(rho, scenario, inequality, t);
    let base = objective(&start)?;
    match config.optimizer {
        Optimizer::FixedXyz => Ok((start, base)),
        Optimizer::GridRefine => grid_refine(&objective, start, base, config),
        Optimizer::NelderMead => {
            let (t, v) = grid_refine(&objective, start, base, config)?;
            nelder_mead(&objective, t, v)
        }
    }
}

type Objective<'a> = dyn Fn(&SettingTriple) -> Result<f64> + Sync + 'a;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Tries every candidate direction for slot `k`; returns the first strict
/// improvement in grid order.
fn sweep_direction(
    objective: &Objective<'_>,
    current: &mut (SettingTriple, f64),
    k: usize,
    thetas: &[f64],
    phis: &[f64],
) -> Result<bool> {
    let candidates: Vec<SettingTriple> = thetas
        .iter()
        .flat_map(|&t| phis.iter().map(move |&p| (t, p)))
        .map(|(t, p)| {
            let mut trial = current.0;
            trial.directions[k] = BlochDirection::wrapped(t, p);
            trial
        })
        .collect();
    let values: Vec<f64> = candidates
        .par_iter()
        .map(objective)
        .collect::<Result<_>>()?;
    let mut improved = false;
    for (t, v) in candidates.into_iter().zip(values) {
        if v < current.1 {
            *current = (t, v);
            improved = true;
        }
    }
    Ok(improved)
}

fn grid_refine(
    objective: &Objective<'_>,
    start: SettingTriple,
    base: f64,
    config: &SearchConfig,
) -> Result<(SettingTriple, f64)> {
    const MAX_SWEEPS: usize = 8;
    let grid = config.grid;
    let mut best = (start, base);

    let thetas = linspace(0.0, PI, grid.theta_samples);
    let phis = linspace(0.0, TAU, grid.phi_samples);
    for _ in 0..MAX_SWEEPS {
        let mut any = false;
        for k in 0..3 {
            any |= sweep_direction(objective, &mut best, k, &thetas, &phis)?;
        }
        if !any {
            break;
        }
    }

    let mut half_theta = PI / (grid.theta_samples - 1) as f64;
    let mut half_phi = TAU / (grid.phi_samples - 1) as f64;
    for _ in 0..config.refinement_rounds {
        for _ in 0..MAX_SWEEPS {
            let mut any = false;
            for k in 0..3 {
                let d = best.0.directions[k];
                let thetas = linspace(d.theta() - half_theta, d.theta() + half_theta, grid.theta_samples);
                let phis = linspace(d.phi() - half_phi, d.phi() + half_phi, grid.phi_samples);
                any |= sweep_direction(objective, &mut best, k, &thetas, &phis)?;
            }
            if !any {
                break;
            }
        }
        half_theta /= 4.0;
        half_phi /= 4.0;
    }
    Ok(best)
}

fn triple_from_angles(template: &SettingTriple, x: &[f64; 6]) -> SettingTriple {
    let mut t = *template;
    for k in 0..3 {
        t.directions[k] = BlochDirection::wrapped(x[2 * k], x[2 * k + 1]);
    }
    t
}

fn nelder_mead(
    objective: &Objective<'_>,
    start: SettingTriple,
    base: f64,
) -> Result<(SettingTriple, f64)> {
    const MAX_ITER: usize = 2000;
    const STEP: f64 = 0.05;
    const FTOL: f64 = 1e-12;
    let f = |x: &[f64; 6]| objective(&triple_from_angles(&start, x));

    let mut x0 = [0.0; 6];
    for k in 0..3 {
        x0[2 * k] = start.directions[k].theta();
        x0[2 * k + 1] = start.directions[k].phi();
    }
    let mut simplex: Vec<([f64; 6], f64)> = vec![(x0, base)];
    for i in 0..6 {
        let mut x = x0;
        x[i] += STEP;
        simplex.push((x, f(&x)?));
    }

    for _ in 0..MAX_ITER {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[6].1 - simplex[0].1 < FTOL {
            break;
        }
        let mut centroid = [0.0; 6];
        for (x, _) in &simplex[..6] {
            for i in 0..6 {
                centroid[i] += x[i] / 6.0;
            }
        }
        let worst = simplex[6];
        let along = |t: f64| {
            let mut p = [0.0; 6];
            for i in 0..6 {
                p[i] = centroid[i] + t * (worst.0[i] - centroid[i]);
            }
            p
        };
        let xr = along(-1.0);
        let fr = f(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe)?;
            simplex[6] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[5].1 {
            simplex[6] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(-0.5);
                (xc, f(&xc)?)
            } else {
                let xc = along(0.5);
                (xc, f(&xc)?)
            };
            if fc < worst.1.min(fr) {
                simplex[6] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let mut x = [0.0; 6];
                    for i in 0..6 {
                        x[i] = best[i] + 0.5 * (entry.0[i] - best[i]);
                    }
                    *entry = (x, f(&x)?);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex[0];
    if v < base {
        Ok((triple_from_angles(&start, &x), v))
    } else {
        Ok((start, base))
    }
}
