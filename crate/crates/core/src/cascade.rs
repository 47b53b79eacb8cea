//! Sequential observers on one wing of a shared three-qubit state.
//!
//! Scenario A puts the sequence on Alice's qubit, scenario B on Charlie's.
//! The other two wings measure projectively along `X, Y, Z`. Observer `m`
//! receives the state left by the averaged channels of observers `1..m-1`.
//! [`run_cascade_oracle`] recomputes the same values by enumerating every
//! predecessor setting and outcome with selective Lüders updates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{evaluate, CorrelationProvider, Factors, InequalityKind, SteeringDirection};
use crate::measurement::{
    averaged_channel, correlation_raw, luders_branch, marginal_probability_raw, SettingTriple,
    Sharpness, UnsharpSetting,
};
use crate::qop::{ComplexMatrix, DensityMatrix, Outcome, Wing};
use crate::states::{build_state, StateSpec};

/// Largest observer count the enumeration oracle accepts.
pub const ORACLE_MAX_OBSERVERS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Sequential Alices.
    A,
    /// Sequential Charlies.
    B,
}

impl Scenario {
    pub fn sequential_wing(self) -> Wing {
        match self {
            Scenario::A => Wing::Alice,
            Scenario::B => Wing::Charlie,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::A => f.write_str("A"),
            Scenario::B => f.write_str("B"),
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            _ => Err(format!("unknown scenario `{s}` (expected A or B)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub direction: SteeringDirection,
    pub inequality: InequalityKind,
    pub state: StateSpec,
    pub observers: Vec<SettingTriple>,
}

impl ScenarioSpec {
    pub fn new(
        scenario: Scenario,
        direction: SteeringDirection,
        inequality: InequalityKind,
        state: StateSpec,
        observers: Vec<SettingTriple>,
    ) -> Result<Self> {
        let spec = Self {
            scenario,
            direction,
            inequality,
            state,
            observers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All observers measure `X, Y, Z`; the list gives each one's sharpness.
    pub fn xyz(
        scenario: Scenario,
        inequality: InequalityKind,
        state: StateSpec,
        lambdas: &[f64],
    ) -> Result<Self> {
        let observers = lambdas
            .iter()
            .map(|&l| Ok(SettingTriple::xyz(Sharpness::new(l)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(scenario, inequality.direction(), inequality, state, observers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inequality.direction() != self.direction {
            return Err(Error::InvalidScenario(format!(
                "inequality {} detects {} steering, but direction {} was requested",
                self.inequality,
                self.inequality.direction(),
                self.direction
            )));
        }
        let Some(last) = self.observers.last() else {
            return Err(Error::InvalidScenario("at least one observer is required".into()));
        };
        if !last.lambda.is_projective() {
            return Err(Error::InvalidScenario(format!(
                "the last observer must measure projectively (lambda = 1), got {}",
                last.lambda.value()
            )));
        }
        Ok(())
    }

    pub fn sequential_wing(&self) -> Wing {
        self.scenario.sequential_wing()
    }
}

/// Settings of all three wings for one sequential observer.
pub fn wing_settings(scenario: Scenario, observer: &SettingTriple) -> [[UnsharpSetting; 3]; 3] {
    let trusted = SettingTriple::xyz(Sharpness::PROJECTIVE).settings();
    let mut out = [trusted; 3];
    out[scenario.sequential_wing().index()] = observer.settings();
    out
}

/// Correlations of a single (possibly unnormalized) state.
pub struct MeasuredState<'a> {
    mat: &'a ComplexMatrix,
    settings: [[UnsharpSetting; 3]; 3],
}

impl<'a> MeasuredState<'a> {
    pub fn new(rho: &'a DensityMatrix, settings: [[UnsharpSetting; 3]; 3]) -> Self {
        Self {
            mat: rho.matrix(),
            settings,
        }
    }
}

fn select(settings: &[[UnsharpSetting; 3]; 3], factors: &Factors) -> [Option<UnsharpSetting>; 3] {
    let mut s = [None; 3];
    for (w, f) in factors.iter().enumerate() {
        s[w] = f.map(|k| settings[w][k]);
    }
    s
}

impl CorrelationProvider for MeasuredState<'_> {
    fn expectation(&self, factors: &Factors) -> Option<f64> {
        if factors.iter().flatten().any(|&k| k > 2) {
            return None;
        }
        correlation_raw(self.mat, &select(&self.settings, factors)).ok()
    }
}

/// Inequality value for one observer acting on `rho`.
pub fn observer_value(
    rho: &DensityMatrix,
    scenario: Scenario,
    inequality: InequalityKind,
    observer: &SettingTriple,
) -> Result<f64> {
    let provider = MeasuredState::new(rho, wing_settings(scenario, observer));
    evaluate(inequality, &provider)
}

/// State seen by the observer after `predecessors` have measured.
pub fn propagate(
    rho: &DensityMatrix,
    wing: Wing,
    predecessors: &[SettingTriple],
) -> Result<DensityMatrix> {
    let mut state = rho.clone();
    for p in predecessors {
        state = averaged_channel(&state, wing, p)?;
    }
    Ok(state)
}

/// One row of a [`CascadeResult`] in its serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverRecord {
    pub observer: usize,
    pub lambda: f64,
    pub inequality: InequalityKind,
    pub value: f64,
    pub detected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<ObserverRecord>", try_from = "Vec<ObserverRecord>")]
pub struct CascadeResult {
    pub inequality: InequalityKind,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
}

impl CascadeResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn detected(&self) -> Vec<bool> {
        self.values.iter().map(|&v| crate::inequalities::is_violation(v)).collect()
    }

    pub fn records(&self) -> Vec<ObserverRecord> {
        self.lambdas
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (&lambda, &value))| ObserverRecord {
                observer: i + 1,
                lambda,
                inequality: self.inequality,
                value,
                detected: crate::inequalities::is_violation(value),
            })
            .collect()
    }
}

impl From<CascadeResult> for Vec<ObserverRecord> {
    fn from(r: CascadeResult) -> Self {
        r.records()
    }
}

impl TryFrom<Vec<ObserverRecord>> for CascadeResult {
    type Error = String;
    fn try_from(recs: Vec<ObserverRecord>) -> std::result::Result<Self, String> {
        let first = recs.first().ok_or("empty cascade result")?;
        let inequality = first.inequality;
        for (i, r) in recs.iter().enumerate() {
            if r.observer != i + 1 {
                return Err(format!("observer index {} out of order", r.observer));
            }
            if r.inequality != inequality {
                return Err("mixed inequalities in one cascade".into());
            }
            if r.detected != crate::inequalities::is_violation(r.value) {
                return Err(format!("detected flag of observer {} contradicts its value", r.observer));
            }
        }
        Ok(Self {
            inequality,
            lambdas: recs.iter().map(|r| r.lambda).collect(),
            values: recs.iter().map(|r| r.value).collect(),
        })
    }
}

fn result_for(spec: &ScenarioSpec, values: Vec<f64>) -> CascadeResult {
    CascadeResult {
        inequality: spec.inequality,
        lambdas: spec.observers.iter().map(|o| o.lambda.value()).collect(),
        values,
    }
}

pub fn run_cascade(spec: &ScenarioSpec) -> Result<CascadeResult> {
    spec.validate()?;
    let wing = spec.sequential_wing();
    let mut rho = build_state(&spec.state)?;
    let mut values = Vec::with_capacity(spec.observers.len());
    for (m, obs) in spec.observers.iter().enumerate() {
        values.push(observer_value(&rho, spec.scenario, spec.inequality, obs)?);
        if m + 1 < spec.observers.len() {
            rho = averaged_channel(&rho, wing, obs)?;
        }
    }
    Ok(result_for(spec, values))
}

/// Weighted unnormalized branches; each carries its outcome probability in
/// its trace.
struct BranchMixture<'a> {
    branches: &'a [(f64, ComplexMatrix)],
    settings: [[UnsharpSetting; 3]; 3],
}

impl CorrelationProvider for BranchMixture<'_> {
    fn expectation(&self, factors: &Factors) -> Option<f64> {
        let s = select(&self.settings, factors);
        let mut total = 0.0;
        for (w, b) in self.branches {
            total += w * correlation_raw(b, &s).ok()?;
        }
        Some(total)
    }
}

/// Same contract as [`run_cascade`], by explicit enumeration of predecessor
/// settings and outcomes.
pub fn run_cascade_oracle(spec: &ScenarioSpec) -> Result<CascadeResult> {
    spec.validate()?;
    let n = spec.observers.len();
    if n > ORACLE_MAX_OBSERVERS {
        return Err(Error::OracleTooLarge(n));
    }
    let wing = spec.sequential_wing();
    let rho = build_state(&spec.state)?;
    let mut branches = vec![(1.0, rho.matrix().clone())];
    let mut values = Vec::with_capacity(n);
    for (m, obs) in spec.observers.iter().enumerate() {
        let provider = BranchMixture {
            branches: &branches,
            settings: wing_settings(spec.scenario, obs),
        };
        values.push(evaluate(spec.inequality, &provider)?);
        if m + 1 == n {
            break;
        }
        let children: Result<Vec<Vec<(f64, ComplexMatrix)>>> = branches
            .par_iter()
            .map(|(w, b)| {
                let mut out = Vec::with_capacity(6);
                for i in 0..3 {
                    for a in Outcome::ALL {
                        // settings are equally likely
                        out.push((w / 3.0, luders_branch(b, wing, &obs.setting(i), a)?));
                    }
                }
                Ok(out)
            })
            .collect();
        branches = children?.into_iter().flatten().collect();
    }
    Ok(result_for(spec, values))
}

/// Source of `P(a, b, c | x, y, z)` indexed by per-wing setting numbers.
pub trait JointDistribution {
    fn probability(&self, inputs: [usize; 3], outcomes: [Outcome; 3]) -> Result<f64>;
}

/// Quantum statistics of one state with three settings per wing.
pub struct QuantumBox<'a> {
    pub rho: &'a DensityMatrix,
    pub settings: [[UnsharpSetting; 3]; 3],
}

impl JointDistribution for QuantumBox<'_> {
    fn probability(&self, inputs: [usize; 3], outcomes: [Outcome; 3]) -> Result<f64> {
        let s = [
            Some(self.settings[0][inputs[0]]),
            Some(self.settings[1][inputs[1]]),
            Some(self.settings[2][inputs[2]]),
        ];
        marginal_probability_raw(self.rho.matrix(), &s, outcomes)
    }
}

fn all_inputs() -> impl Iterator<Item = [usize; 3]> {
    (0..27).map(|k| [k / 9, (k / 3) % 3, k % 3])
}

fn all_outcomes() -> impl Iterator<Item = [Outcome; 3]> {
    (0..8).map(|k| {
        let o = |bit: usize| if k >> bit & 1 == 0 { Outcome::Plus } else { Outcome::Minus };
        [o(2), o(1), o(0)]
    })
}

/// Kept wings' inputs and outcomes (`true` for `+`).
type MarginalKey = (Vec<usize>, Vec<bool>);

/// Largest change of any one- or two-wing marginal under a change of the
/// remaining wings' settings.
pub fn signalling_deviation(dist: &dyn JointDistribution) -> Result<f64> {
    let mut table = Vec::with_capacity(27 * 8);
    for inputs in all_inputs() {
        for outcomes in all_outcomes() {
            table.push((inputs, outcomes, dist.probability(inputs, outcomes)?));
        }
    }
    let subsets: [&[usize]; 6] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2]];
    let mut worst: f64 = 0.0;
    for kept in subsets {
        // marginal keyed by (kept inputs, kept outcomes), one value per remote input choice
        let mut groups: BTreeMap<MarginalKey, Vec<([usize; 3], f64)>> = BTreeMap::new();
        for &(inputs, outcomes, p) in &table {
            let key = (
                kept.iter().map(|&w| inputs[w]).collect::<Vec<_>>(),
                kept.iter().map(|&w| outcomes[w] == Outcome::Plus).collect::<Vec<_>>(),
            );
            let entry = groups.entry(key).or_default();
            match entry.iter_mut().find(|(i, _)| *i == inputs) {
                Some((_, acc)) => *acc += p,
                None => entry.push((inputs, p)),
            }
        }
        for values in groups.values() {
            let (lo, hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, p)| (lo.min(p), hi.max(p)));
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}

/// Worst no-signalling violation across all observers of the cascade.
pub fn no_signalling_audit(spec: &ScenarioSpec) -> Result<f64> {
    spec.validate()?;
    let wing = spec.sequential_wing();
    let mut rho = build_state(&spec.state)?;
    let mut worst: f64 = 0.0;
    for (m, obs) in spec.observers.iter().enumerate() {
        let dist = QuantumBox {
            rho: &rho,
            settings: wing_settings(spec.scenario, obs),
        };
        worst = worst.max(signalling_deviation(&dist)?);
        if m + 1 < spec.observers.len() {
            rho = averaged_channel(&rho, wing, obs)?;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ghz_a(lambdas: &[f64]) -> ScenarioSpec {
        ScenarioSpec::xyz(Scenario::A, InequalityKind::G1, StateSpec::Ghz, lambdas).unwrap()
    }

    #[test]
    fn validation() {
        assert!(ScenarioSpec::xyz(Scenario::A, InequalityKind::G1, StateSpec::Ghz, &[0.5]).is_err());
        assert!(ScenarioSpec::xyz(Scenario::A, InequalityKind::G1, StateSpec::Ghz, &[]).is_err());
        let err = ScenarioSpec::new(
            Scenario::B,
            SteeringDirection::TwoToOne,
            InequalityKind::W1,
            StateSpec::W,
            vec![SettingTriple::xyz(Sharpness::PROJECTIVE)],
        );
        assert!(matches!(err, Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn single_observer_ghz_g1() {
        let r = run_cascade(&ghz_a(&[1.0])).unwrap();
        assert!((r.values[0] - (1.0 + 0.1547 - 2.0)).abs() < 1e-12);
        assert_eq!(r.detected(), vec![true]);
    }

    #[test]
    fn worked_example_scenario_a() {
        let r = run_cascade(&ghz_a(&[0.627, 1.0])).unwrap();
        assert!((r.values[0] + 0.10).abs() < 0.005);
        assert!((r.values[1] + 0.55).abs() < 0.005);
    }

    #[test]
    fn oracle_matches_channel_for_small_cascade() {
        let spec = ghz_a(&[0.627, 0.736, 1.0]);
        let a = run_cascade(&spec).unwrap();
        let b = run_cascade_oracle(&spec).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10);
        }
        let c = (1.0 + 2.0 * (1.0f64 - 0.627 * 0.627).sqrt()) / 3.0;
        assert!((b.values[1] - (1.1547 - 2.0 * 0.736 * c)).abs() < 1e-10);
    }

    #[test]
    fn oracle_refuses_large_cascades() {
        let spec = ghz_a(&[0.5, 0.5, 0.5, 0.5, 1.0]);
        assert!(matches!(run_cascade_oracle(&spec), Err(Error::OracleTooLarge(5))));
    }

    #[test]
    fn projective_predecessor_kills_detection() {
        let spec = ghz_a(&[1.0, 1.0]);
        let r = run_cascade(&spec).unwrap();
        assert!(r.values[1] >= 0.0);
        assert!((r.values[1] - (1.1547 - 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn audit_quantum_states() {
        for (state, ineq) in [(StateSpec::Ghz, InequalityKind::G2), (StateSpec::W, InequalityKind::W1)] {
            for scenario in [Scenario::A, Scenario::B] {
                let spec = ScenarioSpec::xyz(scenario, ineq, state.clone(), &[0.6, 0.8, 1.0]).unwrap();
                assert!(no_signalling_audit(&spec).unwrap() <= 1e-10);
            }
        }
    }

    struct Signalling;
    impl JointDistribution for Signalling {
        // Alice's outcome copies Bob's input parity
        fn probability(&self, inputs: [usize; 3], outcomes: [Outcome; 3]) -> Result<f64> {
            let a = if inputs[1] == 0 { Outcome::Plus } else { Outcome::Minus };
            Ok(if outcomes[0] == a { 0.25 } else { 0.0 })
        }
    }

    #[test]
    fn audit_detects_signalling_box() {
        let d = signalling_deviation(&Signalling).unwrap();
        assert!(d > 0.5);
    }

    #[test]
    fn records_round_trip() {
        let r = run_cascade(&ghz_a(&[0.627, 1.0])).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: CascadeResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let mut recs = r.records();
        recs[0].detected = !recs[0].detected;
        let bad = serde_json::to_string(&recs).unwrap();
        assert!(serde_json::from_str::<CascadeResult>(&bad).is_err());
    }
}
