use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use seqsteer::cascade::{observer_value, propagate, run_cascade, run_cascade_oracle, Scenario, ScenarioSpec};
use seqsteer::inequalities::InequalityKind;
use seqsteer::measurement::{averaged_channel, effect, luders_update, SettingTriple, Sharpness, UnsharpSetting};
use seqsteer::qop::{partial_trace, BlochDirection, ComplexMatrix, DensityMatrix, Outcome, Wing, C64};
use seqsteer::search::{optimize_angles, AngleGrid, Optimizer, SearchConfig};
use seqsteer::states::{build_state, StateSpec};

fn direction() -> impl Strategy<Value = BlochDirection> {
    (0.0..=PI, 0.0..TAU).prop_map(|(t, p)| BlochDirection::new(t, p).unwrap())
}

fn sharpness() -> impl Strategy<Value = Sharpness> {
    (0.001f64..=1.0).prop_map(|l| Sharpness::new(l).unwrap())
}

fn triple() -> impl Strategy<Value = SettingTriple> {
    ([direction(), direction(), direction()], sharpness()).prop_map(|(d, l)| SettingTriple::new(d, l))
}

fn wing() -> impl Strategy<Value = Wing> {
    prop_oneof![Just(Wing::Alice), Just(Wing::Bob), Just(Wing::Charlie)]
}

fn density() -> impl Strategy<Value = DensityMatrix> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64).prop_map(|v| {
        let data: Vec<C64> = v.into_iter().map(|(r, i)| C64::new(r, i)).collect();
        let a = ComplexMatrix::from_rows(8, &data).unwrap();
        let m = &a * &a.adjoint();
        let tr = m.trace().re;
        DensityMatrix::new(m.scale(1.0 / tr)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn luders_branches_sum_to_unit_trace(rho in density(), w in wing(), d in direction(), l in sharpness()) {
        let s = UnsharpSetting::new(d, l);
        let (_, p) = luders_update(&rho, w, &s, Outcome::Plus).unwrap();
        let (_, q) = luders_update(&rho, w, &s, Outcome::Minus).unwrap();
        prop_assert!((p + q - 1.0).abs() < 1e-12);
        prop_assert!(p >= -1e-12 && q >= -1e-12);
    }

    #[test]
    fn effects_lie_between_zero_and_identity(d in direction(), l in sharpness()) {
        let e = effect(&UnsharpSetting::new(d, l), Outcome::Plus);
        let ev = e.hermitian_eigenvalues();
        prop_assert!(ev[0] >= -1e-12 && ev[1] <= 1.0 + 1e-12);
        let lam = l.value();
        prop_assert!((ev[0] - (1.0 - lam) / 2.0).abs() < 1e-12);
        prop_assert!((ev[1] - (1.0 + lam) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn channel_leaves_other_wings_untouched(rho in density(), w in wing(), t in triple()) {
        let out = averaged_channel(&rho, w, &t).unwrap();
        for other in Wing::ALL.into_iter().filter(|&o| o != w) {
            let a = partial_trace(&rho, other).unwrap();
            let b = partial_trace(&out, other).unwrap();
            prop_assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
        }
    }

    #[test]
    fn channel_does_not_increase_purity(rho in density(), w in wing(), t in triple()) {
        let out = averaged_channel(&rho, w, &t).unwrap();
        prop_assert!(out.purity() <= rho.purity() + 1e-12);
    }

    #[test]
    fn value_is_affine_in_sharpness(
        rho in density(),
        t in triple(),
        a in 0.01f64..1.0,
        b in 0.01f64..1.0,
        is_b in any::<bool>(),
        k in 0usize..4,
    ) {
        let scenario = if is_b { Scenario::B } else { Scenario::A };
        let ineq = InequalityKind::ALL[k];
        let f = |l: f64| observer_value(&rho, scenario, ineq, &t.with_lambda(Sharpness::new(l).unwrap())).unwrap();
        let (fa, fb, f1) = (f(a), f(b), f(1.0));
        // three points on one line
        let slope = (f1 - fa) / (1.0 - a);
        prop_assert!((fb - (fa + slope * (b - a))).abs() < 1e-9);
    }

    #[test]
    fn oracle_matches_channel(
        is_b in any::<bool>(),
        k in 0usize..4,
        pre in proptest::collection::vec(triple(), 0..3),
        last in [direction(), direction(), direction()],
        ghz in any::<bool>(),
    ) {
        let scenario = if is_b { Scenario::B } else { Scenario::A };
        let ineq = InequalityKind::ALL[k];
        let mut observers = pre;
        observers.push(SettingTriple::new(last, Sharpness::PROJECTIVE));
        let state = if ghz { StateSpec::Ghz } else { StateSpec::W };
        let spec = ScenarioSpec::new(scenario, ineq.direction(), ineq, state, observers).unwrap();
        let a = run_cascade(&spec).unwrap();
        let b = run_cascade_oracle(&spec).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn threshold_ordering_under_weaker_predecessor(l1 in 0.05f64..0.95, l2 in 0.05f64..0.95) {
        // a sharper predecessor leaves less correlation behind
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        let rho = build_state(&StateSpec::Ghz).unwrap();
        let t1 = SettingTriple::xyz(Sharpness::PROJECTIVE);
        let after = |l: f64| propagate(&rho, Wing::Alice, &[SettingTriple::xyz(Sharpness::new(l).unwrap())]).unwrap();
        let v_lo = observer_value(&after(lo), Scenario::A, InequalityKind::G1, &t1).unwrap();
        let v_hi = observer_value(&after(hi), Scenario::A, InequalityKind::G1, &t1).unwrap();
        prop_assert!(v_lo <= v_hi + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimizer_never_worse_than_start(rho in density(), start in triple(), k in 0usize..4) {
        let ineq = InequalityKind::ALL[k];
        let start = start.with_lambda(Sharpness::PROJECTIVE);
        let state = StateSpec::custom(rho).unwrap();
        let spec = ScenarioSpec::new(Scenario::A, ineq.direction(), ineq, state, vec![start]).unwrap();
        let cfg = SearchConfig {
            optimizer: Optimizer::NelderMead,
            grid: AngleGrid::new(5, 9).unwrap(),
            refinement_rounds: 1,
            ..SearchConfig::default()
        };
        let fixed = SearchConfig { optimizer: Optimizer::FixedXyz, ..cfg };
        let (_, base) = optimize_angles(&spec, 1, &fixed).unwrap();
        let (best, v) = optimize_angles(&spec, 1, &cfg).unwrap();
        prop_assert!(v <= base);
        let rho = build_state(&spec.state).unwrap();
        let again = observer_value(&rho, Scenario::A, ineq, &best).unwrap();
        prop_assert!((again - v).abs() < 1e-12);
    }
}

#[test]
fn w_optimum_reaches_xyz_violation() {
    let spec = ScenarioSpec::xyz(Scenario::A, InequalityKind::W1, StateSpec::W, &[1.0]).unwrap();
    let cfg = SearchConfig {
        optimizer: Optimizer::GridRefine,
        ..SearchConfig::default()
    };
    let (_, v) = optimize_angles(&spec, 1, &cfg).unwrap();
    assert!(v <= -0.759 + 0.005);
}
