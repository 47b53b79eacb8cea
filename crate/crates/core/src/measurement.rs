//! Unsharp two-outcome measurements and the Lüders update they induce.
//!
//! An unsharp measurement of sharpness `λ` along `n̂` has effects
//! `E^λ_± = λ Π_± + (1-λ) I/2`. The observer after a sequential measurement
//! sees the non-selective update averaged over the three equally likely
//! settings of the predecessor, which is what [`averaged_channel`] returns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qop::{
    direction_observable, effect_sqrt, projector, BlochDirection, ComplexMatrix, DensityMatrix,
    Outcome, Wing,
};

/// Sharpness parameter `λ ∈ (0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Sharpness(f64);

impl Sharpness {
    pub const PROJECTIVE: Sharpness = Sharpness(1.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda <= 1.0 {
            Ok(Self(lambda))
        } else {
            Err(Error::SharpnessOutOfRange(lambda))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_projective(self) -> bool {
        self.0 == 1.0
    }

    pub fn quality_precision(self) -> QualityPrecision {
        QualityPrecision {
            quality: (1.0 - self.0 * self.0).sqrt(),
            precision: self.0,
        }
    }
}

impl TryFrom<f64> for Sharpness {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Sharpness::new(v)
    }
}

impl From<Sharpness> for f64 {
    fn from(s: Sharpness) -> f64 {
        s.0
    }
}

/// Quality factor `F = √(1-λ²)` and precision `G = λ` of an unsharp measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityPrecision {
    pub quality: f64,
    pub precision: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsharpSetting {
    pub direction: BlochDirection,
    pub lambda: Sharpness,
}

impl UnsharpSetting {
    pub fn new(direction: BlochDirection, lambda: Sharpness) -> Self {
        Self { direction, lambda }
    }

    pub fn projective(direction: BlochDirection) -> Self {
        Self::new(direction, Sharpness::PROJECTIVE)
    }
}

/// The three settings of one observer; they share a single sharpness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingTriple {
    pub directions: [BlochDirection; 3],
    pub lambda: Sharpness,
}

impl SettingTriple {
    pub fn new(directions: [BlochDirection; 3], lambda: Sharpness) -> Self {
        Self { directions, lambda }
    }

    /// Settings `x̂, ŷ, ẑ` in that order.
    pub fn xyz(lambda: Sharpness) -> Self {
        Self::new(
            [BlochDirection::x(), BlochDirection::y(), BlochDirection::z()],
            lambda,
        )
    }

    pub fn setting(&self, index: usize) -> UnsharpSetting {
        UnsharpSetting::new(self.directions[index], self.lambda)
    }

    pub fn settings(&self) -> [UnsharpSetting; 3] {
        [self.setting(0), self.setting(1), self.setting(2)]
    }

    pub fn with_lambda(&self, lambda: Sharpness) -> Self {
        Self::new(self.directions, lambda)
    }
}

/// Effect operator `λ Π_a + (1-λ) I/2`.
pub fn effect(setting: &UnsharpSetting, outcome: Outcome) -> ComplexMatrix {
    let lambda = setting.lambda.value();
    let noise = ComplexMatrix::identity2().scale((1.0 - lambda) / 2.0);
    &projector(&setting.direction, outcome).scale(lambda) + &noise
}

pub(crate) fn luders_branch(
    mat: &ComplexMatrix,
    wing: Wing,
    setting: &UnsharpSetting,
    outcome: Outcome,
) -> Result<ComplexMatrix> {
    let root = effect_sqrt(&setting.direction, setting.lambda.value(), outcome)?;
    let k = ComplexMatrix::embed(&root, wing)?;
    // √E is Hermitian, so K ρ K† = K ρ K
    Ok(&(&k * mat) * &k)
}

/// Selective Lüders update: returns `√E ρ √E` (unnormalized) and its trace.
pub fn luders_update(
    rho: &DensityMatrix,
    wing: Wing,
    setting: &UnsharpSetting,
    outcome: Outcome,
) -> Result<(ComplexMatrix, f64)> {
    let post = luders_branch(rho.matrix(), wing, setting, outcome)?;
    let p = post.trace().re;
    Ok((post, p))
}

/// Non-selective update averaged over the observer's three settings.
///
/// For a single setting along `n̂` the two Lüders branches sum to
/// `(1+F)/2 ρ + (1-F)/2 N ρ N` with `N = n̂·σ⃗` on `wing`.
pub fn averaged_channel(
    rho: &DensityMatrix,
    wing: Wing,
    triple: &SettingTriple,
) -> Result<DensityMatrix> {
    let f = triple.lambda.quality_precision().quality;
    let keep = (1.0 + f) / 2.0;
    let flip = (1.0 - f) / 2.0;
    let mat = rho.matrix();
    let mut acc = ComplexMatrix::zeros(mat.dim())?;
    for d in &triple.directions {
        let n = ComplexMatrix::embed(&direction_observable(d), wing)?;
        let dephased = &(&n * mat) * &n;
        let branch = &mat.scale(keep) + &dephased.scale(flip);
        acc = &acc + &branch;
    }
    DensityMatrix::new(acc.scale(1.0 / 3.0))
}

/// Probability of the outcomes on the measured wings, with unmeasured
/// (`None`) wings summed out.
pub(crate) fn marginal_probability_raw(
    mat: &ComplexMatrix,
    settings: &[Option<UnsharpSetting>; 3],
    outcomes: [Outcome; 3],
) -> Result<f64> {
    let id = ComplexMatrix::identity2();
    let factors: Vec<ComplexMatrix> = settings
        .iter()
        .zip(outcomes)
        .map(|(s, o)| match s {
            Some(s) => effect(s, o),
            None => id.clone(),
        })
        .collect();
    let op = crate::qop::tensor3(&factors[0], &factors[1], &factors[2])?;
    Ok(mat.trace_product(&op).re)
}

pub(crate) fn correlation_raw(
    mat: &ComplexMatrix,
    settings: &[Option<UnsharpSetting>; 3],
) -> Result<f64> {
    let mut total = 0.0;
    for a in Outcome::ALL {
        for b in Outcome::ALL {
            for c in Outcome::ALL {
                let outcomes = [a, b, c];
                let sign: f64 = settings
                    .iter()
                    .zip(outcomes)
                    .filter(|(s, _)| s.is_some())
                    .map(|(_, o)| o.sign())
                    .product();
                // unmeasured wings would be double counted otherwise
                let measured_only = settings
                    .iter()
                    .zip(outcomes)
                    .all(|(s, o)| s.is_some() || o == Outcome::Plus);
                if !measured_only {
                    continue;
                }
                total += sign * marginal_probability_raw(mat, settings, outcomes)?;
            }
        }
    }
    Ok(total)
}

/// `P(a, b, c)` for one setting per wing, in Alice, Bob, Charlie order.
pub fn joint_probability(
    rho: &DensityMatrix,
    settings: &[UnsharpSetting; 3],
    outcomes: [Outcome; 3],
) -> Result<f64> {
    let s = settings.map(Some);
    marginal_probability_raw(rho.matrix(), &s, outcomes)
}

/// Marginal distribution over the wings that carry a setting.
pub fn marginal_probability(
    rho: &DensityMatrix,
    settings: &[Option<UnsharpSetting>; 3],
    outcomes: [Outcome; 3],
) -> Result<f64> {
    marginal_probability_raw(rho.matrix(), settings, outcomes)
}

/// `Σ abc P(a, b, c)`.
pub fn correlation3(rho: &DensityMatrix, settings: &[UnsharpSetting; 3]) -> Result<f64> {
    correlation_raw(rho.matrix(), &settings.map(Some))
}

/// Two-party correlation with the remaining wing marginalized.
pub fn correlation2(
    rho: &DensityMatrix,
    first: (Wing, UnsharpSetting),
    second: (Wing, UnsharpSetting),
) -> Result<f64> {
    if first.0 == second.0 {
        return Err(Error::InvalidScenario(format!(
            "two-party correlation needs distinct wings, got {} twice",
            first.0
        )));
    }
    let mut s = [None; 3];
    s[first.0.index()] = Some(first.1);
    s[second.0.index()] = Some(second.1);
    correlation_raw(rho.matrix(), &s)
}

/// Single-party expectation value.
pub fn correlation1(rho: &DensityMatrix, wing: Wing, setting: UnsharpSetting) -> Result<f64> {
    let mut s = [None; 3];
    s[wing.index()] = Some(setting);
    correlation_raw(rho.matrix(), &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::{C64, ALGEBRA_TOL};
    use crate::states::{build_state, StateSpec};

    fn sharp(l: f64) -> Sharpness {
        Sharpness::new(l).unwrap()
    }

    fn proj(d: BlochDirection) -> UnsharpSetting {
        UnsharpSetting::projective(d)
    }

    #[test]
    fn effect_examples() {
        let z = BlochDirection::z();
        let e = effect(&UnsharpSetting::new(z, Sharpness::PROJECTIVE), Outcome::Plus);
        assert!((e.get(0, 0) - C64::new(1.0, 0.0)).norm() < ALGEBRA_TOL);
        assert!(e.get(1, 1).norm() < ALGEBRA_TOL);

        let e = effect(&UnsharpSetting::new(z, sharp(0.627)), Outcome::Plus);
        assert!((e.get(0, 0).re - 0.8135).abs() < 1e-12);
        assert!((e.get(1, 1).re - 0.1865).abs() < 1e-12);
        assert!(e.get(0, 1).norm() < ALGEBRA_TOL);

        let lambda = 0.3;
        let s = UnsharpSetting::new(BlochDirection::new(1.0, 2.0).unwrap(), sharp(lambda));
        let ev = effect(&s, Outcome::Minus).hermitian_eigenvalues();
        assert!((ev[0] - (1.0 - lambda) / 2.0).abs() < 1e-12);
        assert!((ev[1] - (1.0 + lambda) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sharpness_range() {
        assert!(Sharpness::new(0.0).is_err());
        assert!(Sharpness::new(-0.2).is_err());
        assert!(Sharpness::new(1.0 + 1e-15).is_err());
        assert!(Sharpness::new(f64::NAN).is_err());
        assert!(Sharpness::new(1.0).unwrap().is_projective());
        let qp = sharp(0.6).quality_precision();
        assert!((qp.quality - 0.8).abs() < 1e-12);
        assert_eq!(qp.precision, 0.6);
    }

    #[test]
    fn luders_projective_on_product_state() {
        let mut v = [C64::new(0.0, 0.0); 8];
        v[0] = C64::new(1.0, 0.0);
        let rho = DensityMatrix::from_pure(&v).unwrap();
        let s = proj(BlochDirection::x());
        let (post, p) = luders_update(&rho, Wing::Alice, &s, Outcome::Plus).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        // |+⟩⟨+| ⊗ |00⟩⟨00| scaled by 1/2
        assert!((post.get(0, 0).re - 0.25).abs() < 1e-12);
        assert!((post.get(4, 0).re - 0.25).abs() < 1e-12);
    }

    #[test]
    fn luders_branches_restore_trace() {
        let rho = build_state(&StateSpec::W).unwrap();
        let s = UnsharpSetting::new(BlochDirection::new(0.4, 1.3).unwrap(), sharp(0.7));
        let total: f64 = Outcome::ALL
            .iter()
            .map(|&o| luders_update(&rho, Wing::Bob, &s, o).unwrap().1)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn luders_ghz_probability() {
        let rho = build_state(&StateSpec::Ghz).unwrap();
        let s = UnsharpSetting::new(BlochDirection::z(), sharp(0.5));
        let (_, p) = luders_update(&rho, Wing::Alice, &s, Outcome::Plus).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn channel_leaves_maximally_mixed_wing() {
        let rho = DensityMatrix::maximally_mixed(8).unwrap();
        let out = averaged_channel(&rho, Wing::Charlie, &SettingTriple::xyz(sharp(0.999))).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-12);
        let out = averaged_channel(&rho, Wing::Alice, &SettingTriple::xyz(Sharpness::PROJECTIVE)).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn channel_shrinks_bloch_vector() {
        // product state with Bloch vector r on Alice, |0⟩|0⟩ elsewhere
        let r = [0.3, -0.4, 0.5];
        let bloch = |rv: [f64; 3]| {
            ComplexMatrix::from_rows(
                2,
                &[
                    C64::new((1.0 + rv[2]) / 2.0, 0.0),
                    C64::new(rv[0] / 2.0, -rv[1] / 2.0),
                    C64::new(rv[0] / 2.0, rv[1] / 2.0),
                    C64::new((1.0 - rv[2]) / 2.0, 0.0),
                ],
            )
            .unwrap()
        };
        let zero = projector(&BlochDirection::z(), Outcome::Plus);
        for lambda in [0.2, 0.627, 0.9] {
            let rho =
                DensityMatrix::new(crate::qop::tensor3(&bloch(r), &zero, &zero).unwrap()).unwrap();
            let out = averaged_channel(&rho, Wing::Alice, &SettingTriple::xyz(sharp(lambda))).unwrap();
            let red = out.matrix().partial_trace_keep(Wing::Alice).unwrap();
            // explicit 2×2 algebra: r ↦ ((1 + 2√(1-λ²))/3) r
            let shrink = (1.0 + 2.0 * (1.0 - lambda * lambda).sqrt()) / 3.0;
            let expected = bloch(r.map(|x| x * shrink));
            assert!(red.max_abs_diff(&expected) < 1e-12, "λ={lambda}");
        }
        let shrink = (1.0 + 2.0 * (1.0f64 - 0.627 * 0.627).sqrt()) / 3.0;
        assert!((shrink - 0.8527).abs() < 5e-5);
    }

    #[test]
    fn joint_probability_examples() {
        let rho = build_state(&StateSpec::Ghz).unwrap();
        let z = proj(BlochDirection::z());
        let settings = [z, z, z];
        let p = joint_probability(&rho, &settings, [Outcome::Plus; 3]).unwrap();
        assert!((p - 0.5).abs() < 1e-12);

        let s = [
            UnsharpSetting::new(BlochDirection::new(0.3, 0.8).unwrap(), sharp(0.4)),
            proj(BlochDirection::x()),
            proj(BlochDirection::new(2.0, 5.0).unwrap()),
        ];
        let mut total = 0.0;
        for a in Outcome::ALL {
            for b in Outcome::ALL {
                for c in Outcome::ALL {
                    let p = joint_probability(&rho, &s, [a, b, c]).unwrap();
                    assert!(p >= -1e-15);
                    total += p;
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_examples() {
        let ghz = build_state(&StateSpec::Ghz).unwrap();
        let w = build_state(&StateSpec::W).unwrap();
        let x = BlochDirection::x();
        let z = BlochDirection::z();
        let xxx = [proj(x), proj(x), proj(x)];
        assert!((correlation3(&ghz, &xxx).unwrap() - 1.0).abs() < 1e-12);
        let half = [UnsharpSetting::new(x, sharp(0.5)), proj(x), proj(x)];
        assert!((correlation3(&ghz, &half).unwrap() - 0.5).abs() < 1e-12);
        let zzz = [proj(z), proj(z), proj(z)];
        assert!((correlation3(&w, &zzz).unwrap() + 1.0).abs() < 1e-12);

        let zz = correlation2(&ghz, (Wing::Bob, proj(z)), (Wing::Charlie, proj(z))).unwrap();
        assert!((zz - 1.0).abs() < 1e-12);
        let zc = correlation1(&w, Wing::Charlie, proj(z)).unwrap();
        assert!((zc - 1.0 / 3.0).abs() < 1e-12);
        assert!(correlation2(&w, (Wing::Bob, proj(z)), (Wing::Bob, proj(z))).is_err());
    }

    #[test]
    fn two_party_marginal_ignores_sequential_setting() {
        let ghz = build_state(&StateSpec::Ghz).unwrap();
        let y = proj(BlochDirection::new(0.7, 2.2).unwrap());
        let reference = correlation1(&ghz, Wing::Bob, y).unwrap();
        for (theta, phi) in [(0.0, 0.0), (1.0, 1.0), (2.5, 6.0)] {
            let seq = UnsharpSetting::new(BlochDirection::new(theta, phi).unwrap(), sharp(0.6));
            let mut marg = 0.0;
            for a in Outcome::ALL {
                for b in Outcome::ALL {
                    let s = [Some(seq), Some(y), None];
                    marg += b.sign() * marginal_probability(&ghz, &s, [a, b, Outcome::Plus]).unwrap();
                }
            }
            assert!((marg - reference).abs() < 1e-12);
        }
    }
}
