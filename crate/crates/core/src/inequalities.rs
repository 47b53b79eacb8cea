//! The four genuine tripartite steering functionals `G1`, `G2`, `W1`, `W2`.
//!
//! Each functional is `1 + Σ cᵢ ⟨termᵢ⟩`; a negative value certifies genuine
//! steering. A term names, for each wing, which of that wing's three settings
//! is measured (or none). Setting index 0, 1, 2 corresponds to `A1, A2, A3`
//! on an untrusted wing and to `X, Y, Z` on a trusted one.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Setting index measured on each wing (`None` = wing not involved).
pub type Factors = [Option<usize>; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SteeringDirection {
    /// One untrusted party steers the other two.
    #[serde(rename = "1to2")]
    OneToTwo,
    /// Two untrusted parties steer the third.
    #[serde(rename = "2to1")]
    TwoToOne,
}

impl SteeringDirection {
    pub fn label(self) -> &'static str {
        match self {
            SteeringDirection::OneToTwo => "1to2",
            SteeringDirection::TwoToOne => "2to1",
        }
    }
}

impl fmt::Display for SteeringDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SteeringDirection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "1to2" => Ok(SteeringDirection::OneToTwo),
            "2to1" => Ok(SteeringDirection::TwoToOne),
            _ => Err(format!("unknown direction `{s}` (expected 1to2 or 2to1)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InequalityKind {
    G1,
    G2,
    W1,
    W2,
}

impl InequalityKind {
    pub const ALL: [InequalityKind; 4] = [
        InequalityKind::G1,
        InequalityKind::G2,
        InequalityKind::W1,
        InequalityKind::W2,
    ];

    pub fn direction(self) -> SteeringDirection {
        match self {
            InequalityKind::G1 | InequalityKind::W1 => SteeringDirection::OneToTwo,
            InequalityKind::G2 | InequalityKind::W2 => SteeringDirection::TwoToOne,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InequalityKind::G1 => "g1",
            InequalityKind::G2 => "g2",
            InequalityKind::W1 => "w1",
            InequalityKind::W2 => "w2",
        }
    }

    /// Coefficients by name.
    pub fn coefficients(self) -> &'static [(&'static str, f64)] {
        match self {
            InequalityKind::G1 => &[("g_alpha", G_ALPHA)],
            InequalityKind::G2 => &[("alpha", ALPHA), ("beta", BETA)],
            InequalityKind::W1 => &[
                ("w_alpha", W_ALPHA),
                ("w_beta", W_BETA),
                ("w_gamma", W_GAMMA),
                ("w_delta", W_DELTA),
                ("w_epsilon", W_EPSILON),
                ("w_phi", W_PHI),
            ],
            InequalityKind::W2 => &[
                ("w_kappa", W_KAPPA),
                ("w_lambda", W_LAMBDA),
                ("w_eta", W_ETA),
                ("w_mu", W_MU),
                ("w_nu", W_NU),
                ("w_omega", W_OMEGA),
                ("w_pi", W_PI),
                ("w_theta", W_THETA),
                ("w_xi", W_XI),
            ],
        }
    }

    pub fn constant(self) -> f64 {
        1.0
    }

    pub fn terms(self) -> Vec<Term> {
        required_terms(self)
    }
}

impl fmt::Display for InequalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for InequalityKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "g1" => Ok(InequalityKind::G1),
            "g2" => Ok(InequalityKind::G2),
            "w1" => Ok(InequalityKind::W1),
            "w2" => Ok(InequalityKind::W2),
            _ => Err(format!("unknown inequality `{s}` (expected g1, g2, w1 or w2)")),
        }
    }
}

pub const G_ALPHA: f64 = 0.1547;
pub const ALPHA: f64 = 0.183;
pub const BETA: f64 = 0.258;

pub const W_ALPHA: f64 = 0.4405;
pub const W_BETA: f64 = 0.0037;
pub const W_GAMMA: f64 = 0.1570;
pub const W_DELTA: f64 = 0.2424;
pub const W_EPSILON: f64 = 0.1848;
pub const W_PHI: f64 = 0.2533;

pub const W_KAPPA: f64 = 0.2517;
pub const W_LAMBDA: f64 = 0.3520;
pub const W_ETA: f64 = 0.1112;
pub const W_MU: f64 = 0.1296;
pub const W_NU: f64 = 0.1943;
pub const W_OMEGA: f64 = 0.2277;
pub const W_PI: f64 = 0.1590;
pub const W_THETA: f64 = 0.2228;
pub const W_XI: f64 = 0.2298;

/// One signed expectation term of a functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub factors: Factors,
}

impl Term {
    /// Number of wings the term involves.
    pub fn order(&self) -> usize {
        self.factors.iter().filter(|f| f.is_some()).count()
    }

    /// Human-readable name, e.g. `<A3 Z_B>` or `<A1 B2 Y>`.
    pub fn label(&self, direction: SteeringDirection) -> String {
        factors_label(&self.factors, direction)
    }
}

pub fn factors_label(factors: &Factors, direction: SteeringDirection) -> String {
    const PAULI: [char; 3] = ['X', 'Y', 'Z'];
    let mut parts = Vec::new();
    for (wing, f) in factors.iter().enumerate() {
        let Some(k) = *f else { continue };
        let trusted = match direction {
            SteeringDirection::OneToTwo => wing != 0,
            SteeringDirection::TwoToOne => wing == 2,
        };
        let part = match (trusted, wing, direction) {
            (false, 0, _) => format!("A{}", k + 1),
            (false, _, _) => format!("B{}", k + 1),
            (true, 1, _) => format!("{}_B", PAULI[k]),
            (true, _, SteeringDirection::OneToTwo) => format!("{}_C", PAULI[k]),
            (true, _, SteeringDirection::TwoToOne) => format!("{}", PAULI[k]),
        };
        parts.push(part);
    }
    format!("<{}>", parts.join(" "))
}

// codes: 0 = wing absent, 1..=3 = setting index + 1
fn term(coefficient: f64, codes: [u8; 3]) -> Term {
    Term {
        coefficient,
        factors: codes.map(|c| c.checked_sub(1).map(usize::from)),
    }
}

/// Every expectation term of `kind` with its signed coefficient.
pub fn required_terms(kind: InequalityKind) -> Vec<Term> {
    const THIRD: f64 = 1.0 / 3.0;
    match kind {
        InequalityKind::G1 => vec![
            term(G_ALPHA, [0, 3, 3]),
            term(-THIRD, [3, 3, 0]),
            term(-THIRD, [3, 0, 3]),
            term(-THIRD, [1, 1, 1]),
            term(THIRD, [1, 2, 2]),
            term(THIRD, [2, 1, 2]),
            term(THIRD, [2, 2, 1]),
        ],
        InequalityKind::G2 => vec![
            term(-ALPHA, [3, 3, 0]),
            term(-ALPHA, [3, 0, 3]),
            term(-ALPHA, [0, 3, 3]),
            term(-BETA, [1, 1, 1]),
            term(BETA, [1, 2, 2]),
            term(BETA, [2, 1, 2]),
            term(BETA, [2, 2, 1]),
        ],
        InequalityKind::W1 => vec![
            term(W_ALPHA, [0, 3, 0]),
            term(W_ALPHA, [0, 0, 3]),
            term(-W_BETA, [0, 3, 3]),
            term(-W_GAMMA, [0, 1, 1]),
            term(-W_GAMMA, [0, 2, 2]),
            term(-W_GAMMA, [3, 1, 1]),
            term(-W_GAMMA, [3, 2, 2]),
            term(W_DELTA, [3, 0, 0]),
            term(W_DELTA, [3, 3, 3]),
            term(W_EPSILON, [3, 3, 0]),
            term(W_EPSILON, [3, 0, 3]),
            // all eight entries of the w_phi group carry -w_phi
            term(-W_PHI, [1, 1, 0]),
            term(-W_PHI, [1, 0, 1]),
            term(-W_PHI, [2, 2, 0]),
            term(-W_PHI, [2, 0, 2]),
            term(-W_PHI, [1, 1, 3]),
            term(-W_PHI, [1, 3, 1]),
            term(-W_PHI, [2, 2, 3]),
            term(-W_PHI, [2, 3, 2]),
        ],
        InequalityKind::W2 => vec![
            term(W_KAPPA, [3, 0, 0]),
            term(W_KAPPA, [0, 3, 0]),
            term(W_LAMBDA, [0, 0, 3]),
            term(-W_ETA, [1, 0, 1]),
            term(-W_ETA, [2, 0, 2]),
            term(-W_ETA, [0, 1, 1]),
            term(-W_ETA, [0, 2, 2]),
            term(W_MU, [3, 0, 3]),
            term(W_MU, [0, 3, 3]),
            term(-W_NU, [1, 1, 0]),
            term(-W_NU, [2, 2, 0]),
            term(W_OMEGA, [3, 3, 0]),
            term(-W_PI, [1, 1, 3]),
            term(-W_PI, [2, 2, 3]),
            term(W_THETA, [3, 3, 3]),
            term(-W_XI, [1, 3, 1]),
            term(-W_XI, [2, 3, 2]),
            term(-W_XI, [3, 1, 1]),
            term(-W_XI, [3, 2, 2]),
        ],
    }
}

/// Source of the expectation values a functional needs.
pub trait CorrelationProvider {
    /// `⟨·⟩` for the given factors, or `None` when the term is unavailable.
    fn expectation(&self, factors: &Factors) -> Option<f64>;
}

impl<T: CorrelationProvider + ?Sized> CorrelationProvider for &T {
    fn expectation(&self, factors: &Factors) -> Option<f64> {
        (**self).expectation(factors)
    }
}

/// Fixed table of expectation values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TermTable(pub HashMap<Factors, f64>);

impl TermTable {
    pub fn insert(&mut self, factors: Factors, value: f64) {
        self.0.insert(factors, value);
    }
}

impl CorrelationProvider for TermTable {
    fn expectation(&self, factors: &Factors) -> Option<f64> {
        self.0.get(factors).copied()
    }
}

/// Left-hand side of the inequality; negative values certify genuine steering.
pub fn evaluate<P: CorrelationProvider + ?Sized>(kind: InequalityKind, provider: &P) -> Result<f64> {
    let mut value = kind.constant();
    for t in required_terms(kind) {
        let e = provider
            .expectation(&t.factors)
            .ok_or_else(|| Error::MissingTerm(t.label(kind.direction())))?;
        value += t.coefficient * e;
    }
    Ok(value)
}

/// Strict negativity; zero counts as not detected.
pub fn is_violation(value: f64) -> bool {
    value < 0.0
}

#[derive(Serialize)]
struct TermRecord {
    label: String,
    coefficient: f64,
    factors: Factors,
}

#[derive(Serialize)]
struct TermsReport {
    inequality: InequalityKind,
    direction: SteeringDirection,
    constant: f64,
    terms: Vec<TermRecord>,
}

/// The term list as pretty-printed JSON, for audit tooling.
pub fn required_terms_json(kind: InequalityKind) -> String {
    let report = TermsReport {
        inequality: kind,
        direction: kind.direction(),
        constant: kind.constant(),
        terms: required_terms(kind)
            .into_iter()
            .map(|t| TermRecord {
                label: t.label(kind.direction()),
                coefficient: t.coefficient,
                factors: t.factors,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&report).expect("term report serializes")
}
