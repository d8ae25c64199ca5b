//! Behavioral expenditure functions φ and the augmented-utility price
//! systems they induce.
//!
//! φ maps (true cost, perceived/reference cost) to the expenditure the
//! consumer acts on. Two built-ins: pure misperception `φ(e, e′) = e′` and
//! reference dependence `φ(e, e′) = e·f(e/e′)` with `f(1) = 1`.

use std::fmt;
use std::sync::Arc;

use crate::error::Error;
use crate::exact::Money;
use crate::revpref::PriceSystem;

/// Which tail of the second argument makes φ dominate any bounded
/// comparison. This drives the direction of the scale separation in the
/// augmented-utility construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiRegularity {
    /// For costs `a, b, y` in a bounded set there is `M` with
    /// `φ(a, x) > φ(b, y)` whenever `x > M`.
    DominatesForLargeX,
    /// For costs `a, b, y` in a bounded set there is `m` with
    /// `φ(a, x) > φ(b, y)` whenever `x < m`.
    DominatesForSmallX,
}

type ScalarFn = Arc<dyn Fn(&Money) -> Money + Send + Sync>;
type PhiFn = Arc<dyn Fn(&Money, &Money) -> Money + Send + Sync>;

#[derive(Clone)]
enum PhiKind {
    /// `φ(e, e′) = e′`: the consumer acts on the perceived cost alone.
    Misperception,
    /// `φ(e, e′) = e·f(e/e′)` with `f` increasing and `f(1) = 1`.
    Reference { name: String, f: ScalarFn },
    Custom { name: String, phi: PhiFn },
}

/// A behavioral expenditure function with its declared regularity case.
#[derive(Clone)]
pub struct BehavioralExpenditure {
    kind: PhiKind,
    regularity: PhiRegularity,
}

impl fmt::Debug for BehavioralExpenditure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BehavioralExpenditure({})", self.key())
    }
}

impl BehavioralExpenditure {
    /// Pure price misperception, `φ(e, e′) = e′`. Larger perceived costs
    /// dominate, so this is the large-x case.
    pub fn misperception() -> Self {
        BehavioralExpenditure {
            kind: PhiKind::Misperception,
            regularity: PhiRegularity::DominatesForLargeX,
        }
    }

    /// Reference dependence with the clamp `f(r) = max(r, 1)`: bundles
    /// costing more than their reference are penalized proportionally,
    /// cheaper ones are not rewarded. As the reference cost vanishes the
    /// penalty diverges, so this is the small-x case.
    pub fn reference_clamp_at_one() -> Self {
        BehavioralExpenditure {
            kind: PhiKind::Reference {
                name: "clamp".into(),
                f: Arc::new(|r: &Money| r.clone().max(Money::one())),
            },
            regularity: PhiRegularity::DominatesForSmallX,
        }
    }

    /// Reference dependence `φ(e, e′) = e·f(e/e′)` with a caller-supplied
    /// increasing `f`. Verifies `f(1) = 1` and samples monotonicity.
    pub fn reference(
        name: impl Into<String>,
        regularity: PhiRegularity,
        f: impl Fn(&Money) -> Money + Send + Sync + 'static,
    ) -> Result<Self, Error> {
        let name = name.into();
        if f(&Money::one()) != Money::one() {
            return Err(Error::domain(format!(
                "reference function `{name}` must satisfy f(1) = 1"
            )));
        }
        let phi = BehavioralExpenditure {
            kind: PhiKind::Reference {
                name,
                f: Arc::new(f),
            },
            regularity,
        };
        phi.check_strict_increase_sampled()?;
        Ok(phi)
    }

    /// Fully custom φ with a declared regularity case. Property (a) —
    /// `φ(e, αe)` strictly increasing in `e` — is verified by sampling only.
    pub fn custom(
        name: impl Into<String>,
        regularity: PhiRegularity,
        phi: impl Fn(&Money, &Money) -> Money + Send + Sync + 'static,
    ) -> Result<Self, Error> {
        let phi = BehavioralExpenditure {
            kind: PhiKind::Custom {
                name: name.into(),
                phi: Arc::new(phi),
            },
            regularity,
        };
        phi.check_strict_increase_sampled()?;
        Ok(phi)
    }

    fn check_strict_increase_sampled(&self) -> Result<(), Error> {
        for alpha in [
            Money::ratio(1, 3),
            Money::ratio(1, 2),
            Money::one(),
            Money::from_int(2),
            Money::from_int(5),
        ] {
            let mut prev: Option<Money> = None;
            for e in [Money::ratio(1, 2), Money::one(), Money::ratio(3, 2), Money::from_int(4)] {
                let value = self.eval(&e, &(&alpha * &e))?;
                if let Some(p) = prev {
                    if value <= p {
                        return Err(Error::domain(format!(
                            "behavioral expenditure `{}` violates strict increase of \
                             φ(e, αe) in e at α={alpha}",
                            self.key()
                        )));
                    }
                }
                prev = Some(value);
            }
        }
        Ok(())
    }

    pub fn regularity(&self) -> PhiRegularity {
        self.regularity
    }

    /// Selection key, e.g. `misperception` or `reference:clamp`.
    pub fn key(&self) -> String {
        match &self.kind {
            PhiKind::Misperception => "misperception".into(),
            PhiKind::Reference { name, .. } => format!("reference:{name}"),
            PhiKind::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    /// φ(e, e′) for strictly positive arguments; exact for the built-ins.
    pub fn eval(&self, e: &Money, eprime: &Money) -> Result<Money, Error> {
        if !e.is_positive() || !eprime.is_positive() {
            return Err(Error::EvaluatorDomain {
                message: format!(
                    "behavioral expenditure needs positive arguments, got ({e}, {eprime})"
                ),
            });
        }
        Ok(match &self.kind {
            PhiKind::Misperception => eprime.clone(),
            PhiKind::Reference { f, .. } => e * f(&(e / eprime)),
            PhiKind::Custom { phi, .. } => phi(e, eprime),
        })
    }
}

/// Builds the per-(consumer, observation) price systems
/// `f^{i,t}(x) = φ(p̄^t·x, λ_i·p̄^t·x)` for a panel under per-consumer
/// scales. The returned systems are evaluated lazily; the GAPP engine
/// computes each `f^{i,t}(x^{j,s})` exactly once over the finite bundle
/// list.
pub fn make_price_systems(
    panel: &crate::dataset::PanelDataset,
    scales: &[Money],
    phi: &BehavioralExpenditure,
) -> Result<Vec<Vec<PriceSystem>>, Error> {
    if scales.len() != panel.n_consumers() {
        return Err(Error::schema(format!(
            "{} scales for {} consumers",
            scales.len(),
            panel.n_consumers()
        )));
    }
    for (i, l) in scales.iter().enumerate() {
        if !l.is_positive() {
            return Err(Error::domain(format!(
                "scale factor must be strictly positive; violated for consumer {i}"
            )));
        }
    }
    Ok((0..panel.n_consumers())
        .map(|i| {
            (0..panel.n_observations())
                .map(|t| {
                    PriceSystem::behavioral(
                        phi.clone(),
                        panel.price_index(t).to_vec(),
                        scales[i].clone(),
                    )
                })
                .collect()
        })
        .collect())
}
