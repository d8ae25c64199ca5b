//! Price aggregator algebra: the maps `W` that combine `N` idiosyncratic
//! prices into one index price, plus the monotone residual solves the
//! rationalizing constructions need.
//!
//! An aggregator is strictly increasing, continuous, and satisfies
//! `W(p, …, p) = p`. Built-ins (arithmetic mean, weighted harmonic mean)
//! evaluate and solve exactly in rationals; custom aggregators evaluate
//! through a caller-supplied function and solve by bisection on an
//! automatically expanded bracket.

use std::fmt;
use std::sync::Arc;

use crate::error::Error;
use crate::exact::{dot, Money};

/// Tail behavior assumed of an aggregator when one coordinate runs to the
/// boundary. Custom aggregators declare their case; limit behavior is not
/// decidable from finitely many evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// `W(p^i, p^{-i}) → ∞` as `p^i → ∞`.
    DivergesAtInfinity,
    /// `W(p^i, p^{-i}) → 0` as `p^i → 0`.
    VanishesAtZero,
}

type EvalFn = Arc<dyn Fn(&[Money]) -> Money + Send + Sync>;

/// Caller-supplied aggregator with declared tail behavior.
#[derive(Clone)]
pub struct CustomAggregator {
    pub name: String,
    pub arity: usize,
    pub regularity: Regularity,
    pub homogeneous_degree_one: bool,
    eval: EvalFn,
}

/// A price aggregator `W^t_k`.
#[derive(Clone)]
pub enum AggregatorSpec {
    /// `W((p^i)) = (Σ_i p^i) / N`. Homogeneous of degree one; diverges at
    /// infinity.
    Arithmetic,
    /// `W((p^i)) = M / (Σ_i w_i / p^i)` with `M = Σ_i w_i`. Weights come
    /// from the data set (the per-consumer expenditures on the good), never
    /// from the user. Homogeneous of degree one; vanishes at zero. Strictly
    /// increasing only in coordinates with positive weight.
    WeightedHarmonic { weights: Vec<Money> },
    Custom(CustomAggregator),
}

impl fmt::Debug for AggregatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregatorSpec::Arithmetic => f.write_str("Arithmetic"),
            AggregatorSpec::WeightedHarmonic { weights } => {
                write!(f, "WeightedHarmonic({} weights)", weights.len())
            }
            AggregatorSpec::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

/// Relative tolerance for bisection solves: 2⁻⁶⁰.
pub fn bisection_tolerance() -> Money {
    Money::ratio(1, 2).pow(60)
}

const MAX_BRACKET_STEPS: usize = 200;
const MAX_BISECTION_STEPS: usize = 2000;

impl AggregatorSpec {
    pub fn arithmetic() -> Self {
        AggregatorSpec::Arithmetic
    }

    /// Weighted harmonic aggregator with weights taken from a data set.
    /// Requires nonnegative weights with a strictly positive sum.
    pub fn weighted_harmonic(weights: Vec<Money>) -> Result<Self, Error> {
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::domain("harmonic weights must be nonnegative"));
        }
        if !weights.iter().sum::<Money>().is_positive() {
            return Err(Error::domain("harmonic weights must have positive sum"));
        }
        Ok(AggregatorSpec::WeightedHarmonic { weights })
    }

    /// Registers a custom aggregator after a sampled sanity check of the
    /// aggregator identity `W(p,…,p) = p` and of strict monotonicity.
    /// Sampling cannot prove either property; the declared regularity and
    /// homogeneity are trusted.
    pub fn custom(
        name: impl Into<String>,
        arity: usize,
        regularity: Regularity,
        homogeneous_degree_one: bool,
        eval: impl Fn(&[Money]) -> Money + Send + Sync + 'static,
    ) -> Result<Self, Error> {
        if arity == 0 {
            return Err(Error::domain("aggregator arity must be positive"));
        }
        let spec = CustomAggregator {
            name: name.into(),
            arity,
            regularity,
            homogeneous_degree_one,
            eval: Arc::new(eval),
        };
        for p in [Money::ratio(1, 2), Money::one(), Money::from_int(2), Money::ratio(7, 3)] {
            let got = (spec.eval)(&vec![p.clone(); arity]);
            if got != p {
                return Err(Error::domain(format!(
                    "custom aggregator `{}` violates W(p,…,p)=p at p={p}: got {got}",
                    spec.name
                )));
            }
        }
        for j in 0..arity {
            for base in [Money::one(), Money::ratio(3, 2)] {
                let mut lo = vec![base.clone(); arity];
                let mut hi = vec![base.clone(); arity];
                hi[j] = &base + &Money::ratio(1, 3);
                let (a, b) = ((spec.eval)(&lo), (spec.eval)(&hi));
                if a >= b {
                    return Err(Error::domain(format!(
                        "custom aggregator `{}` is not strictly increasing in coordinate {j}",
                        spec.name
                    )));
                }
                lo[j] = Money::ratio(1, 4);
                let c = (spec.eval)(&lo);
                if c >= a {
                    return Err(Error::domain(format!(
                        "custom aggregator `{}` is not strictly increasing in coordinate {j}",
                        spec.name
                    )));
                }
            }
        }
        Ok(AggregatorSpec::Custom(spec))
    }

    /// Number of prices the aggregator combines; `None` when flexible.
    pub fn arity(&self) -> Option<usize> {
        match self {
            AggregatorSpec::Arithmetic => None,
            AggregatorSpec::WeightedHarmonic { weights } => Some(weights.len()),
            AggregatorSpec::Custom(c) => Some(c.arity),
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            AggregatorSpec::Arithmetic => Regularity::DivergesAtInfinity,
            AggregatorSpec::WeightedHarmonic { .. } => Regularity::VanishesAtZero,
            AggregatorSpec::Custom(c) => c.regularity,
        }
    }

    pub fn homogeneous_degree_one(&self) -> bool {
        match self {
            AggregatorSpec::Arithmetic | AggregatorSpec::WeightedHarmonic { .. } => true,
            AggregatorSpec::Custom(c) => c.homogeneous_degree_one,
        }
    }

    /// Whether evaluation and residual solving are exact rational
    /// operations (true for the built-ins).
    pub fn is_exact(&self) -> bool {
        !matches!(self, AggregatorSpec::Custom(_))
    }

    fn check_arity(&self, n: usize) -> Result<(), Error> {
        if n == 0 {
            return Err(Error::domain("aggregator applied to empty price list"));
        }
        if let Some(expected) = self.arity() {
            if n != expected {
                return Err(Error::domain(format!(
                    "aggregator expects {expected} prices, got {n}"
                )));
            }
        }
        Ok(())
    }

    /// Aggregated price of a strictly positive price profile.
    pub fn eval(&self, prices: &[Money]) -> Result<Money, Error> {
        self.check_arity(prices.len())?;
        for (i, p) in prices.iter().enumerate() {
            if !p.is_positive() {
                return Err(Error::NonPositivePrice { index: i });
            }
        }
        Ok(match self {
            AggregatorSpec::Arithmetic => {
                prices.iter().sum::<Money>() / Money::from_int(prices.len() as i64)
            }
            AggregatorSpec::WeightedHarmonic { weights } => {
                let mass: Money = weights.iter().sum();
                let denom: Money = weights.iter().zip(prices).map(|(w, p)| w / p).sum();
                mass / denom
            }
            AggregatorSpec::Custom(c) => (c.eval)(prices),
        })
    }

    /// Solves `W(filled) = target` for the single free coordinate
    /// `free_index`, the other coordinates pinned to `fixed` (in order,
    /// skipping the free slot). Closed form for the built-ins; bisection to
    /// within `2⁻⁶⁰·target` relative error for custom kinds.
    pub fn solve_residual(
        &self,
        target: &Money,
        fixed: &[Money],
        free_index: usize,
    ) -> Result<Money, Error> {
        let n = fixed.len() + 1;
        self.check_arity(n)?;
        if free_index >= n {
            return Err(Error::domain(format!(
                "free index {free_index} out of range for {n} prices"
            )));
        }
        if !target.is_positive() {
            return Err(Error::domain("aggregation target must be positive"));
        }
        match self {
            AggregatorSpec::Arithmetic => {
                let solution = &Money::from_int(n as i64) * target - fixed.iter().sum::<Money>();
                if !solution.is_positive() {
                    return Err(Error::NoBracket {
                        message: format!(
                            "arithmetic residual requires price {solution} ≤ 0; \
                             target is infeasible on (0, ∞)"
                        ),
                    });
                }
                Ok(solution)
            }
            AggregatorSpec::WeightedHarmonic { weights } => {
                let free_weight = &weights[free_index];
                if !free_weight.is_positive() {
                    return Err(Error::NoBracket {
                        message: format!(
                            "harmonic weight at free index {free_index} is zero; \
                             the aggregate does not depend on that price"
                        ),
                    });
                }
                let mass: Money = weights.iter().sum();
                let mut rest = Money::zero();
                let mut fixed_iter = fixed.iter();
                for (i, w) in weights.iter().enumerate() {
                    if i == free_index {
                        continue;
                    }
                    let p = fixed_iter.next().expect("arity checked");
                    if !p.is_positive() {
                        return Err(Error::NonPositivePrice { index: i });
                    }
                    rest = rest + w / p;
                }
                let residual = mass / target - rest;
                if !residual.is_positive() {
                    return Err(Error::NoBracket {
                        message: "harmonic residual is nonpositive; target infeasible".into(),
                    });
                }
                Ok(free_weight / residual)
            }
            AggregatorSpec::Custom(_) => {
                let fill = |p: &Money| {
                    let mut prices = Vec::with_capacity(n);
                    prices.extend_from_slice(&fixed[..free_index]);
                    prices.push(p.clone());
                    prices.extend_from_slice(&fixed[free_index..]);
                    prices
                };
                self.bisect(target, |p| self.eval(&fill(p)))
            }
        }
    }

    /// Solves `W(q, …, q, pinned, q, …, q) = target` for the common value
    /// `q` filling every coordinate except `pinned_index`. This is the
    /// residual equation for the uniform below-top prices in the
    /// consistency construction. Requires `n ≥ 2`.
    pub fn solve_uniform(
        &self,
        target: &Money,
        pinned: &Money,
        pinned_index: usize,
        n: usize,
    ) -> Result<Money, Error> {
        self.check_arity(n)?;
        if n < 2 {
            return Err(Error::domain("uniform residual needs at least two prices"));
        }
        if pinned_index >= n {
            return Err(Error::domain("pinned index out of range"));
        }
        if !pinned.is_positive() {
            return Err(Error::NonPositivePrice {
                index: pinned_index,
            });
        }
        if !target.is_positive() {
            return Err(Error::domain("aggregation target must be positive"));
        }
        match self {
            AggregatorSpec::Arithmetic => {
                let solution = (&Money::from_int(n as i64) * target - pinned)
                    / Money::from_int((n - 1) as i64);
                if !solution.is_positive() {
                    return Err(Error::NoBracket {
                        message: "uniform arithmetic residual infeasible on (0, ∞)".into(),
                    });
                }
                Ok(solution)
            }
            AggregatorSpec::WeightedHarmonic { weights } => {
                let mass: Money = weights.iter().sum();
                let free_mass: Money = weights
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != pinned_index)
                    .map(|(_, w)| w)
                    .sum();
                if !free_mass.is_positive() {
                    return Err(Error::NoBracket {
                        message: "harmonic weights vanish on all free coordinates".into(),
                    });
                }
                let residual = mass / target - &weights[pinned_index] / pinned;
                if !residual.is_positive() {
                    return Err(Error::NoBracket {
                        message: "uniform harmonic residual infeasible".into(),
                    });
                }
                Ok(free_mass / residual)
            }
            AggregatorSpec::Custom(_) => {
                let fill = |q: &Money| {
                    let mut prices = vec![q.clone(); n];
                    prices[pinned_index] = pinned.clone();
                    prices
                };
                self.bisect(target, |q| self.eval(&fill(q)))
            }
        }
    }

    /// Bisection on a strictly increasing map, with geometric bracket
    /// expansion (doubling/halving, up to 200 steps each way).
    fn bisect<F>(&self, target: &Money, mut eval_at: F) -> Result<Money, Error>
    where
        F: FnMut(&Money) -> Result<Money, Error>,
    {
        let tolerance = bisection_tolerance() * target;
        let two = Money::from_int(2);
        let mut probe = target.clone();
        let mut value = eval_at(&probe)?;
        if value == *target {
            return Ok(probe);
        }
        let (mut lo, mut hi) = if value < *target {
            let lo = probe.clone();
            let mut steps = 0;
            while value < *target {
                steps += 1;
                if steps > MAX_BRACKET_STEPS {
                    return Err(Error::NoBracket {
                        message: format!(
                            "no upper bracket after {MAX_BRACKET_STEPS} doublings; \
                             declared regularity inconsistent with the data"
                        ),
                    });
                }
                probe = &probe * &two;
                value = eval_at(&probe)?;
            }
            (lo, probe)
        } else {
            let hi = probe.clone();
            let mut steps = 0;
            while value > *target {
                steps += 1;
                if steps > MAX_BRACKET_STEPS {
                    return Err(Error::NoBracket {
                        message: format!(
                            "no lower bracket after {MAX_BRACKET_STEPS} halvings; \
                             declared regularity inconsistent with the data"
                        ),
                    });
                }
                probe = &probe / &two;
                value = eval_at(&probe)?;
            }
            (probe, hi)
        };
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = (&lo + &hi) / &two;
            let value = eval_at(&mid)?;
            if (&value - target).abs() <= tolerance {
                return Ok(mid);
            }
            if value < *target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::NoBracket {
            message: "bisection failed to converge; aggregator may be discontinuous".into(),
        })
    }
}

/// Weighted arithmetic mean `W((p^i)) = Σ_i w_i·p^i` for strictly positive
/// weights summing to one. Exact in rationals despite going through the
/// custom-aggregator interface; used to normalize scale factors against a
/// discrete consumer distribution.
pub fn weighted_arithmetic(weights: Vec<Money>) -> Result<AggregatorSpec, Error> {
    if weights.iter().any(|w| !w.is_positive()) {
        return Err(Error::domain("weights must be strictly positive"));
    }
    if weights.iter().sum::<Money>() != Money::one() {
        return Err(Error::domain("weights must sum to one"));
    }
    let arity = weights.len();
    AggregatorSpec::custom(
        "weighted-arithmetic",
        arity,
        Regularity::DivergesAtInfinity,
        true,
        move |prices| dot(&weights, prices),
    )
}
