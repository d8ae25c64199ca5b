//! Seeded data generators for property tests: panels that are
//! rationalizable by construction (closed-form demand systems) and
//! controlled violation templates.
//!
//! All sampling is dyadic-rational so downstream arithmetic stays exact,
//! and everything is a pure function of the spec and seed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dataset::PanelDataset;
use crate::error::Error;
use crate::exact::Money;

/// Data-generating family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// Fixed expenditure shares per consumer (the closed-form demand of a
    /// log-linear utility): `e^{i,t}_k = α_{i,k}·m^{i,t}`. Exponents are
    /// sampled positive and normalized to sum to one unless supplied.
    CobbDouglas {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exponents: Option<Vec<Vec<Money>>>,
    },
    /// Fixed-proportion demand `x = m·w/(p·w)`, so
    /// `e^{i,t}_k = m·p_k·w_k/(p·w)`.
    Leontief {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<Vec<Money>>>,
    },
    /// Controlled violations; see [`generate_panel`] for the templates.
    Violation { template: String },
}

/// Spec for one synthetic panel. Index prices follow a seeded log-uniform
/// law over [1/4, 4): a uniform octave times a dyadic mantissa.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub seed: u64,
    pub n_consumers: usize,
    pub n_observations: usize,
    pub n_goods: usize,
}

fn below(rng: &mut ChaCha8Rng, n: u32) -> u32 {
    rng.next_u32() % n
}

/// Dyadic price in [1/4, 4): 2^a·(1 + k/1024) with a ∈ {−2,…,1}.
fn sample_price(rng: &mut ChaCha8Rng) -> Money {
    let octave = below(rng, 4) as i64 - 2;
    let mantissa = Money::ratio(1024 + below(rng, 1024) as i64, 1024);
    let scale = if octave >= 0 {
        Money::from_int(1 << octave)
    } else {
        Money::ratio(1, 1 << (-octave))
    };
    scale * mantissa
}

/// Dyadic total expenditure in [1, 4).
fn sample_spend(rng: &mut ChaCha8Rng) -> Money {
    let doubled = below(rng, 2) as i64 + 1;
    Money::from_int(doubled) * Money::ratio(1024 + below(rng, 1024) as i64, 1024)
}

/// Positive shares summing to one.
fn sample_shares(rng: &mut ChaCha8Rng, n_goods: usize) -> Vec<Money> {
    let raw: Vec<Money> = (0..n_goods)
        .map(|_| Money::from_int(1 + below(rng, 1024) as i64))
        .collect();
    let total: Money = raw.iter().sum();
    raw.into_iter().map(|w| w / &total).collect()
}

fn validate_per_consumer(
    name: &str,
    rows: &[Vec<Money>],
    n_consumers: usize,
    n_goods: usize,
    must_sum_to_one: bool,
) -> Result<(), Error> {
    if rows.len() != n_consumers {
        return Err(Error::schema(format!(
            "{name} has {} rows, expected {n_consumers}",
            rows.len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_goods {
            return Err(Error::schema(format!(
                "{name} row {i} has {} entries, expected {n_goods}",
                row.len()
            )));
        }
        if row.iter().any(|x| !x.is_positive()) {
            return Err(Error::domain(format!("{name} row {i} must be positive")));
        }
        if must_sum_to_one && row.iter().sum::<Money>() != Money::one() {
            return Err(Error::domain(format!("{name} row {i} must sum to one")));
        }
    }
    Ok(())
}

/// Generates a panel. Violation templates:
/// `warp-2cycle` embeds the two-observation mutual-preference pair into the
/// last consumer's first two observations (everyone else keeps fixed-share
/// demand, which stays rationalizable under any prices); `adversarial-random`
/// draws arbitrary dyadic expenditures with goods 1 and 2 strictly positive
/// and occasional zeros elsewhere.
pub fn generate_panel(spec: &GeneratorSpec) -> Result<PanelDataset, Error> {
    if spec.n_consumers == 0 || spec.n_observations == 0 || spec.n_goods == 0 {
        return Err(Error::schema("generator dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_consumers;
    let t_count = spec.n_observations;
    let k_count = spec.n_goods;

    let mut price_index: Vec<Vec<Money>> = (0..t_count)
        .map(|_| (0..k_count).map(|_| sample_price(&mut rng)).collect())
        .collect();

    let shares_based = |rng: &mut ChaCha8Rng,
                        supplied: &Option<Vec<Vec<Money>>>,
                        leontief: bool|
     -> Result<Vec<Vec<Money>>, Error> {
        let profiles = match supplied {
            Some(rows) => {
                validate_per_consumer(
                    if leontief { "weights" } else { "exponents" },
                    rows,
                    n,
                    k_count,
                    !leontief,
                )?;
                rows.clone()
            }
            None => (0..n).map(|_| sample_shares(rng, k_count)).collect(),
        };
        Ok(profiles)
    };

    let expenditures: Vec<Vec<Vec<Money>>> = match &spec.family {
        Family::CobbDouglas { exponents } => {
            let shares = shares_based(&mut rng, exponents, false)?;
            (0..n)
                .map(|i| {
                    (0..t_count)
                        .map(|_| {
                            let spend = sample_spend(&mut rng);
                            shares[i].iter().map(|a| a * &spend).collect()
                        })
                        .collect()
                })
                .collect()
        }
        Family::Leontief { weights } => {
            let profiles = shares_based(&mut rng, weights, true)?;
            (0..n)
                .map(|i| {
                    (0..t_count)
                        .map(|t| {
                            let spend = sample_spend(&mut rng);
                            let value: Money = price_index[t]
                                .iter()
                                .zip(&profiles[i])
                                .map(|(p, w)| p * w)
                                .sum();
                            price_index[t]
                                .iter()
                                .zip(&profiles[i])
                                .map(|(p, w)| &(&spend * &(p * w)) / &value)
                                .collect()
                        })
                        .collect()
                })
                .collect()
        }
        Family::Violation { template } => match template.as_str() {
            "warp-2cycle" => {
                if t_count < 2 || k_count < 2 {
                    return Err(Error::domain(
                        "warp-2cycle needs at least two observations and two goods",
                    ));
                }
                let shares: Vec<Vec<Money>> =
                    (0..n).map(|_| sample_shares(&mut rng, k_count)).collect();
                let mut e: Vec<Vec<Vec<Money>>> = (0..n)
                    .map(|i| {
                        (0..t_count)
                            .map(|_| {
                                let spend = sample_spend(&mut rng);
                                shares[i].iter().map(|a| a * &spend).collect()
                            })
                            .collect()
                    })
                    .collect();
                // Pin the first two budgets on goods 1 and 2 and give the
                // last consumer the mutually-preferred pair there.
                price_index[0][0] = Money::one();
                price_index[0][1] = Money::from_int(2);
                price_index[1][0] = Money::from_int(2);
                price_index[1][1] = Money::one();
                let violator = n - 1;
                for k in 0..k_count {
                    e[violator][0][k] = Money::zero();
                    e[violator][1][k] = Money::zero();
                }
                e[violator][0][0] = Money::one();
                e[violator][0][1] = Money::from_int(3);
                e[violator][1][0] = Money::from_int(3);
                e[violator][1][1] = Money::one();
                e
            }
            "adversarial-random" => (0..n)
                .map(|_| {
                    (0..t_count)
                        .map(|_| {
                            (0..k_count)
                                .map(|k| {
                                    if k >= 2 && below(&mut rng, 4) == 0 {
                                        Money::zero()
                                    } else {
                                        Money::ratio(1 + below(&mut rng, 4096) as i64, 1024)
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            other => {
                return Err(Error::schema(format!("unknown violation template `{other}`")))
            }
        },
    };
    PanelDataset::new(expenditures, price_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::revpref::{check_garp, Observation};

    fn stream(panel: &PanelDataset, consumer: usize) -> Vec<Observation> {
        (0..panel.n_observations())
            .map(|t| {
                Observation::new(
                    panel.bundle_at_index(consumer, t),
                    panel.price_index(t).to_vec(),
                )
                .unwrap()
            })
            .collect()
    }

    fn spec(family: Family, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            family,
            seed,
            n_consumers: 2,
            n_observations: 3,
            n_goods: 3,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(Family::CobbDouglas { exponents: None }, 42);
        let a = generate_panel(&s).unwrap();
        let b = generate_panel(&s).unwrap();
        assert_eq!(a, b);
        let c = generate_panel(&GeneratorSpec { seed: 43, ..s }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn equal_exponents_split_spending_equally() {
        let s = GeneratorSpec {
            family: Family::CobbDouglas {
                exponents: Some(vec![vec![Money::ratio(1, 2), Money::ratio(1, 2)]]),
            },
            seed: 0,
            n_consumers: 1,
            n_observations: 2,
            n_goods: 2,
        };
        let panel = generate_panel(&s).unwrap();
        for t in 0..2 {
            assert_eq!(panel.expenditure(0, t)[0], panel.expenditure(0, t)[1]);
        }
    }

    #[test]
    fn fixed_share_streams_pass_garp_on_every_seed() {
        for seed in 0..40 {
            let panel = generate_panel(&spec(Family::CobbDouglas { exponents: None }, seed))
                .unwrap();
            for i in 0..panel.n_consumers() {
                assert!(
                    check_garp(&stream(&panel, i)).satisfied,
                    "seed {seed} consumer {i}"
                );
            }
        }
    }

    #[test]
    fn leontief_streams_pass_garp_on_every_seed() {
        for seed in 0..40 {
            let panel =
                generate_panel(&spec(Family::Leontief { weights: None }, seed)).unwrap();
            for i in 0..panel.n_consumers() {
                assert!(
                    check_garp(&stream(&panel, i)).satisfied,
                    "seed {seed} consumer {i}"
                );
            }
        }
    }

    #[test]
    fn warp_template_embeds_a_two_cycle() {
        let panel = generate_panel(&spec(
            Family::Violation {
                template: "warp-2cycle".into(),
            },
            7,
        ))
        .unwrap();
        let verdict = check_garp(&stream(&panel, panel.n_consumers() - 1));
        assert!(!verdict.satisfied);
        assert_eq!(verdict.witness.unwrap(), vec![0, 1, 0]);
        // Other consumers keep their fixed-share rationalizability.
        for i in 0..panel.n_consumers() - 1 {
            assert!(check_garp(&stream(&panel, i)).satisfied);
        }
    }

    #[test]
    fn adversarial_template_keeps_free_goods_positive() {
        for seed in 0..20 {
            let panel = generate_panel(&spec(
                Family::Violation {
                    template: "adversarial-random".into(),
                },
                seed,
            ))
            .unwrap();
            for i in 0..panel.n_consumers() {
                for t in 0..panel.n_observations() {
                    assert!(panel.expenditure(i, t)[0].is_positive());
                    assert!(panel.expenditure(i, t)[1].is_positive());
                }
            }
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = spec(
            Family::Violation {
                template: "warp-2cycle".into(),
            },
            9,
        );
        let text = serde_json::to_string(&s).unwrap();
        let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(generate_panel(&s).unwrap(), generate_panel(&back).unwrap());
    }
}
