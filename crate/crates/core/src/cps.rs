//! Conditional probability systems over a finite ground set.
//!
//! A CPS assigns a belief to every pair (event, nonempty conditioning
//! event) such that conditioning is exact even after zero-probability
//! events. Two storage forms are supported:
//!
//! - a perturbation family: one fully supported weight per atom, given as a
//!   polynomial in ε (standing for 1/n); conditionals are exact limits of
//!   ratios as ε → 0⁺, and the three CPS properties hold by construction;
//! - explicit conditional tables over a finite family of conditioning
//!   events, which is what the checker validates triple by triple.

use crate::limits::{limit_ratio, Poly};
use crate::rational::{format_rat, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CpsError {
    #[error("perturbation weight of atom {0} is not eventually positive")]
    NotFullySupported(usize),
    #[error("conditional on an event not stored in the table: {0:?}")]
    MissingConditional(Vec<usize>),
    #[error("empty conditioning event")]
    EmptyConditioning,
    #[error("diverging limit for atom {atom} given {event:?}")]
    DivergingLimit { atom: usize, event: Vec<usize> },
}

enum CpsData {
    Perturbation(Vec<Poly>),
    /// Per stored conditioning event: one conditional weight per atom.
    Tables(BTreeMap<Vec<usize>, Vec<Rat>>),
}

/// A conditional probability system on atoms `0..ground.len()`.
pub struct Cps {
    pub ground: Vec<String>,
    data: CpsData,
}

impl Cps {
    /// Builds a CPS as the ε → 0⁺ limit of fully supported weights.
    pub fn from_perturbation(ground: Vec<String>, weights: Vec<Poly>) -> Result<Cps, CpsError> {
        assert_eq!(ground.len(), weights.len(), "one weight per atom");
        for (i, w) in weights.iter().enumerate() {
            if !w.eventually_positive() {
                return Err(CpsError::NotFullySupported(i));
            }
        }
        Ok(Cps {
            ground,
            data: CpsData::Perturbation(weights),
        })
    }

    /// Builds a CPS from explicit conditional tables: for each stored
    /// conditioning event, one conditional weight per atom of the ground
    /// set.
    pub fn from_tables(ground: Vec<String>, tables: BTreeMap<Vec<usize>, Vec<Rat>>) -> Cps {
        Cps {
            ground,
            data: CpsData::Tables(tables),
        }
    }

    /// β({atom} | event).
    pub fn belief(&self, atom: usize, event: &[usize]) -> Result<Rat, CpsError> {
        if event.is_empty() {
            return Err(CpsError::EmptyConditioning);
        }
        match &self.data {
            CpsData::Perturbation(weights) => {
                if !event.contains(&atom) {
                    return Ok(Rat::zero());
                }
                let mut den = Poly::zero();
                for &x in event {
                    den = den.add(&weights[x]);
                }
                limit_ratio(&weights[atom], &den).ok_or(CpsError::DivergingLimit {
                    atom,
                    event: event.to_vec(),
                })
            }
            CpsData::Tables(tables) => {
                let row = tables
                    .get(event)
                    .ok_or_else(|| CpsError::MissingConditional(event.to_vec()))?;
                Ok(row[atom].clone())
            }
        }
    }

    /// β(X | event) by atomwise additivity.
    pub fn event_belief(&self, xs: &[usize], event: &[usize]) -> Result<Rat, CpsError> {
        let mut total = Rat::zero();
        for &x in xs {
            total = total + self.belief(x, event)?;
        }
        Ok(total)
    }

    /// Stored conditioning events (table form) or `None` (perturbation).
    pub fn stored_events(&self) -> Option<Vec<Vec<usize>>> {
        match &self.data {
            CpsData::Perturbation(_) => None,
            CpsData::Tables(tables) => Some(tables.keys().cloned().collect()),
        }
    }
}

/// One violated CPS requirement on a concrete triple of events.
#[derive(Debug, Clone)]
pub struct CpsViolation {
    pub description: String,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
}

/// Checks the CPS properties exactly over a family of conditioning events:
/// every stored event satisfies normalization and support, and every nested
/// pair satisfies the chain rule atom by atom. Returns all violations.
pub fn cps_check(cps: &Cps, events: &[Vec<usize>]) -> Vec<CpsViolation> {
    let mut violations = Vec::new();
    let mut family: Vec<Vec<usize>> = events.to_vec();
    if let Some(stored) = cps.stored_events() {
        for e in stored {
            if !family.contains(&e) {
                family.push(e);
            }
        }
    }
    for z in &family {
        if z.is_empty() {
            violations.push(CpsViolation {
                description: "empty conditioning event".into(),
                x: Vec::new(),
                y: Vec::new(),
                z: z.clone(),
            });
            continue;
        }
        // Normalization: β(Z|Z) = 1, via atom additivity; support and
        // nonnegativity atom by atom.
        let mut sum = Rat::zero();
        for atom in 0..cps.ground.len() {
            match cps.belief(atom, z) {
                Err(e) => violations.push(CpsViolation {
                    description: format!("belief undefined: {e}"),
                    x: vec![atom],
                    y: Vec::new(),
                    z: z.clone(),
                }),
                Ok(b) => {
                    if b.is_negative() {
                        violations.push(CpsViolation {
                            description: format!("negative belief {}", format_rat(&b)),
                            x: vec![atom],
                            y: Vec::new(),
                            z: z.clone(),
                        });
                    }
                    if !z.contains(&atom) && !b.is_zero() {
                        violations.push(CpsViolation {
                            description: "positive mass outside the conditioning event".into(),
                            x: vec![atom],
                            y: Vec::new(),
                            z: z.clone(),
                        });
                    }
                    if z.contains(&atom) {
                        sum = sum + b;
                    }
                }
            }
        }
        if sum != Rat::one() {
            violations.push(CpsViolation {
                description: format!("event mass {} given itself, not 1", format_rat(&sum)),
                x: z.clone(),
                y: Vec::new(),
                z: z.clone(),
            });
        }
    }
    // Chain rule on nested pairs: for Y ⊆ Z and atoms x ∈ Y,
    // β({x}|Z) = β({x}|Y)·β(Y|Z).
    for z in &family {
        for y in &family {
            if y.is_empty() || y == z || !y.iter().all(|a| z.contains(a)) {
                continue;
            }
            let Ok(y_given_z) = cps.event_belief(y, z) else {
                continue;
            };
            for &x in y {
                let (Ok(x_given_z), Ok(x_given_y)) = (cps.belief(x, z), cps.belief(x, y)) else {
                    continue;
                };
                if x_given_z != &x_given_y * &y_given_z {
                    violations.push(CpsViolation {
                        description: format!(
                            "chain rule fails: {} != {} * {}",
                            format_rat(&x_given_z),
                            format_rat(&x_given_y),
                            format_rat(&y_given_z)
                        ),
                        x: vec![x],
                        y: y.clone(),
                        z: z.clone(),
                    });
                }
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn ground(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn fully_supported_distribution_is_clean() {
        // Constant weights 1/4 each: conditionals are ordinary Bayes.
        let weights = vec![Poly::constant(ratio(1, 4)); 4];
        let cps = Cps::from_perturbation(ground(4), weights).unwrap();
        let events = vec![vec![0, 1, 2, 3], vec![0, 1], vec![0]];
        assert!(cps_check(&cps, &events).is_empty());
        assert_eq!(cps.belief(0, &[0, 1]).unwrap(), ratio(1, 2));
    }

    #[test]
    fn zero_probability_conditioning_still_defined() {
        // Atom 2 and 3 have vanishing weight ε and ε²: conditional on
        // {2, 3} the belief concentrates on atom 2.
        let weights = vec![
            Poly::constant(ratio(1, 2)),
            Poly::constant(ratio(1, 2)),
            Poly::term(rat(1), 1),
            Poly::term(rat(1), 2),
        ];
        let cps = Cps::from_perturbation(ground(4), weights).unwrap();
        assert_eq!(cps.belief(2, &[2, 3]).unwrap(), rat(1));
        assert_eq!(cps.belief(3, &[2, 3]).unwrap(), rat(0));
        assert!(cps_check(&cps, &[vec![0, 1, 2, 3], vec![2, 3], vec![3]]).is_empty());
    }

    #[test]
    fn broken_chain_rule_is_listed() {
        // Tables with an inconsistent nested triple.
        let mut tables = BTreeMap::new();
        tables.insert(vec![0, 1, 2], vec![ratio(1, 2), ratio(1, 4), ratio(1, 4)]);
        // Chain rule would need β(0|{0,1}) = (1/2)/(3/4) = 2/3.
        tables.insert(vec![0, 1], vec![ratio(1, 2), ratio(1, 2), rat(0)]);
        let cps = Cps::from_tables(ground(3), tables);
        let violations = cps_check(&cps, &[]);
        assert!(violations
            .iter()
            .any(|v| v.description.contains("chain rule")));
    }

    #[test]
    fn unsupported_perturbation_rejected() {
        let weights = vec![Poly::constant(rat(1)), Poly::zero()];
        assert!(Cps::from_perturbation(ground(2), weights).is_err());
    }
}
