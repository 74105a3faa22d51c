//! Floating-point evaluation and the randomized numeric-equivalence oracle.

use std::collections::BTreeMap;

use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

use super::ast::{Expr, Node, UnaryFun, VarId};

/// Variable assignment used for evaluation.
#[derive(Clone, Debug, Default)]
pub struct Bindings<T> {
    values: BTreeMap<VarId, T>,
}

impl<T: Scalar> Bindings<T> {
    pub fn new() -> Self {
        Bindings {
            values: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, var: VarId, value: T) -> &mut Self {
        self.values.insert(var, value);
        self
    }

    pub fn get(&self, var: &VarId) -> Option<T> {
        self.values.get(var).copied()
    }

    pub fn set_params(&mut self, params: &BTreeMap<String, f64>) -> &mut Self {
        for (name, value) in params {
            self.values
                .insert(VarId::param(name.clone()), T::from_f64_lossy(*value));
        }
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &T)> {
        self.values.iter()
    }
}

impl<T: Scalar> FromIterator<(VarId, T)> for Bindings<T> {
    fn from_iter<I: IntoIterator<Item = (VarId, T)>>(iter: I) -> Self {
        Bindings {
            values: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable `{0}` has no assigned value")]
    Unbound(VarId),
    #[error("domain error ({reason}) in `{subexpr}`")]
    Domain { reason: String, subexpr: String },
}

impl Expr {
    /// IEEE evaluation at the given assignment. Every variable occurring in
    /// the expression must be bound; `log` of a non-positive value, `sqrt`
    /// of a negative value and division by zero are reported together with
    /// the offending subexpression.
    pub fn eval<T: Scalar>(&self, bindings: &Bindings<T>) -> Result<T, EvalError> {
        match self.node() {
            Node::Num(c) => Ok(T::from_f64_lossy(c.to_f64().unwrap_or(f64::NAN))),
            Node::Var(v) => bindings.get(v).ok_or_else(|| EvalError::Unbound(v.clone())),
            Node::Sum(terms) => {
                let mut acc = T::zero();
                for t in terms {
                    acc = acc + t.eval(bindings)?;
                }
                Ok(acc)
            }
            Node::Product(factors) => {
                let mut acc = T::one();
                for f in factors {
                    acc = acc * f.eval(bindings)?;
                }
                Ok(acc)
            }
            Node::Pow(base, exp) => {
                let b = base.eval(bindings)?;
                if *exp < 0 && b == T::zero() {
                    return Err(EvalError::Domain {
                        reason: "division by zero".into(),
                        subexpr: self.to_string(),
                    });
                }
                Ok(b.powi(*exp))
            }
            Node::Fun(tag, arg) => {
                let x = arg.eval(bindings)?;
                match tag {
                    UnaryFun::Sin => Ok(x.sin()),
                    UnaryFun::Cos => Ok(x.cos()),
                    UnaryFun::Exp => Ok(x.exp()),
                    UnaryFun::Log => {
                        if x <= T::zero() {
                            Err(EvalError::Domain {
                                reason: "log of a non-positive value".into(),
                                subexpr: self.to_string(),
                            })
                        } else {
                            Ok(x.ln())
                        }
                    }
                    UnaryFun::Sqrt => {
                        if x < T::zero() {
                            Err(EvalError::Domain {
                                reason: "sqrt of a negative value".into(),
                                subexpr: self.to_string(),
                            })
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                }
            }
        }
    }
}

/// Configuration for [`equivalent_numeric`].
#[derive(Clone, Debug)]
pub struct NumericCheck {
    pub samples: usize,
    /// Relative tolerance: points pass when |a-b| <= tol * (1 + |a| + |b|).
    pub tol: f64,
    pub seed: u64,
    /// Sampling interval for every free variable.
    pub range: (f64, f64),
}

impl Default for NumericCheck {
    fn default() -> Self {
        NumericCheck {
            samples: 100,
            tol: 1e-10,
            seed: 0,
            range: (-2.0, 2.0),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EquivalenceError {
    #[error("all {0} sampled points hit evaluation domain errors")]
    AllSamplesInvalid(usize),
}

/// Randomized equality oracle: samples the union of both variable sets
/// reproducibly from the seed and compares values, skipping points where
/// either side hits a domain error or a non-finite value.
pub fn equivalent_numeric(
    a: &Expr,
    b: &Expr,
    check: &NumericCheck,
) -> Result<bool, EquivalenceError> {
    assert!(check.samples >= 1, "at least one sample required");
    let mut vars = std::collections::BTreeSet::new();
    a.collect_variables(&mut vars);
    b.collect_variables(&mut vars);
    let vars: Vec<VarId> = vars.into_iter().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let mut valid = 0usize;
    for _ in 0..check.samples {
        let bindings: Bindings<f64> = vars
            .iter()
            .map(|v| (v.clone(), rng.gen_range(check.range.0..=check.range.1)))
            .collect();
        let (va, vb) = match (a.eval(&bindings), b.eval(&bindings)) {
            (Ok(x), Ok(y)) => (x, y),
            _ => continue,
        };
        if !va.is_finite() || !vb.is_finite() {
            continue;
        }
        valid += 1;
        if (va - vb).abs() > check.tol * (1.0 + va.abs() + vb.abs()) {
            return Ok(false);
        }
    }
    if valid == 0 {
        return Err(EquivalenceError::AllSamplesInvalid(check.samples));
    }
    Ok(true)
}
