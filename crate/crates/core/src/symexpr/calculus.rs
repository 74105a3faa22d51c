//! Partial differentiation, substitution and distribution.

use std::collections::BTreeMap;

use super::ast::{Expr, Node, UnaryFun, VarId};

impl Expr {
    /// Partial derivative with respect to `v`, treating every other
    /// variable as constant. The result is normalized.
    pub fn diff(&self, v: &VarId) -> Expr {
        match self.node() {
            Node::Num(_) => Expr::zero(),
            Node::Var(w) => {
                if w == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Sum(terms) => Expr::add(terms.iter().map(|t| t.diff(v))),
            Node::Product(factors) => {
                // product rule over the n-ary factor list
                let terms = factors.iter().enumerate().map(|(i, fi)| {
                    let mut parts: Vec<Expr> = Vec::with_capacity(factors.len());
                    parts.push(fi.diff(v));
                    for (j, fj) in factors.iter().enumerate() {
                        if j != i {
                            parts.push(fj.clone());
                        }
                    }
                    Expr::mul(parts)
                });
                Expr::add(terms)
            }
            Node::Pow(base, exp) => Expr::mul([
                Expr::int(i64::from(*exp)),
                base.powi(exp - 1),
                base.diff(v),
            ]),
            Node::Fun(tag, arg) => {
                let du = arg.diff(v);
                let outer = match tag {
                    UnaryFun::Sin => Expr::fun(UnaryFun::Cos, arg.clone()),
                    UnaryFun::Cos => Expr::fun(UnaryFun::Sin, arg.clone()).neg(),
                    UnaryFun::Exp => Expr::fun(UnaryFun::Exp, arg.clone()),
                    UnaryFun::Log => arg.powi(-1),
                    UnaryFun::Sqrt => Expr::mul([
                        Expr::rational(1, 2),
                        Expr::fun(UnaryFun::Sqrt, arg.clone()).powi(-1),
                    ]),
                };
                Expr::mul([outer, du])
            }
        }
    }

    /// Simultaneous substitution of whole variables by expressions.
    pub fn substitute(&self, map: &BTreeMap<VarId, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        match self.node() {
            Node::Num(_) => self.clone(),
            Node::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Node::Sum(terms) => Expr::add(terms.iter().map(|t| t.substitute(map))),
            Node::Product(factors) => Expr::mul(factors.iter().map(|f| f.substitute(map))),
            Node::Pow(base, exp) => base.substitute(map).powi(*exp),
            Node::Fun(tag, arg) => Expr::fun(*tag, arg.substitute(map)),
        }
    }

    /// Distributes products over sums and multiplies out positive integer
    /// powers of sums. Combined with normalization this cancels every
    /// polynomial identity to the literal `0`, which is the symbolic-zero
    /// decision procedure used by the residual checks.
    pub fn expand(&self) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Var(_) => self.clone(),
            Node::Fun(tag, arg) => Expr::fun(*tag, arg.expand()),
            Node::Sum(terms) => Expr::add(terms.iter().map(|t| t.expand())),
            Node::Pow(base, exp) => {
                let base = base.expand();
                if *exp >= 2 {
                    if let Node::Sum(terms) = base.node() {
                        let mut acc = vec![Expr::one()];
                        for _ in 0..*exp {
                            acc = distribute(&acc, terms);
                        }
                        return Expr::add(acc);
                    }
                }
                base.powi(*exp)
            }
            Node::Product(factors) => {
                let mut acc = vec![Expr::one()];
                for factor in factors {
                    let factor = factor.expand();
                    match factor.node() {
                        Node::Sum(terms) => acc = distribute(&acc, terms),
                        _ => {
                            for slot in &mut acc {
                                *slot = Expr::mul2(slot.clone(), factor.clone());
                            }
                        }
                    }
                }
                Expr::add(acc)
            }
        }
    }

    /// True when the expression expands to the literal zero. Sound but
    /// incomplete: a `true` is a proof, a `false` may still be zero through
    /// non-polynomial identities.
    pub fn is_symbolically_zero(&self) -> bool {
        self.expand().is_zero()
    }
}

fn distribute(left: &[Expr], right: &[Expr]) -> Vec<Expr> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in left {
        for r in right {
            out.push(Expr::mul2(l.clone(), r.clone()));
        }
    }
    out
}
