//! Canonical text form for expressions.
//!
//! Printing is the inverse of parsing on normalized trees: for every
//! normalized `e`, `parse(print(e))` is structurally equal to `e`.
//! Negative-exponent factors are rendered as division chains
//! (`-rho/mu`, `1/mu^2`), rational constants as `p/q`, never as decimals.

use std::fmt;

use num::rational::BigRational;
use num::{One, Signed};

use super::ast::{Expr, Node};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e.node() {
        Node::Sum(terms) => {
            for (i, term) in terms.iter().enumerate() {
                if i == 0 {
                    write_term(f, term)?;
                } else if let Some(positive) = negated_if_negative(term) {
                    f.write_str(" - ")?;
                    write_term(f, &positive)?;
                } else {
                    f.write_str(" + ")?;
                    write_term(f, term)?;
                }
            }
            Ok(())
        }
        _ => write_term(f, e),
    }
}

/// Positive counterpart of a term whose leading rational is negative.
fn negated_if_negative(e: &Expr) -> Option<Expr> {
    match e.node() {
        Node::Num(c) if c.is_negative() => Some(Expr::num(-c)),
        Node::Product(children) => match children[0].node() {
            Node::Num(c) if c.is_negative() => Some(e.clone().neg()),
            _ => None,
        },
        _ => None,
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e.node() {
        Node::Num(c) => write_rational(f, c),
        Node::Var(v) => write!(f, "{v}"),
        Node::Fun(tag, arg) => write!(f, "{}({})", tag.name(), arg),
        Node::Pow(base, exp) => write_power(f, base, *exp),
        Node::Product(children) => write_product(f, children),
        Node::Sum(_) => write_expr(f, e),
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, c: &BigRational) -> fmt::Result {
    if c.denom().is_one() {
        write!(f, "{}", c.numer())
    } else {
        write!(f, "{}/{}", c.numer(), c.denom())
    }
}

fn write_power(f: &mut fmt::Formatter<'_>, base: &Expr, exp: i32) -> fmt::Result {
    if exp < 0 {
        f.write_str("1/")?;
        write_atom(f, base)?;
        if exp != -1 {
            write!(f, "^{}", -i64::from(exp))?;
        }
        Ok(())
    } else {
        write_atom(f, base)?;
        write!(f, "^{exp}")
    }
}

/// Base or factor position: sums need parentheses, everything else is
/// already atomic with respect to `*`, `/` and `^`.
fn write_atom(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e.node() {
        Node::Sum(_) => {
            f.write_str("(")?;
            write_expr(f, e)?;
            f.write_str(")")
        }
        Node::Pow(base, exp) if *exp > 0 => {
            write_atom(f, base)?;
            write!(f, "^{exp}")
        }
        Node::Pow(..) | Node::Product(_) => {
            // never nested inside a canonical product
            f.write_str("(")?;
            write_expr(f, e)?;
            f.write_str(")")
        }
        _ => write_term(f, e),
    }
}

fn write_product(f: &mut fmt::Formatter<'_>, children: &[Expr]) -> fmt::Result {
    let mut coeff = BigRational::one();
    let mut numerator: Vec<&Expr> = Vec::new();
    // (base, positive exponent) pairs rendered as a division chain
    let mut denominator: Vec<(&Expr, i64)> = Vec::new();
    for child in children {
        match child.node() {
            Node::Num(c) => coeff = c.clone(),
            Node::Pow(base, exp) if *exp < 0 => denominator.push((base, -i64::from(*exp))),
            _ => numerator.push(child),
        }
    }
    let negative = coeff.is_negative();
    if negative {
        f.write_str("-")?;
        coeff = -coeff;
    }
    let mut wrote = false;
    // a bare `-` in front of a parenthesized sum would reparse as a
    // negation of that sum alone; spell the coefficient out instead
    let leading_sum = matches!(numerator.first(), Some(e) if matches!(e.node(), Node::Sum(_)));
    if !coeff.is_one() || numerator.is_empty() || (negative && leading_sum) {
        write_rational(f, &coeff)?;
        wrote = true;
    }
    for factor in numerator {
        if wrote {
            f.write_str("*")?;
        }
        write_atom(f, factor)?;
        wrote = true;
    }
    for (base, exp) in denominator {
        f.write_str("/")?;
        write_atom(f, base)?;
        if exp != 1 {
            write!(f, "^{exp}")?;
        }
    }
    Ok(())
}
