//! Expression trees over jet coordinates, momenta and named parameters.
//!
//! Every public constructor returns a *normalized* expression: sums and
//! products are flattened, rational constants are folded exactly, additive
//! and multiplicative identities are removed, like terms and like factors
//! are collected, and children sit in a fixed total order. Structural
//! equality on normalized trees is therefore a sound (incomplete) test for
//! mathematical equality, and it is the equality used throughout the crate.
//!
//! Constants are exact rationals, so coefficients such as `1/2` or `(-1)^k`
//! survive arbitrarily long derivations without rounding; floating point
//! enters only at evaluation time.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

/// A symbol: jet coordinate `q<order>_<coord>`, momentum `p<order>_<coord>`,
/// or a named scalar parameter.
///
/// Jet and momentum variables with equal indices are distinct symbols.
/// The derived ordering (jets, then momenta, then parameters; index-major
/// within each kind) is the canonical coordinate order used everywhere.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarId {
    /// `q_i^A`: the i-th time derivative of configuration coordinate A (A >= 1).
    Jet { order: u32, coord: u32 },
    /// `p_A^i`: the momentum conjugate to jet level i of coordinate A.
    Momentum { order: u32, coord: u32 },
    /// A named constant such as `mu` or `rho`.
    Param(String),
}

impl VarId {
    pub fn jet(order: u32, coord: u32) -> Self {
        VarId::Jet { order, coord }
    }

    pub fn momentum(order: u32, coord: u32) -> Self {
        VarId::Momentum { order, coord }
    }

    pub fn param(name: impl Into<String>) -> Self {
        VarId::Param(name.into())
    }

    pub fn is_momentum(&self) -> bool {
        matches!(self, VarId::Momentum { .. })
    }

    pub fn is_jet(&self) -> bool {
        matches!(self, VarId::Jet { .. })
    }

    pub fn is_param(&self) -> bool {
        matches!(self, VarId::Param(_))
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::Jet { order, coord } => write!(f, "q{order}_{coord}"),
            VarId::Momentum { order, coord } => write!(f, "p{order}_{coord}"),
            VarId::Param(name) => f.write_str(name),
        }
    }
}

/// The supported elementary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnaryFun {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryFun {
    pub const ALL: [UnaryFun; 5] = [
        UnaryFun::Sin,
        UnaryFun::Cos,
        UnaryFun::Exp,
        UnaryFun::Log,
        UnaryFun::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryFun::Sin => "sin",
            UnaryFun::Cos => "cos",
            UnaryFun::Exp => "exp",
            UnaryFun::Log => "log",
            UnaryFun::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) enum Node {
    Num(BigRational),
    Var(VarId),
    /// >= 2 children, none of them a `Sum`, at most one constant, no two
    /// children sharing a coefficient-free core, sorted.
    Sum(Vec<Expr>),
    /// >= 2 children, none a `Product`, at most one leading constant
    /// (never 0 or 1), no two children sharing a power base, sorted.
    Product(Vec<Expr>),
    /// Exponent never 0 or 1; base never a constant (except `0^n` with
    /// n < 0, which is kept so evaluation can report the division by
    /// zero), never a product, never a power.
    Pow(Expr, i32),
    Fun(UnaryFun, Expr),
}

/// An immutable, normalized symbolic expression.
///
/// Cheap to clone (shared subtrees) and safe to send across threads.
#[derive(Clone, PartialEq, Eq)]
pub struct Expr(Arc<Node>);

fn kind_rank(node: &Node) -> u8 {
    match node {
        Node::Num(_) => 0,
        Node::Var(_) => 1,
        Node::Fun(..) => 2,
        Node::Pow(..) => 3,
        Node::Product(_) => 4,
        Node::Sum(_) => 5,
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        kind_rank(a).cmp(&kind_rank(b)).then_with(|| match (a, b) {
            (Node::Num(x), Node::Num(y)) => x.cmp(y),
            (Node::Var(x), Node::Var(y)) => x.cmp(y),
            (Node::Fun(f, x), Node::Fun(g, y)) => f.cmp(g).then_with(|| x.cmp(y)),
            (Node::Pow(x, n), Node::Pow(y, m)) => x.cmp(y).then_with(|| n.cmp(m)),
            (Node::Product(xs), Node::Product(ys)) | (Node::Sum(xs), Node::Sum(ys)) => xs.cmp(ys),
            _ => unreachable!("equal kind ranks imply equal node kinds"),
        })
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0
    }

    pub fn zero() -> Self {
        Expr::num(BigRational::zero())
    }

    pub fn one() -> Self {
        Expr::num(BigRational::one())
    }

    /// Exact rational constant.
    pub fn num(value: BigRational) -> Self {
        Expr::new(Node::Num(value))
    }

    pub fn int(value: i64) -> Self {
        Expr::num(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn rational(numer: i64, denom: i64) -> Self {
        Expr::num(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    /// Exact rational equal to the given binary floating-point value.
    pub fn from_f64(value: f64) -> Option<Self> {
        BigRational::from_float(value).map(Expr::num)
    }

    pub fn var(v: VarId) -> Self {
        Expr::new(Node::Var(v))
    }

    pub fn jet(order: u32, coord: u32) -> Self {
        Expr::var(VarId::jet(order, coord))
    }

    pub fn momentum(order: u32, coord: u32) -> Self {
        Expr::var(VarId::momentum(order, coord))
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expr::var(VarId::param(name))
    }

    pub fn is_num(&self) -> bool {
        matches!(self.node(), Node::Num(_))
    }

    /// True exactly for the literal constant 0.
    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Num(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Num(c) if c.is_one())
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Num(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&VarId> {
        match self.node() {
            Node::Var(v) => Some(v),
            _ => None,
        }
    }

    /// n-ary sum. Flattens nested sums, folds constants and collects
    /// like terms, so `q + q` becomes `2*q` and `x - x` becomes `0`.
    pub fn add(terms: impl IntoIterator<Item = Expr>) -> Self {
        let mut constant = BigRational::zero();
        // core term -> accumulated rational coefficient
        let mut buckets: BTreeMap<Expr, BigRational> = BTreeMap::new();
        let mut pending: Vec<Expr> = terms.into_iter().collect();
        pending.reverse();
        while let Some(t) = pending.pop() {
            match t.node() {
                Node::Sum(children) => {
                    for c in children.iter().rev() {
                        pending.push(c.clone());
                    }
                }
                Node::Num(c) => constant += c,
                Node::Product(children) => {
                    if let Node::Num(c) = children[0].node() {
                        let rest = &children[1..];
                        let core = if rest.len() == 1 {
                            rest[0].clone()
                        } else {
                            Expr::new(Node::Product(rest.to_vec()))
                        };
                        *buckets.entry(core).or_insert_with(BigRational::zero) += c;
                    } else {
                        *buckets.entry(t.clone()).or_insert_with(BigRational::zero) +=
                            BigRational::one();
                    }
                }
                _ => {
                    *buckets.entry(t.clone()).or_insert_with(BigRational::zero) +=
                        BigRational::one();
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(buckets.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        for (core, coeff) in buckets {
            if coeff.is_zero() {
                continue;
            }
            if coeff.is_one() {
                out.push(core);
            } else {
                out.push(Expr::mul([Expr::num(coeff), core]));
            }
        }
        out.sort();
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::new(Node::Sum(out)),
        }
    }

    pub fn add2(a: Expr, b: Expr) -> Self {
        Expr::add([a, b])
    }

    /// n-ary product. Flattens, folds the rational coefficient and merges
    /// equal bases by adding exponents, so `q * q` becomes `q^2` and
    /// `q * q^-1` becomes `1`. A zero factor collapses the whole product.
    pub fn mul(factors: impl IntoIterator<Item = Expr>) -> Self {
        let mut coeff = BigRational::one();
        // power base -> accumulated exponent
        let mut bases: BTreeMap<Expr, i64> = BTreeMap::new();
        let mut pending: Vec<Expr> = factors.into_iter().collect();
        pending.reverse();
        while let Some(fct) = pending.pop() {
            match fct.node() {
                Node::Product(children) => {
                    for c in children.iter().rev() {
                        pending.push(c.clone());
                    }
                }
                Node::Num(c) => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= c;
                }
                Node::Pow(base, exp) => {
                    *bases.entry(base.clone()).or_insert(0) += i64::from(*exp);
                }
                _ => {
                    *bases.entry(fct.clone()).or_insert(0) += 1;
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(bases.len() + 1);
        for (base, exp) in bases {
            if exp == 0 {
                continue;
            }
            let exp = i32::try_from(exp).expect("power exponent exceeds i32");
            match base.powi(exp).into_parts() {
                Node::Num(c) => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    coeff *= c;
                }
                node => out.push(Expr::new(node)),
            }
        }
        if out.is_empty() {
            return Expr::num(coeff);
        }
        // a rational coefficient on a lone sum distributes over its terms,
        // so negated Lagrangians and halved sums flatten; products with
        // further factors keep the coefficient (expansion stays explicit)
        if out.len() == 1 && !coeff.is_one() {
            if let Node::Sum(terms) = out[0].node() {
                let coeff = Expr::num(coeff);
                let scaled: Vec<Expr> = terms
                    .iter()
                    .map(|t| Expr::mul2(coeff.clone(), t.clone()))
                    .collect();
                return Expr::add(scaled);
            }
        }
        if !coeff.is_one() {
            out.push(Expr::num(coeff));
        }
        out.sort();
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Expr::new(Node::Product(out))
        }
    }

    pub fn mul2(a: Expr, b: Expr) -> Self {
        Expr::mul([a, b])
    }

    pub fn neg(self) -> Self {
        Expr::mul([Expr::int(-1), self])
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::add([a, b.neg()])
    }

    /// Quotient, normalized as `a * b^-1`.
    pub fn div(a: Expr, b: Expr) -> Self {
        Expr::mul([a, b.powi(-1)])
    }

    /// Integer power. `x^0` is folded to 1, `x^1` to `x`; constant bases
    /// fold exactly, nested powers multiply exponents, and a power of a
    /// product distributes over its factors.
    pub fn powi(&self, exp: i32) -> Self {
        if exp == 1 {
            return self.clone();
        }
        match self.node() {
            Node::Num(c) => {
                if c.is_zero() && exp < 0 {
                    // kept unevaluated so the division by zero surfaces at
                    // eval time; every negative power of zero is the same
                    // undefined value, folded to the single exponent -1
                    return Expr::new(Node::Pow(self.clone(), -1));
                }
                if exp == 0 {
                    return Expr::one();
                }
                Expr::num(num::pow::Pow::pow(c, exp))
            }
            _ if exp == 0 => Expr::one(),
            Node::Pow(base, inner) => {
                let combined = inner.checked_mul(exp).expect("power exponent exceeds i32");
                base.powi(combined)
            }
            Node::Product(children) => Expr::mul(children.iter().map(|c| c.powi(exp))),
            _ => Expr::new(Node::Pow(self.clone(), exp)),
        }
    }

    /// Elementary function application, with exact folding of the handful
    /// of special values (`sin 0`, `cos 0`, `exp 0`, `log 1`, square roots
    /// of perfect-square rationals).
    pub fn fun(tag: UnaryFun, arg: Expr) -> Self {
        if let Node::Num(c) = arg.node() {
            match tag {
                UnaryFun::Sin if c.is_zero() => return Expr::zero(),
                UnaryFun::Cos if c.is_zero() => return Expr::one(),
                UnaryFun::Exp if c.is_zero() => return Expr::one(),
                UnaryFun::Log if c.is_one() => return Expr::zero(),
                UnaryFun::Sqrt if !c.is_negative() => {
                    if let Some(root) = exact_sqrt(c) {
                        return Expr::num(root);
                    }
                }
                _ => {}
            }
        }
        Expr::new(Node::Fun(tag, arg))
    }

    pub fn sqrt(arg: Expr) -> Self {
        Expr::fun(UnaryFun::Sqrt, arg)
    }

    fn into_parts(self) -> Node {
        match Arc::try_unwrap(self.0) {
            Ok(node) => node,
            Err(shared) => match &*shared {
                Node::Num(c) => Node::Num(c.clone()),
                Node::Var(v) => Node::Var(v.clone()),
                Node::Sum(ts) => Node::Sum(ts.clone()),
                Node::Product(fs) => Node::Product(fs.clone()),
                Node::Pow(b, n) => Node::Pow(b.clone(), *n),
                Node::Fun(t, a) => Node::Fun(*t, a.clone()),
            },
        }
    }

    /// All distinct variables occurring in the expression.
    pub fn variables(&self) -> Vec<VarId> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_variables(&mut out);
        out.into_iter().collect()
    }

    pub(crate) fn collect_variables(&self, out: &mut std::collections::BTreeSet<VarId>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Var(v) => {
                out.insert(v.clone());
            }
            Node::Sum(children) | Node::Product(children) => {
                for c in children {
                    c.collect_variables(out);
                }
            }
            Node::Pow(base, _) => base.collect_variables(out),
            Node::Fun(_, arg) => arg.collect_variables(out),
        }
    }

    /// Re-normalizes the expression. Already a no-op for anything built
    /// through the public constructors; kept as the explicit entry point
    /// for the normal-form contract (idempotent, evaluation-preserving).
    pub fn simplify(&self) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Var(_) => self.clone(),
            Node::Sum(ts) => Expr::add(ts.iter().map(|t| t.simplify())),
            Node::Product(fs) => Expr::mul(fs.iter().map(|f| f.simplify())),
            Node::Pow(b, n) => b.simplify().powi(*n),
            Node::Fun(t, a) => Expr::fun(*t, a.simplify()),
        }
    }
}

/// Exact square root of a non-negative rational, when both numerator and
/// denominator are perfect squares.
fn exact_sqrt(c: &BigRational) -> Option<BigRational> {
    let num_root = c.numer().sqrt();
    let den_root = c.denom().sqrt();
    if &(&num_root * &num_root) == c.numer() && &(&den_root * &den_root) == c.denom() {
        Some(BigRational::new(num_root, den_root))
    } else {
        None
    }
}
