//! Derivation of the unified-formalism objects from a regular Lagrangian.
//!
//! Given `L(q_0..q_k)` the module produces, in order: the Hessian
//! `W_AB = d^2 L / dq_k^A dq_k^B` with a regularity verdict, the
//! Euler-Lagrange expressions, the top-order forcing functions (the
//! coefficients of the dynamical field on the highest jet level), the
//! Legendre-Ostrogradsky momenta, the Hamiltonian `H = C - L` built from
//! the canonical coupling `C`, and the dynamical vector field on the
//! unified space. The tangency residuals are the module's strongest
//! self-check: the field must be tangent to the graph of the Legendre map,
//! so applying it to each momentum constraint and restricting back to the
//! graph has to expand to the literal zero.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::jetspace::{total_derivative_n, Atlas, JetError, Point};
use crate::linalg;
use crate::scalar::Scalar;
use crate::symexpr::{
    det_symbolic, solve_symbolic, Bindings, EvalError, Expr, LinearSolveError, VarId,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid Lagrangian: {0}")]
    InvalidLagrangian(String),
    #[error("singular Hessian: {0}")]
    SingularHessian(String),
    #[error("symbolic solve disabled for {dim} coordinates (threshold {threshold}); raise `symbolic_solve_max_dim` for a symbolic field")]
    SymbolicSolveDisabled { dim: usize, threshold: usize },
    #[error("tangency self-check failed for constraint on `{constraint}`: residual `{residual}`")]
    TangencyViolation { constraint: VarId, residual: Expr },
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Tunables for the derivation.
#[derive(Clone, Debug)]
pub struct DeriveOptions {
    /// Largest coordinate count solved symbolically; beyond it the
    /// top-order forcing falls back to per-point linear solves.
    pub symbolic_solve_max_dim: usize,
    /// Determinant magnitude below which a sampled Hessian counts as
    /// singular.
    pub regularity_tol: f64,
    /// Number of sample points for numeric regularity checks.
    pub regularity_samples: usize,
    /// Coordinate sampling interval for those checks.
    pub sample_range: (f64, f64),
    pub seed: u64,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions {
            symbolic_solve_max_dim: 4,
            regularity_tol: 1e-10,
            regularity_samples: 16,
            sample_range: (-1.0, 1.0),
            seed: 0,
        }
    }
}

/// How regularity of the Hessian was established.
#[derive(Clone, Debug, PartialEq)]
pub enum Regularity {
    /// The determinant reduces to a non-zero constant once parameter
    /// values are substituted.
    Constant { det: f64 },
    /// The determinant depends on coordinates; all sampled magnitudes
    /// exceeded the tolerance.
    Sampled { min_abs_det: f64 },
}

/// A vector field given by one component expression per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: BTreeMap<VarId, Expr>,
}

impl VectorField {
    pub fn new(components: BTreeMap<VarId, Expr>) -> Self {
        VectorField { components }
    }

    /// Coordinates the field acts on, in canonical order.
    pub fn coords(&self) -> Vec<VarId> {
        self.components.keys().cloned().collect()
    }

    pub fn component(&self, coord: &VarId) -> Option<&Expr> {
        self.components.get(coord)
    }

    pub fn components(&self) -> impl Iterator<Item = (&VarId, &Expr)> {
        self.components.iter()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Directional derivative of a function along the field.
    pub fn apply(&self, e: &Expr) -> Expr {
        Expr::add(
            self.components
                .iter()
                .map(|(coord, comp)| Expr::mul2(comp.clone(), e.diff(coord))),
        )
    }

    /// Component values at a point, in coordinate order.
    pub fn eval_at<T: Scalar>(&self, bindings: &Bindings<T>) -> Result<Vec<T>, EvalError> {
        self.components.values().map(|c| c.eval(bindings)).collect()
    }
}

/// The generalized momenta written as functions of the jets, i.e. the
/// components of the Legendre-Ostrogradsky map. Its graph is the
/// constraint submanifold the dynamics lives on.
#[derive(Clone, Debug, PartialEq)]
pub struct LegendreMap {
    components: BTreeMap<VarId, Expr>,
}

impl LegendreMap {
    /// Momentum expression for level `r`, coordinate `a`.
    pub fn component(&self, r: u32, a: u32) -> &Expr {
        &self.components[&VarId::momentum(r, a)]
    }

    pub fn components(&self) -> impl Iterator<Item = (&VarId, &Expr)> {
        self.components.iter()
    }

    /// Substitution map sending each momentum variable to its expression
    /// in the jets (restriction to the graph).
    pub fn graph_substitution(&self) -> BTreeMap<VarId, Expr> {
        self.components.clone()
    }

    /// The graph constraints `p - phat`, one per momentum coordinate.
    pub fn constraints(&self) -> Vec<(VarId, Expr)> {
        self.components
            .iter()
            .map(|(var, phat)| (var.clone(), Expr::sub(Expr::var(var.clone()), phat.clone())))
            .collect()
    }
}

/// Top-order forcing: the coefficients of the dynamical field on the
/// highest jet level, obtained by solving the affine system the
/// Euler-Lagrange expressions form in the formal order-`2k` jets.
#[derive(Clone, Debug)]
pub struct TopOrderForcing {
    symbolic: Option<Vec<Expr>>,
    /// Coefficient matrix of the formal top jets ((-1)^k times the Hessian).
    matrix: Vec<Vec<Expr>>,
    /// Euler-Lagrange expressions with the formal top jets zeroed.
    remainder: Vec<Expr>,
}

impl TopOrderForcing {
    /// Closed-form component expressions, present when the system was
    /// solved symbolically. Indexed by coordinate (`A - 1`).
    pub fn symbolic(&self) -> Option<&[Expr]> {
        self.symbolic.as_deref()
    }

    pub fn coefficient_matrix(&self) -> &[Vec<Expr>] {
        &self.matrix
    }

    /// Component values at a point: symbolic components evaluated when
    /// available, otherwise a per-point linear solve.
    pub fn eval_at<T: Scalar>(&self, bindings: &Bindings<T>) -> Result<Vec<T>, DynamicsError> {
        if let Some(exprs) = &self.symbolic {
            return exprs
                .iter()
                .map(|e| e.eval(bindings).map_err(DynamicsError::from))
                .collect();
        }
        let n = self.remainder.len();
        let mut m = Vec::with_capacity(n);
        for row in &self.matrix {
            let mut out = Vec::with_capacity(n);
            for entry in row {
                out.push(entry.eval(bindings)?);
            }
            m.push(out);
        }
        let mut rhs = Vec::with_capacity(n);
        for r in &self.remainder {
            rhs.push(-r.eval(bindings)?);
        }
        linalg::lu_solve(m, rhs)
            .map_err(|_| DynamicsError::SingularHessian("singular at evaluation point".into()))
    }
}

/// A regular higher-order Lagrangian system: atlas, Lagrangian expression
/// over `q_0..q_k`, and numeric parameter values.
#[derive(Clone, Debug)]
pub struct LagrangianSystem {
    atlas: Atlas,
    lagrangian: Expr,
    params: BTreeMap<String, f64>,
    opts: DeriveOptions,
}

impl LagrangianSystem {
    pub fn new(
        atlas: Atlas,
        lagrangian: Expr,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, DynamicsError> {
        Self::with_options(atlas, lagrangian, params, DeriveOptions::default())
    }

    pub fn with_options(
        atlas: Atlas,
        lagrangian: Expr,
        params: BTreeMap<String, f64>,
        opts: DeriveOptions,
    ) -> Result<Self, DynamicsError> {
        for v in lagrangian.variables() {
            match &v {
                VarId::Jet { order, .. } if *order > atlas.order() => {
                    return Err(DynamicsError::InvalidLagrangian(format!(
                        "`{v}` exceeds the Lagrangian order {}",
                        atlas.order()
                    )));
                }
                VarId::Jet { coord, .. } if *coord > atlas.dof() || *coord == 0 => {
                    return Err(DynamicsError::InvalidLagrangian(format!(
                        "`{v}` is outside the {}-coordinate atlas",
                        atlas.dof()
                    )));
                }
                VarId::Jet { .. } => {}
                VarId::Momentum { .. } => {
                    return Err(DynamicsError::InvalidLagrangian(format!(
                        "momentum variable `{v}` in the Lagrangian"
                    )));
                }
                VarId::Param(name) => {
                    if !params.contains_key(name) {
                        return Err(DynamicsError::InvalidLagrangian(format!(
                            "parameter `{name}` has no declared value"
                        )));
                    }
                }
            }
        }
        Ok(LagrangianSystem {
            atlas,
            lagrangian,
            params,
            opts,
        })
    }

    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }

    pub fn lagrangian(&self) -> &Expr {
        &self.lagrangian
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn options(&self) -> &DeriveOptions {
        &self.opts
    }

    /// Exact substitution map for the declared parameter values.
    pub fn param_substitution(&self) -> BTreeMap<VarId, Expr> {
        self.params
            .iter()
            .map(|(name, value)| {
                let exact =
                    Expr::from_f64(*value).expect("parameter values are finite by construction");
                (VarId::param(name.clone()), exact)
            })
            .collect()
    }

    /// Evaluation bindings at a point, with parameter values filled in.
    pub fn bindings_at<T: Scalar>(&self, point: &Point<T>) -> Bindings<T> {
        let mut bindings: Bindings<T> = point.iter().map(|(v, x)| (v.clone(), *x)).collect();
        bindings.set_params(&self.params);
        bindings
    }

    fn dl_dq(&self, order: u32, coord: u32) -> Expr {
        self.lagrangian.diff(&VarId::jet(order, coord))
    }

    /// Hessian of the Lagrangian in the top jets, entries symbolic in the
    /// parameters. Always symmetric by equality of mixed partials.
    pub fn hessian(&self) -> Vec<Vec<Expr>> {
        let k = self.atlas.order();
        let n = self.atlas.dof();
        (1..=n)
            .map(|a| {
                (1..=n)
                    .map(|b| self.dl_dq(k, a).diff(&VarId::jet(k, b)))
                    .collect()
            })
            .collect()
    }

    /// Establishes invertibility of the Hessian, substituting parameter
    /// values exactly and sampling coordinates when the determinant is not
    /// constant. Singular systems are out of scope and abort derivation.
    pub fn check_regularity(&self) -> Result<Regularity, DynamicsError> {
        let n = self.atlas.dof() as usize;
        let hessian = self.hessian();
        let params = self.param_substitution();
        if n <= self.opts.symbolic_solve_max_dim {
            let det = det_symbolic(&hessian).substitute(&params).expand();
            if det.is_zero() {
                return Err(DynamicsError::SingularHessian(
                    "determinant is identically zero".into(),
                ));
            }
            if det.variables().is_empty() {
                let value = det.eval(&Bindings::<f64>::new())?;
                if value.abs() <= self.opts.regularity_tol {
                    return Err(DynamicsError::SingularHessian(format!(
                        "determinant {value:e} below tolerance {:e}",
                        self.opts.regularity_tol
                    )));
                }
                return Ok(Regularity::Constant { det: value });
            }
            let min = self.sample_min_abs(|bindings| det.eval(bindings))?;
            return self.sampled_verdict(min);
        }
        // beyond the symbolic threshold: sampled numeric determinants
        let subbed: Vec<Vec<Expr>> = hessian
            .iter()
            .map(|row| row.iter().map(|e| e.substitute(&params)).collect())
            .collect();
        let min = self.sample_min_abs(|bindings| {
            let mut m = Vec::with_capacity(n);
            for row in &subbed {
                let mut out = Vec::with_capacity(n);
                for e in row {
                    out.push(e.eval(bindings)?);
                }
                m.push(out);
            }
            Ok(linalg::determinant(m))
        })?;
        self.sampled_verdict(min)
    }

    fn sample_min_abs(
        &self,
        f: impl Fn(&Bindings<f64>) -> Result<f64, EvalError>,
    ) -> Result<f64, DynamicsError> {
        let coords = self.atlas.jet_coords(self.atlas.order());
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let (lo, hi) = self.opts.sample_range;
        let mut min = f64::INFINITY;
        for _ in 0..self.opts.regularity_samples.max(1) {
            let bindings: Bindings<f64> = coords
                .iter()
                .map(|c| (c.clone(), rng.gen_range(lo..=hi)))
                .collect();
            min = min.min(f(&bindings)?.abs());
        }
        Ok(min)
    }

    fn sampled_verdict(&self, min_abs_det: f64) -> Result<Regularity, DynamicsError> {
        if min_abs_det <= self.opts.regularity_tol {
            Err(DynamicsError::SingularHessian(format!(
                "sampled |det| {min_abs_det:e} below tolerance {:e}",
                self.opts.regularity_tol
            )))
        } else {
            Ok(Regularity::Sampled { min_abs_det })
        }
    }

    /// Euler-Lagrange expressions
    /// `E_A = sum_{i=0..k} (-1)^i d_T^i(dL/dq_i^A)`, affine in the formal
    /// order-`2k` jets with coefficient matrix `(-1)^k` times the Hessian.
    pub fn euler_lagrange(&self) -> Result<Vec<Expr>, DynamicsError> {
        let k = self.atlas.order();
        let mut out = Vec::with_capacity(self.atlas.dof() as usize);
        for a in 1..=self.atlas.dof() {
            let mut acc = Vec::with_capacity(k as usize + 1);
            for i in 0..=k {
                let sign = if i % 2 == 0 { 1 } else { -1 };
                let derived = total_derivative_n(&self.dl_dq(i, a), i)?;
                acc.push(Expr::mul2(Expr::int(sign), derived));
            }
            out.push(Expr::add(acc).expand());
        }
        Ok(out)
    }

    /// Solves for the top-order forcing by replacing the formal `q_{2k}`
    /// jets in the Euler-Lagrange system with unknowns. Symbolic Gaussian
    /// elimination up to the configured dimension, per-point solves beyond.
    pub fn top_order_forcing(&self) -> Result<TopOrderForcing, DynamicsError> {
        self.check_regularity()?;
        let n = self.atlas.dof();
        let formal: Vec<VarId> = (1..=n)
            .map(|a| VarId::jet(2 * self.atlas.order(), a))
            .collect();
        let el = self.euler_lagrange()?;
        let zero_top: BTreeMap<VarId, Expr> =
            formal.iter().map(|v| (v.clone(), Expr::zero())).collect();
        let mut matrix = Vec::with_capacity(n as usize);
        let mut remainder = Vec::with_capacity(n as usize);
        for e in &el {
            let row: Vec<Expr> = formal.iter().map(|v| e.diff(v)).collect();
            for entry in &row {
                debug_assert!(
                    entry.variables().iter().all(|v| !formal.contains(v)),
                    "Euler-Lagrange expressions must be affine in the formal top jets"
                );
            }
            matrix.push(row);
            remainder.push(e.substitute(&zero_top));
        }
        let symbolic = if n as usize <= self.opts.symbolic_solve_max_dim {
            let rhs: Vec<Expr> = remainder.iter().map(|r| r.clone().neg()).collect();
            Some(solve_symbolic(&matrix, &rhs)?)
        } else {
            None
        };
        Ok(TopOrderForcing {
            symbolic,
            matrix,
            remainder,
        })
    }

    /// Legendre-Ostrogradsky momenta
    /// `phat_A^r = sum_{i=0..k-1-r} (-1)^i d_T^i(dL/dq_{r+1+i}^A)`.
    pub fn legendre(&self) -> Result<LegendreMap, DynamicsError> {
        let k = self.atlas.order();
        let mut components = BTreeMap::new();
        for a in 1..=self.atlas.dof() {
            for r in 0..k {
                let mut terms = Vec::new();
                for i in 0..=(k - 1 - r) {
                    let sign = if i % 2 == 0 { 1 } else { -1 };
                    let derived = total_derivative_n(&self.dl_dq(r + 1 + i, a), i)?;
                    terms.push(Expr::mul2(Expr::int(sign), derived));
                }
                components.insert(VarId::momentum(r, a), Expr::add(terms));
            }
        }
        Ok(LegendreMap { components })
    }

    /// Canonical coupling `C = sum q_{i+1}^A p_A^i` pairing jets with
    /// momenta on the unified space.
    pub fn coupling(&self) -> Expr {
        let mut terms = Vec::new();
        for a in 1..=self.atlas.dof() {
            for i in 0..self.atlas.order() {
                terms.push(Expr::mul2(Expr::jet(i + 1, a), Expr::momentum(i, a)));
            }
        }
        Expr::add(terms)
    }

    /// Hamiltonian on the unified space, `H = C - L`.
    pub fn hamiltonian(&self) -> Expr {
        Expr::sub(self.coupling(), self.lagrangian.clone())
    }

    /// Gradient of the Hamiltonian: one component per unified coordinate.
    pub fn d_hamiltonian(&self) -> BTreeMap<VarId, Expr> {
        let h = self.hamiltonian();
        self.atlas
            .unified_coords()
            .into_iter()
            .map(|c| {
                let d = h.diff(&c);
                (c, d)
            })
            .collect()
    }

    /// The dynamical vector field on the unified space: a chain on the
    /// jet block up to the top-order forcing, plus the momentum equations
    /// `pdot_A^0 = dL/dq_0^A`, `pdot_A^i = dL/dq_i^A - p_A^{i-1}`.
    pub fn dynamical_field(&self) -> Result<VectorField, DynamicsError> {
        let forcing = self.top_order_forcing()?;
        let top = forcing
            .symbolic()
            .ok_or(DynamicsError::SymbolicSolveDisabled {
                dim: self.atlas.dof() as usize,
                threshold: self.opts.symbolic_solve_max_dim,
            })?;
        let k = self.atlas.order();
        let mut components = BTreeMap::new();
        for a in 1..=self.atlas.dof() {
            for l in 0..2 * k - 1 {
                components.insert(VarId::jet(l, a), Expr::jet(l + 1, a));
            }
            components.insert(VarId::jet(2 * k - 1, a), top[(a - 1) as usize].clone());
            components.insert(VarId::momentum(0, a), self.dl_dq(0, a));
            for i in 1..k {
                components.insert(
                    VarId::momentum(i, a),
                    Expr::sub(self.dl_dq(i, a), Expr::momentum(i - 1, a)),
                );
            }
        }
        Ok(VectorField::new(components))
    }

    /// Applies the dynamical field to each graph constraint `p - phat` and
    /// restricts back to the graph. Every residual expands to zero for a
    /// regular Lagrangian; anything else flags an internal inconsistency.
    pub fn tangency_residuals(&self) -> Result<Vec<(VarId, Expr)>, DynamicsError> {
        let field = self.dynamical_field()?;
        let legendre = self.legendre()?;
        let graph = legendre.graph_substitution();
        Ok(legendre
            .constraints()
            .into_iter()
            .map(|(var, constraint)| {
                let residual = field.apply(&constraint).substitute(&graph).expand();
                (var, residual)
            })
            .collect())
    }

    /// Hard-fails on any non-zero tangency residual.
    pub fn verify_tangency(&self) -> Result<(), DynamicsError> {
        for (constraint, residual) in self.tangency_residuals()? {
            if !residual.is_zero() {
                return Err(DynamicsError::TangencyViolation {
                    constraint,
                    residual,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetspace::total_derivative;
    use crate::symexpr::parse_expr;

    fn beam() -> LagrangianSystem {
        let atlas = Atlas::new(1, 2).unwrap();
        let scope = atlas.scope(["mu", "rho"]);
        let lagrangian = parse_expr("0.5*mu*q2_1^2 + rho*q0_1", &scope).unwrap();
        let params = BTreeMap::from([("mu".to_string(), 1.0), ("rho".to_string(), 1.0)]);
        LagrangianSystem::new(atlas, lagrangian, params).unwrap()
    }

    fn free_particle() -> LagrangianSystem {
        let atlas = Atlas::new(1, 1).unwrap();
        let lagrangian = parse_expr("0.5*q1_1^2", &atlas.scope::<String>([])).unwrap();
        LagrangianSystem::new(atlas, lagrangian, BTreeMap::new()).unwrap()
    }

    fn oscillator() -> LagrangianSystem {
        let atlas = Atlas::new(1, 1).unwrap();
        let lagrangian =
            parse_expr("0.5*q1_1^2 - 0.5*q0_1^2", &atlas.scope::<String>([])).unwrap();
        LagrangianSystem::new(atlas, lagrangian, BTreeMap::new()).unwrap()
    }

    fn parse_in(sys: &LagrangianSystem, text: &str) -> Expr {
        let scope = sys.atlas().scope(sys.params().keys().cloned());
        parse_expr(text, &scope).unwrap()
    }

    #[test]
    fn beam_hessian_is_mu_and_regular() {
        let sys = beam();
        assert_eq!(sys.hessian(), vec![vec![Expr::param("mu")]]);
        assert_eq!(
            sys.check_regularity().unwrap(),
            Regularity::Constant { det: 1.0 }
        );
    }

    #[test]
    fn quadratic_velocity_hessian() {
        let sys = free_particle();
        assert_eq!(sys.hessian(), vec![vec![Expr::one()]]);
        assert!(sys.check_regularity().is_ok());
    }

    #[test]
    fn linear_lagrangian_is_singular() {
        let atlas = Atlas::new(1, 1).unwrap();
        let lagrangian = parse_expr("q1_1", &atlas.scope::<String>([])).unwrap();
        let sys = LagrangianSystem::new(atlas, lagrangian, BTreeMap::new()).unwrap();
        assert_eq!(sys.hessian(), vec![vec![Expr::zero()]]);
        assert!(matches!(
            sys.check_regularity(),
            Err(DynamicsError::SingularHessian(_))
        ));
    }

    #[test]
    fn rejects_momenta_and_overdeep_jets_in_lagrangian() {
        let atlas = Atlas::new(1, 1).unwrap();
        let bad = Expr::momentum(0, 1);
        assert!(LagrangianSystem::new(atlas, bad, BTreeMap::new()).is_err());
        let too_deep = Expr::jet(2, 1);
        assert!(LagrangianSystem::new(atlas, too_deep, BTreeMap::new()).is_err());
    }

    #[test]
    fn beam_euler_lagrange() {
        // rho + mu*q4 in the formal top jet
        let sys = beam();
        let el = sys.euler_lagrange().unwrap();
        let expected = Expr::add([
            Expr::param("rho"),
            Expr::mul([Expr::param("mu"), Expr::jet(4, 1)]),
        ]);
        assert_eq!(el, vec![expected]);
    }

    #[test]
    fn free_particle_euler_lagrange() {
        let sys = free_particle();
        assert_eq!(sys.euler_lagrange().unwrap(), vec![Expr::jet(2, 1).neg()]);
    }

    #[test]
    fn oscillator_euler_lagrange() {
        let sys = oscillator();
        let expected = Expr::add([Expr::jet(0, 1).neg(), Expr::jet(2, 1).neg()]);
        assert_eq!(sys.euler_lagrange().unwrap(), vec![expected]);
    }

    #[test]
    fn forcing_solves_the_affine_system() {
        let beam_f = beam().top_order_forcing().unwrap();
        assert_eq!(beam_f.symbolic().unwrap(), &[parse_in(&beam(), "-rho/mu")]);
        let particle_f = free_particle().top_order_forcing().unwrap();
        assert_eq!(particle_f.symbolic().unwrap(), &[Expr::zero()]);
        let osc_f = oscillator().top_order_forcing().unwrap();
        assert_eq!(osc_f.symbolic().unwrap(), &[Expr::jet(0, 1).neg()]);
    }

    #[test]
    fn forcing_substituted_back_annihilates_euler_lagrange() {
        for sys in [beam(), free_particle(), oscillator()] {
            let el = sys.euler_lagrange().unwrap();
            let forcing = sys.top_order_forcing().unwrap();
            let top = forcing.symbolic().unwrap();
            let subst: BTreeMap<VarId, Expr> = (1..=sys.atlas().dof())
                .map(|a| {
                    (
                        VarId::jet(2 * sys.atlas().order(), a),
                        top[(a - 1) as usize].clone(),
                    )
                })
                .collect();
            for e in el {
                assert!(e.substitute(&subst).is_symbolically_zero());
            }
        }
    }

    #[test]
    fn forcing_coefficient_matrix_is_signed_hessian() {
        for sys in [beam(), free_particle(), oscillator()] {
            let forcing = sys.top_order_forcing().unwrap();
            let k = sys.atlas().order();
            let sign = if k % 2 == 0 { 1 } else { -1 };
            let hessian = sys.hessian();
            for (i, row) in forcing.coefficient_matrix().iter().enumerate() {
                for (j, entry) in row.iter().enumerate() {
                    let expected = Expr::mul2(Expr::int(sign), hessian[i][j].clone()).expand();
                    assert_eq!(entry.clone().expand(), expected);
                }
            }
        }
    }

    #[test]
    fn beam_legendre_components() {
        let sys = beam();
        let legendre = sys.legendre().unwrap();
        assert_eq!(legendre.component(1, 1), &parse_in(&sys, "mu*q2_1"));
        assert_eq!(legendre.component(0, 1), &parse_in(&sys, "-mu*q3_1"));
    }

    #[test]
    fn velocity_momentum_for_first_order_systems() {
        assert_eq!(
            free_particle().legendre().unwrap().component(0, 1),
            &Expr::jet(1, 1)
        );
        assert_eq!(
            oscillator().legendre().unwrap().component(0, 1),
            &Expr::jet(1, 1)
        );
    }

    #[test]
    fn legendre_recursion_is_consistent() {
        // phat^{r-1} = dL/dq_r - d_T(phat^r)
        for sys in [beam(), free_particle(), oscillator()] {
            let legendre = sys.legendre().unwrap();
            let k = sys.atlas().order();
            for a in 1..=sys.atlas().dof() {
                for r in 1..k {
                    let lhs = legendre.component(r - 1, a).clone();
                    let rhs = Expr::sub(
                        sys.lagrangian().diff(&VarId::jet(r, a)),
                        total_derivative(legendre.component(r, a)).unwrap(),
                    );
                    assert!(Expr::sub(lhs, rhs).is_symbolically_zero());
                }
            }
        }
    }

    #[test]
    fn beam_hamiltonian_matches_coupling_minus_lagrangian() {
        let sys = beam();
        let expected = parse_in(&sys, "q1_1*p0_1 + q2_1*p1_1 - 0.5*mu*q2_1^2 - rho*q0_1");
        assert_eq!(sys.hamiltonian(), expected);
        assert_eq!(sys.coupling(), parse_in(&sys, "q1_1*p0_1 + q2_1*p1_1"));
    }

    #[test]
    fn zero_lagrangian_hamiltonian_is_the_coupling() {
        let atlas = Atlas::new(1, 2).unwrap();
        let sys = LagrangianSystem::new(atlas, Expr::zero(), BTreeMap::new()).unwrap();
        assert_eq!(sys.hamiltonian(), sys.coupling());
    }

    #[test]
    fn hamiltonian_gradient_matches_closed_form() {
        // dH components: -dL/dq_0 on q_0; p^i - dL/dq_{i+1} on q_{i+1};
        // q_{i+1} on p^i; zero above the Lagrangian order
        for sys in [beam(), free_particle(), oscillator()] {
            let k = sys.atlas().order();
            let dh = sys.d_hamiltonian();
            for a in 1..=sys.atlas().dof() {
                assert_eq!(
                    dh[&VarId::jet(0, a)],
                    sys.lagrangian().diff(&VarId::jet(0, a)).neg()
                );
                for i in 0..k {
                    let expected = Expr::sub(
                        Expr::momentum(i, a),
                        sys.lagrangian().diff(&VarId::jet(i + 1, a)),
                    );
                    assert_eq!(dh[&VarId::jet(i + 1, a)], expected);
                    assert_eq!(dh[&VarId::momentum(i, a)], Expr::jet(i + 1, a));
                }
                for j in k + 1..=2 * k - 1 {
                    assert!(dh[&VarId::jet(j, a)].is_zero());
                }
            }
        }
    }

    #[test]
    fn beam_dh_components_from_fixture() {
        let sys = beam();
        let dh = sys.d_hamiltonian();
        assert_eq!(dh[&VarId::jet(0, 1)], Expr::param("rho").neg());
        assert_eq!(dh[&VarId::jet(2, 1)], parse_in(&sys, "p1_1 - mu*q2_1"));
    }

    #[test]
    fn beam_dynamical_field_components() {
        let sys = beam();
        let field = sys.dynamical_field().unwrap();
        let expect = [
            (VarId::jet(0, 1), "q1_1"),
            (VarId::jet(1, 1), "q2_1"),
            (VarId::jet(2, 1), "q3_1"),
            (VarId::jet(3, 1), "-rho/mu"),
            (VarId::momentum(0, 1), "rho"),
            (VarId::momentum(1, 1), "-p0_1"),
        ];
        assert_eq!(field.dim(), 6);
        for (coord, text) in expect {
            assert_eq!(field.component(&coord).unwrap(), &parse_in(&sys, text));
        }
    }

    #[test]
    fn free_particle_field_components() {
        let field = free_particle().dynamical_field().unwrap();
        assert_eq!(
            field.component(&VarId::jet(0, 1)).unwrap(),
            &Expr::jet(1, 1)
        );
        assert!(field.component(&VarId::jet(1, 1)).unwrap().is_zero());
        assert!(field.component(&VarId::momentum(0, 1)).unwrap().is_zero());
    }

    #[test]
    fn field_is_a_chain_below_the_top_order() {
        // the d/dq_l coefficient is q_{l+1} for every l below 2k-1
        let sys = beam();
        let field = sys.dynamical_field().unwrap();
        let k = sys.atlas().order();
        for a in 1..=sys.atlas().dof() {
            for l in 0..2 * k - 1 {
                assert_eq!(
                    field.component(&VarId::jet(l, a)).unwrap(),
                    &Expr::jet(l + 1, a)
                );
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_for_coupled_system() {
        let atlas = Atlas::new(2, 1).unwrap();
        let scope = atlas.scope::<String>([]);
        let lagrangian = parse_expr("0.5*q1_1^2 + 0.5*q1_2^2 + q1_1*q1_2*q0_1", &scope).unwrap();
        let sys = LagrangianSystem::new(atlas, lagrangian, BTreeMap::new()).unwrap();
        let h = sys.hessian();
        assert_eq!(h[0][1], h[1][0]);
    }

    #[test]
    fn tangency_residuals_vanish() {
        for sys in [beam(), free_particle(), oscillator()] {
            for (constraint, residual) in sys.tangency_residuals().unwrap() {
                assert!(
                    residual.is_zero(),
                    "constraint on {constraint} left residual {residual}"
                );
            }
            sys.verify_tangency().unwrap();
        }
    }

    #[test]
    fn beam_tangency_residual_by_hand() {
        // applying the field to p1 - mu*q2 gives -p0 - mu*q3, which dies
        // on the graph p0 = -mu*q3
        let sys = beam();
        let field = sys.dynamical_field().unwrap();
        let constraint = parse_in(&sys, "p1_1 - mu*q2_1");
        let applied = field.apply(&constraint);
        assert_eq!(applied, parse_in(&sys, "-p0_1 - mu*q3_1"));
        let graph = sys.legendre().unwrap().graph_substitution();
        assert!(applied.substitute(&graph).is_symbolically_zero());
    }

    #[test]
    fn numeric_forcing_path_agrees_with_symbolic() {
        // coupled two-coordinate system, solved once symbolically and once
        // per point through the low-threshold fallback
        let atlas = Atlas::new(2, 1).unwrap();
        let scope = atlas.scope::<String>([]);
        let text = "0.5*q1_1^2 + q1_1*q1_2 + q1_2^2 - q0_1*q0_2";
        let lagrangian = parse_expr(text, &scope).unwrap();
        let symbolic_sys =
            LagrangianSystem::new(atlas, lagrangian.clone(), BTreeMap::new()).unwrap();
        let numeric_sys = LagrangianSystem::with_options(
            atlas,
            lagrangian,
            BTreeMap::new(),
            DeriveOptions {
                symbolic_solve_max_dim: 1,
                ..DeriveOptions::default()
            },
        )
        .unwrap();
        let symbolic = symbolic_sys.top_order_forcing().unwrap();
        let numeric = numeric_sys.top_order_forcing().unwrap();
        assert!(numeric.symbolic().is_none());
        let mut bindings = Bindings::new();
        for (i, c) in atlas.unified_coords().into_iter().enumerate() {
            bindings.set(c, 0.3 + 0.1 * i as f64);
        }
        let a = symbolic.eval_at(&bindings).unwrap();
        let b = numeric.eval_at(&bindings).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn field_apply_is_a_directional_derivative() {
        let sys = free_particle();
        let field = sys.dynamical_field().unwrap();
        // X(q0^2) = 2 q0 q1
        let e = Expr::jet(0, 1).powi(2);
        assert_eq!(
            field.apply(&e),
            Expr::mul([Expr::int(2), Expr::jet(0, 1), Expr::jet(1, 1)])
        );
    }
}
