//! Candidate sections of the unified bundle and the Hamilton-Jacobi
//! residual systems.
//!
//! A candidate section fills in the upper jets `s_j^A` (`k <= j <= 2k-1`)
//! and the momenta `alpha_A^i` (`0 <= i <= k-1`) as functions of the base
//! jets. Four residual families decide whether it solves the problem:
//!
//! - graph membership: `alpha - phat o s` (the image must lie on the graph
//!   of the Legendre map);
//! - invariance: the dynamical field applied to each constraint cutting
//!   out the image, written on the base through the transport operator;
//! - the gradient of the pulled-back Hamiltonian (the strict problem asks
//!   it to vanish);
//! - closedness of the momentum one-form (equivalently, the pullback of
//!   the presymplectic form vanishes).
//!
//! An exact zero after expansion short-circuits; otherwise residuals are
//! evaluated on a grid and judged by their max-abs statistic.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{DynamicsError, LagrangianSystem, VectorField};
use crate::jetspace::{Atlas, JetError, Point};
use crate::linalg;
use crate::symexpr::{solve_symbolic, EvalError, Expr, LinearSolveError, VarId};

#[derive(Debug, Error)]
pub enum HjError {
    #[error("section does not match the system atlas")]
    AtlasMismatch,
    #[error("missing section component for `{0}`")]
    MissingComponent(VarId),
    #[error("unexpected section component `{0}`")]
    UnexpectedComponent(VarId),
    #[error(
        "component for `{var}` mentions `{offender}`, which is not a base coordinate or parameter"
    )]
    BadComponent { var: VarId, offender: VarId },
    #[error("grid is missing an axis for base coordinate `{0}`")]
    MissingGridAxis(VarId),
    #[error("grid axis `{0}` is not a base coordinate")]
    ExtraGridAxis(VarId),
    #[error("grid axis `{0}` is empty or inverted")]
    BadGridAxis(VarId),
    #[error("the momenta are not affine in the upper jets; use the per-point Newton lift")]
    NonAffineLegendre,
    #[error("Newton iteration failed to invert the Legendre map at the given base point ({0})")]
    NewtonDivergence(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// A candidate section: upper-jet components and momentum components,
/// all functions of the base jets (and parameters).
#[derive(Clone, Debug, PartialEq)]
pub struct UnifiedSection {
    atlas: Atlas,
    upper: BTreeMap<VarId, Expr>,
    momenta: BTreeMap<VarId, Expr>,
}

fn check_base_only(atlas: &Atlas, var: &VarId, expr: &Expr) -> Result<(), HjError> {
    for v in expr.variables() {
        let ok = match &v {
            VarId::Jet { order, coord } => {
                *order < atlas.order() && *coord >= 1 && *coord <= atlas.dof()
            }
            VarId::Momentum { .. } => false,
            VarId::Param(_) => true,
        };
        if !ok {
            return Err(HjError::BadComponent {
                var: var.clone(),
                offender: v,
            });
        }
    }
    Ok(())
}

fn check_exact_cover(expected: &[VarId], given: &BTreeMap<VarId, Expr>) -> Result<(), HjError> {
    for var in expected {
        if !given.contains_key(var) {
            return Err(HjError::MissingComponent(var.clone()));
        }
    }
    for var in given.keys() {
        if !expected.contains(var) {
            return Err(HjError::UnexpectedComponent(var.clone()));
        }
    }
    Ok(())
}

impl UnifiedSection {
    /// Builds a section from its components, checking exact coverage of
    /// the fibre coordinates and that every expression lives on the base.
    pub fn new(
        atlas: Atlas,
        upper: BTreeMap<VarId, Expr>,
        momenta: BTreeMap<VarId, Expr>,
    ) -> Result<Self, HjError> {
        check_exact_cover(&atlas.upper_jet_coords(), &upper)?;
        check_exact_cover(&atlas.momentum_coords(), &momenta)?;
        for (var, expr) in upper.iter().chain(momenta.iter()) {
            check_base_only(&atlas, var, expr)?;
        }
        Ok(UnifiedSection {
            atlas,
            upper,
            momenta,
        })
    }

    pub fn atlas(&self) -> &Atlas {
        &self.atlas
    }

    /// Upper-jet component `s_j^A`.
    pub fn upper_component(&self, j: u32, a: u32) -> &Expr {
        &self.upper[&VarId::jet(j, a)]
    }

    /// Momentum component `alpha_A^i`.
    pub fn momentum_component(&self, i: u32, a: u32) -> &Expr {
        &self.momenta[&VarId::momentum(i, a)]
    }

    pub fn components(&self) -> impl Iterator<Item = (&VarId, &Expr)> {
        self.upper.iter().chain(self.momenta.iter())
    }

    /// Substitution replacing only the upper jets by their components.
    pub fn upper_substitution(&self) -> BTreeMap<VarId, Expr> {
        self.upper.clone()
    }

    /// Substitution replacing upper jets and momenta alike: composition
    /// with the section for any function on the unified space.
    pub fn full_substitution(&self) -> BTreeMap<VarId, Expr> {
        let mut map = self.upper.clone();
        map.extend(self.momenta.iter().map(|(k, v)| (k.clone(), v.clone())));
        map
    }

    /// The component expression of any unified coordinate under the
    /// section: base coordinates map to themselves.
    pub fn coordinate_pullback(&self, var: &VarId) -> Expr {
        self.upper
            .get(var)
            .or_else(|| self.momenta.get(var))
            .cloned()
            .unwrap_or_else(|| Expr::var(var.clone()))
    }

    /// Image of a base point under the section, as a unified-space point.
    pub fn realize_point(
        &self,
        sys: &LagrangianSystem,
        base: &Point<f64>,
    ) -> Result<Point<f64>, HjError> {
        base.check_complete(&self.atlas.base_coords())?;
        let bindings = sys.bindings_at(base);
        let mut out = base.clone();
        for (var, expr) in self.components() {
            out.set(var.clone(), expr.eval(&bindings)?);
        }
        Ok(out)
    }
}

/// One labelled residual expression over the base coordinates.
#[derive(Clone, Debug)]
pub struct Residual {
    pub id: String,
    pub expr: Expr,
    /// Whether the expression expands to the literal zero once parameter
    /// values are substituted exactly.
    pub symbolic_zero: bool,
    /// Present after grid evaluation.
    pub stats: Option<ResidualStats>,
}

#[derive(Clone, Debug)]
pub struct ResidualStats {
    pub max_abs: f64,
    /// Root-mean-square over the grid.
    pub l2: f64,
    pub argmax: Point<f64>,
}

/// A labelled family of residuals with unique equation ids.
#[derive(Clone, Debug)]
pub struct ResidualSet {
    entries: Vec<Residual>,
}

impl ResidualSet {
    fn build(items: Vec<(String, Expr)>, sys: &LagrangianSystem) -> Self {
        let params = sys.param_substitution();
        let entries = items
            .into_iter()
            .map(|(id, expr)| {
                let symbolic_zero = expr.substitute(&params).is_symbolically_zero();
                Residual {
                    id,
                    expr,
                    symbolic_zero,
                    stats: None,
                }
            })
            .collect();
        ResidualSet { entries }
    }

    pub fn entries(&self) -> &[Residual] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn all_symbolically_zero(&self) -> bool {
        self.entries.iter().all(|r| r.symbolic_zero)
    }

    /// Fills the per-equation grid statistics. Evaluation is a parallel
    /// map over the grid points; the reduction runs in point order, so
    /// the statistics are deterministic.
    pub fn evaluate(&mut self, grid: &Grid, sys: &LagrangianSystem) -> Result<(), HjError> {
        grid.check_covers_base(sys.atlas())?;
        let points = grid.points();
        for residual in &mut self.entries {
            let values: Result<Vec<f64>, EvalError> = points
                .par_iter()
                .map(|p| residual.expr.eval(&sys.bindings_at(p)))
                .collect();
            let values = values?;
            let mut max_abs = 0.0f64;
            let mut argmax = 0usize;
            let mut sum_sq = 0.0f64;
            for (i, v) in values.iter().enumerate() {
                sum_sq += v * v;
                if v.abs() > max_abs {
                    max_abs = v.abs();
                    argmax = i;
                }
            }
            residual.stats = Some(ResidualStats {
                max_abs,
                l2: (sum_sq / values.len().max(1) as f64).sqrt(),
                argmax: points[argmax].clone(),
            });
        }
        Ok(())
    }

    /// Largest max-abs across equations; `None` before evaluation.
    pub fn max_abs(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|r| r.stats.as_ref().map(|s| s.max_abs))
            .try_fold(0.0f64, |acc, s| s.map(|v| acc.max(v)))
    }

    /// Ids of equations whose max-abs exceeds the tolerance.
    pub fn violations(&self, tol: f64) -> Vec<String> {
        self.entries
            .iter()
            .filter(|r| {
                r.stats
                    .as_ref()
                    .map(|s| s.max_abs > tol)
                    .unwrap_or(!r.symbolic_zero)
            })
            .map(|r| r.id.clone())
            .collect()
    }
}

/// One axis of the rectangular evaluation grid.
#[derive(Clone, Debug)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    fn samples(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.min + step * i as f64)
            .collect()
    }
}

/// Rectangular evaluation grid over the base coordinates.
#[derive(Clone, Debug)]
pub struct Grid {
    axes: Vec<(VarId, GridAxis)>,
}

impl Grid {
    pub fn new(axes: Vec<(VarId, GridAxis)>) -> Result<Self, HjError> {
        for (var, axis) in &axes {
            if axis.count == 0 || axis.max < axis.min {
                return Err(HjError::BadGridAxis(var.clone()));
            }
        }
        Ok(Grid { axes })
    }

    pub fn check_covers_base(&self, atlas: &Atlas) -> Result<(), HjError> {
        let base = atlas.base_coords();
        for coord in &base {
            if !self.axes.iter().any(|(v, _)| v == coord) {
                return Err(HjError::MissingGridAxis(coord.clone()));
            }
        }
        for (v, _) in &self.axes {
            if !base.contains(v) {
                return Err(HjError::ExtraGridAxis(v.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, a)| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian product of the axis samples, last axis fastest.
    pub fn points(&self) -> Vec<Point<f64>> {
        let mut points = vec![Point::new()];
        for (var, axis) in &self.axes {
            let samples = axis.samples();
            let mut next = Vec::with_capacity(points.len() * samples.len());
            for p in &points {
                for s in &samples {
                    let mut q = p.clone();
                    q.set(var.clone(), *s);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }
}

fn ensure_same_atlas(s: &UnifiedSection, sys: &LagrangianSystem) -> Result<(), HjError> {
    if s.atlas() != sys.atlas() {
        return Err(HjError::AtlasMismatch);
    }
    Ok(())
}

/// The vector field on the base determined by the section: a chain on the
/// lower jets with the order-`k` slot supplied by the section.
pub fn associated_field(
    s: &UnifiedSection,
    sys: &LagrangianSystem,
) -> Result<VectorField, HjError> {
    ensure_same_atlas(s, sys)?;
    let k = sys.atlas().order();
    let mut components = BTreeMap::new();
    for a in 1..=sys.atlas().dof() {
        for i in 0..k.saturating_sub(1) {
            components.insert(VarId::jet(i, a), Expr::jet(i + 1, a));
        }
        components.insert(VarId::jet(k - 1, a), s.upper_component(k, a).clone());
    }
    Ok(VectorField::new(components))
}

/// Graph-membership residuals `alpha_A^i - phat_A^i o s`, one per
/// momentum coordinate; all zero exactly when the image of the section
/// lies on the graph of the Legendre map.
pub fn membership_residuals(
    s: &UnifiedSection,
    sys: &LagrangianSystem,
) -> Result<ResidualSet, HjError> {
    ensure_same_atlas(s, sys)?;
    let legendre = sys.legendre()?;
    let sigma = s.upper_substitution();
    let mut items = Vec::new();
    for i in 0..sys.atlas().order() {
        for a in 1..=sys.atlas().dof() {
            let restricted = legendre.component(i, a).substitute(&sigma);
            let expr = Expr::sub(s.momentum_component(i, a).clone(), restricted);
            items.push((format!("wo:p{i}_{a}"), expr));
        }
    }
    Ok(ResidualSet::build(items, sys))
}

/// The invariance system of the generalized problem: the dynamical field
/// applied to each constraint cutting out the image of the section,
/// written on the base. `2kn` equations: one per upper-jet constraint
/// (transport of the `s_j`, closed at the top by the forcing functions
/// composed with the section) and one per momentum constraint (transport
/// of the `alpha_i` against the Lagrangian gradient).
pub fn generalized_residuals(
    s: &UnifiedSection,
    sys: &LagrangianSystem,
) -> Result<ResidualSet, HjError> {
    ensure_same_atlas(s, sys)?;
    let k = sys.atlas().order();
    let n = sys.atlas().dof();
    let transport = associated_field(s, sys)?;
    let sigma = s.upper_substitution();
    let forcing = sys.top_order_forcing()?;
    let forcing = forcing
        .symbolic()
        .ok_or(DynamicsError::SymbolicSolveDisabled {
            dim: n as usize,
            threshold: sys.options().symbolic_solve_max_dim,
        })?;
    let mut items = Vec::new();
    // jet constraints: s_{j+1} (or the forcing at the top) minus the
    // transported component
    for j in k..2 * k {
        for a in 1..=n {
            let target = if j + 1 <= 2 * k - 1 {
                s.upper_component(j + 1, a).clone()
            } else {
                forcing[(a - 1) as usize].substitute(&sigma)
            };
            let expr = Expr::sub(target, transport.apply(s.upper_component(j, a)));
            items.push((format!("gen:q{j}_{a}"), expr));
        }
    }
    // momentum constraints
    for l in 0..k {
        for a in 1..=n {
            let dl = sys.lagrangian().diff(&VarId::jet(l, a)).substitute(&sigma);
            let mut expr = Expr::sub(dl, transport.apply(s.momentum_component(l, a)));
            if l >= 1 {
                expr = Expr::sub(expr, s.momentum_component(l - 1, a).clone());
            }
            items.push((format!("gen:p{l}_{a}"), expr));
        }
    }
    Ok(ResidualSet::build(items, sys))
}

/// Gradient of the pulled-back Hamiltonian, assembled term by term on the
/// base: `kn` equations that vanish exactly when `s*H` is constant.
pub fn hamiltonian_gradient_residuals(
    s: &UnifiedSection,
    sys: &LagrangianSystem,
) -> Result<ResidualSet, HjError> {
    ensure_same_atlas(s, sys)?;
    let k = sys.atlas().order();
    let n = sys.atlas().dof();
    let sigma = s.upper_substitution();
    let mut items = Vec::new();
    for l in 0..k {
        for a in 1..=n {
            let wrt = VarId::jet(l, a);
            let mut terms: Vec<Expr> = Vec::new();
            for b in 1..=n {
                // transported momenta: q_{i+1} d(alpha_i)/dq_l for the
                // lower levels, the order-(k-1) slot carried by s_k
                for i in 0..k.saturating_sub(1) {
                    terms.push(Expr::mul2(
                        Expr::jet(i + 1, b),
                        s.momentum_component(i, b).diff(&wrt),
                    ));
                }
                terms.push(Expr::mul2(
                    s.upper_component(k, b).clone(),
                    s.momentum_component(k - 1, b).diff(&wrt),
                ));
                terms.push(Expr::mul2(
                    s.momentum_component(k - 1, b).clone(),
                    s.upper_component(k, b).diff(&wrt),
                ));
                terms.push(
                    Expr::mul2(
                        sys.lagrangian().diff(&VarId::jet(k, b)).substitute(&sigma),
                        s.upper_component(k, b).diff(&wrt),
                    )
                    .neg(),
                );
            }
            if l >= 1 {
                terms.push(s.momentum_component(l - 1, a).clone());
            }
            terms.push(sys.lagrangian().diff(&wrt).substitute(&sigma).neg());
            items.push((format!("dsH:q{l}_{a}"), Expr::add(terms)));
        }
    }
    Ok(ResidualSet::build(items, sys))
}

/// Independent route to the same scalar: substitute the section into the
/// Hamiltonian. Differentiating this is the oracle for
/// [`hamiltonian_gradient_residuals`].
pub fn pulled_back_hamiltonian(s: &UnifiedSection, sys: &LagrangianSystem) -> Expr {
    sys.hamiltonian().substitute(&s.full_substitution())
}

/// Closedness residuals of the momentum one-form:
/// `d(alpha_B^j)/dq_i^A - d(alpha_A^i)/dq_j^B` over unordered distinct
/// index pairs, `kn(kn-1)/2` expressions. All zero exactly when the
/// pulled-back presymplectic form vanishes.
pub fn closedness_residuals(s: &UnifiedSection) -> ResidualSet {
    let momenta: Vec<VarId> = s.atlas.momentum_coords();
    let mut entries = Vec::new();
    for (idx, lo) in momenta.iter().enumerate() {
        for hi in &momenta[idx + 1..] {
            let (VarId::Momentum { order: i, coord: a }, VarId::Momentum { order: j, coord: b }) =
                (lo, hi)
            else {
                unreachable!("momentum_coords yields momenta");
            };
            let expr = Expr::sub(
                s.momenta[hi].diff(&VarId::jet(*i, *a)),
                s.momenta[lo].diff(&VarId::jet(*j, *b)),
            );
            let symbolic_zero = expr.is_symbolically_zero();
            entries.push(Residual {
                id: format!("closed:p{i}_{a}:p{j}_{b}"),
                expr,
                symbolic_zero,
                stats: None,
            });
        }
    }
    ResidualSet { entries }
}

/// Largest gap, over the grid and over all unified coordinates, between
/// the transported section components and the dynamical field composed
/// with the section. Zero (to roundoff) characterizes sections whose
/// image is invariant under the flow.
pub fn relatedness_max_gap(
    s: &UnifiedSection,
    sys: &LagrangianSystem,
    grid: &Grid,
) -> Result<f64, HjError> {
    ensure_same_atlas(s, sys)?;
    grid.check_covers_base(sys.atlas())?;
    let transport = associated_field(s, sys)?;
    let field = sys.dynamical_field()?;
    let sigma = s.full_substitution();
    let mut gaps = Vec::new();
    for coord in sys.atlas().unified_coords() {
        let lhs = transport.apply(&s.coordinate_pullback(&coord));
        let rhs = field
            .component(&coord)
            .expect("field covers the unified coordinates")
            .substitute(&sigma);
        gaps.push(Expr::sub(lhs, rhs));
    }
    let points = grid.points();
    let values: Result<Vec<f64>, EvalError> = points
        .par_iter()
        .map(|p| {
            let bindings = sys.bindings_at(p);
            let mut worst = 0.0f64;
            for gap in &gaps {
                worst = worst.max(gap.eval(&bindings)?.abs());
            }
            Ok(worst)
        })
        .collect();
    Ok(values?.into_iter().fold(0.0, f64::max))
}

/// A section of the jet-space projection: the upper-jet components alone.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianSection {
    atlas: Atlas,
    upper: BTreeMap<VarId, Expr>,
}

impl LagrangianSection {
    pub fn new(atlas: Atlas, upper: BTreeMap<VarId, Expr>) -> Result<Self, HjError> {
        check_exact_cover(&atlas.upper_jet_coords(), &upper)?;
        for (var, expr) in &upper {
            check_base_only(&atlas, var, expr)?;
        }
        Ok(LagrangianSection { atlas, upper })
    }

    pub fn component(&self, j: u32, a: u32) -> &Expr {
        &self.upper[&VarId::jet(j, a)]
    }

    pub fn components(&self) -> impl Iterator<Item = (&VarId, &Expr)> {
        self.upper.iter()
    }

    pub fn substitution(&self) -> BTreeMap<VarId, Expr> {
        self.upper.clone()
    }
}

/// A one-form on the base, `alpha_A^i dq_i^A`, keyed by the base
/// coordinate each coefficient multiplies.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseOneForm {
    atlas: Atlas,
    coeffs: BTreeMap<VarId, Expr>,
}

impl BaseOneForm {
    pub fn new(atlas: Atlas, coeffs: BTreeMap<VarId, Expr>) -> Result<Self, HjError> {
        check_exact_cover(&atlas.base_coords(), &coeffs)?;
        for (var, expr) in &coeffs {
            check_base_only(&atlas, var, expr)?;
        }
        Ok(BaseOneForm { atlas, coeffs })
    }

    /// Coefficient of `dq_i^A`.
    pub fn coefficient(&self, i: u32, a: u32) -> &Expr {
        &self.coeffs[&VarId::jet(i, a)]
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&VarId, &Expr)> {
        self.coeffs.iter()
    }
}

/// Forgets the momenta: the jet-space section carried by the section.
pub fn project_to_lagrangian(s: &UnifiedSection) -> LagrangianSection {
    LagrangianSection {
        atlas: s.atlas,
        upper: s.upper.clone(),
    }
}

/// Forgets the upper jets: the momentum one-form carried by the section.
pub fn project_to_hamiltonian(s: &UnifiedSection) -> BaseOneForm {
    let coeffs = s
        .momenta
        .iter()
        .map(|(var, expr)| {
            let VarId::Momentum { order, coord } = var else {
                unreachable!("momentum keys");
            };
            (VarId::jet(*order, *coord), expr.clone())
        })
        .collect();
    BaseOneForm {
        atlas: s.atlas,
        coeffs,
    }
}

/// Completes a jet-space section to a unified section by composing the
/// Legendre map with it: the unique completion landing on the graph.
pub fn lift_from_lagrangian(
    section: &LagrangianSection,
    sys: &LagrangianSystem,
) -> Result<UnifiedSection, HjError> {
    if &section.atlas != sys.atlas() {
        return Err(HjError::AtlasMismatch);
    }
    let legendre = sys.legendre()?;
    let sigma = section.substitution();
    let momenta = legendre
        .components()
        .map(|(var, phat)| (var.clone(), phat.substitute(&sigma)))
        .collect();
    UnifiedSection::new(section.atlas, section.upper.clone(), momenta)
}

/// Completes a momentum one-form to a unified section by inverting the
/// Legendre map for the upper jets, symbolically. Requires the momenta to
/// be affine in the upper jets (true for every built-in fixture); see
/// [`lift_from_hamiltonian_at`] for the per-point Newton fallback.
pub fn lift_from_hamiltonian(
    form: &BaseOneForm,
    sys: &LagrangianSystem,
) -> Result<UnifiedSection, HjError> {
    if &form.atlas != sys.atlas() {
        return Err(HjError::AtlasMismatch);
    }
    let legendre = sys.legendre()?;
    let unknowns = sys.atlas().upper_jet_coords();
    let mut matrix = Vec::new();
    let mut rhs = Vec::new();
    for (var, phat) in legendre.components() {
        let VarId::Momentum { order, coord } = var else {
            unreachable!("momentum keys");
        };
        let equation = Expr::sub(phat.clone(), form.coefficient(*order, *coord).clone());
        let row: Vec<Expr> = unknowns.iter().map(|u| equation.diff(u).expand()).collect();
        for entry in &row {
            for v in entry.variables() {
                if unknowns.contains(&v) {
                    return Err(HjError::NonAffineLegendre);
                }
            }
        }
        let zeroed: BTreeMap<VarId, Expr> = unknowns
            .iter()
            .map(|u| (u.clone(), Expr::zero()))
            .collect();
        matrix.push(row);
        rhs.push(equation.substitute(&zeroed).neg());
    }
    let solution = solve_symbolic(&matrix, &rhs)?;
    let upper: BTreeMap<VarId, Expr> = unknowns.into_iter().zip(solution).collect();
    let momenta = form
        .coeffs
        .iter()
        .map(|(var, expr)| {
            let VarId::Jet { order, coord } = var else {
                unreachable!("base keys");
            };
            (VarId::momentum(*order, *coord), expr.clone())
        })
        .collect();
    UnifiedSection::new(form.atlas, upper, momenta)
}

/// Newton options for the per-point Legendre inversion.
#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting value for every unknown upper jet. Zero sits on a critical
    /// point of pure-power momenta, so the default starts at one.
    pub initial: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 50,
            initial: 1.0,
        }
    }
}

/// Inverts the Legendre map for the upper-jet values at one base point:
/// Newton iteration on `phat(q, u) - alpha(q) = 0`. Divergence signals
/// that the map is not invertible over the requested domain.
pub fn lift_from_hamiltonian_at(
    form: &BaseOneForm,
    sys: &LagrangianSystem,
    base: &Point<f64>,
    opts: NewtonOptions,
) -> Result<BTreeMap<VarId, f64>, HjError> {
    if &form.atlas != sys.atlas() {
        return Err(HjError::AtlasMismatch);
    }
    base.check_complete(&sys.atlas().base_coords())?;
    let legendre = sys.legendre()?;
    let unknowns = sys.atlas().upper_jet_coords();
    let equations: Vec<Expr> = legendre
        .components()
        .map(|(var, phat)| {
            let VarId::Momentum { order, coord } = var else {
                unreachable!("momentum keys");
            };
            Expr::sub(phat.clone(), form.coefficient(*order, *coord).clone())
        })
        .collect();
    let jacobian: Vec<Vec<Expr>> = equations
        .iter()
        .map(|eq| unknowns.iter().map(|u| eq.diff(u)).collect())
        .collect();

    let mut guess = vec![opts.initial; unknowns.len()];
    for _ in 0..opts.max_iter {
        let mut bindings = sys.bindings_at(base);
        for (u, value) in unknowns.iter().zip(&guess) {
            bindings.set(u.clone(), *value);
        }
        let mut residual = Vec::with_capacity(equations.len());
        for eq in &equations {
            residual.push(eq.eval(&bindings)?);
        }
        if residual.iter().all(|r| r.abs() <= opts.tol) {
            return Ok(unknowns.into_iter().zip(guess).collect());
        }
        let mut jac = Vec::with_capacity(jacobian.len());
        for row in &jacobian {
            let mut out = Vec::with_capacity(row.len());
            for entry in row {
                out.push(entry.eval(&bindings)?);
            }
            jac.push(out);
        }
        let step = linalg::lu_solve(jac, residual)
            .map_err(|_| HjError::NewtonDivergence("singular Jacobian".into()))?;
        for (g, s) in guess.iter_mut().zip(&step) {
            *g -= s;
        }
        if guess.iter().any(|g| !g.is_finite()) {
            return Err(HjError::NewtonDivergence("iterates diverged".into()));
        }
    }
    Err(HjError::NewtonDivergence(format!(
        "no convergence within {} iterations",
        opts.max_iter
    )))
}
