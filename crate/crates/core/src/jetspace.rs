//! Coordinate atlases for the higher-order tangent spaces and the unified
//! phase space, together with the canonical projections and the total time
//! derivative.
//!
//! For `n` configuration coordinates and Lagrangian order `k`, the spaces
//! in play are the order-`r` jet spaces with coordinates `q_i^A`
//! (`0 <= i <= r`), the cotangent space over the order-`k-1` jets with the
//! extra momenta `p_i^A` (`0 <= i <= k-1`), and the unified space carrying
//! jets up to order `2k-1` together with those momenta, `3kn` coordinates
//! in total.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::symexpr::{Expr, SymbolScope, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JetError {
    #[error("degrees of freedom and order must both be at least 1 (got n={n}, k={k})")]
    InvalidAtlas { n: u32, k: u32 },
    #[error("momentum variable `{0}` admits no total time derivative")]
    MomentumInTotalDerivative(VarId),
    #[error("point is missing coordinate `{0}`")]
    MissingCoordinate(VarId),
}

/// Coordinate bookkeeping for a system with `n` degrees of freedom and a
/// Lagrangian of order `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Atlas {
    n: u32,
    k: u32,
}

impl Atlas {
    pub fn new(n: u32, k: u32) -> Result<Self, JetError> {
        if n < 1 || k < 1 {
            return Err(JetError::InvalidAtlas { n, k });
        }
        Ok(Atlas { n, k })
    }

    /// Degrees of freedom.
    pub fn dof(&self) -> u32 {
        self.n
    }

    /// Lagrangian order.
    pub fn order(&self) -> u32 {
        self.k
    }

    /// Jet coordinates of the order-`r` jet space, order-major:
    /// `q0_1, .., q0_n, q1_1, ..`.
    pub fn jet_coords(&self, r: u32) -> Vec<VarId> {
        (0..=r)
            .flat_map(|i| (1..=self.n).map(move |a| VarId::jet(i, a)))
            .collect()
    }

    /// Coordinates of the base space (jets up to order `k-1`).
    pub fn base_coords(&self) -> Vec<VarId> {
        self.jet_coords(self.k - 1)
    }

    /// Coordinates of the velocity-side space (jets up to order `2k-1`).
    pub fn velocity_coords(&self) -> Vec<VarId> {
        self.jet_coords(2 * self.k - 1)
    }

    /// Momentum coordinates `p0_1 .. p{k-1}_n`.
    pub fn momentum_coords(&self) -> Vec<VarId> {
        (0..self.k)
            .flat_map(|i| (1..=self.n).map(move |a| VarId::momentum(i, a)))
            .collect()
    }

    /// Coordinates of the cotangent space over the base.
    pub fn cotangent_coords(&self) -> Vec<VarId> {
        let mut coords = self.base_coords();
        coords.extend(self.momentum_coords());
        coords
    }

    /// Coordinates of the unified space: jets up to `2k-1`, then momenta.
    pub fn unified_coords(&self) -> Vec<VarId> {
        let mut coords = self.velocity_coords();
        coords.extend(self.momentum_coords());
        coords
    }

    pub fn unified_dim(&self) -> usize {
        3 * self.k as usize * self.n as usize
    }

    /// Upper-jet coordinates `q_k .. q_{2k-1}`, the fibre of the bundle
    /// over the base that candidate sections fill in.
    pub fn upper_jet_coords(&self) -> Vec<VarId> {
        (self.k..=2 * self.k - 1)
            .flat_map(|j| (1..=self.n).map(move |a| VarId::jet(j, a)))
            .collect()
    }

    /// Parser scope covering every coordinate of the unified space plus
    /// the given parameter names.
    pub fn scope<S: Into<String>>(&self, params: impl IntoIterator<Item = S>) -> SymbolScope {
        SymbolScope::new(self.n, 2 * self.k - 1, self.k - 1).with_params(params)
    }
}

/// The three canonical projections out of the unified space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Forget the momenta: jets up to order `2k-1`.
    Jets,
    /// Keep base jets and momenta: the cotangent space over the base.
    Cotangent,
    /// Keep only the base jets.
    Base,
}

/// A complete coordinate assignment on one of the atlas spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<T> {
    values: BTreeMap<VarId, T>,
}

impl<T: Scalar> Point<T> {
    pub fn new() -> Self {
        Point {
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

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &T)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Verifies the point assigns every coordinate in `coords`.
    pub fn check_complete(&self, coords: &[VarId]) -> Result<(), JetError> {
        for c in coords {
            if !self.values.contains_key(c) {
                return Err(JetError::MissingCoordinate(c.clone()));
            }
        }
        Ok(())
    }

    /// Coordinate restriction to the target space of a projection.
    pub fn project(&self, atlas: &Atlas, target: Projection) -> Result<Point<T>, JetError> {
        self.check_complete(&atlas.unified_coords())?;
        let coords = match target {
            Projection::Jets => atlas.velocity_coords(),
            Projection::Cotangent => atlas.cotangent_coords(),
            Projection::Base => atlas.base_coords(),
        };
        Ok(coords
            .into_iter()
            .map(|c| {
                let value = self.values[&c];
                (c, value)
            })
            .collect())
    }
}

impl<T: Scalar> Default for Point<T> {
    fn default() -> Self {
        Point::new()
    }
}

impl<T: Scalar> FromIterator<(VarId, T)> for Point<T> {
    fn from_iter<I: IntoIterator<Item = (VarId, T)>>(iter: I) -> Self {
        Point {
            values: iter.into_iter().collect(),
        }
    }
}

/// Total time derivative: the derivation sending each jet variable to the
/// next-order one, `d_T(e) = sum over (i, A) of q_{i+1}^A * de/dq_i^A`.
/// Raises the top jet order by exactly one; momentum variables are
/// rejected. No upper bound is imposed on the resulting order: the
/// formal level above the unified space is deliberately admitted, since
/// the top-order forcing construction eliminates it again.
pub fn total_derivative(e: &Expr) -> Result<Expr, JetError> {
    let mut terms = Vec::new();
    for v in e.variables() {
        match v {
            VarId::Jet { order, coord } => {
                terms.push(Expr::mul2(Expr::jet(order + 1, coord), e.diff(&v)));
            }
            VarId::Momentum { .. } => {
                return Err(JetError::MomentumInTotalDerivative(v));
            }
            VarId::Param(_) => {}
        }
    }
    Ok(Expr::add(terms))
}

/// Iterated total time derivative.
pub fn total_derivative_n(e: &Expr, times: u32) -> Result<Expr, JetError> {
    let mut acc = e.clone();
    for _ in 0..times {
        acc = total_derivative(&acc)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn unified_coords_for_second_order_beam() {
        let atlas = Atlas::new(1, 2).unwrap();
        let tokens: Vec<String> = atlas
            .unified_coords()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(tokens, ["q0_1", "q1_1", "q2_1", "q3_1", "p0_1", "p1_1"]);
        assert_eq!(atlas.unified_dim(), 6);
    }

    #[test]
    fn unified_coords_for_first_order_system() {
        let atlas = Atlas::new(1, 1).unwrap();
        let tokens: Vec<String> = atlas
            .unified_coords()
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(tokens, ["q0_1", "q1_1", "p0_1"]);
    }

    #[test]
    fn unified_dimension_is_3kn() {
        let atlas = Atlas::new(2, 2).unwrap();
        assert_eq!(atlas.unified_coords().len(), 12);
        assert_eq!(atlas.jet_coords(atlas.order()).len(), 6); // (k+1)n
    }

    #[test]
    fn rejects_degenerate_atlas() {
        assert!(Atlas::new(0, 1).is_err());
        assert!(Atlas::new(1, 0).is_err());
    }

    #[test]
    fn total_derivative_on_a_generator() {
        let d = total_derivative(&Expr::jet(0, 1)).unwrap();
        assert_eq!(d, Expr::jet(1, 1));
    }

    #[test]
    fn total_derivative_with_parameter_coefficient() {
        let e = Expr::mul([Expr::param("mu"), Expr::jet(2, 1)]);
        assert_eq!(
            total_derivative(&e).unwrap(),
            Expr::mul([Expr::param("mu"), Expr::jet(3, 1)])
        );
    }

    #[test]
    fn total_derivative_leibniz_example() {
        // d_T(q0 q1) = q1^2 + q0 q2
        let e = Expr::mul([Expr::jet(0, 1), Expr::jet(1, 1)]);
        let expected = Expr::add([
            Expr::jet(1, 1).powi(2),
            Expr::mul([Expr::jet(0, 1), Expr::jet(2, 1)]),
        ]);
        assert_eq!(total_derivative(&e).unwrap(), expected);
    }

    #[test]
    fn total_derivative_rejects_momenta() {
        let e = Expr::momentum(0, 1);
        assert_eq!(
            total_derivative(&e),
            Err(JetError::MomentumInTotalDerivative(VarId::momentum(0, 1)))
        );
    }

    #[test]
    fn projections_restrict_coordinates() {
        let atlas = Atlas::new(1, 2).unwrap();
        let point: Point<f64> = atlas
            .unified_coords()
            .into_iter()
            .zip([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .collect();
        let base = point.project(&atlas, Projection::Base).unwrap();
        assert_eq!(base.len(), 2);
        assert_eq!(base.get(&VarId::jet(0, 1)), Some(1.0));
        assert_eq!(base.get(&VarId::jet(1, 1)), Some(2.0));
        let cot = point.project(&atlas, Projection::Cotangent).unwrap();
        assert_eq!(cot.len(), 4);
        assert_eq!(cot.get(&VarId::momentum(0, 1)), Some(5.0));
        assert_eq!(cot.get(&VarId::momentum(1, 1)), Some(6.0));
    }

    #[test]
    fn incomplete_point_is_rejected() {
        let atlas = Atlas::new(1, 2).unwrap();
        let mut point: Point<f64> = Point::new();
        point.set(VarId::jet(0, 1), 1.0);
        assert!(matches!(
            point.project(&atlas, Projection::Base),
            Err(JetError::MissingCoordinate(_))
        ));
    }

    #[test]
    fn base_projection_factors_through_both_legs() {
        // restricting straight to the base agrees with restricting through
        // either intermediate space, on random points
        let atlas = Atlas::new(2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let point: Point<f64> = atlas
                .unified_coords()
                .into_iter()
                .map(|c| (c, rng.gen_range(-5.0..5.0)))
                .collect();
            let direct = point.project(&atlas, Projection::Base).unwrap();
            for intermediate in [Projection::Jets, Projection::Cotangent] {
                let through = point.project(&atlas, intermediate).unwrap();
                for (c, v) in direct.iter() {
                    assert_eq!(through.get(c), Some(*v));
                }
            }
        }
    }

    fn polynomial_strategy() -> impl Strategy<Value = Expr> {
        let monomial = (
            -4i64..=4,
            prop::collection::vec((0u32..=2, 1u32..=2, 1i32..=2), 1..3),
        )
            .prop_map(|(c, powers)| {
                let mut factors = vec![Expr::int(c)];
                factors.extend(
                    powers
                        .into_iter()
                        .map(|(i, a, e)| Expr::jet(i, a).powi(e)),
                );
                Expr::mul(factors)
            });
        prop::collection::vec(monomial, 1..4).prop_map(Expr::add)
    }

    proptest! {
        #[test]
        fn total_derivative_is_a_derivation(f in polynomial_strategy(), g in polynomial_strategy()) {
            let fg = Expr::mul2(f.clone(), g.clone());
            let lhs = total_derivative(&fg).unwrap();
            let rhs = Expr::add2(
                Expr::mul2(total_derivative(&f).unwrap(), g.clone()),
                Expr::mul2(f.clone(), total_derivative(&g).unwrap()),
            );
            prop_assert_eq!(lhs.expand(), rhs.expand());
        }

        #[test]
        fn total_derivative_raises_order_by_at_most_one(f in polynomial_strategy()) {
            let max_order = |e: &Expr| {
                e.variables()
                    .into_iter()
                    .filter_map(|v| match v {
                        VarId::Jet { order, .. } => Some(order),
                        _ => None,
                    })
                    .max()
            };
            let before = max_order(&f);
            let d = total_derivative(&f).unwrap();
            if let (Some(b), Some(a)) = (before, max_order(&d)) {
                prop_assert!(a <= b + 1);
            }
        }

        #[test]
        fn iterated_total_derivatives_compose(f in polynomial_strategy()) {
            let once_twice = total_derivative_n(&total_derivative_n(&f, 1).unwrap(), 2).unwrap();
            let all_three = total_derivative_n(&f, 3).unwrap();
            prop_assert_eq!(once_twice.expand(), all_three.expand());
        }
    }
}
