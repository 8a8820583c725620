//! Finite hypothesis classes.
//!
//! The elimination algorithms only ever touch a hypothesis through its
//! greedy action and the value it predicts for that action, which is what
//! [`Hypothesis`] exposes. [`QFunction`] stores full action-value tables;
//! [`PolicyValuePair`] stores a policy and a V-value table directly.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cdp::{Context, Policy, Shape};
use crate::error::{bail, Error, Result};

/// Anything the algorithms can evaluate: a greedy action rule with a
/// predicted value for the chosen action.
pub trait Hypothesis: Sync {
    fn shape(&self) -> &Shape;

    /// `pi_f(x)`. Only meaningful for levels `1..=H`.
    fn greedy_action(&self, x: Context) -> usize;

    /// `f(x, pi_f(x))`, which is 0 at the terminal level `H + 1`.
    fn greedy_value(&self, x: Context) -> f64;

    fn policy(&self) -> Policy {
        Policy::from_fn(self.shape(), |x| self.greedy_action(x)).expect("greedy actions are in range")
    }
}

fn check_unit_interval(values: &[f64], level: usize) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        bail!(InvalidArgument, "value {} at level {} is outside [0, 1]", v, level);
    }
    Ok(())
}

/// Tabular action-value function over `(level, core, action)`, implicitly
/// zero at level `H + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    shape: Shape,
    /// `values[h - 1][core * K + action]`.
    values: Vec<Vec<f64>>,
}

impl QFunction {
    pub fn new(shape: Shape, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != shape.horizon() {
            bail!(ShapeMismatch, "Q table has {} levels, shape has {}", values.len(), shape.horizon());
        }
        let k = shape.action_count();
        for (h, row) in values.iter().enumerate() {
            if row.len() != shape.cores(h + 1) * k {
                bail!(ShapeMismatch, "Q table level {} has {} entries, expected {}", h + 1, row.len(), shape.cores(h + 1) * k);
            }
            check_unit_interval(row, h + 1)?;
        }
        Ok(QFunction { shape, values })
    }

    pub fn from_fn(shape: Shape, mut value: impl FnMut(Context, usize) -> f64) -> Result<Self> {
        let k = shape.action_count();
        let values = (1..=shape.horizon())
            .map(|h| {
                let mut row = Vec::with_capacity(shape.cores(h) * k);
                for c in 0..shape.cores(h) {
                    for a in 0..k {
                        row.push(value(Context::new(c, h), a));
                    }
                }
                row
            })
            .collect();
        QFunction::new(shape, values)
    }

    pub fn constant(shape: Shape, c: f64) -> Result<Self> {
        QFunction::from_fn(shape, |_, _| c)
    }

    pub fn value(&self, x: Context, action: usize) -> f64 {
        if x.level > self.shape.horizon() {
            return 0.0;
        }
        self.values[x.level - 1][x.core * self.shape.action_count() + action]
    }

    /// Action values at `x` (empty slice at the terminal level).
    pub fn action_values(&self, x: Context) -> &[f64] {
        if x.level > self.shape.horizon() {
            return &[];
        }
        let k = self.shape.action_count();
        &self.values[x.level - 1][x.core * k..(x.core + 1) * k]
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// The same function with every value multiplied by `factor`, clipped to
    /// `[0, 1]`.
    pub fn scaled(&self, factor: f64) -> QFunction {
        let values = self.values.iter().map(|row| row.iter().map(|v| (v * factor).clamp(0.0, 1.0)).collect()).collect();
        QFunction { shape: self.shape.clone(), values }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Hypothesis for QFunction {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn greedy_action(&self, x: Context) -> usize {
        argmax_lowest(self.action_values(x))
    }

    fn greedy_value(&self, x: Context) -> f64 {
        if x.level > self.shape.horizon() {
            return 0.0;
        }
        self.value(x, self.greedy_action(x))
    }
}

/// Greedy policy of `f` with lowest-index tie-breaking.
pub fn greedy_policy<F: Hypothesis + ?Sized>(f: &F) -> Policy {
    f.policy()
}

/// `f(x_1, pi_f(x_1))` for a level-1 context.
pub fn predicted_value<F: Hypothesis + ?Sized>(f: &F, x1: Context) -> Result<f64> {
    if x1.level != 1 {
        bail!(InvalidArgument, "predicted value needs a level-1 context, got level {}", x1.level);
    }
    f.shape().check_context(x1)?;
    Ok(f.greedy_value(x1))
}

/// A policy paired with a V-value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValuePair {
    shape: Shape,
    policy: Policy,
    /// `vvalue[h - 1][core]`.
    vvalue: Vec<Vec<f64>>,
}

impl PolicyValuePair {
    pub fn new(shape: Shape, policy: Policy, vvalue: Vec<Vec<f64>>) -> Result<Self> {
        policy.check_shape(&shape)?;
        if vvalue.len() != shape.horizon() {
            bail!(ShapeMismatch, "value table has {} levels, shape has {}", vvalue.len(), shape.horizon());
        }
        for (h, row) in vvalue.iter().enumerate() {
            if row.len() != shape.cores(h + 1) {
                bail!(ShapeMismatch, "value table level {} has {} cores, expected {}", h + 1, row.len(), shape.cores(h + 1));
            }
            check_unit_interval(row, h + 1)?;
        }
        Ok(PolicyValuePair { shape, policy, vvalue })
    }

    pub fn policy_ref(&self) -> &Policy {
        &self.policy
    }

    pub fn vvalue(&self) -> &[Vec<f64>] {
        &self.vvalue
    }
}

impl Hypothesis for PolicyValuePair {
    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn greedy_action(&self, x: Context) -> usize {
        self.policy.action(x)
    }

    fn greedy_value(&self, x: Context) -> f64 {
        if x.level > self.shape.horizon() {
            return 0.0;
        }
        self.vvalue[x.level - 1][x.core]
    }

    fn policy(&self) -> Policy {
        self.policy.clone()
    }
}

/// `(pi_f, g_f)` with `g_f(x) = f(x, pi_f(x))`.
pub fn to_pair(f: &QFunction) -> PolicyValuePair {
    let shape = f.shape.clone();
    let policy = f.policy();
    let vvalue = (1..=shape.horizon())
        .map(|h| (0..shape.cores(h)).map(|c| f.greedy_value(Context::new(c, h))).collect())
        .collect();
    PolicyValuePair { shape, policy, vvalue }
}

/// An ordered, nonempty list of hypotheses sharing one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass<F> {
    members: Vec<F>,
    /// Index of `Q*` when known. Test harnesses read this; the algorithms
    /// never do.
    qstar_index: Option<usize>,
}

impl<F: Hypothesis> FunctionClass<F> {
    pub fn new(members: Vec<F>) -> Result<Self> {
        let Some(first) = members.first() else {
            bail!(InvalidArgument, "a function class needs at least one member");
        };
        if let Some(i) = members.iter().position(|m| m.shape() != first.shape()) {
            bail!(ShapeMismatch, "member {} does not share the class shape", i);
        }
        Ok(FunctionClass { members, qstar_index: None })
    }

    pub fn with_qstar_index(mut self, index: usize) -> Result<Self> {
        if index >= self.members.len() {
            return Err(Error::InvalidArgument(format!("Q* index {} out of range", index)));
        }
        self.qstar_index = Some(index);
        Ok(self)
    }

    pub fn qstar_index(&self) -> Option<usize> {
        self.qstar_index
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn shape(&self) -> &Shape {
        self.members[0].shape()
    }

    pub fn members(&self) -> &[F] {
        &self.members
    }

    pub fn get(&self, i: usize) -> &F {
        &self.members[i]
    }

    pub fn iter(&self) -> core::slice::Iter<'_, F> {
        self.members.iter()
    }

    pub fn into_members(self) -> Vec<F> {
        self.members
    }
}

impl FunctionClass<QFunction> {
    /// The pair view of every member, keeping indices (and the Q* marker).
    pub fn to_pairs(&self) -> FunctionClass<PolicyValuePair> {
        FunctionClass { members: self.members.iter().map(to_pair).collect(), qstar_index: self.qstar_index }
    }
}

impl<F> core::ops::Index<usize> for FunctionClass<F> {
    type Output = F;
    fn index(&self, i: usize) -> &F {
        &self.members[i]
    }
}

/// Cartesian product `Pi x G` in policy-major order.
pub fn product_class(shape: &Shape, policies: &[Policy], vvalues: &[Vec<Vec<f64>>]) -> Result<FunctionClass<PolicyValuePair>> {
    if policies.is_empty() || vvalues.is_empty() {
        bail!(InvalidArgument, "product class needs at least one policy and one value table");
    }
    let mut members = Vec::with_capacity(policies.len() * vvalues.len());
    for p in policies {
        for g in vvalues {
            members.push(PolicyValuePair::new(shape.clone(), p.clone(), g.clone())?);
        }
    }
    FunctionClass::new(members)
}

/// `ln|Pi| + ln|G|`, the complexity term logged for product classes.
pub fn product_log_size(policies: usize, vvalues: usize) -> f64 {
    crate::num::ln(policies as f64) + crate::num::ln(vvalues as f64)
}

/// Boolean survivor mask over class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivingSet {
    alive: Vec<bool>,
}

impl SurvivingSet {
    pub fn full(n: usize) -> Self {
        SurvivingSet { alive: alloc::vec![true; n] }
    }

    pub fn from_mask(alive: Vec<bool>) -> Self {
        SurvivingSet { alive }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.alive.get(i).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn capacity(&self) -> usize {
        self.alive.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i)
    }

    pub fn mask(&self) -> &[bool] {
        &self.alive
    }

    pub fn remove(&mut self, i: usize) {
        self.alive[i] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn shape() -> Shape {
        Shape::uniform(2, 3, 2).unwrap()
    }

    #[test]
    fn constant_function_picks_action_zero() {
        let f = QFunction::constant(shape(), 0.3).unwrap();
        let p = greedy_policy(&f);
        assert!(p.table().iter().flatten().all(|&a| a == 0));
        let pair = to_pair(&f);
        assert_eq!(pair.greedy_value(Context::new(1, 2)), 0.3);
        assert_eq!(pair.greedy_value(Context::new(0, 3)), 0.0);
    }

    #[test]
    fn linear_in_action_picks_last() {
        let f = QFunction::from_fn(shape(), |_, a| a as f64 / 3.0).unwrap();
        assert_eq!(f.greedy_action(Context::new(0, 1)), 2);
    }

    #[test]
    fn predicted_value_is_max_at_level_one() {
        let s = Shape::uniform(1, 2, 1).unwrap();
        let f = QFunction::new(s.clone(), vec![vec![0.2, 0.7]]).unwrap();
        assert_eq!(predicted_value(&f, Context::new(0, 1)).unwrap(), 0.7);
        assert!(predicted_value(&f, Context::new(0, 2)).is_err());
        let zero = QFunction::constant(s, 0.0).unwrap();
        assert_eq!(predicted_value(&zero, Context::new(0, 1)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(QFunction::constant(shape(), 1.5).is_err());
        assert!(QFunction::new(shape(), vec![vec![0.0; 6]]).is_err());
    }

    #[test]
    fn terminal_level_is_zero() {
        let f = QFunction::constant(shape(), 0.9).unwrap();
        assert_eq!(f.value(Context::new(0, 3), 1), 0.0);
        assert_eq!(f.greedy_value(Context::new(0, 3)), 0.0);
    }

    #[test]
    fn product_class_is_policy_major() {
        let s = shape();
        let pols = vec![Policy::constant(&s, 0).unwrap(), Policy::constant(&s, 1).unwrap()];
        let vals: Vec<_> = (0..3).map(|i| vec![vec![i as f64 / 10.0; 2]; 2]).collect();
        let c = product_class(&s, &pols, &vals).unwrap();
        assert_eq!(c.len(), 6);
        let order: Vec<_> = c.iter().map(|m| (m.greedy_action(Context::new(0, 1)), m.greedy_value(Context::new(0, 1)))).collect();
        assert_eq!(order, vec![(0, 0.0), (0, 0.1), (0, 0.2), (1, 0.0), (1, 0.1), (1, 0.2)]);
        let single = product_class(&s, &pols[..1], &vals[..1]).unwrap();
        assert_eq!(single.len(), 1);
        assert!(product_class(&s, &[], &vals).is_err());
        let bad = vec![vec![vec![0.0; 5]; 2]];
        assert!(product_class(&s, &pols, &bad).is_err());
    }

    #[test]
    fn class_requires_shared_shape() {
        let a = QFunction::constant(shape(), 0.1).unwrap();
        let b = QFunction::constant(Shape::uniform(2, 3, 3).unwrap(), 0.1).unwrap();
        assert!(FunctionClass::new(vec![a.clone(), b]).is_err());
        assert!(FunctionClass::<QFunction>::new(vec![]).is_err());
        let c = FunctionClass::new(vec![a]).unwrap();
        assert!(c.clone().with_qstar_index(1).is_err());
        assert_eq!(c.with_qstar_index(0).unwrap().qstar_index(), Some(0));
    }

    #[test]
    fn surviving_set_basics() {
        let mut s = SurvivingSet::full(4);
        s.remove(1);
        assert_eq!(s.count(), 3);
        assert_eq!(s.indices().collect::<Vec<_>>(), vec![0, 2, 3]);
        assert!(!s.contains(1));
        assert!(!s.contains(9));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn q_strategy() -> impl Strategy<Value = QFunction> {
            proptest::collection::vec(0.0f64..=1.0, 2 * 2 * 3).prop_map(|v| {
                QFunction::new(shape(), vec![v[..6].to_vec(), v[6..].to_vec()]).unwrap()
            })
        }

        proptest! {
            #[test]
            fn argmax_invariant_under_positive_scaling(f in q_strategy(), scale in 0.01f64..1.0) {
                let g = f.scaled(scale);
                prop_assert_eq!(greedy_policy(&f), greedy_policy(&g));
            }

            #[test]
            fn pair_matches_predicted_value(f in q_strategy()) {
                let pair = to_pair(&f);
                for c in 0..2 {
                    let x = Context::new(c, 1);
                    prop_assert_eq!(predicted_value(&f, x).unwrap(), pair.greedy_value(x));
                }
                prop_assert_eq!(pair.policy(), f.policy());
            }
        }
    }
}
