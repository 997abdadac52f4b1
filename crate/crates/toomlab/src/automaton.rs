//! Monotone local maps, rule families, and the noisy automaton model.
//!
//! A monotone map is stored as the antichain of its minimal one-sets: the
//! inclusion-minimal supports that force output 1. All other quantities in
//! the crate (edge speeds, certificate sets, dependence graphs) are defined
//! directly in terms of these sets. Neighborhoods live at the previous time
//! slice; the time coordinate is implicit in this module.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rat::{rat, Rat};

/// Lattice offset in Z^d.
pub type SpatialVector = Vec<i64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("one-set may not be empty")]
    EmptyOneSet,
    #[error("a monotone map needs at least one one-set")]
    NoOneSets,
    #[error("one-sets must form an antichain: set {0} contains set {1}")]
    NotAntichain(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("predicate is not monotone: adding {witness:?} flips output 1 -> 0")]
    NonMonotone { witness: SpatialVector },
    #[error("predicate is constant {0}; constant maps are handled by the noise channel")]
    ConstantMap(u8),
    #[error("neighborhood too large for exhaustive construction ({0} > {1} cells)")]
    NeighborhoodTooLarge(usize, usize),
    #[error("intrinsic probabilities must be positive and sum to 1")]
    BadIntrinsicProbs,
    #[error("all maps in a family must share the dimension")]
    MixedDimensions,
    #[error("noise level must lie in [0,1]")]
    BadNoise,
    #[error("unknown builtin model `{0}`")]
    UnknownModel(String),
}

/// A finite set of sites whose joint occupation forces output 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OneSet {
    members: Vec<SpatialVector>,
}

impl OneSet {
    pub fn new(mut members: Vec<SpatialVector>) -> Result<Self, AutomatonError> {
        if members.is_empty() {
            return Err(AutomatonError::EmptyOneSet);
        }
        members.sort();
        members.dedup();
        Ok(OneSet { members })
    }

    pub fn members(&self) -> &[SpatialVector] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_subset_of(&self, support: &BTreeSet<SpatialVector>) -> bool {
        self.members.iter().all(|m| support.contains(m))
    }

    fn contains_set(&self, other: &OneSet) -> bool {
        other.members.iter().all(|m| self.members.binary_search(m).is_ok())
    }
}

/// A non-constant monotone local map, given by its minimal one-sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneMap {
    dimension: usize,
    one_sets: Vec<OneSet>,
    neighborhood: Vec<SpatialVector>,
}

impl MonotoneMap {
    pub fn new(dimension: usize, mut one_sets: Vec<OneSet>) -> Result<Self, AutomatonError> {
        if one_sets.is_empty() {
            return Err(AutomatonError::NoOneSets);
        }
        for set in &one_sets {
            for m in set.members() {
                if m.len() != dimension {
                    return Err(AutomatonError::DimensionMismatch {
                        expected: dimension,
                        got: m.len(),
                    });
                }
            }
        }
        one_sets.sort();
        one_sets.dedup();
        for i in 0..one_sets.len() {
            for j in 0..one_sets.len() {
                if i != j && one_sets[i].contains_set(&one_sets[j]) {
                    return Err(AutomatonError::NotAntichain(i, j));
                }
            }
        }
        let mut neighborhood: Vec<SpatialVector> =
            one_sets.iter().flat_map(|s| s.members().iter().cloned()).collect();
        neighborhood.sort();
        neighborhood.dedup();
        Ok(MonotoneMap { dimension, one_sets, neighborhood })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn one_sets(&self) -> &[OneSet] {
        &self.one_sets
    }

    /// Union of all minimal one-sets.
    pub fn neighborhood(&self) -> &[SpatialVector] {
        &self.neighborhood
    }

    pub fn radius(&self) -> i64 {
        self.neighborhood
            .iter()
            .flat_map(|v| v.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Value of the map on the given support: 1 iff some one-set is contained.
    pub fn eval(&self, support: &BTreeSet<SpatialVector>) -> bool {
        self.one_sets.iter().any(|s| s.is_subset_of(support))
    }
}

const MAX_EXHAUSTIVE_NEIGHBORHOOD: usize = 20;

/// Builds the antichain of minimal one-sets of a monotone predicate on the
/// subsets of `neighborhood`. Monotonicity is checked exhaustively; the
/// neighborhood is capped at 20 cells, beyond which one-sets must be given
/// directly.
pub fn minimal_one_sets_from_predicate<F>(
    dimension: usize,
    neighborhood: &[SpatialVector],
    predicate: F,
) -> Result<MonotoneMap, AutomatonError>
where
    F: Fn(&BTreeSet<SpatialVector>) -> bool,
{
    let mut cells: Vec<SpatialVector> = neighborhood.to_vec();
    cells.sort();
    cells.dedup();
    let n = cells.len();
    if n > MAX_EXHAUSTIVE_NEIGHBORHOOD {
        return Err(AutomatonError::NeighborhoodTooLarge(n, MAX_EXHAUSTIVE_NEIGHBORHOOD));
    }
    let as_set = |mask: usize| -> BTreeSet<SpatialVector> {
        (0..n).filter(|i| mask >> i & 1 == 1).map(|i| cells[i].clone()).collect()
    };
    let total = 1usize << n;
    let mut truth = vec![false; total];
    for (mask, slot) in truth.iter_mut().enumerate() {
        *slot = predicate(&as_set(mask));
    }
    // adding one cell may never flip the output from 1 to 0
    for mask in 0..total {
        if !truth[mask] {
            continue;
        }
        for i in 0..n {
            if mask >> i & 1 == 0 && !truth[mask | (1 << i)] {
                return Err(AutomatonError::NonMonotone { witness: cells[i].clone() });
            }
        }
    }
    if truth[0] {
        return Err(AutomatonError::ConstantMap(1));
    }
    if !truth[total - 1] {
        return Err(AutomatonError::ConstantMap(0));
    }
    let mut minimal = Vec::new();
    for mask in 1..total {
        if !truth[mask] {
            continue;
        }
        let is_minimal =
            (0..n).all(|i| mask >> i & 1 == 0 || !truth[mask & !(1 << i)]);
        if is_minimal {
            let members = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| cells[i].clone()).collect();
            minimal.push(OneSet::new(members)?);
        }
    }
    MonotoneMap::new(dimension, minimal)
}

/// The unperturbed dynamics: maps phi_1..phi_m applied with distribution r.
#[derive(Debug, Clone)]
pub struct RuleFamily {
    dimension: usize,
    maps: Vec<MonotoneMap>,
    intrinsic: Vec<Rat>,
}

impl RuleFamily {
    pub fn new(maps: Vec<MonotoneMap>, intrinsic: Vec<Rat>) -> Result<Self, AutomatonError> {
        if maps.is_empty() || maps.len() != intrinsic.len() {
            return Err(AutomatonError::BadIntrinsicProbs);
        }
        let dimension = maps[0].dimension();
        if maps.iter().any(|m| m.dimension() != dimension) {
            return Err(AutomatonError::MixedDimensions);
        }
        let sum: Rat = intrinsic.iter().cloned().sum();
        if !sum.is_one() || intrinsic.iter().any(|r| *r <= Rat::zero()) {
            return Err(AutomatonError::BadIntrinsicProbs);
        }
        Ok(RuleFamily { dimension, maps, intrinsic })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn maps(&self) -> &[MonotoneMap] {
        &self.maps
    }

    pub fn map(&self, k: usize) -> &MonotoneMap {
        &self.maps[k]
    }

    /// Intrinsic distribution r(1..m), exact.
    pub fn intrinsic(&self) -> &[Rat] {
        &self.intrinsic
    }

    pub fn intrinsic_f64(&self) -> Vec<f64> {
        self.intrinsic.iter().map(crate::rat::to_f64).collect()
    }

    pub fn radius(&self) -> i64 {
        self.maps.iter().map(|m| m.radius()).max().unwrap_or(0)
    }
}

/// A rule family perturbed by the zero map with probability p.
#[derive(Debug, Clone)]
pub struct NoisyAutomaton {
    pub family: RuleFamily,
    pub noise: f64,
}

impl NoisyAutomaton {
    pub fn new(family: RuleFamily, noise: f64) -> Result<Self, AutomatonError> {
        if !(0.0..=1.0).contains(&noise) || noise.is_nan() {
            return Err(AutomatonError::BadNoise);
        }
        Ok(NoisyAutomaton { family, noise })
    }
}

fn majority_pairs(cells: [[i64; 2]; 3]) -> Vec<OneSet> {
    let c: Vec<SpatialVector> = cells.iter().map(|v| v.to_vec()).collect();
    vec![
        OneSet::new(vec![c[0].clone(), c[1].clone()]).unwrap(),
        OneSet::new(vec![c[0].clone(), c[2].clone()]).unwrap(),
        OneSet::new(vec![c[1].clone(), c[2].clone()]).unwrap(),
    ]
}

fn identity_map() -> MonotoneMap {
    MonotoneMap::new(2, vec![OneSet::new(vec![vec![0, 0]]).unwrap()]).unwrap()
}

/// North-East-Center majority rule (space-time transformed Toom rule).
pub fn nec_map() -> MonotoneMap {
    MonotoneMap::new(2, majority_pairs([[1, 0], [0, 1], [0, 0]])).unwrap()
}

/// The three majority rules of the triangular-lattice model.
pub fn triangular_maps() -> [MonotoneMap; 3] {
    [
        // south-west-center
        MonotoneMap::new(2, majority_pairs([[0, 0], [0, -1], [-1, 0]])).unwrap(),
        // south-up-center
        MonotoneMap::new(2, majority_pairs([[0, 0], [0, -1], [1, 1]])).unwrap(),
        // west-up-center
        MonotoneMap::new(2, majority_pairs([[0, 0], [-1, 0], [1, 1]])).unwrap(),
    ]
}

/// Cooperative branching: x(0,0) or (x(0,1) and x(1,0)).
pub fn coop_map() -> MonotoneMap {
    MonotoneMap::new(
        2,
        vec![
            OneSet::new(vec![vec![0, 0]]).unwrap(),
            OneSet::new(vec![vec![0, 1], vec![1, 0]]).unwrap(),
        ],
    )
    .unwrap()
}

/// The shrinker of the divergence example: branching pair plus an
/// anti-diagonal triple through the origin.
pub fn cc_map() -> MonotoneMap {
    MonotoneMap::new(
        2,
        vec![
            OneSet::new(vec![vec![0, 1], vec![1, 0]]).unwrap(),
            OneSet::new(vec![vec![-1, 1], vec![0, 0], vec![1, -1]]).unwrap(),
        ],
    )
    .unwrap()
}

/// Degenerate rates drop the unused map rather than violating positivity.
fn two_map_family(first: MonotoneMap, r: Rat) -> Result<RuleFamily, AutomatonError> {
    if r.is_zero() {
        RuleFamily::new(vec![identity_map()], vec![Rat::one()])
    } else if r.is_one() {
        RuleFamily::new(vec![first], vec![Rat::one()])
    } else {
        let rest = Rat::one() - r.clone();
        RuleFamily::new(vec![first, identity_map()], vec![r, rest])
    }
}

/// Built-in model names: `toom-nec`, `triangular-majority`, `coop-id(r)`,
/// `cc-id(r)`. The parametrized names also accept a separate rate argument,
/// e.g. `builtin_model("coop-id", Some(rat(1,2)))`.
pub fn builtin_model(name: &str, rate: Option<Rat>) -> Result<RuleFamily, AutomatonError> {
    let (base, inline_rate) = match name.find('(') {
        Some(i) if name.ends_with(')') => {
            let r = crate::rat::parse_rat(&name[i + 1..name.len() - 1])
                .ok_or_else(|| AutomatonError::UnknownModel(name.to_string()))?;
            (&name[..i], Some(r))
        }
        _ => (name, None),
    };
    let rate = inline_rate.or(rate);
    match base {
        "toom-nec" => RuleFamily::new(vec![nec_map()], vec![Rat::one()]),
        "triangular-majority" => {
            let third = rat(1, 3);
            RuleFamily::new(triangular_maps().to_vec(), vec![third.clone(), third.clone(), third])
        }
        "coop-id" => {
            let r = rate.ok_or_else(|| AutomatonError::UnknownModel(name.to_string()))?;
            two_map_family(coop_map(), r)
        }
        "cc-id" => {
            let r = rate.ok_or_else(|| AutomatonError::UnknownModel(name.to_string()))?;
            two_map_family(cc_map(), r)
        }
        other => Err(AutomatonError::UnknownModel(other.to_string())),
    }
}
