//! Linear forms, polar functions, edge speeds, and the drift search.
//!
//! Everything here is exact rational arithmetic. Edge-speed ties at zero
//! are meaningful (they separate eroders from shrinkers), so no floats.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::automaton::{MonotoneMap, RuleFamily};
use crate::rat::{zero, Rat};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("linear form must not be identically zero")]
    ZeroForm,
    #[error("a polar function needs at least two forms")]
    TooFewForms,
    #[error("polar closure violated: coefficients of the forms do not sum to zero")]
    NotClosed,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("worst-case condition fails: sum of worst-case edge speeds is {0}")]
    Infeasible(String),
    #[error("degenerate boundary system while constructing the drift")]
    SolveFailed,
}

/// A linear form on R^d with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearForm {
    coeffs: Vec<Rat>,
}

impl LinearForm {
    pub fn new(coeffs: Vec<Rat>) -> Result<Self, GeometryError> {
        if coeffs.iter().all(|c| c.is_zero()) {
            return Err(GeometryError::ZeroForm);
        }
        Ok(LinearForm { coeffs })
    }

    /// Zero forms are allowed inside polar tuples and Farkas systems.
    pub fn new_allow_zero(coeffs: Vec<Rat>) -> Self {
        LinearForm { coeffs }
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval_int(&self, z: &[i64]) -> Rat {
        debug_assert_eq!(z.len(), self.coeffs.len());
        self.coeffs
            .iter()
            .zip(z)
            .map(|(c, &x)| c * Rat::from_integer(x.into()))
            .sum()
    }

    pub fn eval_rat(&self, z: &[Rat]) -> Rat {
        debug_assert_eq!(z.len(), self.coeffs.len());
        self.coeffs.iter().zip(z).map(|(c, x)| c * x).sum()
    }

    pub fn scaled(&self, factor: &Rat) -> LinearForm {
        LinearForm { coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }
}

/// sigma >= 2 spatial forms summing to zero coefficient-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialPolar {
    forms: Vec<LinearForm>,
}

impl SpatialPolar {
    pub fn new(forms: Vec<LinearForm>) -> Result<Self, GeometryError> {
        if forms.len() < 2 {
            return Err(GeometryError::TooFewForms);
        }
        let d = forms[0].dim();
        if forms.iter().any(|f| f.dim() != d) {
            return Err(GeometryError::DimensionMismatch { expected: d, got: 0 });
        }
        for j in 0..d {
            let col: Rat = forms.iter().map(|f| f.coeffs[j].clone()).sum();
            if !col.is_zero() {
                return Err(GeometryError::NotClosed);
            }
        }
        Ok(SpatialPolar { forms })
    }

    pub fn forms(&self) -> &[LinearForm] {
        &self.forms
    }

    pub fn sigma(&self) -> usize {
        self.forms.len()
    }

    pub fn dim(&self) -> usize {
        self.forms[0].dim()
    }
}

/// A spatial polar lifted to space-time along a drift:
/// `L_s(i, t) = base_s(i + v t)`. Group-linear on Z^d x Z by construction,
/// and the forms still sum to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceTimePolar {
    pub base: SpatialPolar,
    pub drift: Vec<Rat>,
}

impl SpaceTimePolar {
    pub fn new(base: SpatialPolar, drift: Vec<Rat>) -> Result<Self, GeometryError> {
        if drift.len() != base.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: base.dim(),
                got: drift.len(),
            });
        }
        Ok(SpaceTimePolar { base, drift })
    }

    pub fn without_drift(base: SpatialPolar) -> Self {
        let d = base.dim();
        SpaceTimePolar { base, drift: vec![zero(); d] }
    }

    pub fn sigma(&self) -> usize {
        self.base.sigma()
    }

    pub fn spatial_dim(&self) -> usize {
        self.base.dim()
    }

    /// Evaluates L_s at a space-time point (spatial coords, then time).
    pub fn eval(&self, s: usize, point: &[i64]) -> Rat {
        let d = self.spatial_dim();
        debug_assert_eq!(point.len(), d + 1);
        let t = Rat::from_integer(point[d].into());
        let shifted: Vec<Rat> = (0..d)
            .map(|j| Rat::from_integer(point[j].into()) + &self.drift[j] * &t)
            .collect();
        self.base.forms[s].eval_rat(&shifted)
    }
}

/// Exact edge speed: max over minimal one-sets of the min of the form.
pub fn edge_speed(map: &MonotoneMap, form: &LinearForm) -> Rat {
    map.one_sets()
        .iter()
        .map(|a| a.members().iter().map(|i| form.eval_int(i)).min().unwrap())
        .max()
        .unwrap()
}

/// Edge speed of the dynamics followed by a shift over -v per step; equals
/// `edge_speed - form(v)` by linearity.
pub fn compensated_edge_speed(map: &MonotoneMap, form: &LinearForm, v: &[Rat]) -> Rat {
    edge_speed(map, form) - form.eval_rat(v)
}

#[derive(Debug, Clone)]
pub struct WorstCaseReport {
    /// min over maps of the edge speed, per form
    pub worst_speeds: Vec<Rat>,
    pub sum: Rat,
    pub holds: bool,
}

/// Worst-case condition: the worst-case edge speeds over the family sum to
/// a strictly positive value.
pub fn check_worst_case_condition(family: &RuleFamily, polar: &SpatialPolar) -> WorstCaseReport {
    let worst_speeds: Vec<Rat> = polar
        .forms()
        .iter()
        .map(|form| family.maps().iter().map(|m| edge_speed(m, form)).min().unwrap())
        .collect();
    let sum: Rat = worst_speeds.iter().cloned().sum();
    let holds = sum > zero();
    WorstCaseReport { worst_speeds, sum, holds }
}

/// A single map is a shrinker for the given polar iff all edge speeds are
/// nonnegative and their sum is positive.
pub fn check_shrinker(map: &MonotoneMap, polar: &SpatialPolar) -> bool {
    let speeds: Vec<Rat> = polar.forms().iter().map(|f| edge_speed(map, f)).collect();
    speeds.iter().all(|s| *s >= zero()) && speeds.iter().cloned().sum::<Rat>() > zero()
}

/// Outcome of the alternative for the system `forms_s(z) >= eps_s`.
#[derive(Debug, Clone)]
pub enum FarkasOutcome {
    /// A point satisfying every inequality.
    Point(Vec<Rat>),
    /// Nonnegative multipliers with sum(lambda_s forms_s) = 0 and
    /// sum(lambda_s eps_s) > 0; certifies infeasibility.
    Multipliers(Vec<Rat>),
}

struct Row {
    a: Vec<Rat>,
    b: Rat,
    mult: Vec<Rat>,
}

impl Row {
    fn clone_row(&self) -> Row {
        Row { a: self.a.clone(), b: self.b.clone(), mult: self.mult.clone() }
    }
}

/// Fourier-Motzkin elimination with multiplier tracking. Total on any
/// finite system; exponential only in the (tiny) sizes used here.
pub fn farkas_alternative(forms: &[LinearForm], eps: &[Rat]) -> FarkasOutcome {
    assert!(!forms.is_empty() && forms.len() == eps.len());
    let d = forms[0].dim();
    let n = forms.len();
    let mut rows: Vec<Row> = forms
        .iter()
        .zip(eps)
        .enumerate()
        .map(|(s, (f, e))| {
            let mut mult = vec![zero(); n];
            mult[s] = Rat::from_integer(1.into());
            Row { a: f.coeffs().to_vec(), b: e.clone(), mult }
        })
        .collect();

    // snapshots[j] = system involving only variables 0..=j
    let mut snapshots: Vec<Vec<Row>> = Vec::with_capacity(d);
    for j in (0..d).rev() {
        snapshots.push(rows.iter().map(Row::clone_row).collect());
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut rest = Vec::new();
        for row in rows {
            if row.a[j].is_positive() {
                pos.push(row);
            } else if row.a[j].is_negative() {
                neg.push(row);
            } else {
                rest.push(row);
            }
        }
        for p in &pos {
            for q in &neg {
                // p.a[j] * q + (-q.a[j]) * p cancels variable j
                let cp = -q.a[j].clone();
                let cq = p.a[j].clone();
                let a: Vec<Rat> =
                    (0..d).map(|k| &p.a[k] * &cp + &q.a[k] * &cq).collect();
                let b = &p.b * &cp + &q.b * &cq;
                let mult: Vec<Rat> =
                    (0..n).map(|k| &p.mult[k] * &cp + &q.mult[k] * &cq).collect();
                rest.push(Row { a, b, mult });
            }
        }
        rows = rest;
    }
    snapshots.reverse(); // snapshots[j] now has variables 0..=j

    // all variables eliminated: rows read 0 >= b
    for row in &rows {
        if row.b.is_positive() {
            return FarkasOutcome::Multipliers(row.mult.clone());
        }
    }

    // feasible: back-substitute from variable 0 upward
    let mut z = vec![zero(); d];
    for j in 0..d {
        let mut lower: Option<Rat> = None;
        let mut upper: Option<Rat> = None;
        for row in &snapshots[j] {
            if row.a[j].is_zero() {
                continue;
            }
            let partial: Rat = (0..j).map(|k| &row.a[k] * &z[k]).sum();
            let bound = (&row.b - partial) / &row.a[j];
            if row.a[j].is_positive() {
                lower = Some(match lower {
                    Some(l) if l >= bound => l,
                    _ => bound,
                });
            } else {
                upper = Some(match upper {
                    Some(u) if u <= bound => u,
                    _ => bound,
                });
            }
        }
        z[j] = match (lower, upper) {
            (Some(l), _) => l,
            (None, Some(u)) => u,
            (None, None) => zero(),
        };
    }
    FarkasOutcome::Point(z)
}

/// Verifies whichever branch the alternative returned, exactly.
pub fn verify_farkas(forms: &[LinearForm], eps: &[Rat], outcome: &FarkasOutcome) -> bool {
    match outcome {
        FarkasOutcome::Point(z) => {
            forms.iter().zip(eps).all(|(f, e)| f.eval_rat(z) >= *e)
        }
        FarkasOutcome::Multipliers(lam) => {
            if lam.iter().any(|l| l.is_negative()) {
                return false;
            }
            let d = forms[0].dim();
            let combo_zero = (0..d).all(|k| {
                forms
                    .iter()
                    .zip(lam)
                    .map(|(f, l)| &f.coeffs()[k] * l)
                    .sum::<Rat>()
                    .is_zero()
            });
            let gain: Rat = eps.iter().zip(lam).map(|(e, l)| e * l).sum();
            combo_zero && gain.is_positive()
        }
    }
}

/// A reduced polar with strictly positive compensated worst-case speeds.
#[derive(Debug, Clone)]
pub struct DriftReduction {
    /// indices of the retained forms in the input polar
    pub selected: Vec<usize>,
    /// scaling multipliers applied to the retained forms
    pub multipliers: Vec<Rat>,
    pub reduced: SpatialPolar,
    pub drift: Vec<Rat>,
    /// compensated speeds [s][k] of the reduced polar, all > 0
    pub compensated: Vec<Vec<Rat>>,
}

/// Solves `rows * v = rhs` for any one exact solution (free variables 0).
fn solve_linear(rows: &[Vec<Rat>], rhs: &[Rat], d: usize) -> Option<Vec<Rat>> {
    let mut m: Vec<Vec<Rat>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.push(b.clone());
            row
        })
        .collect();
    let nrows = m.len();
    let mut pivot_cols = Vec::new();
    let mut rank = 0usize;
    for col in 0..d {
        let Some(p) = (rank..nrows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].clone().recip();
        for x in m[rank].iter_mut() {
            *x *= &inv;
        }
        for r in 0..nrows {
            if r != rank && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in 0..=d {
                    let delta = &m[rank][c] * &factor;
                    m[r][c] -= delta;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == nrows {
            break;
        }
    }
    // inconsistent row: 0 = nonzero
    for row in &m[rank..] {
        if !row[d].is_zero() {
            return None;
        }
    }
    let mut v = vec![zero(); d];
    for (r, &col) in pivot_cols.iter().enumerate() {
        v[col] = m[r][d].clone();
    }
    Some(v)
}

/// Constructive drift search: picks the smallest (then lexicographically
/// first) subsystem of half-spaces with empty intersection, rescales its
/// forms by the Farkas multipliers, and averages one boundary point per
/// form. The result is post-verified: every compensated edge speed of the
/// reduced polar is strictly positive for every map of the family.
pub fn find_drift(
    family: &RuleFamily,
    polar: &SpatialPolar,
) -> Result<DriftReduction, GeometryError> {
    let report = check_worst_case_condition(family, polar);
    if !report.holds {
        return Err(GeometryError::Infeasible(report.sum.to_string()));
    }
    let sigma = polar.sigma();
    let d = polar.dim();
    let eps = &report.worst_speeds;

    let mut chosen: Option<(Vec<usize>, Vec<Rat>)> = None;
    'outer: for size in 2..=sigma {
        for subset in subsets_of_size(sigma, size) {
            let forms: Vec<LinearForm> =
                subset.iter().map(|&s| polar.forms()[s].clone()).collect();
            let sub_eps: Vec<Rat> = subset.iter().map(|&s| eps[s].clone()).collect();
            if let FarkasOutcome::Multipliers(lam) = farkas_alternative(&forms, &sub_eps) {
                chosen = Some((subset, lam));
                break 'outer;
            }
        }
    }
    let (selected, lam) = chosen.ok_or(GeometryError::SolveFailed)?;
    // minimality forces every multiplier to be strictly positive
    if lam.iter().any(|l| !l.is_positive()) {
        return Err(GeometryError::SolveFailed);
    }

    let scaled: Vec<LinearForm> = selected
        .iter()
        .zip(&lam)
        .map(|(&s, l)| polar.forms()[s].scaled(l))
        .collect();
    let scaled_eps: Vec<Rat> =
        selected.iter().zip(&lam).map(|(&s, l)| &eps[s] * l).collect();
    let reduced = SpatialPolar::new(scaled.clone())?;

    // one boundary point per omitted index, then the average
    let sigma2 = selected.len();
    let mut acc = vec![zero(); d];
    for j in 0..sigma2 {
        let rows: Vec<Vec<Rat>> = (0..sigma2)
            .filter(|&i| i != j)
            .map(|i| scaled[i].coeffs().to_vec())
            .collect();
        let rhs: Vec<Rat> = (0..sigma2)
            .filter(|&i| i != j)
            .map(|i| scaled_eps[i].clone())
            .collect();
        let vj = solve_linear(&rows, &rhs, d).ok_or(GeometryError::SolveFailed)?;
        for (a, x) in acc.iter_mut().zip(&vj) {
            *a += x;
        }
    }
    let inv = Rat::from_integer((sigma2 as i64).into()).recip();
    let drift: Vec<Rat> = acc.into_iter().map(|a| a * &inv).collect();

    let compensated: Vec<Vec<Rat>> = reduced
        .forms()
        .iter()
        .map(|f| {
            family.maps().iter().map(|m| compensated_edge_speed(m, f, &drift)).collect()
        })
        .collect();
    if compensated.iter().flatten().any(|c| !c.is_positive()) {
        return Err(GeometryError::SolveFailed);
    }
    Ok(DriftReduction { selected, multipliers: lam, reduced, drift, compensated })
}

fn subsets_of_size(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, size: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, size, current, out);
            current.pop();
        }
    }
    rec(0, n, size, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{builtin_model, cc_map, coop_map, triangular_maps};
    use crate::rat::{rat, rint};

    fn form(coeffs: &[i64]) -> LinearForm {
        LinearForm::new_allow_zero(coeffs.iter().map(|&c| rint(c)).collect())
    }

    fn coop_polar() -> SpatialPolar {
        SpatialPolar::new(vec![form(&[1, 1]), form(&[-1, -1])]).unwrap()
    }

    fn triangular_polar() -> SpatialPolar {
        SpatialPolar::new(vec![form(&[-1, -1]), form(&[2, -1]), form(&[-1, 2])]).unwrap()
    }

    #[test]
    fn edge_speed_table_triangular() {
        let maps = triangular_maps();
        let polar = triangular_polar();
        for (k, map) in maps.iter().enumerate() {
            for (s, f) in polar.forms().iter().enumerate() {
                let expect = if s == k { rint(1) } else { rint(0) };
                assert_eq!(edge_speed(map, f), expect, "s={s} k={k}");
            }
        }
    }

    #[test]
    fn edge_speed_coop_and_cc() {
        let polar = coop_polar();
        assert_eq!(edge_speed(&coop_map(), &polar.forms()[0]), rint(1));
        assert_eq!(edge_speed(&coop_map(), &polar.forms()[1]), rint(0));
        assert_eq!(edge_speed(&cc_map(), &polar.forms()[0]), rint(1));
        assert_eq!(edge_speed(&cc_map(), &polar.forms()[1]), rint(0));
    }

    #[test]
    fn compensated_speed_translation_identity() {
        let maps = [coop_map(), cc_map()];
        let f = form(&[1, 1]);
        let vs = [vec![rat(1, 4), rat(1, 4)], vec![rat(-1, 2), rint(0)], vec![rint(2), rat(-7, 3)]];
        for m in &maps {
            for v in &vs {
                assert_eq!(
                    compensated_edge_speed(m, &f, v),
                    edge_speed(m, &f) - f.eval_rat(v)
                );
            }
        }
        // identity map shifted by (-1/2, 0)
        let id = builtin_model("coop-id(1/2)", None).unwrap().map(1).clone();
        assert_eq!(compensated_edge_speed(&id, &f, &[rat(-1, 2), rint(0)]), rat(1, 2));
        assert_eq!(compensated_edge_speed(&coop_map(), &f, &[rat(1, 4), rat(1, 4)]), rat(1, 2));
    }

    #[test]
    fn worst_case_and_shrinker() {
        let coop_id = builtin_model("coop-id(1/2)", None).unwrap();
        let rep = check_worst_case_condition(&coop_id, &coop_polar());
        assert_eq!(rep.sum, rint(0));
        assert!(!rep.holds);

        let coop_only = RuleFamily::new(vec![coop_map()], vec![rint(1)]).unwrap();
        let rep = check_worst_case_condition(&coop_only, &coop_polar());
        assert_eq!(rep.sum, rint(1));
        assert!(rep.holds);

        let tri = builtin_model("triangular-majority", None).unwrap();
        let rep = check_worst_case_condition(&tri, &triangular_polar());
        assert_eq!(rep.sum, rint(0));

        assert!(check_shrinker(&cc_map(), &coop_polar()));
        assert!(check_shrinker(&coop_map(), &coop_polar()));
        let id = builtin_model("coop-id(1/2)", None).unwrap().map(1).clone();
        assert!(!check_shrinker(&id, &coop_polar()));
    }

    #[test]
    fn farkas_trivial_cases() {
        let forms = vec![form(&[1]), form(&[-1])];
        match farkas_alternative(&forms, &[rint(0), rint(0)]) {
            FarkasOutcome::Point(z) => assert_eq!(z, vec![rint(0)]),
            _ => panic!("expected a point"),
        }
        match farkas_alternative(&forms, &[rint(1), rint(1)]) {
            FarkasOutcome::Multipliers(lam) => {
                assert!(verify_farkas(&forms, &[rint(1), rint(1)], &FarkasOutcome::Multipliers(lam)));
            }
            _ => panic!("expected multipliers"),
        }
    }

    #[test]
    fn farkas_triangular_infeasible() {
        let polar = triangular_polar();
        let eps = vec![rint(1), rint(1), rint(1)];
        let out = farkas_alternative(polar.forms(), &eps);
        assert!(matches!(out, FarkasOutcome::Multipliers(_)));
        assert!(verify_farkas(polar.forms(), &eps, &out));
    }

    #[test]
    fn drift_for_single_map_coop() {
        let coop_only = RuleFamily::new(vec![coop_map()], vec![rint(1)]).unwrap();
        let red = find_drift(&coop_only, &coop_polar()).unwrap();
        assert_eq!(red.selected, vec![0, 1]);
        for row in &red.compensated {
            for c in row {
                assert!(c.is_positive());
            }
        }
    }

    #[test]
    fn drift_infeasible_for_coop_id() {
        let coop_id = builtin_model("coop-id(1/2)", None).unwrap();
        assert!(matches!(
            find_drift(&coop_id, &coop_polar()),
            Err(GeometryError::Infeasible(_))
        ));
    }

    #[test]
    fn polar_closure_enforced() {
        assert!(SpatialPolar::new(vec![form(&[1, 0]), form(&[0, -1])]).is_err());
        assert!(SpatialPolar::new(vec![form(&[1, 0])]).is_err());
    }

    #[test]
    fn space_time_polar_eval() {
        let base = SpatialPolar::new(vec![form(&[-3, 0]), form(&[0, -3]), form(&[3, 3])]).unwrap();
        let lifted = SpaceTimePolar::new(base, vec![rat(1, 3), rat(1, 3)]).unwrap();
        // values on the NEC neighborhood at the previous slice
        assert_eq!(lifted.eval(0, &[0, 0, -1]), rint(1));
        assert_eq!(lifted.eval(0, &[0, 1, -1]), rint(1));
        assert_eq!(lifted.eval(0, &[1, 0, -1]), rint(-2));
        for s in 0..3 {
            let total: Rat = (0..3).map(|_| rint(0)).sum();
            let _ = (s, total);
        }
        // forms sum to zero at arbitrary points
        for pt in [[2, -1, 3], [0, 0, 5], [-4, 7, -2]] {
            let sum: Rat = (0..3).map(|s| lifted.eval(s, &pt)).sum();
            assert!(sum.is_zero());
        }
    }
}
