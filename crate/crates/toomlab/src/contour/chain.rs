//! The contour-extending Markov chain, its exact law, and the contour
//! measure it realizes.
//!
//! The chain starts from the bare decorated root and repeatedly extends
//! the most urgent loose end: charges below the last grow an edge downward
//! in time ("upward" in height) from the loose vertex; the last charge
//! grows an edge upward in time into the loose vertex, choosing with
//! probability p_circ to create a new source and otherwise a new internal
//! vertex (or to close into the root). Every draw is a subprobability:
//! missing mass, embedding clashes, and the step cap all land in the
//! cemetery.
//!
//! `nu_value` computes the measure of a finished contour directly from
//! its definition (first-visit vertex types via the natural order); the
//! chain and the formula are checked against each other exactly by
//! `exact_chain_distribution`.

use std::collections::{BTreeSet, HashMap};

use num_traits::One;

use super::order::{first_visit_types, SiteType};
use super::{
    ChargeSets, Contour, ContourError, DecorationMode, DecoratedContour, Num, Site, ToomGraph,
    VKind,
};
use crate::rat::{to_f64, Rat};
use crate::rng::Stream;

impl Num {
    fn mul(&self, other: &Num) -> Num {
        Num {
            f: self.f * other.f,
            exact: match (&self.exact, &other.exact) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            },
        }
    }

    fn one_minus(&self) -> Num {
        Num {
            f: 1.0 - self.f,
            exact: self.exact.as_ref().map(|r| Rat::one() - r),
        }
    }

    fn div(&self, other: &Num) -> Num {
        Num {
            f: self.f / other.f,
            exact: match (&self.exact, &other.exact) {
                (Some(a), Some(b)) => Some(a / b),
                _ => None,
            },
        }
    }

    fn powi(&self, n: usize) -> Num {
        Num {
            f: self.f.powi(n as i32),
            exact: self.exact.as_ref().map(|r| r.pow(n as i32)),
        }
    }
}

/// Weighted target list for one (charge, decoration) pair.
pub type WeightRow = Vec<(Site, Num)>;

/// Everything the chain and the contour measure need: the chosen sets, the
/// edge weight tables, the tilted decoration distributions, and the
/// normalizers of the last charge's weight tables.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub sets: ChargeSets,
    pub mode: DecorationMode,
    /// intrinsic distribution of the underlying family (for presence
    /// probabilities; not used by the chain itself)
    pub intrinsic: Vec<Num>,
    /// bullet[s][k-1]: weights on the chosen set of charge s, map k
    pub bullet: Vec<Vec<WeightRow>>,
    /// circ[s][k-1]: weights on the source-edge target set of charge s, map k
    pub circ: Vec<Vec<WeightRow>>,
    /// rhat_charge[s][k-1]: decoration law at sites first visited by charge s
    /// (the root counts as charge 0)
    pub rhat_charge: Vec<Vec<Num>>,
    /// decoration law at sites first visited by a non-root source
    pub rhat_source: Vec<Num>,
    pub b_bullet: Num,
    pub b_circ: Num,
}

fn weight_normalizer(rows: &[WeightRow]) -> Num {
    // sum over target sites of the per-map supremum of the weight
    let mut suprema: HashMap<Site, Num> = HashMap::new();
    for row in rows {
        for (site, w) in row {
            match suprema.get(site) {
                Some(cur) if cur.f >= w.f => {}
                _ => {
                    suprema.insert(site.clone(), w.clone());
                }
            }
        }
    }
    let f: f64 = suprema.values().map(|w| w.f).sum();
    let exact = suprema
        .values()
        .map(|w| w.exact.clone())
        .collect::<Option<Vec<Rat>>>()
        .map(|v| v.into_iter().sum());
    Num { f, exact }
}

impl ChainSpec {
    pub fn new(
        sets: ChargeSets,
        mode: DecorationMode,
        intrinsic: Vec<Num>,
        bullet: Vec<Vec<WeightRow>>,
        circ: Vec<Vec<WeightRow>>,
        rhat_charge: Vec<Vec<Num>>,
        rhat_source: Vec<Num>,
    ) -> Result<Self, ContourError> {
        if mode == DecorationMode::Cycle && sets.sigma != 2 {
            return Err(ContourError::CycleModeSigma(sets.sigma));
        }
        let check_support = |rows: &Vec<Vec<WeightRow>>, circ_mode: bool| -> Result<(), ContourError> {
            for (s, per_k) in rows.iter().enumerate() {
                for (ki, row) in per_k.iter().enumerate() {
                    let k = (ki + 1) as u8;
                    let target = if circ_mode {
                        sets.source_target(mode, s, k)
                    } else {
                        sets.a_set(s, k).to_vec()
                    };
                    let mut total = 0.0;
                    for (site, w) in row {
                        if !target.contains(site) {
                            return Err(ContourError::Invalid(format!(
                                "weight support {site:?} outside the target set (charge {}, map {k})",
                                s + 1
                            )));
                        }
                        if w.f < 0.0 {
                            return Err(ContourError::Invalid("negative weight".into()));
                        }
                        total += w.f;
                    }
                    if total > 1.0 + 1e-12 {
                        return Err(ContourError::Invalid(format!(
                            "weights of charge {}, map {k} sum to {total} > 1",
                            s + 1
                        )));
                    }
                }
            }
            Ok(())
        };
        check_support(&bullet, false)?;
        check_support(&circ, true)?;
        let b_bullet = weight_normalizer(&bullet[sets.sigma - 1]);
        let b_circ = weight_normalizer(&circ[sets.sigma - 1]);
        Ok(ChainSpec {
            sets,
            mode,
            intrinsic,
            bullet,
            circ,
            rhat_charge,
            rhat_source,
            b_bullet,
            b_circ,
        })
    }

    pub fn sigma(&self) -> usize {
        self.sets.sigma
    }

    pub fn m(&self) -> usize {
        self.sets.m
    }

    fn weight_of(&self, bullet: bool, s: usize, k: u8, j: &Site) -> Option<&Num> {
        let rows = if bullet { &self.bullet } else { &self.circ };
        rows[s][(k - 1) as usize].iter().find(|(site, _)| site == j).map(|(_, w)| w)
    }
}

/// Sink/noise parameters of the chain: p_hat decorates fresh sites as
/// defects, p_circ picks source over internal extensions of the last
/// charge.
#[derive(Debug, Clone)]
pub struct ChainParams {
    pub p_hat: Num,
    pub p_circ: Num,
}

impl ChainParams {
    pub fn from_f64(p_hat: f64, p_circ: f64) -> Self {
        ChainParams { p_hat: Num::from_f64(p_hat), p_circ: Num::from_f64(p_circ) }
    }

    pub fn from_rat(p_hat: Rat, p_circ: Rat) -> Self {
        ChainParams { p_hat: Num::from_rat(p_hat), p_circ: Num::from_rat(p_circ) }
    }
}

// -------------------------------------------------------------------------
// chain state

#[derive(Debug, Clone)]
pub(super) struct SiteInfo {
    pub(super) kappa: u8,
    sink_vertex: Option<u32>,
    /// some internal vertex of this charge is embedded here
    internal_here: Vec<bool>,
    /// some image edge of this charge points here
    charge_in: Vec<bool>,
    /// highest cycle rank embedded so far (0 = first charge or root,
    /// 1 = source, 2 = last charge); only meaningful in cycle mode
    max_rank: u8,
}

#[derive(Debug, Clone)]
pub(super) struct ChainState {
    pub(super) sigma: usize,
    pub(super) kinds: Vec<VKind>,
    pub(super) psi: Vec<Site>,
    pub(super) out_e: Vec<Vec<Option<u32>>>,
    pub(super) in_e: Vec<Vec<Option<u32>>>,
    pub(super) edges: Vec<(u32, u32, u8)>,
    pub(super) sites: HashMap<Site, SiteInfo>,
    pub(super) loose: BTreeSet<(u8, u32)>,
}

impl ChainState {
    pub(super) fn start(sigma: usize, dim: usize, root_kappa: u8) -> ChainState {
        let origin = vec![0i64; dim + 1];
        let mut sites = HashMap::new();
        let (kind, loose): (VKind, BTreeSet<(u8, u32)>) = if root_kappa == 0 {
            (VKind::Isolated, BTreeSet::new())
        } else {
            (VKind::Source, (0..sigma as u8 - 1).map(|s| (s, 0u32)).collect())
        };
        sites.insert(
            origin.clone(),
            SiteInfo {
                kappa: root_kappa,
                sink_vertex: if root_kappa == 0 { Some(0) } else { None },
                internal_here: vec![false; sigma],
                charge_in: vec![false; sigma],
                max_rank: 0,
            },
        );
        ChainState {
            sigma,
            kinds: vec![kind],
            psi: vec![origin],
            out_e: vec![vec![None; sigma]],
            in_e: vec![vec![None; sigma]],
            edges: Vec::new(),
            sites,
            loose,
        }
    }

    pub(super) fn complete(&self) -> bool {
        self.loose.is_empty()
    }

    pub(super) fn most_urgent(&self) -> (u8, u32) {
        *self.loose.iter().next().expect("called on an incomplete state")
    }

    fn new_vertex(&mut self, kind: VKind, site: Site) -> u32 {
        let w = self.kinds.len() as u32;
        self.kinds.push(kind);
        self.psi.push(site);
        self.out_e.push(vec![None; self.sigma]);
        self.in_e.push(vec![None; self.sigma]);
        w
    }

    fn add_edge(&mut self, from: u32, to: u32, s: u8) {
        self.edges.push((from, to, s));
        self.out_e[from as usize][s as usize] = Some(to);
        self.in_e[to as usize][s as usize] = Some(from);
        let site = self.psi[to as usize].clone();
        self.sites.get_mut(&site).unwrap().charge_in[s as usize] = true;
    }

    fn cycle_rank(kind: VKind) -> u8 {
        match kind {
            VKind::Internal(0) => 0,
            VKind::Source => 1,
            _ => 2,
        }
    }

    pub(super) fn into_contour(self) -> DecoratedContour {
        let mut edges = self.edges;
        edges.sort();
        let kappa = self
            .psi
            .iter()
            .map(|site| (site.clone(), self.sites[site].kappa))
            .collect();
        DecoratedContour {
            contour: Contour {
                graph: ToomGraph { sigma: self.sigma, kinds: self.kinds, edges },
                psi: self.psi,
            },
            kappa,
        }
    }
}

/// One candidate transition together with its draw probability.
#[derive(Debug, Clone)]
pub(super) enum Move {
    /// edge of charge s out of the loose vertex; fresh_kappa decorates a
    /// previously unseen target (0 = new sink)
    Up { j: Site, fresh_kappa: Option<u8> },
    /// new internal vertex of the last charge feeding the loose vertex
    Down { j: Site, k: u8 },
    /// close the last charge into the root's free slot
    DownRoot { j: Site },
    /// new source feeding the loose vertex
    NewSource { j: Site, k: u8 },
}

fn legal_moves(state: &ChainState, spec: &ChainSpec, params: &ChainParams) -> Vec<(Move, Num)> {
    let (s, v) = state.most_urgent();
    let top = (state.sigma - 1) as u8;
    let i = state.psi[v as usize].clone();
    let kappa_i = state.sites[&i].kappa;
    let mut out = Vec::new();
    if s < top {
        let from_source = v != 0 && state.kinds[v as usize] == VKind::Source;
        let rows = if from_source { &spec.circ } else { &spec.bullet };
        // fresh decorations follow the type of the NEW vertex: an internal
        // vertex of charge s, whichever vertex the edge came from
        let rhat = &spec.rhat_charge[s as usize];
        for (j, w) in &rows[s as usize][(kappa_i - 1) as usize] {
            let target = super::site_add(&i, j);
            if state.sites.contains_key(&target) {
                out.push((Move::Up { j: j.clone(), fresh_kappa: None }, w.clone()));
            } else {
                out.push((
                    Move::Up { j: j.clone(), fresh_kappa: Some(0) },
                    w.mul(&params.p_hat),
                ));
                let stay = params.p_hat.one_minus();
                for (ki, rk) in rhat.iter().enumerate() {
                    out.push((
                        Move::Up { j: j.clone(), fresh_kappa: Some((ki + 1) as u8) },
                        w.mul(&stay).mul(rk),
                    ));
                }
            }
        }
    } else {
        let down_factor = params.p_circ.one_minus().div(&spec.b_bullet);
        let source_factor = params.p_circ.div(&spec.b_circ);
        let stay = params.p_hat.one_minus();
        for k in 1..=spec.m() as u8 {
            for (j, w) in &spec.bullet[top as usize][(k - 1) as usize] {
                let target = super::site_sub(&i, j);
                let prob = match state.sites.get(&target) {
                    Some(info) if info.kappa == k => down_factor.mul(w),
                    Some(_) => continue,
                    None => down_factor.mul(&stay).mul(&spec.rhat_charge[top as usize][(k - 1) as usize]).mul(w),
                };
                if target == state.psi[0] {
                    out.push((Move::DownRoot { j: j.clone() }, prob));
                } else {
                    out.push((Move::Down { j: j.clone(), k }, prob));
                }
            }
            for (j, w) in &spec.circ[top as usize][(k - 1) as usize] {
                let target = super::site_sub(&i, j);
                let prob = match state.sites.get(&target) {
                    Some(info) if info.kappa == k => source_factor.mul(w),
                    Some(_) => continue,
                    None => source_factor.mul(&stay).mul(&spec.rhat_source[(k - 1) as usize]).mul(w),
                };
                out.push((Move::NewSource { j: j.clone(), k }, prob));
            }
        }
    }
    out
}

/// Applies a candidate move; Err means the draw clashed with the embedding
/// (cemetery). With `enforce_cycle` the walk-order rules of Toom cycles
/// are enforced on top of the embedding rules (sigma = 2 only).
pub(super) fn apply_move(state: &mut ChainState, enforce_cycle: bool, mv: &Move) -> Result<(), ()> {
    let (s, v) = state.most_urgent();
    let top = (state.sigma - 1) as u8;
    let i = state.psi[v as usize].clone();
    let cycle = enforce_cycle;
    match mv {
        Move::Up { j, fresh_kappa } => {
            let target = super::site_add(&i, j);
            if target == state.psi[0] {
                return Err(()); // the root counts as internal of every charge
            }
            match state.sites.get(&target) {
                Some(info) => {
                    if info.charge_in[s as usize] {
                        return Err(());
                    }
                    if let Some(sink) = info.sink_vertex {
                        state.loose.remove(&(s, v));
                        state.add_edge(v, sink, s);
                    } else {
                        if cycle || info.internal_here[s as usize] {
                            // a later vertex of the lowest type may not share
                            // a site in cycle mode; vanilla only forbids
                            // same-charge overlap
                            return Err(());
                        }
                        let w = state.new_vertex(VKind::Internal(s), target.clone());
                        state.loose.remove(&(s, v));
                        state.add_edge(v, w, s);
                        state.loose.insert((s, w));
                        let info = state.sites.get_mut(&target).unwrap();
                        info.internal_here[s as usize] = true;
                    }
                }
                None => {
                    let kappa = fresh_kappa.expect("fresh target needs a decoration draw");
                    let kind = if kappa == 0 { VKind::Sink } else { VKind::Internal(s) };
                    let w = state.new_vertex(kind, target.clone());
                    state.sites.insert(
                        target.clone(),
                        SiteInfo {
                            kappa,
                            sink_vertex: (kappa == 0).then_some(w),
                            internal_here: {
                                let mut v = vec![false; state.sigma];
                                if kappa != 0 {
                                    v[s as usize] = true;
                                }
                                v
                            },
                            charge_in: vec![false; state.sigma],
                            max_rank: if kappa == 0 { 0 } else { ChainState::cycle_rank(kind) },
                        },
                    );
                    state.loose.remove(&(s, v));
                    state.add_edge(v, w, s);
                    state.loose.insert(if kappa == 0 { (top, w) } else { (s, w) });
                }
            }
        }
        Move::DownRoot { j } => {
            let target = super::site_sub(&i, j);
            debug_assert_eq!(target, state.psi[0]);
            if state.out_e[0][top as usize].is_some() {
                return Err(()); // root slot already taken
            }
            state.loose.remove(&(top, v));
            state.add_edge(0, v, top);
        }
        Move::Down { j, k } => {
            let target = super::site_sub(&i, j);
            match state.sites.get_mut(&target) {
                Some(info) => {
                    debug_assert_eq!(info.kappa, *k);
                    if info.sink_vertex.is_some() || info.internal_here[top as usize] {
                        return Err(());
                    }
                    let new_rank = ChainState::cycle_rank(VKind::Internal(top));
                    if cycle && info.max_rank >= new_rank {
                        return Err(());
                    }
                    info.internal_here[top as usize] = true;
                    info.max_rank = info.max_rank.max(new_rank);
                    let w = state.new_vertex(VKind::Internal(top), target);
                    state.loose.remove(&(top, v));
                    state.add_edge(w, v, top);
                    state.loose.insert((top, w));
                }
                None => {
                    let w = state.new_vertex(VKind::Internal(top), target.clone());
                    state.sites.insert(
                        target,
                        SiteInfo {
                            kappa: *k,
                            sink_vertex: None,
                            internal_here: {
                                let mut f = vec![false; state.sigma];
                                f[top as usize] = true;
                                f
                            },
                            charge_in: vec![false; state.sigma],
                            max_rank: ChainState::cycle_rank(VKind::Internal(top)),
                        },
                    );
                    state.loose.remove(&(top, v));
                    state.add_edge(w, v, top);
                    state.loose.insert((top, w));
                }
            }
        }
        Move::NewSource { j, k } => {
            let target = super::site_sub(&i, j);
            match state.sites.get_mut(&target) {
                Some(info) => {
                    debug_assert_eq!(info.kappa, *k);
                    if info.sink_vertex.is_some() {
                        return Err(());
                    }
                    if cycle && info.max_rank >= 1 {
                        return Err(());
                    }
                    info.max_rank = info.max_rank.max(1);
                }
                None => {
                    state.sites.insert(
                        target.clone(),
                        SiteInfo {
                            kappa: *k,
                            sink_vertex: None,
                            internal_here: vec![false; state.sigma],
                            charge_in: vec![false; state.sigma],
                            max_rank: 1,
                        },
                    );
                }
            }
            let w = state.new_vertex(VKind::Source, target);
            state.loose.remove(&(top, v));
            state.add_edge(w, v, top);
            for s2 in 0..top {
                state.loose.insert((s2, w));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CemeteryReason {
    /// a subprobability draw landed in the missing mass
    FailedDraw,
    /// the drawn extension clashed with the embedding rules
    EmbeddingClash,
    /// the step cap was reached with loose ends remaining
    StepCap,
}

#[derive(Debug, Clone)]
pub enum ChainOutcome {
    Completed { contour: DecoratedContour, steps: usize },
    Cemetery { reason: CemeteryReason, steps: usize },
}

/// One run of the chain with a dedicated random stream per `run` index.
/// `enforce_cycle_order` restricts the sampler to decorated Toom cycles
/// (the extension fails on any walk-order violation); the plain chain
/// passes `false`.
pub fn sample_contour(
    spec: &ChainSpec,
    params: &ChainParams,
    seed: u64,
    run: u64,
    max_steps: usize,
    enforce_cycle_order: bool,
) -> ChainOutcome {
    let mut rng = Stream::new(seed, run);
    let u = rng.next_f64();
    let root_kappa = if u < params.p_hat.f {
        0
    } else {
        let mut rest = (u - params.p_hat.f) / (1.0 - params.p_hat.f);
        let mut k = spec.m() as u8;
        for (ki, rk) in spec.rhat_charge[0].iter().enumerate() {
            if rest < rk.f {
                k = (ki + 1) as u8;
                break;
            }
            rest -= rk.f;
        }
        k
    };
    let mut state = ChainState::start(spec.sigma(), spec.sets.dim, root_kappa);
    let mut steps = 0usize;
    while !state.complete() {
        if steps >= max_steps {
            return ChainOutcome::Cemetery { reason: CemeteryReason::StepCap, steps };
        }
        let moves = legal_moves(&state, spec, params);
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut chosen = None;
        for (mv, prob) in &moves {
            acc += prob.f;
            if u < acc {
                chosen = Some(mv.clone());
                break;
            }
        }
        let Some(mv) = chosen else {
            return ChainOutcome::Cemetery { reason: CemeteryReason::FailedDraw, steps };
        };
        if apply_move(&mut state, enforce_cycle_order, &mv).is_err() {
            return ChainOutcome::Cemetery { reason: CemeteryReason::EmbeddingClash, steps };
        }
        steps += 1;
    }
    ChainOutcome::Completed { contour: state.into_contour(), steps }
}

/// Exhaustive branch enumeration of the chain up to a step cap, with exact
/// rational probabilities. Requires exact weights and parameters.
#[derive(Debug)]
pub struct ExactDistribution {
    /// completed contours (already in natural order) with their exact law
    pub contours: Vec<(DecoratedContour, Rat, usize)>,
    pub completed_mass: Rat,
    pub states_explored: usize,
}

pub fn exact_chain_distribution(
    spec: &ChainSpec,
    params: &ChainParams,
    depth_cap: usize,
    state_budget: usize,
) -> Result<ExactDistribution, ContourError> {
    let p_hat = params.p_hat.exact()?.clone();
    let mut dist = ExactDistribution {
        contours: Vec::new(),
        completed_mass: Rat::from_integer(0.into()),
        states_explored: 0,
    };
    // initial draws
    let triv = ChainState::start(spec.sigma(), spec.sets.dim, 0);
    dist.completed_mass += &p_hat;
    dist.contours.push((triv.into_contour(), p_hat.clone(), 0));
    let stay = Rat::one() - &p_hat;
    for k in 1..=spec.m() as u8 {
        let pk = &stay * spec.rhat_charge[0][(k - 1) as usize].exact()?;
        let state = ChainState::start(spec.sigma(), spec.sets.dim, k);
        explore(spec, params, state, pk, 0, depth_cap, state_budget, &mut dist)?;
    }
    Ok(dist)
}

fn explore(
    spec: &ChainSpec,
    params: &ChainParams,
    state: ChainState,
    prob: Rat,
    steps: usize,
    depth_cap: usize,
    budget: usize,
    dist: &mut ExactDistribution,
) -> Result<(), ContourError> {
    dist.states_explored += 1;
    if dist.states_explored > budget {
        return Err(ContourError::Explosion(budget));
    }
    if state.complete() {
        dist.completed_mass += &prob;
        dist.contours.push((state.into_contour(), prob, steps));
        return Ok(());
    }
    if steps >= depth_cap {
        return Ok(());
    }
    for (mv, p) in legal_moves(&state, spec, params) {
        let branch = &prob * p.exact()?;
        let mut next = state.clone();
        if apply_move(&mut next, false, &mv).is_ok() {
            explore(spec, params, next, branch, steps + 1, depth_cap, budget, dist)?;
        }
    }
    Ok(())
}

// -------------------------------------------------------------------------
// the measure, evaluated from its formula

fn nu_parts(
    dec: &DecoratedContour,
    spec: &ChainSpec,
    params: &ChainParams,
) -> Result<Vec<Num>, ContourError> {
    let c = &dec.contour;
    let g = &c.graph;
    let types = first_visit_types(dec)?;
    let mut parts: Vec<Num> = Vec::new();
    parts.push(params.p_hat.powi(c.n_star()));
    parts.push(params.p_hat.one_minus().powi(c.n_diamond()));
    for (site, ty) in &types {
        let kappa = dec.kappa_at(site).unwrap_or(0);
        match ty {
            SiteType::Sink => {}
            SiteType::Source => {
                if kappa == 0 {
                    return Err(ContourError::Invalid("defective non-sink site".into()));
                }
                parts.push(spec.rhat_source[(kappa - 1) as usize].clone());
            }
            SiteType::Charge(s) => {
                if kappa == 0 {
                    return Err(ContourError::Invalid("defective non-sink site".into()));
                }
                parts.push(spec.rhat_charge[*s as usize][(kappa - 1) as usize].clone());
            }
        }
    }
    for &(v, w, s) in &g.edges {
        let i = &c.psi[v as usize];
        let j = super::site_sub(&c.psi[w as usize], i);
        let kappa = dec.kappa_at(i).ok_or_else(|| ContourError::Invalid("undecorated".into()))?;
        if kappa == 0 {
            return Err(ContourError::Invalid("edge out of a defect".into()));
        }
        let from_bullet = v == 0 || matches!(g.kinds[v as usize], VKind::Internal(c2) if c2 == s);
        let weight = spec
            .weight_of(from_bullet, s as usize, kappa, &j)
            .cloned()
            .unwrap_or(Num { f: 0.0, exact: Some(Rat::from_integer(0.into())) });
        parts.push(weight);
    }
    let n_circ = c.n_circ();
    let n_bullet = c.n_bullet();
    parts.push(params.p_circ.powi(n_circ));
    parts.push(params.p_circ.one_minus().powi(n_bullet));
    parts.push(Num::from_f64(1.0).div(&spec.b_circ).powi(n_circ));
    parts.push(Num::from_f64(1.0).div(&spec.b_bullet).powi(n_bullet));
    Ok(parts)
}

/// Contour measure, floating point.
pub fn nu_value(dec: &DecoratedContour, spec: &ChainSpec, params: &ChainParams) -> f64 {
    match nu_parts(dec, spec, params) {
        Ok(parts) => parts.iter().map(|p| p.f).product(),
        Err(_) => 0.0,
    }
}

/// Contour measure, exact; fails unless the spec and parameters are exact.
pub fn nu_value_exact(
    dec: &DecoratedContour,
    spec: &ChainSpec,
    params: &ChainParams,
) -> Result<Rat, ContourError> {
    let c = &dec.contour;
    let p_hat = params.p_hat.exact()?;
    let p_circ = params.p_circ.exact()?;
    let mut total = p_hat.pow(c.n_star() as i32) * (Rat::one() - p_hat).pow(c.n_diamond() as i32);
    let types = first_visit_types(dec)?;
    for (site, ty) in &types {
        let kappa = dec.kappa_at(site).unwrap_or(0);
        match ty {
            SiteType::Sink => {}
            SiteType::Source => total *= spec.rhat_source[(kappa - 1) as usize].exact()?,
            SiteType::Charge(s) => {
                total *= spec.rhat_charge[*s as usize][(kappa - 1) as usize].exact()?
            }
        }
    }
    for &(v, w, s) in &c.graph.edges {
        let i = &c.psi[v as usize];
        let j = super::site_sub(&c.psi[w as usize], i);
        let kappa = dec.kappa_at(i).unwrap();
        let from_bullet =
            v == 0 || matches!(c.graph.kinds[v as usize], VKind::Internal(c2) if c2 == s);
        match spec.weight_of(from_bullet, s as usize, kappa, &j) {
            Some(wv) => total *= wv.exact()?,
            None => return Ok(Rat::from_integer(0.into())),
        }
    }
    let n_circ = c.n_circ();
    let n_bullet = c.n_bullet();
    total *= p_circ.pow(n_circ as i32);
    total *= (Rat::one() - p_circ).pow(n_bullet as i32);
    total /= spec.b_circ.exact()?.pow(n_circ as i32);
    total /= spec.b_bullet.exact()?.pow(n_bullet as i32);
    Ok(total)
}

/// Convenience: floating view of an exact weight row.
pub fn to_f64_row(row: &[(Site, Rat)]) -> WeightRow {
    row.iter().map(|(s, r)| (s.clone(), Num { f: to_f64(r), exact: Some(r.clone()) })).collect()
}


#[cfg(test)]
mod chain_mass_tests {
    use super::tests::coop_chain_spec;
    use super::*;
    use crate::rat::rat;

    #[test]
    fn depth_zero_law_and_mass_bounds() {
        let spec = coop_chain_spec();
        let params = ChainParams::from_rat(rat(3, 10), rat(1, 2));
        let d0 = exact_chain_distribution(&spec, &params, 0, 1000).unwrap();
        assert_eq!(d0.contours.len(), 1);
        assert_eq!(d0.contours[0].1, rat(3, 10));
        assert_eq!(d0.contours[0].0.contour.graph.n_vertices(), 1);
        // completed mass grows with depth but never exceeds one
        let mut last = Rat::from_integer(0.into());
        for depth in [0, 2, 4, 6] {
            let d = exact_chain_distribution(&spec, &params, depth, 1_000_000).unwrap();
            assert!(d.completed_mass >= last);
            assert!(d.completed_mass <= Rat::from_integer(1.into()));
            last = d.completed_mass;
        }
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let spec = coop_chain_spec();
        let params = ChainParams::from_rat(rat(3, 10), rat(1, 2));
        assert!(matches!(
            exact_chain_distribution(&spec, &params, 8, 50),
            Err(ContourError::Explosion(50))
        ));
    }
}
