//! Toom graphs, contours, cycles, presence, contour measures, the
//! contour-extending Markov chain, and Peierls sums.
//!
//! Conventions used throughout this module tree:
//!
//! * Space-time points ("sites") are `Vec<i64>` of length d+1 with the
//!   time coordinate last; the height of a site is minus its time, so
//!   charged edges step time by -1 (height +1).
//! * Charges are 0-based internally, `0..sigma`; the last charge
//!   `sigma-1` is the special one whose edges are grown downward by the
//!   chain. Reports and errors print charges 1-based.
//! * The root is always vertex 0 and is embedded at the origin; contours
//!   are translation classes rooted at 0 by construction.
//! * Decorations are per site (not per vertex): `kappa[site] = 0` marks a
//!   defect, `1..=m` picks the local map applied there.

pub mod chain;
pub mod cycle;
pub mod order;
pub mod peierls;
pub mod presence;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_traits::One;
use thiserror::Error;

use crate::geometry::SpaceTimePolar;
use crate::rat::{to_f64, Rat};

pub type Site = Vec<i64>;

pub fn site_add(a: &Site, b: &Site) -> Site {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn site_sub(a: &Site, b: &Site) -> Site {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VKind {
    /// source and sink at once: an isolated vertex
    Isolated,
    Source,
    Sink,
    Internal(u8),
}

impl VKind {
    pub fn is_source(self) -> bool {
        matches!(self, VKind::Source | VKind::Isolated)
    }

    pub fn is_sink(self) -> bool {
        matches!(self, VKind::Sink | VKind::Isolated)
    }
}

#[derive(Debug, Error)]
pub enum ContourError {
    #[error("contour is not connected")]
    NotConnected,
    #[error("invalid contour: {0}")]
    Invalid(String),
    #[error("embedding leaves the realization window")]
    WindowClip,
    #[error("enumeration exceeded its budget of {0} states")]
    Explosion(usize),
    #[error("operation requires exact rational chain parameters")]
    NotExact,
    #[error("cycle mode requires sigma = 2, got {0}")]
    CycleModeSigma(usize),
}

/// A rooted typed directed graph satisfying the Toom degree conditions.
/// Vertex 0 is the root and must be a source.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ToomGraph {
    pub sigma: usize,
    pub kinds: Vec<VKind>,
    /// (from, to, charge), sorted, no duplicates
    pub edges: Vec<(u32, u32, u8)>,
}

impl ToomGraph {
    pub fn trivial(sigma: usize) -> Self {
        ToomGraph { sigma, kinds: vec![VKind::Isolated], edges: Vec::new() }
    }

    pub fn n_vertices(&self) -> usize {
        self.kinds.len()
    }

    pub fn edges_of_charge(&self, s: u8) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().filter(move |e| e.2 == s).map(|e| (e.0, e.1))
    }

    fn degree_tables(&self) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
        let n = self.n_vertices();
        let mut ins = vec![vec![0u32; self.sigma]; n];
        let mut outs = vec![vec![0u32; self.sigma]; n];
        for &(v, w, s) in &self.edges {
            outs[v as usize][s as usize] += 1;
            ins[w as usize][s as usize] += 1;
        }
        (ins, outs)
    }

    /// Checks the Toom degree conditions, equal per-charge edge counts,
    /// source/sink balance, and that the root is a source. Returns all
    /// violations found (empty = valid).
    pub fn validate(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let n = self.n_vertices();
        if n == 0 {
            return vec!["graph has no vertices".into()];
        }
        if !self.kinds[0].is_source() {
            bad.push("root (vertex 0) is not a source".into());
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if e.0 as usize >= n || e.1 as usize >= n {
                bad.push(format!("edge {e:?} references a missing vertex"));
            }
            if e.2 as usize >= self.sigma {
                bad.push(format!("edge {e:?} has charge out of range"));
            }
            if !seen.insert(*e) {
                bad.push(format!("duplicate edge {e:?}"));
            }
        }
        if !bad.is_empty() {
            return bad;
        }
        let (ins, outs) = self.degree_tables();
        for v in 0..n {
            match self.kinds[v] {
                VKind::Source | VKind::Isolated => {
                    if ins[v].iter().any(|&c| c != 0) {
                        bad.push(format!("source {v} has incoming charged edges"));
                    }
                    let first = outs[v][0];
                    if outs[v].iter().any(|&c| c != first) || first > 1 {
                        bad.push(format!("source {v} out-degrees unequal or > 1"));
                    }
                    if self.kinds[v] == VKind::Isolated && first != 0 {
                        bad.push(format!("isolated vertex {v} has edges"));
                    }
                }
                VKind::Sink => {
                    if outs[v].iter().any(|&c| c != 0) {
                        bad.push(format!("sink {v} has outgoing charged edges"));
                    }
                    let first = ins[v][0];
                    if ins[v].iter().any(|&c| c != first) || first > 1 {
                        bad.push(format!("sink {v} in-degrees unequal or > 1"));
                    }
                }
                VKind::Internal(c) => {
                    for s in 0..self.sigma {
                        let (want_in, want_out) = if s == c as usize { (1, 1) } else { (0, 0) };
                        if ins[v][s] != want_in || outs[v][s] != want_out {
                            bad.push(format!(
                                "internal vertex {v} of charge {} has wrong degree in charge {}",
                                c + 1,
                                s + 1
                            ));
                        }
                    }
                }
            }
        }
        let counts: Vec<usize> = (0..self.sigma)
            .map(|s| self.edges.iter().filter(|e| e.2 as usize == s).count())
            .collect();
        if counts.windows(2).any(|w| w[0] != w[1]) {
            bad.push(format!("per-charge edge counts differ: {counts:?}"));
        }
        let sources = self.kinds.iter().filter(|k| k.is_source()).count();
        let sinks = self.kinds.iter().filter(|k| k.is_sink()).count();
        if sources != sinks {
            bad.push(format!("{sources} sources vs {sinks} sinks"));
        }
        if !self.is_connected() {
            bad.push("graph is not connected".into());
        }
        bad
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_vertices();
        let mut adj = vec![Vec::new(); n];
        for &(v, w, _) in &self.edges {
            adj[v as usize].push(w as usize);
            adj[w as usize].push(v as usize);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|x| x)
    }
}

/// A Toom graph embedded in space-time, rooted at the origin.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Contour {
    pub graph: ToomGraph,
    /// site of each vertex; psi[0] is the root site (the origin)
    pub psi: Vec<Site>,
}

impl Contour {
    pub fn trivial(sigma: usize, dim: usize) -> Self {
        Contour { graph: ToomGraph::trivial(sigma), psi: vec![vec![0; dim + 1]] }
    }

    pub fn root_site(&self) -> &Site {
        &self.psi[0]
    }

    /// Embedding conditions: sinks overlap nothing; internal vertices of one
    /// charge (root counted in every charge) are pairwise distinct.
    pub fn validate_embedding(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let g = &self.graph;
        if self.psi.len() != g.n_vertices() {
            return vec!["embedding length differs from vertex count".into()];
        }
        for (v, kv) in g.kinds.iter().enumerate() {
            if kv.is_sink() {
                for w in 0..g.n_vertices() {
                    if w != v && self.psi[w] == self.psi[v] {
                        bad.push(format!("sink {v} shares its site with vertex {w}"));
                    }
                }
            }
        }
        for s in 0..g.sigma {
            let mut sites = HashSet::new();
            for (v, kv) in g.kinds.iter().enumerate() {
                let in_class = *kv == VKind::Internal(s as u8) || v == 0;
                if in_class && !sites.insert(self.psi[v].clone()) {
                    bad.push(format!(
                        "two charge-{} internal vertices (root counts) share a site",
                        s + 1
                    ));
                }
            }
        }
        bad
    }

    /// Image edges (from-site, to-site) of one charge, with a duplicate check.
    pub fn image_edges(&self, s: u8) -> Result<BTreeSet<(Site, Site)>, String> {
        let mut set = BTreeSet::new();
        for (v, w) in self.graph.edges_of_charge(s) {
            let pair = (self.psi[v as usize].clone(), self.psi[w as usize].clone());
            if !set.insert(pair) {
                return Err(format!("two charge-{} edges share an image edge", s + 1));
            }
        }
        Ok(set)
    }

    pub fn sink_sites(&self) -> BTreeSet<Site> {
        self.graph
            .kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| k.is_sink())
            .map(|(v, _)| self.psi[v].clone())
            .collect()
    }

    pub fn all_sites(&self) -> BTreeSet<Site> {
        self.psi.iter().cloned().collect()
    }

    /// Number of sinks.
    pub fn n_star(&self) -> usize {
        self.graph.kinds.iter().filter(|k| k.is_sink()).count()
    }

    /// Number of distinct non-sink sites.
    pub fn n_diamond(&self) -> usize {
        let sinks = self.sink_sites();
        self.all_sites().difference(&sinks).count()
    }

    /// Number of sources other than the root (= per-charge source edges).
    pub fn n_circ(&self) -> usize {
        self.graph.kinds.iter().skip(1).filter(|k| k.is_source()).count()
    }

    /// Per-charge edges leaving an internal vertex or the root.
    pub fn n_bullet(&self) -> usize {
        let s = 0u8;
        self.graph
            .edges_of_charge(s)
            .filter(|&(v, _)| {
                v == 0 || matches!(self.graph.kinds[v as usize], VKind::Internal(c) if c == s)
            })
            .count()
    }

    /// For a group-linear space-time polar with one form per charge, the
    /// charged edge steps sum to exactly zero over the image edges.
    pub fn polar_edge_sum(&self, polar: &SpaceTimePolar) -> Result<Rat, String> {
        if polar.sigma() != self.graph.sigma {
            return Err(format!(
                "polar has {} forms but the contour has {} charges",
                polar.sigma(),
                self.graph.sigma
            ));
        }
        let mut total = Rat::from_integer(0.into());
        for s in 0..self.graph.sigma {
            for (from, to) in self.image_edges(s as u8)? {
                let j = site_sub(&to, &from);
                total += polar.eval(s, &j);
            }
        }
        Ok(total)
    }
}

/// Which decoration rule applies to edges leaving a non-root source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecorationMode {
    /// source edges of charge s land in the union set of the decoration
    General,
    /// sigma = 2 only: source edges of charge s land in the opposite
    /// charge's chosen set
    Cycle,
}

/// The chosen one-sets A_{s,k} (space-time, previous slice), shared by
/// decoration validation, presence checks, the chain, and the measures.
#[derive(Debug, Clone)]
pub struct ChargeSets {
    pub sigma: usize,
    pub m: usize,
    pub dim: usize,
    /// a_sets[s][k-1]: the set for charge s (0-based) and map k (1-based)
    pub a_sets: Vec<Vec<Vec<Site>>>,
}

impl ChargeSets {
    pub fn new(sigma: usize, m: usize, dim: usize, a_sets: Vec<Vec<Vec<Site>>>) -> Self {
        assert_eq!(a_sets.len(), sigma);
        for per_k in &a_sets {
            assert_eq!(per_k.len(), m);
        }
        let mut sets = a_sets;
        for per_k in &mut sets {
            for set in per_k.iter_mut() {
                set.sort();
                set.dedup();
                for j in set.iter() {
                    assert_eq!(j.len(), dim + 1);
                    assert_eq!(j[dim], -1, "charge sets live at the previous slice");
                }
            }
        }
        ChargeSets { sigma, m, dim, a_sets: sets }
    }

    pub fn a_set(&self, s: usize, k: u8) -> &[Site] {
        &self.a_sets[s][(k - 1) as usize]
    }

    /// Union over charges of the sets of map k.
    pub fn delta(&self, k: u8) -> Vec<Site> {
        let mut all: Vec<Site> = self
            .a_sets
            .iter()
            .flat_map(|per_k| per_k[(k - 1) as usize].iter().cloned())
            .collect();
        all.sort();
        all.dedup();
        all
    }

    /// Target set for an edge of charge s leaving a non-root source.
    pub fn source_target(&self, mode: DecorationMode, s: usize, k: u8) -> Vec<Site> {
        match mode {
            DecorationMode::General => self.delta(k),
            DecorationMode::Cycle => {
                debug_assert_eq!(self.sigma, 2);
                self.a_set(1 - s, k).to_vec()
            }
        }
    }
}

/// A contour with a decoration: one map index (or 0 for a defect) per site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoratedContour {
    pub contour: Contour,
    pub kappa: BTreeMap<Site, u8>,
}

impl DecoratedContour {
    pub fn trivial(sigma: usize, dim: usize) -> Self {
        let contour = Contour::trivial(sigma, dim);
        let mut kappa = BTreeMap::new();
        kappa.insert(contour.psi[0].clone(), 0);
        DecoratedContour { contour, kappa }
    }

    pub fn kappa_at(&self, site: &Site) -> Option<u8> {
        self.kappa.get(site).copied()
    }

    /// Decoration conditions against the chosen charge sets, plus the
    /// sink/defect correspondence and the count identities.
    pub fn validate(&self, sets: &ChargeSets, mode: DecorationMode) -> Vec<String> {
        let mut bad = self.contour.graph.validate();
        bad.extend(self.contour.validate_embedding());
        if !bad.is_empty() {
            return bad;
        }
        let g = &self.contour.graph;
        let sinks = self.contour.sink_sites();
        for site in self.contour.all_sites() {
            match self.kappa_at(&site) {
                None => bad.push(format!("site {site:?} has no decoration")),
                Some(0) if !sinks.contains(&site) => {
                    bad.push(format!("non-sink site {site:?} marked defective"))
                }
                Some(k) if k > 0 && sinks.contains(&site) => {
                    bad.push(format!("sink site {site:?} has decoration {k}"))
                }
                Some(k) if k as usize > sets.m => {
                    bad.push(format!("decoration {k} out of range at {site:?}"))
                }
                _ => {}
            }
        }
        if !bad.is_empty() {
            return bad;
        }
        for &(v, w, s) in &g.edges {
            let i = &self.contour.psi[v as usize];
            let j = site_sub(&self.contour.psi[w as usize], i);
            let k = self.kappa_at(i).unwrap();
            if k == 0 {
                bad.push(format!("edge out of a defective site {i:?}"));
                continue;
            }
            let from_kind = g.kinds[v as usize];
            let legal: Vec<Site> = if v == 0 || matches!(from_kind, VKind::Internal(c) if c == s) {
                sets.a_set(s as usize, k).to_vec()
            } else {
                sets.source_target(mode, s as usize, k)
            };
            if !legal.contains(&j) {
                bad.push(format!(
                    "charge-{} edge step {j:?} not allowed by decoration {k} at {i:?}",
                    s + 1
                ));
            }
        }
        let c = &self.contour;
        if c.n_star() != c.n_circ() + 1 {
            bad.push(format!("sink count {} != source edges {} + 1", c.n_star(), c.n_circ()));
        }
        let bound = c.n_circ() + g.sigma * c.n_bullet() + 1;
        if c.n_diamond() > bound {
            bad.push(format!("distinct non-sink sites {} exceed {}", c.n_diamond(), bound));
        }
        bad
    }

    /// Probability that the random environment realizes this decorated
    /// contour: p per sink, (1-p) and the map probability per other site.
    pub fn presence_probability_exact(&self, p: &Rat, r: &[Rat]) -> Rat {
        let sinks = self.contour.sink_sites();
        let mut value = p.pow(self.contour.n_star() as i32)
            * (Rat::one() - p).pow(self.contour.n_diamond() as i32);
        for site in self.contour.all_sites() {
            if !sinks.contains(&site) {
                let k = self.kappa_at(&site).unwrap();
                value *= &r[(k - 1) as usize];
            }
        }
        value
    }

    pub fn presence_probability(&self, p: f64, r: &[f64]) -> f64 {
        let sinks = self.contour.sink_sites();
        let mut value = p.powi(self.contour.n_star() as i32)
            * (1.0 - p).powi(self.contour.n_diamond() as i32);
        for site in self.contour.all_sites() {
            if !sinks.contains(&site) {
                value *= r[(self.kappa_at(&site).unwrap() - 1) as usize];
            }
        }
        value
    }

    /// Canonical byte key: relabels vertices into natural order first, so
    /// isomorphic contours collide. Chain output is already canonical.
    pub fn canonical_key(&self) -> Result<Vec<u8>, ContourError> {
        let canon = order::canonicalize(self)?;
        let mut out = Vec::new();
        let g = &canon.contour.graph;
        out.extend((g.sigma as u32).to_le_bytes());
        for k in &g.kinds {
            match k {
                VKind::Isolated => out.push(0),
                VKind::Source => out.push(1),
                VKind::Sink => out.push(2),
                VKind::Internal(c) => {
                    out.push(3);
                    out.push(*c);
                }
            }
        }
        out.push(255);
        for &(v, w, s) in &g.edges {
            out.extend(v.to_le_bytes());
            out.extend(w.to_le_bytes());
            out.push(s);
        }
        out.push(254);
        for site in &canon.contour.psi {
            for c in site {
                out.extend(c.to_le_bytes());
            }
        }
        out.push(253);
        for (site, k) in &canon.kappa {
            for c in site {
                out.extend(c.to_le_bytes());
            }
            out.push(*k);
        }
        Ok(out)
    }
}

/// Exact and floating values carried side by side. The float is always
/// present; the exact value only when the construction was rational.
#[derive(Debug, Clone)]
pub struct Num {
    pub f: f64,
    pub exact: Option<Rat>,
}

impl Num {
    pub fn from_rat(r: Rat) -> Self {
        Num { f: to_f64(&r), exact: Some(r) }
    }

    pub fn from_f64(f: f64) -> Self {
        Num { f, exact: None }
    }

    pub fn exact(&self) -> Result<&Rat, ContourError> {
        self.exact.as_ref().ok_or(ContourError::NotExact)
    }
}

pub use chain::{
    exact_chain_distribution, nu_value, nu_value_exact, sample_contour, CemeteryReason,
    ChainOutcome, ChainSpec, ExactDistribution,
};
pub use cycle::ToomCycle;
pub use order::{canonical_order, canonicalize, loose_ends, most_urgent, LooseEnd};
pub use peierls::{partial_peierls_sum, PeierlsSums};
pub use presence::{presence_check, presence_check_cycle, DependenceRealization};
