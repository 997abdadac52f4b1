//! Presence of contours and cycles in realizations of the random
//! environment.
//!
//! A realization fixes, on a finite space-time window, which map (or
//! defect) each point drew, and thereby the typed dependence graph whose
//! charge-s edges point from each non-defective site into its chosen set
//! of charge s. A contour is present when its sinks sit on defects and
//! every charged edge lands in the right part of that graph.

use std::collections::HashMap;

use super::cycle::{CycleClass, ToomCycle};
use super::{site_sub, ChargeSets, Contour, ContourError, Site, VKind};
use crate::rng::{hash_words, unit_f64};

#[derive(Debug, Clone)]
pub struct DependenceRealization {
    pub sets: ChargeSets,
    /// inclusive bounds of the window, per coordinate
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    /// map index drawn at each window site; 0 = defect
    pub mu: HashMap<Site, u8>,
}

impl DependenceRealization {
    /// i.i.d. environment on a window: defect with probability p, else a
    /// map drawn from `probs`.
    pub fn random(
        sets: ChargeSets,
        lo: Vec<i64>,
        hi: Vec<i64>,
        p: f64,
        probs: &[f64],
        seed: u64,
    ) -> Self {
        let mut mu = HashMap::new();
        let mut cursor = lo.clone();
        'outer: loop {
            let words: Vec<u64> = cursor.iter().map(|&c| c as u64).collect();
            let u = unit_f64(hash_words(seed, &words));
            let value = if u < p {
                0u8
            } else {
                let mut rest = (u - p) / (1.0 - p);
                let mut k = probs.len() as u8;
                for (ki, q) in probs.iter().enumerate() {
                    if rest < *q {
                        k = (ki + 1) as u8;
                        break;
                    }
                    rest -= q;
                }
                k
            };
            mu.insert(cursor.clone(), value);
            for a in 0..cursor.len() {
                cursor[a] += 1;
                if cursor[a] <= hi[a] {
                    continue 'outer;
                }
                cursor[a] = lo[a];
            }
            break;
        }
        DependenceRealization { sets, lo, hi, mu }
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (l, h))| l <= c && c <= h)
    }

    pub fn mu_at(&self, site: &Site) -> Option<u8> {
        self.mu.get(site).copied()
    }

    /// Is (from, from+j) an edge of charge s in the dependence graph?
    fn has_edge(&self, from: &Site, j: &Site, s: usize) -> bool {
        match self.mu_at(from) {
            Some(k) if k > 0 => self.sets.a_set(s, k).contains(j),
            _ => false,
        }
    }

    fn has_edge_any_charge(&self, from: &Site, j: &Site) -> bool {
        (0..self.sets.sigma).any(|s| self.has_edge(from, j, s))
    }

    /// The maximal trajectory of the automaton this realization encodes,
    /// on the window, with unknown boundary values taken as one.
    pub fn maximal_trajectory(&self) -> HashMap<Site, bool> {
        let dim = self.sets.dim;
        let mut values: HashMap<Site, bool> = HashMap::new();
        // sweep slices from the earliest time upward
        let mut t = self.lo[dim];
        while t <= self.hi[dim] {
            let mut cursor: Vec<i64> = self.lo[..dim].to_vec();
            'sites: loop {
                let mut site = cursor.clone();
                site.push(t);
                let v = match self.mu_at(&site) {
                    Some(0) => false,
                    Some(k) => (0..self.sets.sigma).any(|s| {
                        self.sets.a_set(s, k).iter().all(|j| {
                            let dep = super::site_add(&site, j);
                            *values.get(&dep).unwrap_or(&true)
                        })
                    }),
                    None => true,
                };
                values.insert(site, v);
                for a in 0..dim {
                    cursor[a] += 1;
                    if cursor[a] <= self.hi[a] {
                        continue 'sites;
                    }
                    cursor[a] = self.lo[a];
                }
                break;
            }
            t += 1;
        }
        values
    }
}

/// Contour presence: sinks on defects; edges out of internal vertices and
/// the root respect their charge; edges out of other sources may use any
/// charge.
pub fn presence_check(
    contour: &Contour,
    realization: &DependenceRealization,
) -> Result<bool, ContourError> {
    for site in contour.all_sites() {
        if !realization.contains(&site) {
            return Err(ContourError::WindowClip);
        }
    }
    let g = &contour.graph;
    for (v, kind) in g.kinds.iter().enumerate() {
        if kind.is_sink() && realization.mu_at(&contour.psi[v]) != Some(0) {
            return Ok(false);
        }
    }
    for &(v, w, s) in &g.edges {
        let from = &contour.psi[v as usize];
        let j = site_sub(&contour.psi[w as usize], from);
        let strict = v == 0 || matches!(g.kinds[v as usize], VKind::Internal(c) if c == s);
        let ok = if strict {
            realization.has_edge(from, &j, s as usize)
        } else {
            realization.has_edge_any_charge(from, &j)
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Cycle presence: like contour presence, but edges out of sources must
/// use the opposite charge (sigma = 2).
pub fn presence_check_cycle(
    cycle: &ToomCycle,
    realization: &DependenceRealization,
) -> Result<bool, ContourError> {
    for site in &cycle.psi {
        if !realization.contains(site) {
            return Err(ContourError::WindowClip);
        }
    }
    let n = cycle.len();
    let classes = cycle.classes();
    for v in 0..=n {
        if classes[v] == CycleClass::Sink && realization.mu_at(&cycle.psi[v]) != Some(0) {
            return Ok(false);
        }
    }
    if n == 0 {
        return Ok(true);
    }
    for v in 1..=n {
        let up = -(cycle.psi[v][cycle.psi[v].len() - 1] - cycle.psi[v - 1][cycle.psi[v - 1].len() - 1])
            == 1;
        // the edge of this step, pointing in the +height direction
        let (tail, head, s) = if up { (v - 1, v, 0usize) } else { (v, v - 1, 1usize) };
        let from = &cycle.psi[tail];
        let j = site_sub(&cycle.psi[head], from);
        let from_class = classes[tail];
        let ok = match from_class {
            CycleClass::Source => realization.has_edge(from, &j, 1 - s),
            _ => realization.has_edge(from, &j, s),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn coop_sets() -> ChargeSets {
        ChargeSets::new(
            2,
            1,
            2,
            vec![
                vec![vec![vec![1, 0, -1], vec![0, 1, -1]]], // branching pair
                vec![vec![vec![0, 0, -1]]],                 // copy
            ],
        )
    }

    fn realization(defects: &[Site]) -> DependenceRealization {
        let sets = coop_sets();
        let lo = vec![-4, -4, -6];
        let hi = vec![4, 4, 1];
        let mut mu = HashMap::new();
        let mut cursor = lo.clone();
        'outer: loop {
            mu.insert(cursor.clone(), 1u8);
            for a in 0..cursor.len() {
                cursor[a] += 1;
                if cursor[a] <= hi[a] {
                    continue 'outer;
                }
                cursor[a] = lo[a];
            }
            break;
        }
        for d in defects {
            mu.insert(d.clone(), 0);
        }
        DependenceRealization { sets, lo, hi, mu }
    }

    #[test]
    fn trivial_contour_present_iff_origin_defective() {
        let triv = Contour::trivial(2, 2);
        let with = realization(&[vec![0, 0, 0]]);
        let without = realization(&[]);
        assert!(presence_check(&triv, &with).unwrap());
        assert!(!presence_check(&triv, &without).unwrap());
    }

    #[test]
    fn cycle_presence_and_defect_removal() {
        // root -> sink (0,1,-1); source back at the origin -> sink (0,0,-1);
        // the source's charge-2 edge uses a branching offset, its charge-1
        // edge the copy offset, as cycle presence demands
        let cyc = ToomCycle {
            psi: vec![
                vec![0, 0, 0],
                vec![0, 1, -1],
                vec![0, 0, 0],
                vec![0, 0, -1],
                vec![0, 0, 0],
            ],
        };
        assert!(cyc.validate().is_empty());
        let present = realization(&[vec![0, 1, -1], vec![0, 0, -1]]);
        assert!(presence_check_cycle(&cyc, &present).unwrap());
        let missing = realization(&[vec![0, 1, -1]]);
        assert!(!presence_check_cycle(&cyc, &missing).unwrap());

        // the same object as a contour (contour presence is weaker)
        let contour = cyc.to_contour();
        assert!(contour.graph.validate().is_empty());
        assert!(presence_check(&contour, &present).unwrap());

        let clipped = DependenceRealization {
            lo: vec![0, 0, -1],
            hi: vec![0, 0, 0],
            ..present
        };
        assert!(matches!(presence_check(&contour, &clipped), Err(ContourError::WindowClip)));
    }
}
