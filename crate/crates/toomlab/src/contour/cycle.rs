//! Toom cycles: the sigma = 2 specialization of contours with stronger
//! overlap and ordering rules.
//!
//! A cycle of length n is a closed walk psi_0..psi_n (psi_0 = psi_n) whose
//! height (minus time) steps by +-1, starting +1 and ending -1. Local
//! maxima are sinks, local minima are sources, up-up vertices carry charge
//! 1 and down-down vertices charge 2 (0-based: 0 and 1), with the walk
//! visiting overlapping vertices in type order charge1 < source < charge2.

use std::collections::BTreeMap;

use super::{Contour, ContourError, DecoratedContour, Site, ToomGraph, VKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToomCycle {
    /// psi_0..psi_n with psi_0 = psi_n; length n is even (possibly 0)
    pub psi: Vec<Site>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleClass {
    Source,
    Sink,
    Up,   // charge 1 internal (and index 0)
    Down, // charge 2 internal (and index n)
}

impl ToomCycle {
    pub fn len(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn height(site: &Site) -> i64 {
        -site[site.len() - 1]
    }

    /// Height increment into position v (defined for 1 <= v <= n).
    fn step(&self, v: usize) -> i64 {
        Self::height(&self.psi[v]) - Self::height(&self.psi[v - 1])
    }

    /// Class of each index 0..=n per the local shape of the walk.
    pub fn classes(&self) -> Vec<CycleClass> {
        let n = self.len();
        (0..=n)
            .map(|v| {
                if v == 0 {
                    CycleClass::Up
                } else if v == n {
                    CycleClass::Down
                } else {
                    match (self.step(v), self.step(v + 1)) {
                        (-1, 1) => CycleClass::Source,
                        (1, -1) => CycleClass::Sink,
                        (1, 1) => CycleClass::Up,
                        _ => CycleClass::Down,
                    }
                }
            })
            .collect()
    }

    fn rank(class: CycleClass) -> Option<u8> {
        match class {
            CycleClass::Up => Some(0),
            CycleClass::Source => Some(1),
            CycleClass::Down => Some(2),
            CycleClass::Sink => None,
        }
    }

    /// All cycle conditions: even closed +-1 height walk with the right
    /// first/last steps, sinks never revisited, overlapping vertices in
    /// type-then-index order.
    pub fn validate(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.psi.is_empty() {
            return vec!["cycle needs at least psi_0".into()];
        }
        let n = self.len();
        if n % 2 != 0 {
            bad.push(format!("cycle length {n} is odd"));
        }
        if self.psi[0] != self.psi[n] {
            bad.push("cycle does not close".into());
        }
        if n == 0 {
            return bad;
        }
        for v in 1..=n {
            if self.step(v).abs() != 1 {
                bad.push(format!("height step into position {v} is not +-1"));
            }
        }
        if self.step(1) != 1 {
            bad.push("first height step must be +1".into());
        }
        if self.step(n) != -1 {
            bad.push("last height step must be -1".into());
        }
        if !bad.is_empty() {
            return bad;
        }
        let classes = self.classes();
        for v in 0..=n {
            if classes[v] == CycleClass::Sink {
                for w in 0..=n {
                    if w != v && self.psi[w] == self.psi[v] {
                        bad.push(format!("sink at position {v} revisited at position {w}"));
                    }
                }
            }
        }
        for v in 0..=n {
            for w in 0..=n {
                if v < w || self.psi[v] != self.psi[w] || v == w {
                    continue;
                }
                // v > w and same site: need rank(v) > rank(w) is violated when
                // the earlier index has the larger type
                if let (Some(rv), Some(rw)) = (Self::rank(classes[v]), Self::rank(classes[w])) {
                    if rv <= rw {
                        bad.push(format!(
                            "positions {w} and {v} share a site out of type order"
                        ));
                    }
                }
            }
        }
        bad
    }

    /// The associated two-charge contour: vertices 0..n-1 (index n folds
    /// onto the root), up-steps become charge-1 edges, down-steps charge-2
    /// edges pointing back up in height.
    pub fn to_contour(&self) -> Contour {
        let n = self.len();
        let dim = self.psi[0].len() - 1;
        if n == 0 {
            return Contour::trivial(2, dim);
        }
        let classes = self.classes();
        let kinds: Vec<VKind> = (0..n)
            .map(|v| {
                if v == 0 {
                    VKind::Source
                } else {
                    match classes[v] {
                        CycleClass::Source => VKind::Source,
                        CycleClass::Sink => VKind::Sink,
                        CycleClass::Up => VKind::Internal(0),
                        CycleClass::Down => VKind::Internal(1),
                    }
                }
            })
            .collect();
        let fold = |v: usize| -> u32 { if v == n { 0 } else { v as u32 } };
        let mut edges = Vec::with_capacity(n);
        for v in 1..=n {
            if self.step(v) == 1 {
                edges.push((fold(v - 1), fold(v), 0u8));
            } else {
                edges.push((fold(v), fold(v - 1), 1u8));
            }
        }
        edges.sort();
        Contour {
            graph: ToomGraph { sigma: 2, kinds, edges },
            psi: self.psi[..n].to_vec(),
        }
    }

    /// Attaches a decoration (per site) and returns the decorated contour.
    pub fn decorate(&self, kappa: BTreeMap<Site, u8>) -> Result<DecoratedContour, ContourError> {
        let contour = self.to_contour();
        for site in contour.all_sites() {
            if !kappa.contains_key(&site) {
                return Err(ContourError::Invalid(format!("no decoration at {site:?}")));
            }
        }
        Ok(DecoratedContour { contour, kappa })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x: i64, y: i64, t: i64) -> Site {
        vec![x, y, t]
    }

    /// length-6 walk that revisits its first sink site
    fn sink_revisit() -> ToomCycle {
        ToomCycle {
            psi: vec![
                st(0, 0, 0),
                st(0, 1, -1),
                st(0, 1, -2),
                st(0, 0, -1),
                st(0, 1, -2),
                st(0, 1, -1),
                st(0, 0, 0),
            ],
        }
    }

    #[test]
    fn length_two_cycle_roundtrip() {
        let c = ToomCycle { psi: vec![st(0, 0, 0), st(0, 0, -1), st(0, 0, 0)] };
        assert!(c.validate().is_empty());
        let contour = c.to_contour();
        assert!(contour.graph.validate().is_empty());
        assert!(contour.validate_embedding().is_empty());
        assert_eq!(contour.graph.kinds, vec![VKind::Source, VKind::Sink]);
        assert_eq!(contour.graph.edges, vec![(0, 1, 0), (0, 1, 1)]);
    }

    #[test]
    fn sink_revisit_is_rejected() {
        let bad = sink_revisit();
        let violations = bad.validate();
        assert!(violations.iter().any(|v| v.contains("sink")));
    }

    #[test]
    fn six_cycle_shape() {
        // root -> down -> sink -> up -> up(source at top) -> down -> down -> root
        // concretely: the n=1 special shape of the divergence family
        let c = ToomCycle {
            psi: vec![
                st(0, 0, 0),
                st(0, 1, -1),
                st(0, 1, -2),
                st(0, 0, -1),
                st(0, 0, -2),
                st(0, 0, -1),
                st(0, 0, 0),
            ],
        };
        assert!(c.validate().is_empty());
        let contour = c.to_contour();
        assert!(contour.graph.validate().is_empty());
        assert!(contour.validate_embedding().is_empty());
        assert_eq!(contour.n_star(), 2);
        assert_eq!(contour.n_circ(), 1);
    }
}
