//! Loose ends, the canonical inductive construction, and the natural order.
//!
//! Every rooted connected Toom graph has a unique rebuild that starts from
//! the bare root and repeatedly extends the most urgent loose end (the one
//! of smallest charge, then smallest vertex label). Replaying that rebuild
//! yields a relabeling of the vertices -- the natural order -- which makes
//! contour isomorphism a plain equality check and defines, per site, the
//! type of the first vertex embedded there.

use std::collections::BTreeMap;

use super::{Contour, ContourError, DecoratedContour, Site, ToomGraph, VKind};

/// An unfinished charge at a vertex of a partially built graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LooseEnd {
    pub charge: u8,
    pub vertex: u32,
}

/// Loose ends of a partial edge set of `graph` restricted to `added`
/// vertices (full-graph kinds decide the rules):
/// charges below the last: sources and matching internals missing their
/// outgoing edge; the last charge: sinks and its internals missing their
/// incoming edge.
fn partial_loose_ends(
    graph: &ToomGraph,
    added: &[u32],
    out_present: &[Vec<bool>],
    in_present: &[Vec<bool>],
) -> Vec<LooseEnd> {
    let sigma = graph.sigma;
    let top = (sigma - 1) as u8;
    let mut ends = Vec::new();
    for &v in added {
        let kind = graph.kinds[v as usize];
        match kind {
            VKind::Isolated => {}
            VKind::Source => {
                for s in 0..top {
                    if !out_present[v as usize][s as usize] {
                        ends.push(LooseEnd { charge: s, vertex: v });
                    }
                }
            }
            VKind::Sink => {
                if !in_present[v as usize][top as usize] {
                    ends.push(LooseEnd { charge: top, vertex: v });
                }
            }
            VKind::Internal(c) => {
                if c < top {
                    if !out_present[v as usize][c as usize] {
                        ends.push(LooseEnd { charge: c, vertex: v });
                    }
                } else if !in_present[v as usize][top as usize] {
                    ends.push(LooseEnd { charge: top, vertex: v });
                }
            }
        }
    }
    ends.sort();
    ends
}

/// Loose ends of a complete graph (diagnostic; empty iff the graph is a
/// complete Toom graph, given the degree conditions hold).
pub fn loose_ends(graph: &ToomGraph) -> Vec<LooseEnd> {
    let n = graph.n_vertices();
    let mut out_present = vec![vec![false; graph.sigma]; n];
    let mut in_present = vec![vec![false; graph.sigma]; n];
    for &(v, w, s) in &graph.edges {
        out_present[v as usize][s as usize] = true;
        in_present[w as usize][s as usize] = true;
    }
    let added: Vec<u32> = (0..n as u32).collect();
    partial_loose_ends(graph, &added, &out_present, &in_present)
}

pub fn most_urgent(graph: &ToomGraph) -> Option<LooseEnd> {
    loose_ends(graph).into_iter().next()
}

/// The unique inductive rebuild of a rooted connected Toom graph.
#[derive(Debug, Clone)]
pub struct CanonicalOrder {
    /// natural label of each original vertex
    pub eta: Vec<u32>,
    /// original edges in the order the rebuild adds them
    pub edge_order: Vec<(u32, u32, u8)>,
}

/// Replays the most-urgent-loose-end construction on `graph`. Fails if the
/// graph is not a valid connected rooted Toom graph (the replay gets stuck
/// or does not exhaust the edges).
pub fn canonical_order(graph: &ToomGraph) -> Result<CanonicalOrder, ContourError> {
    let n = graph.n_vertices();
    let sigma = graph.sigma;
    let top = (sigma - 1) as u8;
    if n == 1 && graph.edges.is_empty() {
        return Ok(CanonicalOrder { eta: vec![0], edge_order: Vec::new() });
    }
    // adjacency of the full graph
    let mut out_full: Vec<Vec<Option<u32>>> = vec![vec![None; sigma]; n];
    let mut in_full: Vec<Vec<Option<u32>>> = vec![vec![None; sigma]; n];
    for &(v, w, s) in &graph.edges {
        if out_full[v as usize][s as usize].replace(w).is_some()
            || in_full[w as usize][s as usize].replace(v).is_some()
        {
            return Err(ContourError::Invalid("parallel charged edges".into()));
        }
    }

    let mut eta = vec![u32::MAX; n];
    let mut added: Vec<u32> = vec![0];
    eta[0] = 0;
    let mut out_present = vec![vec![false; sigma]; n];
    let mut in_present = vec![vec![false; sigma]; n];
    let mut edge_order = Vec::with_capacity(graph.edges.len());

    while edge_order.len() < graph.edges.len() {
        // most urgent by (charge, natural label)
        let ends = partial_loose_ends(graph, &added, &out_present, &in_present);
        let end = ends
            .iter()
            .min_by_key(|e| (e.charge, eta[e.vertex as usize]))
            .copied()
            .ok_or(ContourError::NotConnected)?;
        let v = end.vertex as usize;
        let (edge, other) = if end.charge < top {
            let w = out_full[v][end.charge as usize].ok_or_else(|| {
                ContourError::Invalid(format!(
                    "vertex {v} misses its outgoing charge-{} edge",
                    end.charge + 1
                ))
            })?;
            ((end.vertex, w, end.charge), w)
        } else {
            let w = in_full[v][top as usize].ok_or_else(|| {
                ContourError::Invalid(format!("vertex {v} misses its incoming top-charge edge"))
            })?;
            ((w, end.vertex, top), w)
        };
        if eta[other as usize] == u32::MAX {
            eta[other as usize] = added.len() as u32;
            added.push(other);
        }
        out_present[edge.0 as usize][edge.2 as usize] = true;
        in_present[edge.1 as usize][edge.2 as usize] = true;
        edge_order.push(edge);
    }
    if added.len() != n {
        return Err(ContourError::NotConnected);
    }
    Ok(CanonicalOrder { eta, edge_order })
}

/// Relabels a decorated contour into natural order. Isomorphic contours
/// become equal.
pub fn canonicalize(dec: &DecoratedContour) -> Result<DecoratedContour, ContourError> {
    let order = canonical_order(&dec.contour.graph)?;
    let g = &dec.contour.graph;
    let n = g.n_vertices();
    let mut kinds = vec![VKind::Source; n];
    let mut psi: Vec<Site> = vec![Vec::new(); n];
    for v in 0..n {
        let nv = order.eta[v] as usize;
        kinds[nv] = g.kinds[v];
        psi[nv] = dec.contour.psi[v].clone();
    }
    let mut edges: Vec<(u32, u32, u8)> = g
        .edges
        .iter()
        .map(|&(v, w, s)| (order.eta[v as usize], order.eta[w as usize], s))
        .collect();
    edges.sort();
    Ok(DecoratedContour {
        contour: Contour { graph: ToomGraph { sigma: g.sigma, kinds, edges }, psi },
        kappa: dec.kappa.clone(),
    })
}

/// Per-site type of the first vertex (in natural order) embedded there.
/// The root counts as an internal vertex of the first charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteType {
    Sink,
    Source,
    Charge(u8),
}

pub fn first_visit_types(dec: &DecoratedContour) -> Result<BTreeMap<Site, SiteType>, ContourError> {
    let order = canonical_order(&dec.contour.graph)?;
    let g = &dec.contour.graph;
    let mut best: BTreeMap<Site, (u32, SiteType)> = BTreeMap::new();
    for v in 0..g.n_vertices() {
        let label = order.eta[v];
        let ty = if v == 0 && g.kinds[0] != VKind::Isolated {
            // the root counts as an internal vertex of the first charge
            SiteType::Charge(0)
        } else {
            match g.kinds[v] {
                VKind::Sink | VKind::Isolated => SiteType::Sink,
                VKind::Source => SiteType::Source,
                VKind::Internal(c) => SiteType::Charge(c),
            }
        };
        let site = dec.contour.psi[v].clone();
        match best.get(&site) {
            Some(&(l, _)) if l <= label => {}
            _ => {
                best.insert(site, (label, ty));
            }
        }
    }
    Ok(best.into_iter().map(|(site, (_, ty))| (site, ty)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// two-vertex contour: root with both charges into one sink
    fn tiny() -> ToomGraph {
        ToomGraph {
            sigma: 2,
            kinds: vec![VKind::Source, VKind::Sink],
            edges: vec![(0, 1, 0), (0, 1, 1)],
        }
    }

    #[test]
    fn trivial_and_tiny_orders() {
        let triv = ToomGraph::trivial(3);
        let o = canonical_order(&triv).unwrap();
        assert_eq!(o.eta, vec![0]);

        let o = canonical_order(&tiny()).unwrap();
        assert_eq!(o.eta, vec![0, 1]);
        assert_eq!(o.edge_order, vec![(0, 1, 0), (0, 1, 1)]);
    }

    #[test]
    fn complete_graphs_have_no_loose_ends() {
        assert!(loose_ends(&tiny()).is_empty());
        let mut partial = tiny();
        partial.edges = vec![(0, 1, 0)];
        let le = loose_ends(&partial);
        assert_eq!(le, vec![LooseEnd { charge: 1, vertex: 1 }]);
    }

    #[test]
    fn relabeled_graphs_canonicalize_equal() {
        // same contour with vertex labels 1 and 2 swapped
        let g1 = ToomGraph {
            sigma: 2,
            kinds: vec![VKind::Source, VKind::Internal(0), VKind::Sink],
            edges: vec![(0, 1, 0), (1, 2, 0), (0, 2, 1)],
        };
        let g2 = ToomGraph {
            sigma: 2,
            kinds: vec![VKind::Source, VKind::Sink, VKind::Internal(0)],
            edges: vec![(0, 2, 0), (2, 1, 0), (0, 1, 1)],
        };
        let psi1 = vec![vec![0, 0, 0], vec![0, 0, -1], vec![0, 0, -2]];
        let psi2 = vec![vec![0, 0, 0], vec![0, 0, -2], vec![0, 0, -1]];
        let d1 = DecoratedContour {
            contour: Contour { graph: g1, psi: psi1 },
            kappa: [(vec![0, 0, 0], 1), (vec![0, 0, -1], 1), (vec![0, 0, -2], 0)]
                .into_iter()
                .collect(),
        };
        let d2 = DecoratedContour {
            contour: Contour { graph: g2, psi: psi2 },
            kappa: d1.kappa.clone(),
        };
        assert_eq!(d1.canonical_key().unwrap(), d2.canonical_key().unwrap());
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = ToomGraph {
            sigma: 2,
            kinds: vec![VKind::Source, VKind::Sink, VKind::Isolated],
            edges: vec![(0, 1, 0), (0, 1, 1)],
        };
        assert!(matches!(canonical_order(&g), Err(ContourError::NotConnected)));
    }
}
