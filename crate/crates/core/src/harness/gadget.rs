//! Set-disjointness gadgets: two-party instances whose cheap solutions avoid
//! the edges between the parties exactly when the sets are disjoint.

use std::collections::BTreeSet;

use crate::graph::{EdgeId, NodeId, Weight, WeightedGraph};
use crate::instance::{CrInstance, IcInstance, SteinerInstance};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrGadget {
    pub instance: SteinerInstance,
    /// The two heavy cross edges.
    pub heavy: [EdgeId; 2],
    pub heavy_weight: Weight,
}

/// Node of `a_j`, `j` in `-1..=n`.
pub fn a_node(j: isize) -> NodeId {
    (j + 1) as NodeId
}

/// Node of `b_j`, `j` in `-1..=n`.
pub fn b_node(n: usize, j: isize) -> NodeId {
    n + 2 + (j + 1) as NodeId
}

/// Heavy cross-edge weight for ratio `rho`.
pub fn heavy_weight(n: usize, rho: u64) -> Weight {
    rho * (2 * n as Weight + 2) + 1
}

/// Request gadget over `[n]`: `a_i` hangs off `a_0` when `i` is in `A` and
/// off `a_{-1}` otherwise, likewise for `b`; the cross edges `a_0 b_{-1}`
/// and `a_{-1} b_0` are light, `a_0 b_0` and `a_{-1} b_{-1}` are heavy. Each
/// `i` in `A` or `B` requests `a_i` with `b_i`.
pub fn gen_sd_gadget_cr(n: usize, a: &BTreeSet<usize>, b: &BTreeSet<usize>, rho: u64) -> CrGadget {
    let heavy = heavy_weight(n, rho);
    let mut edges: Vec<(NodeId, NodeId, Weight)> = Vec::new();
    for i in 1..=n as isize {
        let ai = if a.contains(&(i as usize)) { 0 } else { -1 };
        let bi = if b.contains(&(i as usize)) { 0 } else { -1 };
        edges.push((a_node(ai), a_node(i), 1));
        edges.push((b_node(n, bi), b_node(n, i), 1));
    }
    edges.push((a_node(0), b_node(n, 0), heavy));
    edges.push((a_node(-1), b_node(n, -1), heavy));
    edges.push((a_node(0), b_node(n, -1), 1));
    edges.push((a_node(-1), b_node(n, 0), 1));
    let g = WeightedGraph::new(2 * n + 4, edges).expect("gadget is a simple graph");
    let heavy_ids = [
        g.edge_between(a_node(0), b_node(n, 0)).unwrap(),
        g.edge_between(a_node(-1), b_node(n, -1)).unwrap(),
    ];
    let mut req = vec![Vec::new(); g.n()];
    for i in 1..=n {
        let (x, y) = (a_node(i as isize), b_node(n, i as isize));
        if a.contains(&i) {
            req[x].push(y);
        }
        if b.contains(&i) {
            req[y].push(x);
        }
    }
    CrGadget {
        instance: SteinerInstance::Cr(CrInstance::new(g, req)),
        heavy: heavy_ids,
        heavy_weight: heavy,
    }
}

/// Label gadget over `[n]`: two unit-weight stars joined at their centers;
/// `a_i` carries label `i` when `i` is in `A`, `b_i` when `i` is in `B`.
/// Nodes: `a_0 = 0`, `a_i = i`, `b_0 = n + 1`, `b_i = n + 1 + i`.
pub fn gen_sd_gadget_ic(n: usize, a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> (SteinerInstance, EdgeId) {
    let mut edges: Vec<(NodeId, NodeId, Weight)> = Vec::new();
    for i in 1..=n {
        edges.push((0, i, 1));
        edges.push((n + 1, n + 1 + i, 1));
    }
    edges.push((0, n + 1, 1));
    let g = WeightedGraph::new(2 * n + 2, edges).expect("gadget is a simple graph");
    let bridge = g.edge_between(0, n + 1).unwrap();
    let mut labels = vec![None; g.n()];
    for i in 1..=n {
        if a.contains(&i) {
            labels[i] = Some(i);
        }
        if b.contains(&i) {
            labels[n + 1 + i] = Some(i);
        }
    }
    (SteinerInstance::Ic(IcInstance::new(g, labels)), bridge)
}

/// Every pair of subsets of `[n]`, in bitmask order.
pub fn all_set_pairs(n: usize) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
    let set = |mask: usize| (1..=n).filter(|i| mask >> (i - 1) & 1 == 1).collect::<BTreeSet<usize>>();
    let mut out = Vec::new();
    for x in 0..1usize << n {
        for y in 0..1usize << n {
            out.push((set(x), set(y)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_optimum;

    fn s(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn cr_disjoint_is_cheap() {
        let gd = gen_sd_gadget_cr(3, &s(&[1, 2]), &s(&[3]), 2);
        assert_eq!(gd.heavy_weight, 17);
        assert_eq!(gd.instance.graph().n(), 10);
        let opt = exact_optimum(&gd.instance).unwrap();
        assert!(opt.weight <= 8);
        assert!(gd.heavy.iter().all(|h| !opt.edges.contains(h)));
    }

    #[test]
    fn cr_intersecting_forces_a_heavy_edge() {
        let gd = gen_sd_gadget_cr(3, &s(&[1, 2]), &s(&[2]), 1);
        let opt = exact_optimum(&gd.instance).unwrap();
        assert!(gd.heavy.iter().any(|h| opt.edges.contains(h)));
        assert!(opt.weight > 8);
    }

    #[test]
    fn ic_disjoint_costs_nothing() {
        let (inst, bridge) = gen_sd_gadget_ic(4, &s(&[1, 3]), &s(&[2, 4]));
        assert_eq!(exact_optimum(&inst).unwrap().weight, 0);
        let (inst, _) = gen_sd_gadget_ic(4, &s(&[1, 3]), &s(&[3]));
        assert!(exact_optimum(&inst).unwrap().edges.contains(&bridge));
    }

    #[test]
    fn pair_enumeration() {
        assert_eq!(all_set_pairs(2).len(), 16);
    }
}
