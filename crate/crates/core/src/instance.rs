//! Steiner Forest instances (input components or connection requests) and
//! edge-set solutions.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::graph::{parse_edge_line, parse_header, EdgeId, GraphError, NodeId, Weight, WeightedGraph};

pub type Label = usize;

/// Instance given by per-node labels; `None` is the empty label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcInstance {
    pub graph: WeightedGraph,
    pub labels: Vec<Option<Label>>,
}

/// Instance given by per-node connection request sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrInstance {
    pub graph: WeightedGraph,
    pub requests: Vec<Vec<NodeId>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteinerInstance {
    Ic(IcInstance),
    Cr(CrInstance),
}

impl IcInstance {
    pub fn new(graph: WeightedGraph, labels: Vec<Option<Label>>) -> Self {
        assert_eq!(graph.n(), labels.len());
        IcInstance { graph, labels }
    }

    pub fn terminals(&self) -> Vec<NodeId> {
        (0..self.labels.len()).filter(|&v| self.labels[v].is_some()).collect()
    }

    pub fn t(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    /// Input components keyed by label.
    pub fn components(&self) -> BTreeMap<Label, Vec<NodeId>> {
        let mut map: BTreeMap<Label, Vec<NodeId>> = BTreeMap::new();
        for (v, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                map.entry(*l).or_default().push(v);
            }
        }
        map
    }

    pub fn k(&self) -> usize {
        self.components().len()
    }

    pub fn is_minimal(&self) -> bool {
        self.components().values().all(|c| c.len() != 1)
    }

    /// The equivalent minimal instance: labels carried by one terminal are erased.
    pub fn minimalized(&self) -> IcInstance {
        let comps = self.components();
        let labels = self
            .labels
            .iter()
            .map(|l| l.filter(|l| comps[l].len() > 1))
            .collect();
        IcInstance {
            graph: self.graph.clone(),
            labels,
        }
    }
}

impl CrInstance {
    pub fn new(graph: WeightedGraph, requests: Vec<Vec<NodeId>>) -> Self {
        assert_eq!(graph.n(), requests.len());
        CrInstance { graph, requests }
    }

    pub fn request_pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (v, r) in self.requests.iter().enumerate() {
            for &w in r {
                if w != v {
                    out.push((v, w));
                }
            }
        }
        out
    }

    pub fn terminals(&self) -> Vec<NodeId> {
        let mut is_t = vec![false; self.graph.n()];
        for (v, w) in self.request_pairs() {
            is_t[v] = true;
            is_t[w] = true;
        }
        (0..is_t.len()).filter(|&v| is_t[v]).collect()
    }
}

impl SteinerInstance {
    pub fn graph(&self) -> &WeightedGraph {
        match self {
            SteinerInstance::Ic(i) => &i.graph,
            SteinerInstance::Cr(i) => &i.graph,
        }
    }

    pub fn terminals(&self) -> Vec<NodeId> {
        match self {
            SteinerInstance::Ic(i) => i.terminals(),
            SteinerInstance::Cr(i) => i.terminals(),
        }
    }

    pub fn t(&self) -> usize {
        self.terminals().len()
    }

    /// Terminal sets that must each end up connected, with at least two
    /// members each, sorted by smallest member.
    pub fn demand_groups(&self) -> Vec<Vec<NodeId>> {
        let mut groups: Vec<Vec<NodeId>> = match self {
            SteinerInstance::Ic(i) => i.components().into_values().filter(|c| c.len() > 1).collect(),
            SteinerInstance::Cr(i) => {
                let n = i.graph.n();
                let mut uf = UnionFind::<usize>::new(n);
                for (v, w) in i.request_pairs() {
                    uf.union(v, w);
                }
                let mut by_root: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
                for v in i.terminals() {
                    by_root.entry(uf.find(v)).or_default().push(v);
                }
                by_root.into_values().collect()
            }
        };
        groups.sort();
        groups
    }

    /// Number of input components (for requests: components of the request graph).
    pub fn k(&self) -> usize {
        match self {
            SteinerInstance::Ic(i) => i.k(),
            SteinerInstance::Cr(_) => self.demand_groups().len(),
        }
    }

    /// Parses a graph block followed by `IC v label` or `CR v w` lines.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let (n, m) = parse_header(lines.next())?;
        let mut edges = Vec::with_capacity(m);
        for _ in 0..m {
            edges.push(parse_edge_line(lines.next())?);
        }
        let graph = WeightedGraph::new(n, edges)?;
        let mut labels = vec![None; n];
        let mut requests = vec![Vec::new(); n];
        let mut cr = false;
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || GraphError::Parse(format!("bad demand line {line:?}"));
            if toks.len() != 3 {
                return Err(bad());
            }
            let a: usize = toks[1].parse().map_err(|_| bad())?;
            let b: usize = toks[2].parse().map_err(|_| bad())?;
            if a >= n {
                return Err(GraphError::NodeOutOfRange(a));
            }
            match toks[0] {
                "IC" => labels[a] = Some(b),
                "CR" => {
                    if b >= n {
                        return Err(GraphError::NodeOutOfRange(b));
                    }
                    cr = true;
                    requests[a].push(b);
                }
                _ => return Err(bad()),
            }
        }
        if cr && labels.iter().any(Option::is_some) {
            return Err(GraphError::Parse("mixed IC and CR lines".into()));
        }
        Ok(if cr {
            SteinerInstance::Cr(CrInstance::new(graph, requests))
        } else {
            SteinerInstance::Ic(IcInstance::new(graph, labels))
        })
    }

    pub fn format(&self) -> String {
        let mut s = self.graph().format();
        match self {
            SteinerInstance::Ic(i) => {
                for (v, l) in i.labels.iter().enumerate() {
                    if let Some(l) = l {
                        let _ = writeln!(s, "IC {v} {l}");
                    }
                }
            }
            SteinerInstance::Cr(i) => {
                for (v, w) in i.request_pairs() {
                    let _ = writeln!(s, "CR {v} {w}");
                }
            }
        }
        s
    }
}

impl From<IcInstance> for SteinerInstance {
    fn from(i: IcInstance) -> Self {
        SteinerInstance::Ic(i)
    }
}

impl From<CrInstance> for SteinerInstance {
    fn from(i: CrInstance) -> Self {
        SteinerInstance::Cr(i)
    }
}

/// An output edge set together with its weight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestSolution {
    /// Sorted, duplicate-free edge ids.
    pub edges: Vec<EdgeId>,
    pub weight: Weight,
}

impl ForestSolution {
    pub fn new(g: &WeightedGraph, mut edges: Vec<EdgeId>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let weight = g.total_weight(edges.iter().copied());
        ForestSolution { edges, weight }
    }

    pub fn is_forest(&self, g: &WeightedGraph) -> bool {
        is_forest(g, &self.edges)
    }

    /// Partition of the terminals by connected component of `(V, F)`.
    pub fn terminal_partition(&self, g: &WeightedGraph, terminals: &[NodeId]) -> Vec<Vec<NodeId>> {
        let uf = edge_union_find(g, &self.edges);
        let mut by_root: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for &v in terminals {
            by_root.entry(uf.find(v)).or_default().push(v);
        }
        let mut parts: Vec<_> = by_root.into_values().collect();
        parts.sort();
        parts
    }
}

pub(crate) fn edge_union_find(g: &WeightedGraph, edges: &[EdgeId]) -> UnionFind<usize> {
    let mut uf = UnionFind::new(g.n());
    for &e in edges {
        let x = g.edge(e);
        uf.union(x.u, x.v);
    }
    uf
}

pub fn is_forest(g: &WeightedGraph, edges: &[EdgeId]) -> bool {
    let mut uf = UnionFind::<usize>::new(g.n());
    edges.iter().all(|&e| {
        let x = g.edge(e);
        uf.union(x.u, x.v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> WeightedGraph {
        WeightedGraph::new(n, (1..n).map(|i| (i - 1, i, 1))).unwrap()
    }

    #[test]
    fn ic_counts_and_minimality() {
        let inst = IcInstance::new(line(5), vec![Some(3), None, Some(3), Some(9), None]);
        assert_eq!(inst.t(), 3);
        assert_eq!(inst.k(), 2);
        assert!(!inst.is_minimal());
        let m = inst.minimalized();
        assert_eq!(m.labels, vec![Some(3), None, Some(3), None, None]);
        assert!(m.is_minimal());
        assert_eq!(m.minimalized(), m);
    }

    #[test]
    fn cr_terminals_and_groups() {
        let mut req = vec![Vec::new(); 5];
        req[0] = vec![1];
        req[2] = vec![1];
        req[4] = vec![3];
        let inst = SteinerInstance::Cr(CrInstance::new(line(5), req));
        assert_eq!(inst.terminals(), vec![0, 1, 2, 3, 4]);
        assert_eq!(inst.demand_groups(), vec![vec![0, 1, 2], vec![3, 4]]);
        assert_eq!(inst.k(), 2);
    }

    #[test]
    fn text_roundtrip() {
        let ic = SteinerInstance::Ic(IcInstance::new(line(3), vec![Some(1), None, Some(1)]));
        assert_eq!(SteinerInstance::parse(&ic.format()).unwrap(), ic);
        let cr = SteinerInstance::Cr(CrInstance::new(line(3), vec![vec![2], vec![], vec![]]));
        let text = cr.format();
        assert!(text.ends_with("CR 0 2\n"));
        assert_eq!(SteinerInstance::parse(&text).unwrap(), cr);
        assert!(SteinerInstance::parse("2 1\n0 1 1\nIC 0 1\nCR 0 1\n").is_err());
    }

    #[test]
    fn forest_detection() {
        let g = WeightedGraph::new(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert!(is_forest(&g, &[0, 1]));
        assert!(!is_forest(&g, &[0, 1, 2]));
        let sol = ForestSolution::new(&g, vec![2, 0, 2]);
        assert_eq!(sol.edges, vec![0, 2]);
        assert_eq!(sol.weight, 2);
        assert_eq!(sol.terminal_partition(&g, &[0, 2]), vec![vec![0, 2]]);
    }
}
