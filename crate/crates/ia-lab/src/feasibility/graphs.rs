//! Link graphs over transmit/receive nodes and the decomposition of the
//! full-rank interference subgraph into constrained components.
//!
//! Nodes are encoded as `2k` (transmit side of user `k`) and `2k + 1`
//! (receive side). The graph `G` connects transmitter `j` to receiver `i`
//! whenever `H_ij` is nonzero, including direct links; the subgraph `G'`
//! keeps only full-rank cross links. Walking a full-rank cross link maps
//! signal lines to interference lines (`I_i = H_ij S_j`) and back through
//! the inverse, so every connected component of `G'` ties its members'
//! lines together by nonsingular relations; cycles restrict the choice to
//! invariant lines of the loop matrices.

use std::collections::BTreeMap;

use crate::channel::InterferenceChannel;
use crate::error::{Error, Result};

use super::subspace::{eig_lines, is_invariant_line, rank_class, EigLines, Rank, Subspace1D, M2};

pub type NodeId = usize;

pub fn tx_node(user: usize) -> NodeId {
    2 * user
}

pub fn rx_node(user: usize) -> NodeId {
    2 * user + 1
}

pub fn node_user(node: NodeId) -> usize {
    node / 2
}

pub fn node_is_tx(node: NodeId) -> bool {
    node % 2 == 0
}

/// Adjacency of the nonzero-link graph `G` and the full-rank cross-link
/// subgraph `G'`, plus the per-pair rank classification.
#[derive(Debug, Clone)]
pub struct LinkGraphs {
    pub users: usize,
    /// `rank[i][j]` classifies `H_ij` (transmitter `j` to receiver `i`).
    pub rank: Vec<Vec<Rank>>,
    /// `G` as receiver-indexed adjacency: `g[i]` lists transmitters with
    /// a nonzero link into receiver `i` (direct link included).
    pub g: Vec<Vec<usize>>,
    /// `G'` adjacency over node ids (full-rank cross links only).
    pub gp: BTreeMap<NodeId, Vec<NodeId>>,
}

/// Extract the 2x2 block of a (preprocessed) channel matrix.
pub(crate) fn block2(ch: &InterferenceChannel, i: usize, j: usize) -> M2 {
    super::subspace::m2_of(ch.h(i, j))
}

/// Build `G` and `G'` for a channel padded to two antennas everywhere.
pub fn build_link_graphs(ch: &InterferenceChannel) -> Result<LinkGraphs> {
    let k = ch.users();
    for u in 0..k {
        if ch.tx_antennas(u) != 2 || ch.rx_antennas(u) != 2 {
            return Err(Error::InvalidArgument(
                "link graphs require a channel padded to 2 antennas per node".into(),
            ));
        }
    }
    let mut rank = vec![vec![Rank::Zero; k]; k];
    let mut g = vec![Vec::new(); k];
    let mut gp: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for i in 0..k {
        for j in 0..k {
            let r = rank_class(&block2(ch, i, j));
            rank[i][j] = r;
            if r != Rank::Zero {
                g[i].push(j);
            }
            if r == Rank::Two && i != j {
                gp.entry(tx_node(j)).or_default().push(rx_node(i));
                gp.entry(rx_node(i)).or_default().push(tx_node(j));
            }
        }
    }
    for adj in gp.values_mut() {
        adj.sort_unstable();
        adj.dedup();
    }
    Ok(LinkGraphs { users: k, rank, g, gp })
}

/// Signal-line constraint class of one component of `G'`.
#[derive(Debug, Clone)]
pub enum CompClass {
    /// Tree, or every loop matrix a multiple of the identity: lines are
    /// related but one of them is a free continuous choice.
    B2,
    /// Some loop pins the choice to the invariant lines of its loop
    /// matrix; one or two candidates survive intersection (in base-node
    /// coordinates).
    B1 { candidates: Vec<Subspace1D> },
    /// Loop restrictions with empty intersection.
    Contradictory,
}

/// A connected component of `G'` with at least two nodes.
#[derive(Debug, Clone)]
pub struct Component {
    pub id: usize,
    /// Sorted member nodes; the first is the base.
    pub members: Vec<NodeId>,
    /// `value(node) = rel[node] * value(base)` as lines.
    pub rel: BTreeMap<NodeId, M2>,
    pub class: CompClass,
}

impl Component {
    pub fn base(&self) -> NodeId {
        self.members[0]
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.rel.contains_key(&node)
    }
}

/// Relation matrix for crossing one `G'` edge from `from` to `to`:
/// interference lines are images of signal lines (`I_i = H_ij S_j`), and
/// signal lines are preimages of interference lines.
fn edge_relation(ch: &InterferenceChannel, from: NodeId, to: NodeId) -> M2 {
    let (t, r) = if node_is_tx(from) { (from, to) } else { (to, from) };
    let h = block2(ch, node_user(r), node_user(t));
    if node_is_tx(from) {
        h
    } else {
        h.try_inverse().expect("full-rank link must be invertible")
    }
}

/// Decompose `G'` into components (of two or more nodes), build the
/// spanning-tree relations by BFS from the smallest node, and classify
/// each component from its fundamental-cycle loop matrices.
pub fn analyze_components(ch: &InterferenceChannel, graphs: &LinkGraphs) -> Vec<Component> {
    let mut seen: BTreeMap<NodeId, bool> = BTreeMap::new();
    let mut comps = Vec::new();
    for (&start, _) in graphs.gp.iter() {
        if seen.get(&start).copied().unwrap_or(false) {
            continue;
        }
        // BFS spanning tree with relations to the base node
        let mut rel: BTreeMap<NodeId, M2> = BTreeMap::new();
        rel.insert(start, M2::identity());
        seen.insert(start, true);
        let mut queue = std::collections::VecDeque::from([start]);
        let mut tree_edges: Vec<(NodeId, NodeId)> = Vec::new();
        let mut extra_edges: Vec<(NodeId, NodeId)> = Vec::new();
        while let Some(u) = queue.pop_front() {
            for &v in graphs.gp.get(&u).map(|a| a.as_slice()).unwrap_or(&[]) {
                if !rel.contains_key(&v) {
                    let r = edge_relation(ch, u, v) * rel[&u];
                    rel.insert(v, r);
                    seen.insert(v, true);
                    tree_edges.push((u, v));
                    queue.push_back(v);
                } else if u < v {
                    // each non-tree edge recorded once
                    if !tree_edges.contains(&(u, v)) && !tree_edges.contains(&(v, u)) {
                        extra_edges.push((u, v));
                    }
                }
            }
        }
        let mut members: Vec<NodeId> = rel.keys().copied().collect();
        members.sort_unstable();

        // every non-tree edge closes a loop whose matrix must fix the
        // base line
        enum Cand {
            Any,
            Set(Vec<Subspace1D>),
        }
        let mut cand = Cand::Any;
        let mut contradictory = false;
        for (u, v) in extra_edges {
            let loop_m = rel[&v]
                .try_inverse()
                .expect("relations are products of invertible blocks")
                * edge_relation(ch, u, v)
                * rel[&u];
            match eig_lines(&loop_m) {
                EigLines::All => {}
                eig => {
                    let lines: Vec<Subspace1D> = match eig {
                        EigLines::One(a) => vec![a],
                        EigLines::Two(a, b) => vec![a, b],
                        EigLines::All => unreachable!(),
                    };
                    cand = match cand {
                        Cand::Any => Cand::Set(lines),
                        Cand::Set(prev) => Cand::Set(
                            prev.into_iter()
                                .filter(|s| is_invariant_line(&loop_m, s, 1e-7))
                                .collect(),
                        ),
                    };
                    if let Cand::Set(ref s) = cand {
                        if s.is_empty() {
                            contradictory = true;
                            break;
                        }
                    }
                }
            }
        }
        let class = if contradictory {
            CompClass::Contradictory
        } else {
            match cand {
                Cand::Any => CompClass::B2,
                Cand::Set(candidates) => CompClass::B1 { candidates },
            }
        };
        comps.push(Component {
            id: comps.len(),
            members,
            rel,
            class,
        });
    }
    comps
}
