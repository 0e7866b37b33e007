//! 2-SAT instances and the implication-graph solver.
//!
//! Clauses carry the tag of the alignment rule family that generated them
//! so infeasibility witnesses can name their origin.

use std::collections::BTreeMap;

/// Rule family a clause, and therefore a restriction, came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClauseTag {
    Eq1,
    Eq2,
    Eq3,
    Eq4,
    Eq5,
    Eq6,
    Eq7,
    Eq8,
    Eq9,
    Eq10,
}

impl ClauseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClauseTag::Eq1 => "eq1",
            ClauseTag::Eq2 => "eq2",
            ClauseTag::Eq3 => "eq3",
            ClauseTag::Eq4 => "eq4",
            ClauseTag::Eq5 => "eq5",
            ClauseTag::Eq6 => "eq6",
            ClauseTag::Eq7 => "eq7",
            ClauseTag::Eq8 => "eq8",
            ClauseTag::Eq9 => "eq9",
            ClauseTag::Eq10 => "eq10",
        }
    }
}

impl std::fmt::Display for ClauseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Boolean variable handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Var(pub usize);

/// A literal: a variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lit {
    pub var: Var,
    pub negated: bool,
}

impl Lit {
    pub fn pos(var: Var) -> Self {
        Self { var, negated: false }
    }

    pub fn neg(var: Var) -> Self {
        Self { var, negated: true }
    }

    pub fn complement(self) -> Self {
        Self { var: self.var, negated: !self.negated }
    }

    /// Truth value under an assignment.
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var.0] ^ self.negated
    }

    fn index(self) -> usize {
        2 * self.var.0 + usize::from(self.negated)
    }
}

/// Two-literal disjunction.
#[derive(Debug, Clone, Copy)]
pub struct Clause {
    pub a: Lit,
    pub b: Lit,
    pub tag: ClauseTag,
}

/// A 2-SAT instance with named variables.
#[derive(Debug, Clone, Default)]
pub struct TwoSatInstance {
    pub names: Vec<String>,
    pub clauses: Vec<Clause>,
}

impl TwoSatInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> Var {
        self.names.push(name.into());
        Var(self.names.len() - 1)
    }

    pub fn var_count(&self) -> usize {
        self.names.len()
    }

    pub fn add_clause(&mut self, a: Lit, b: Lit, tag: ClauseTag) {
        debug_assert!(a.var.0 < self.var_count() && b.var.0 < self.var_count());
        self.clauses.push(Clause { a, b, tag });
    }

    /// Force a literal true via the two-clause idiom `(l or aux)`,
    /// `(l or not aux)`.
    pub fn force(&mut self, l: Lit, aux: Var, tag: ClauseTag) {
        self.add_clause(l, Lit::pos(aux), tag);
        self.add_clause(l, Lit::neg(aux), tag);
    }

    pub fn tag_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for c in &self.clauses {
            *m.entry(c.tag.as_str()).or_insert(0) += 1;
        }
        m
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.a.eval(assignment) || c.b.eval(assignment))
    }
}

/// Solver outcome: a satisfying assignment or the first variable found
/// equivalent to its own negation.
#[derive(Debug, Clone)]
pub enum SatResult {
    Sat(Vec<bool>),
    Unsat { core_var: Var },
}

/// Implication-graph 2-SAT: Tarjan's strongly-connected components over
/// the graph with arcs `!a -> b` and `!b -> a` per clause; a variable
/// sharing a component with its negation is contradictory, otherwise the
/// reverse topological order of components yields an assignment.
pub fn solve_2sat(inst: &TwoSatInstance) -> SatResult {
    let n = inst.var_count();
    let nodes = 2 * n;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nodes];
    for c in &inst.clauses {
        adj[c.a.complement().index()].push(c.b.index() as u32);
        adj[c.b.complement().index()].push(c.a.index() as u32);
    }

    // iterative Tarjan
    const UNSET: u32 = u32::MAX;
    let mut index = vec![UNSET; nodes];
    let mut low = vec![0u32; nodes];
    let mut comp = vec![UNSET; nodes];
    let mut on_stack = vec![false; nodes];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut counter = 0u32;
    let mut n_comp = 0u32;
    for start in 0..nodes as u32 {
        if index[start as usize] != UNSET {
            continue;
        }
        call.push((start, 0));
        index[start as usize] = counter;
        low[start as usize] = counter;
        counter += 1;
        stack.push(start);
        on_stack[start as usize] = true;
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if *ei < adj[v as usize].len() {
                let w = adj[v as usize][*ei];
                *ei += 1;
                if index[w as usize] == UNSET {
                    index[w as usize] = counter;
                    low[w as usize] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w as usize] = true;
                    call.push((w, 0));
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            } else {
                if low[v as usize] == index[v as usize] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w as usize] = false;
                        comp[w as usize] = n_comp;
                        if w == v {
                            break;
                        }
                    }
                    n_comp += 1;
                }
                call.pop();
                if let Some(&mut (p, _)) = call.last_mut() {
                    low[p as usize] = low[p as usize].min(low[v as usize]);
                }
            }
        }
    }

    let mut assignment = vec![false; n];
    for v in 0..n {
        let pos = comp[2 * v] ;
        let neg = comp[2 * v + 1];
        if pos == neg {
            return SatResult::Unsat { core_var: Var(v) };
        }
        // Tarjan numbers components in reverse topological order: a
        // literal is true when its component comes later in topological
        // order, i.e. has the smaller Tarjan number
        assignment[v] = pos < neg;
    }
    debug_assert!(inst.satisfied_by(&assignment));
    SatResult::Sat(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn simple_sat() {
        let mut inst = TwoSatInstance::new();
        let a = inst.add_var("a");
        let b = inst.add_var("b");
        inst.add_clause(Lit::pos(a), Lit::pos(b), ClauseTag::Eq1);
        inst.add_clause(Lit::neg(a), Lit::pos(b), ClauseTag::Eq1);
        match solve_2sat(&inst) {
            SatResult::Sat(asg) => {
                assert!(asg[b.0], "b must be true");
                assert!(inst.satisfied_by(&asg));
            }
            SatResult::Unsat { .. } => panic!("satisfiable instance"),
        }
    }

    #[test]
    fn simple_unsat() {
        let mut inst = TwoSatInstance::new();
        let a = inst.add_var("a");
        inst.add_clause(Lit::pos(a), Lit::pos(a), ClauseTag::Eq2);
        inst.add_clause(Lit::neg(a), Lit::neg(a), ClauseTag::Eq2);
        match solve_2sat(&inst) {
            SatResult::Unsat { core_var } => assert_eq!(core_var, a),
            SatResult::Sat(_) => panic!("unsatisfiable instance"),
        }
    }

    fn brute_force_sat(inst: &TwoSatInstance) -> bool {
        let n = inst.var_count();
        (0..1usize << n).any(|mask| {
            let asg: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            inst.satisfied_by(&asg)
        })
    }

    #[test]
    fn agrees_with_truth_table_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..500 {
            let n = 1 + rng.gen_range(0..12);
            let m = rng.gen_range(1..=3 * n);
            let mut inst = TwoSatInstance::new();
            for i in 0..n {
                inst.add_var(format!("v{i}"));
            }
            for _ in 0..m {
                let a = Lit {
                    var: Var(rng.gen_range(0..n)),
                    negated: rng.gen(),
                };
                let b = Lit {
                    var: Var(rng.gen_range(0..n)),
                    negated: rng.gen(),
                };
                inst.add_clause(a, b, ClauseTag::Eq3);
            }
            let brute = brute_force_sat(&inst);
            match solve_2sat(&inst) {
                SatResult::Sat(asg) => {
                    assert!(brute, "solver SAT but truth table disagrees");
                    assert!(inst.satisfied_by(&asg), "returned assignment invalid");
                }
                SatResult::Unsat { .. } => assert!(!brute, "solver UNSAT but satisfiable"),
            }
        }
    }

    #[test]
    fn forced_literals() {
        let mut inst = TwoSatInstance::new();
        let x = inst.add_var("x");
        let y = inst.add_var("y");
        inst.force(Lit::neg(x), y, ClauseTag::Eq1);
        match solve_2sat(&inst) {
            SatResult::Sat(asg) => assert!(!asg[x.0]),
            _ => panic!("satisfiable"),
        }
    }
}
