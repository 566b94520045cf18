//! Per-node combinatorial parameters and the factor graph they form.
//!
//! For a node with `n` inputs and `m` outputs a combinatorial parameter is a
//! threshold order (which output threshold has which rank) together with a
//! logic parameter: for each input combination `A` and each output, whether
//! the node's production `M(v(A))` lies above or below that output's scaled
//! threshold. Under a fixed order a threshold-consistent logic parameter is
//! the same thing as a band function `b(A)`, the number of thresholds lying
//! below `M(v(A))`.
//!
//! Realizable band functions are the same for every threshold order, so we
//! decide realizability once for the identity order and replicate the result
//! across all `m!` orders.

mod cache;
mod realize;

pub use cache::{FactorLibrary, CACHE_ENV};
pub use realize::{
    band_of_witness, mixed_search, product_backend, realizable, relaxation_infeasible, sum_backend,
    Backend, FactorWitness, Realizability, SearchBudget,
};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::network::{position_name, InputCombination, NodeRecord, ProductOfSums};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error("threshold-inconsistent logic parameter at input combination {combination}")]
    ThresholdInconsistent { combination: u32 },
    #[error("signature {signature}: {undecided} candidates left undecided by the search backend")]
    BackendBudgetExhausted { signature: String, undecided: usize },
    #[error("unsupported signature {0}")]
    Unsupported(String),
    #[error("malformed signature `{0}`")]
    BadSignature(String),
    #[error("cache file {path}: {message}")]
    Cache { path: String, message: String },
}

/// Shape of a network node as far as its factor graph is concerned.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeSignature {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub logic: ProductOfSums,
}

impl NodeSignature {
    pub fn new(n_inputs: usize, n_outputs: usize, logic: ProductOfSums) -> Self {
        assert_eq!(logic.arity(), n_inputs);
        NodeSignature {
            n_inputs,
            n_outputs,
            logic,
        }
    }

    pub fn of_node(node: &NodeRecord) -> Self {
        NodeSignature::new(node.n_inputs(), node.n_outputs(), node.logic.clone())
    }

    pub fn n_combinations(&self) -> usize {
        1 << self.n_inputs
    }

    fn check_supported(&self) -> Result<(), FactorError> {
        if self.n_inputs == 0 || self.n_outputs == 0 || self.n_combinations() * self.n_outputs > 64
        {
            return Err(FactorError::Unsupported(self.to_string()));
        }
        Ok(())
    }
}

impl fmt::Display for NodeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.n_inputs).map(position_name).collect();
        let mut logic = self.logic.render_with(&names);
        if !logic.starts_with('(') {
            logic = format!("({logic})");
        }
        write!(f, "{},{},{}", self.n_inputs, self.n_outputs, logic)
    }
}

impl FromStr for NodeSignature {
    type Err = FactorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FactorError::BadSignature(s.to_string());
        let mut parts = s.splitn(3, ',');
        let n: usize = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(bad)?;
        let m: usize = parts
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(bad)?;
        let logic = parts.next().ok_or_else(bad)?.trim();
        let names: Vec<String> = (0..n).map(position_name).collect();
        let mut factors = Vec::new();
        for group in logic.split(')') {
            let group = group.trim().trim_start_matches('(');
            if group.is_empty() {
                continue;
            }
            let mut members = Vec::new();
            for term in group.split('+') {
                let k = names
                    .iter()
                    .position(|v| v == term.trim())
                    .ok_or_else(bad)?;
                members.push(k);
            }
            factors.push(members);
        }
        let logic = ProductOfSums::new(factors).ok_or_else(bad)?;
        if logic.arity() != n {
            return Err(bad());
        }
        Ok(NodeSignature {
            n_inputs: n,
            n_outputs: m,
            logic,
        })
    }
}

/// Threshold order: `ranks[r]` is the local output index whose threshold has
/// rank `r` (0 = lowest).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderParameter(pub Vec<usize>);

impl OrderParameter {
    pub fn identity(m: usize) -> Self {
        OrderParameter((0..m).collect())
    }

    /// Inverse permutation: rank of each local output.
    pub fn rank_of(&self) -> Vec<usize> {
        let mut inv = vec![0; self.0.len()];
        for (rank, &t) in self.0.iter().enumerate() {
            inv[t] = rank;
        }
        inv
    }

    pub fn swapped(&self, rank: usize) -> Self {
        let mut p = self.0.clone();
        p.swap(rank, rank + 1);
        OrderParameter(p)
    }

    /// All permutations of `0..m` in lexicographic order.
    pub fn all(m: usize) -> Vec<OrderParameter> {
        let mut out = Vec::new();
        let mut p: Vec<usize> = (0..m).collect();
        loop {
            out.push(OrderParameter(p.clone()));
            // next permutation
            let Some(i) = (0..m.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
                break;
            };
            let j = (i + 1..m).rev().find(|&j| p[j] > p[i]).unwrap();
            p.swap(i, j);
            p[i + 1..].reverse();
        }
        out
    }
}

/// Logic parameter as a bit matrix: bit `A * m + r` is set iff `L(A, B) = +1`
/// for the output `B` of threshold rank `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicParameter(pub u64);

impl LogicParameter {
    /// Builds the rank-ordered bit matrix from a sign function over
    /// `(input combination, local output)`.
    pub fn from_signs(
        n_inputs: usize,
        order: &OrderParameter,
        mut positive: impl FnMut(InputCombination, usize) -> bool,
    ) -> Self {
        let m = order.0.len();
        let mut bits = 0u64;
        for a in InputCombination::all(n_inputs) {
            for (r, &t) in order.0.iter().enumerate() {
                if positive(a, t) {
                    bits |= 1 << (a.0 as usize * m + r);
                }
            }
        }
        LogicParameter(bits)
    }

    pub fn get(self, combination: InputCombination, rank: usize, m: usize) -> bool {
        self.0 >> (combination.0 as usize * m + rank) & 1 == 1
    }

    pub fn to_hex(self) -> String {
        format!("{:x}", self.0)
    }
}

/// Number of thresholds (in rank order) below `M(v(A))`, per input
/// combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BandFunction(pub Vec<u8>);

impl BandFunction {
    pub fn band(&self, combination: InputCombination) -> usize {
        self.0[combination.0 as usize] as usize
    }

    pub fn to_logic(&self, m: usize) -> LogicParameter {
        let mut bits = 0u64;
        for (a, &b) in self.0.iter().enumerate() {
            for r in 0..b as usize {
                bits |= 1 << (a * m + r);
            }
        }
        LogicParameter(bits)
    }

    pub fn is_monotone(&self) -> bool {
        let n = self.0.len();
        (0..n).all(|a| (0..n).all(|b| a & !b != 0 || self.0[a] <= self.0[b]))
    }
}

/// Converts a logic parameter to its band function, failing if the `+1`
/// entries of some row are not a prefix of the rank order.
pub fn band_function(
    logic: LogicParameter,
    n_inputs: usize,
    n_outputs: usize,
) -> Result<BandFunction, FactorError> {
    let mut bands = Vec::with_capacity(1 << n_inputs);
    for a in InputCombination::all(n_inputs) {
        let count = (0..n_outputs)
            .filter(|&r| logic.get(a, r, n_outputs))
            .count();
        if (0..count).any(|r| !logic.get(a, r, n_outputs)) {
            return Err(FactorError::ThresholdInconsistent { combination: a.0 });
        }
        bands.push(count as u8);
    }
    Ok(BandFunction(bands))
}

/// All monotone band functions from input combinations into `0..=m`, in
/// lexicographic order of their value vectors.
pub fn monotone_band_functions(n_inputs: usize, m: usize) -> Vec<BandFunction> {
    fn extend(n_inputs: usize, m: usize, current: &mut Vec<u8>, out: &mut Vec<BandFunction>) {
        let a = current.len();
        if a == 1 << n_inputs {
            out.push(BandFunction(current.clone()));
            return;
        }
        let lower = (0..n_inputs)
            .filter(|k| a >> k & 1 == 1)
            .map(|k| current[a & !(1 << k)])
            .max()
            .unwrap_or(0);
        for b in lower..=m as u8 {
            current.push(b);
            extend(n_inputs, m, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    extend(n_inputs, m, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorVertex {
    pub order: OrderParameter,
    pub logic: LogicParameter,
    pub band: BandFunction,
    pub witness: Option<FactorWitness>,
}

impl FactorVertex {
    /// `L(A, output)` as a boolean (`true` = +1) for a local output index.
    pub fn sign(&self, combination: InputCombination, output: usize) -> bool {
        let rank = self.order.rank_of()[output];
        self.band.band(combination) > rank
    }
}

#[derive(Debug, Clone)]
pub struct FactorGraph {
    pub signature: NodeSignature,
    pub vertices: Vec<FactorVertex>,
    pub edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    lookup: HashMap<(OrderParameter, LogicParameter), usize>,
    /// Candidates the search backend could neither realize nor refute; they
    /// are excluded from the graph.
    pub undecided: usize,
}

impl FactorGraph {
    pub(crate) fn assemble(
        signature: NodeSignature,
        vertices: Vec<FactorVertex>,
        mut edges: Vec<(usize, usize)>,
        undecided: usize,
    ) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let lookup = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| ((v.order.clone(), v.logic), i))
            .collect();
        FactorGraph {
            signature,
            vertices,
            edges,
            adjacency,
            lookup,
            undecided,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn neighbors(&self, vertex: usize) -> &[usize] {
        &self.adjacency[vertex]
    }

    pub fn find(&self, order: &OrderParameter, logic: LogicParameter) -> Option<usize> {
        self.lookup.get(&(order.clone(), logic)).copied()
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.len()
    }
}

/// What to do with candidates the search backend leaves undecided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UndecidedPolicy {
    /// Exclude them and record the count in `FactorGraph::undecided`.
    #[default]
    Exclude,
    /// Fail with `BackendBudgetExhausted`.
    Reject,
}

/// Builds the factor graph for a signature by enumeration.
pub fn build_factor_graph(
    signature: &NodeSignature,
    policy: UndecidedPolicy,
) -> Result<FactorGraph, FactorError> {
    signature.check_supported()?;
    let m = signature.n_outputs;
    let candidates = monotone_band_functions(signature.n_inputs, m);
    let decisions: Vec<Realizability> = candidates
        .par_iter()
        .map(|band| realizable(signature, band, &SearchBudget::default()))
        .collect();

    let mut realized: Vec<(BandFunction, FactorWitness)> = Vec::new();
    let mut undecided = 0;
    for (band, decision) in candidates.into_iter().zip(decisions) {
        match decision {
            Realizability::Yes(w) => realized.push((band, w)),
            Realizability::No => {}
            Realizability::Undecided => undecided += 1,
        }
    }
    if undecided > 0 && policy == UndecidedPolicy::Reject {
        return Err(FactorError::BackendBudgetExhausted {
            signature: signature.to_string(),
            undecided,
        });
    }
    Ok(replicate(signature, realized, undecided))
}

/// Copies the reference-order vertices into every threshold order and adds
/// flip and swap edges.
pub(crate) fn replicate(
    signature: &NodeSignature,
    mut realized: Vec<(BandFunction, FactorWitness)>,
    undecided: usize,
) -> FactorGraph {
    let m = signature.n_outputs;
    realized.sort_by_key(|(band, _)| band.to_logic(m));
    let orders = OrderParameter::all(m);
    let block = realized.len();
    let mut vertices = Vec::with_capacity(block * orders.len());
    for order in &orders {
        for (band, witness) in &realized {
            vertices.push(FactorVertex {
                order: order.clone(),
                logic: band.to_logic(m),
                band: band.clone(),
                witness: Some(witness.clone()),
            });
        }
    }
    let within: HashMap<LogicParameter, usize> = realized
        .iter()
        .enumerate()
        .map(|(i, (b, _))| (b.to_logic(m), i))
        .collect();
    let block_of: HashMap<&OrderParameter, usize> =
        orders.iter().enumerate().map(|(i, o)| (o, i)).collect();

    let mut edges = Vec::new();
    for (i, (band, _)) in realized.iter().enumerate() {
        // single flips: one band value moves by one
        for a in 0..band.0.len() {
            for delta in [-1i32, 1] {
                let nb = band.0[a] as i32 + delta;
                if nb < 0 || nb > m as i32 {
                    continue;
                }
                let mut other = band.clone();
                other.0[a] = nb as u8;
                if let Some(&j) = within.get(&other.to_logic(m)) {
                    if i < j {
                        for b in 0..orders.len() {
                            edges.push((b * block + i, b * block + j));
                        }
                    }
                }
            }
        }
        // swaps of consecutive thresholds with no value between them
        for r in 0..m.saturating_sub(1) {
            if band.0.iter().any(|&b| b as usize == r + 1) {
                continue;
            }
            for (b, order) in orders.iter().enumerate() {
                let other = block_of[&order.swapped(r)];
                if b < other {
                    edges.push((b * block + i, other * block + i));
                }
            }
        }
    }
    FactorGraph::assemble(signature.clone(), vertices, edges, undecided)
}

/// Breadth-first construction from the all-below seed, testing each
/// candidate neighbor for realizability. Used to cross-check enumeration.
pub fn build_factor_graph_bfs(signature: &NodeSignature) -> Result<FactorGraph, FactorError> {
    signature.check_supported()?;
    let m = signature.n_outputs;
    let n_comb = signature.n_combinations();
    let budget = SearchBudget::default();
    let seed = BandFunction(vec![0; n_comb]);
    let mut realized = Vec::new();
    let mut seen: HashMap<BandFunction, bool> = HashMap::new();
    let mut queue = std::collections::VecDeque::new();
    let mut undecided = 0;
    if let Realizability::Yes(w) = realizable(signature, &seed, &budget) {
        seen.insert(seed.clone(), true);
        realized.push((seed.clone(), w));
        queue.push_back(seed);
    }
    while let Some(band) = queue.pop_front() {
        for a in 0..n_comb {
            for delta in [-1i32, 1] {
                let nb = band.0[a] as i32 + delta;
                if nb < 0 || nb > m as i32 {
                    continue;
                }
                let mut next = band.clone();
                next.0[a] = nb as u8;
                if seen.contains_key(&next) {
                    continue;
                }
                let ok = next.is_monotone()
                    && match realizable(signature, &next, &budget) {
                        Realizability::Yes(w) => {
                            realized.push((next.clone(), w));
                            true
                        }
                        Realizability::No => false,
                        Realizability::Undecided => {
                            undecided += 1;
                            false
                        }
                    };
                seen.insert(next.clone(), ok);
                if ok {
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(replicate(signature, realized, undecided))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(s: &str) -> NodeSignature {
        s.parse().unwrap()
    }

    #[test]
    fn signature_round_trip() {
        for s in ["1,1,(x)", "3,2,(x)(y+z)", "3,3,(x+y+z)", "2,1,(x)(y)"] {
            assert_eq!(sig(s).to_string(), s);
        }
        assert!("3,2,(x)(y)".parse::<NodeSignature>().is_err());
    }

    #[test]
    fn permutations_lexicographic() {
        let all = OrderParameter::all(3);
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].0, vec![0, 1, 2]);
        assert_eq!(all[1].0, vec![0, 2, 1]);
        assert_eq!(all[5].0, vec![2, 1, 0]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn band_function_examples() {
        // 1 input, 1 output: L(off) = -1, L(on) = +1
        let logic = LogicParameter::from_signs(1, &OrderParameter::identity(1), |a, _| a.0 == 1);
        assert_eq!(
            band_function(logic, 1, 1).unwrap(),
            BandFunction(vec![0, 1])
        );
        // all -1
        assert_eq!(
            band_function(LogicParameter(0), 3, 2).unwrap(),
            BandFunction(vec![0; 8])
        );
        // ranks (a < b); L(on, a) = -1, L(on, b) = +1
        let order = OrderParameter(vec![0, 1]);
        let logic = LogicParameter::from_signs(1, &order, |a, t| a.0 == 1 && t == 1);
        assert_eq!(
            band_function(logic, 1, 2),
            Err(FactorError::ThresholdInconsistent { combination: 1 })
        );
    }

    #[test]
    fn monotone_counts_brute_force() {
        // Compare against filtering every map into 0..=m.
        for (n, m) in [(1usize, 1usize), (1, 3), (2, 2), (3, 1), (3, 2)] {
            let k = 1usize << n;
            let mut brute = 0;
            let total = (m + 1).pow(k as u32);
            for code in 0..total {
                let mut c = code;
                let values: Vec<u8> = (0..k)
                    .map(|_| {
                        let v = (c % (m + 1)) as u8;
                        c /= m + 1;
                        v
                    })
                    .collect();
                if BandFunction(values).is_monotone() {
                    brute += 1;
                }
            }
            assert_eq!(monotone_band_functions(n, m).len(), brute, "n={n} m={m}");
        }
    }

    #[test]
    fn self_activator_factor_graph() {
        let g = build_factor_graph(&sig("1,1,(x)"), UndecidedPolicy::Reject).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
        // canonical order by bit matrix: L = (-,-), (-,+), (+,+)
        let bands: Vec<_> = g.vertices.iter().map(|v| v.band.0.clone()).collect();
        assert_eq!(bands, vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn two_input_product_is_a_path() {
        let g = build_factor_graph(&sig("2,1,(x)(y)"), UndecidedPolicy::Reject).unwrap();
        assert_eq!(g.len(), 6);
        let mut degrees: Vec<usize> = (0..g.len()).map(|v| g.neighbors(v).len()).collect();
        degrees.sort_unstable();
        // the diamond's up-sets form a 6-vertex graph with a 4-cycle in the middle
        assert_eq!(g.edges.len(), 6);
        assert!(g.is_connected());
        assert_eq!(degrees, vec![1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn small_table_rows() {
        for (s, per_order) in [("1,2,(x)", 6), ("1,3,(x)", 10), ("2,1,(x+y)", 6)] {
            let g = build_factor_graph(&sig(s), UndecidedPolicy::Reject).unwrap();
            let fact: usize = (1..=g.signature.n_outputs).product();
            assert_eq!(g.len(), per_order * fact, "{s}");
            assert!(g.is_connected(), "{s}");
        }
    }

    #[test]
    fn bfs_matches_enumeration() {
        for s in ["1,2,(x)", "2,2,(x+y)", "2,2,(x)(y)", "3,1,(x)(y+z)"] {
            let a = build_factor_graph(&sig(s), UndecidedPolicy::Reject).unwrap();
            let b = build_factor_graph_bfs(&sig(s)).unwrap();
            let keys = |g: &FactorGraph| {
                g.vertices
                    .iter()
                    .map(|v| (v.order.clone(), v.logic))
                    .collect::<Vec<_>>()
            };
            assert_eq!(keys(&a), keys(&b), "{s}");
            assert_eq!(a.edges, b.edges, "{s}");
        }
    }

    #[test]
    fn order_blocks_share_logic_sets() {
        let g = build_factor_graph(&sig("2,2,(x)(y)"), UndecidedPolicy::Reject).unwrap();
        let block = g.len() / 2;
        for i in 0..block {
            assert_eq!(g.vertices[i].logic, g.vertices[block + i].logic);
            assert_ne!(g.vertices[i].order, g.vertices[block + i].order);
        }
    }

    #[test]
    fn edges_are_flips_or_swaps() {
        let g = build_factor_graph(&sig("2,2,(x+y)"), UndecidedPolicy::Reject).unwrap();
        for &(a, b) in &g.edges {
            let (va, vb) = (&g.vertices[a], &g.vertices[b]);
            if va.order == vb.order {
                assert_eq!((va.logic.0 ^ vb.logic.0).count_ones(), 1);
            } else {
                // same logic as a function of (A, output)
                for comb in InputCombination::all(2) {
                    for t in 0..2 {
                        assert_eq!(va.sign(comb, t), vb.sign(comb, t));
                    }
                }
                let diff = (0..2).filter(|&r| va.order.0[r] != vb.order.0[r]).count();
                assert_eq!(diff, 2);
            }
        }
    }
}
