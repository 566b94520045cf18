//! Recurrent components of a state transition graph and the annotated
//! Morse graph they form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::phase::{CellGrid, StateGraph};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Annotation {
    Fp,
    FpOn,
    FpOff,
    Fc,
    /// Partial cycle: the variables that make transitions, sorted by index.
    Pc(Vec<String>),
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Annotation::Fp => f.write_str("FP"),
            Annotation::FpOn => f.write_str("FP_ON"),
            Annotation::FpOff => f.write_str("FP_OFF"),
            Annotation::Fc => f.write_str("FC"),
            Annotation::Pc(vars) => write!(f, "PC({})", vars.join(",")),
        }
    }
}

impl FromStr for Annotation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "FP" => Annotation::Fp,
            "FP_ON" => Annotation::FpOn,
            "FP_OFF" => Annotation::FpOff,
            "FC" => Annotation::Fc,
            _ => {
                let inner = s
                    .strip_prefix("PC(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("unknown annotation `{s}`"))?;
                Annotation::Pc(inner.split(',').map(str::to_string).collect())
            }
        })
    }
}

/// Annotation of a Morse set given its cells.
pub fn annotate(grid: &CellGrid, cells: &[usize], names: &[String]) -> Annotation {
    if let [cell] = cells {
        let coords = grid.coordinates(*cell);
        return if coords.iter().all(|&c| c == 0) {
            Annotation::FpOff
        } else if coords.iter().all(|&c| c >= 1) {
            Annotation::FpOn
        } else {
            Annotation::Fp
        };
    }
    let moving: Vec<usize> = (0..grid.dim())
        .filter(|&d| {
            let first = grid.coordinate(cells[0], d);
            cells.iter().any(|&c| grid.coordinate(c, d) != first)
        })
        .collect();
    if moving.len() == grid.dim() {
        Annotation::Fc
    } else {
        Annotation::Pc(moving.iter().map(|&d| names[d].clone()).collect())
    }
}

/// Strongly connected components (iterative Tarjan). Components come out in
/// reverse topological order: every edge leaving a component points to an
/// earlier one.
pub fn strongly_connected(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if let Some(&w) = adjacency[v].get(*next) {
                *next += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                components.push(component);
            }
        }
    }
    components
}

fn is_recurrent(adjacency: &[Vec<usize>], component: &[usize]) -> bool {
    component.len() > 1 || adjacency[component[0]].contains(&component[0])
}

/// Recurrent components ordered by smallest vertex.
pub fn recurrent_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = strongly_connected(adjacency)
        .into_iter()
        .filter(|c| is_recurrent(adjacency, c))
        .collect();
    out.sort_by_key(|c| c[0]);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorseNode {
    /// Vertices of the state graph in this recurrent component.
    pub vertices: Vec<usize>,
    pub cells: Vec<usize>,
    pub annotation: Annotation,
}

/// Morse sets with the Hasse diagram of reachability. An edge `(p, q)`
/// means `q` is reachable from `p` (`q < p`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorseGraph {
    pub nodes: Vec<MorseNode>,
    pub edges: Vec<(usize, usize)>,
}

/// Reachability among recurrent components: `reach[p]` holds every `q`
/// reachable from `p` by a nonempty path, `q != p`.
fn morse_reachability(adjacency: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
    let sccs = strongly_connected(adjacency);
    let mut scc_of = vec![0; adjacency.len()];
    for (k, c) in sccs.iter().enumerate() {
        for &v in c {
            scc_of[v] = k;
        }
    }
    let mut morse: Vec<(usize, usize)> = sccs
        .iter()
        .enumerate()
        .filter(|(_, c)| is_recurrent(adjacency, c))
        .map(|(k, c)| (c[0], k))
        .collect();
    morse.sort_unstable();
    let mut morse_of_scc = vec![usize::MAX; sccs.len()];
    for (i, &(_, k)) in morse.iter().enumerate() {
        morse_of_scc[k] = i;
    }
    let words = morse.len().div_ceil(64).max(1);
    let mut below = vec![vec![0u64; words]; sccs.len()];
    // sinks come first in Tarjan order
    for k in 0..sccs.len() {
        let mut acc = vec![0u64; words];
        for &v in &sccs[k] {
            for &w in &adjacency[v] {
                let t = scc_of[w];
                if t == k {
                    continue;
                }
                for (a, b) in acc.iter_mut().zip(&below[t]) {
                    *a |= *b;
                }
                if morse_of_scc[t] != usize::MAX {
                    let m = morse_of_scc[t];
                    acc[m / 64] |= 1 << (m % 64);
                }
            }
        }
        below[k] = acc;
    }
    let reach = morse
        .iter()
        .map(|&(_, k)| {
            (0..morse.len())
                .map(|m| below[k][m / 64] >> (m % 64) & 1 == 1)
                .collect()
        })
        .collect();
    let components = morse.iter().map(|&(_, k)| sccs[k].clone()).collect();
    (components, reach)
}

/// Morse graph of a state graph; annotations come from the cells of each
/// recurrent component.
pub fn morse_graph(graph: &StateGraph, grid: &CellGrid, names: &[String]) -> MorseGraph {
    let (components, reach) = morse_reachability(&graph.adjacency);
    let k = components.len();
    let mut edges = Vec::new();
    for p in 0..k {
        for q in 0..k {
            if reach[p][q] && !(0..k).any(|r| reach[p][r] && reach[r][q]) {
                edges.push((p, q));
            }
        }
    }
    let nodes = components
        .into_iter()
        .map(|vertices| {
            let cells = graph.cells_of(&vertices);
            let annotation = annotate(grid, &cells, names);
            MorseNode {
                vertices,
                cells,
                annotation,
            }
        })
        .collect();
    MorseGraph { nodes, edges }
}

/// Annotations and Hasse edges only; the form stored in a database.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MorseShape {
    pub annotations: Vec<Annotation>,
    pub edges: Vec<(usize, usize)>,
}

impl MorseShape {
    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    /// Nodes with no outgoing edge (nothing below them).
    pub fn minimal(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| !self.edges.iter().any(|&(p, _)| p == v))
            .collect()
    }

    /// Nodes with no incoming edge.
    pub fn maximal(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| !self.edges.iter().any(|&(_, q)| q == v))
            .collect()
    }

    fn serialize(&self, order: &[usize]) -> String {
        // order[v] = position of vertex v
        let mut ann = vec![String::new(); self.len()];
        for v in 0..self.len() {
            ann[order[v]] = self.annotations[v].to_string();
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| (order[a], order[b]))
            .collect();
        edges.sort_unstable();
        let edges: Vec<String> = edges.iter().map(|(a, b)| format!("{a}>{b}")).collect();
        format!("{}|{}", ann.join(" "), edges.join(","))
    }

    /// Serialization invariant under relabeling of nodes.
    pub fn canonical_form(&self) -> String {
        let n = self.len();
        let mut out_n = vec![Vec::new(); n];
        let mut in_n = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            out_n[a].push(b);
            in_n[b].push(a);
        }
        let keys: Vec<(String, usize, usize)> = (0..n)
            .map(|v| {
                (
                    self.annotations[v].to_string(),
                    out_n[v].len(),
                    in_n[v].len(),
                )
            })
            .collect();
        let colors = rank(&keys);
        let mut best: Option<String> = None;
        self.search(refine(colors, &out_n, &in_n), &out_n, &in_n, &mut best);
        best.unwrap_or_else(|| "|".into())
    }

    fn search(
        &self,
        colors: Vec<usize>,
        out_n: &[Vec<usize>],
        in_n: &[Vec<usize>],
        best: &mut Option<String>,
    ) {
        let n = colors.len();
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            classes.entry(colors[v]).or_default().push(v);
        }
        let Some((_, cell)) = classes.iter().find(|(_, members)| members.len() > 1) else {
            let s = self.serialize(&colors);
            if best.as_ref().is_none_or(|b| s < *b) {
                *best = Some(s);
            }
            return;
        };
        let mut tried: Vec<usize> = Vec::new();
        for &v in cell {
            // swapping twins is an automorphism, so one representative suffices
            let twin = tried.iter().any(|&u| {
                let strip = |list: &[usize]| {
                    let mut l: Vec<usize> =
                        list.iter().copied().filter(|&x| x != u && x != v).collect();
                    l.sort_unstable();
                    l
                };
                out_n[u].contains(&v) == out_n[v].contains(&u)
                    && strip(&out_n[u]) == strip(&out_n[v])
                    && strip(&in_n[u]) == strip(&in_n[v])
            });
            if twin {
                continue;
            }
            tried.push(v);
            let mut c: Vec<(usize, usize)> = colors.iter().map(|&x| (x, 1)).collect();
            c[v].1 = 0;
            self.search(refine(rank(&c), out_n, in_n), out_n, in_n, best);
        }
    }

    pub fn to_canonical(&self) -> MorseShape {
        self.canonical_form()
            .parse()
            .expect("canonical form parses")
    }

    /// `node <k>: <annotation>` lines then `edge <a> <b>` lines.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (k, a) in self.annotations.iter().enumerate() {
            out.push_str(&format!("node {k}: {a}\n"));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("edge {a} {b}\n"));
        }
        out
    }
}

impl FromStr for MorseShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (nodes, edges) = s.split_once('|').ok_or("missing `|`")?;
        let annotations = nodes
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Annotation>, _>>()?;
        let mut parsed = Vec::new();
        for e in edges.split(',').filter(|e| !e.is_empty()) {
            let (a, b) = e.split_once('>').ok_or_else(|| format!("bad edge `{e}`"))?;
            let a: usize = a.parse().map_err(|_| format!("bad edge `{e}`"))?;
            let b: usize = b.parse().map_err(|_| format!("bad edge `{e}`"))?;
            if a >= annotations.len() || b >= annotations.len() {
                return Err(format!("edge `{e}` out of range"));
            }
            parsed.push((a, b));
        }
        Ok(MorseShape {
            annotations,
            edges: parsed,
        })
    }
}

impl From<&MorseGraph> for MorseShape {
    fn from(g: &MorseGraph) -> Self {
        MorseShape {
            annotations: g.nodes.iter().map(|n| n.annotation.clone()).collect(),
            edges: g.edges.clone(),
        }
    }
}

impl MorseGraph {
    pub fn shape(&self) -> MorseShape {
        MorseShape::from(self)
    }

    pub fn canonical_form(&self) -> String {
        self.shape().canonical_form()
    }
}

/// Dense ranks of keys.
fn rank<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap())
        .collect()
}

/// Colour refinement by sorted neighbour colours until the partition is
/// stable.
fn refine(mut colors: Vec<usize>, out_n: &[Vec<usize>], in_n: &[Vec<usize>]) -> Vec<usize> {
    loop {
        let classes = colors
            .iter()
            .collect::<std::collections::HashSet<_>>()
            .len();
        let keys: Vec<(usize, Vec<usize>, Vec<usize>)> = (0..colors.len())
            .map(|v| {
                let mut o: Vec<usize> = out_n[v].iter().map(|&w| colors[w]).collect();
                let mut i: Vec<usize> = in_n[v].iter().map(|&w| colors[w]).collect();
                o.sort_unstable();
                i.sort_unstable();
                (colors[v], o, i)
            })
            .collect();
        let next = rank(&keys);
        let next_classes = next.iter().collect::<std::collections::HashSet<_>>().len();
        colors = next;
        if next_classes == classes {
            return colors;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn trivial_components() {
        assert_eq!(recurrent_components(&[vec![0]]), vec![vec![0]]);
        assert!(recurrent_components(&[vec![]]).is_empty());
        let chain = vec![vec![0, 1], vec![2], vec![2]];
        assert_eq!(recurrent_components(&chain), vec![vec![0], vec![2]]);
    }

    #[test]
    fn deep_graph_is_stack_safe() {
        let n = 200_000;
        let adjacency: Vec<Vec<usize>> = (0..n).map(|v| vec![(v + 1) % n]).collect();
        assert_eq!(recurrent_components(&adjacency).len(), 1);
    }

    #[test]
    fn annotations() {
        let grid = CellGrid::new(vec![1, 1, 1]);
        let n = names(3);
        assert_eq!(annotate(&grid, &[0], &n), Annotation::FpOff);
        assert_eq!(annotate(&grid, &[7], &n), Annotation::FpOn);
        assert_eq!(annotate(&grid, &[1], &n), Annotation::Fp);
        assert_eq!(annotate(&grid, &[0, 1, 3, 7], &n), Annotation::Fc);
        assert_eq!(
            annotate(&grid, &[0, 1, 3, 2], &n),
            Annotation::Pc(vec!["x1".into(), "x2".into()])
        );
        assert_eq!(
            "PC(x1,x2)".parse::<Annotation>().unwrap().to_string(),
            "PC(x1,x2)"
        );
    }

    fn shape(ann: &[&str], edges: &[(usize, usize)]) -> MorseShape {
        MorseShape {
            annotations: ann.iter().map(|a| a.parse().unwrap()).collect(),
            edges: edges.to_vec(),
        }
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(shape(&["FP"], &[]).canonical_form(), "FP|");
        assert_ne!(
            shape(&["FP_ON"], &[]).canonical_form(),
            shape(&["FP_OFF"], &[]).canonical_form()
        );
        let a = shape(&["FC", "FP"], &[(0, 1)]).canonical_form();
        let b = shape(&["FP", "FC"], &[(1, 0)]).canonical_form();
        assert_eq!(a, b);
        assert_eq!(a, "FC FP|0>1");
        assert_eq!(a.parse::<MorseShape>().unwrap().canonical_form(), a);
    }

    #[test]
    fn chain_reachability() {
        let g = StateGraph::from_adjacency(vec![vec![0, 1], vec![2], vec![2]]);
        let grid = CellGrid::new(vec![2]);
        let mg = morse_graph(&g, &grid, &names(1));
        assert_eq!(mg.nodes.len(), 2);
        assert_eq!(mg.edges, vec![(0, 1)]);
    }

    #[test]
    fn hasse_is_transitive_reduction() {
        // 0 -> 1 -> 2 and 0 -> 2, all self-looped
        let g = StateGraph::from_adjacency(vec![vec![0, 1, 2], vec![1, 2], vec![2]]);
        let mg = morse_graph(&g, &CellGrid::new(vec![2]), &names(1));
        assert_eq!(mg.edges, vec![(0, 1), (1, 2)]);
    }

    fn permuted(s: &MorseShape, perm: &[usize]) -> MorseShape {
        let mut annotations = vec![Annotation::Fp; s.len()];
        for v in 0..s.len() {
            annotations[perm[v]] = s.annotations[v].clone();
        }
        MorseShape {
            annotations,
            edges: s.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect(),
        }
    }

    fn arb_shape() -> impl Strategy<Value = MorseShape> {
        (1usize..8).prop_flat_map(|n| {
            let ann = prop::collection::vec(0usize..3, n);
            let edges = prop::collection::vec((0..n, 0..n), 0..12);
            (ann, edges).prop_map(move |(ann, edges)| {
                let labels = ["FP", "FC", "FP_OFF"];
                // keep it acyclic: edges go from lower to higher index
                let mut e: Vec<(usize, usize)> = edges.into_iter().filter(|(a, b)| a < b).collect();
                e.sort_unstable();
                e.dedup();
                MorseShape {
                    annotations: ann.iter().map(|&a| labels[a].parse().unwrap()).collect(),
                    edges: e,
                }
            })
        })
    }

    proptest! {
        #[test]
        fn canonical_form_is_relabeling_invariant(
            s in arb_shape(),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut perm: Vec<usize> = (0..s.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let t = permuted(&s, &perm);
            prop_assert_eq!(s.canonical_form(), t.canonical_form());
        }

        #[test]
        fn canonical_form_separates_non_isomorphic(a in arb_shape(), b in arb_shape()) {
            // brute-force isomorphism oracle over all permutations
            let iso = a.len() == b.len() && a.edges.len() == b.edges.len() && {
                let n = a.len();
                let mut perm: Vec<usize> = (0..n).collect();
                let mut found = false;
                loop {
                    let mut pa = permuted(&a, &perm);
                    pa.edges.sort_unstable();
                    let mut eb = b.edges.clone();
                    eb.sort_unstable();
                    if pa.annotations == b.annotations && pa.edges == eb {
                        found = true;
                        break;
                    }
                    let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else { break };
                    let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
                    perm.swap(i, j);
                    perm[i + 1..].reverse();
                }
                found
            };
            prop_assert_eq!(iso, a.canonical_form() == b.canonical_form());
        }
    }
}
