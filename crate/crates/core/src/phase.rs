//! Fundamental cells, wall labels and the state transition graphs built
//! from them for a fixed combinatorial parameter.
//!
//! Cell coordinate `c_i` counts the thresholds of variable `i` below the
//! cell. Cells are indexed in mixed radix with dimension 0 least
//! significant. A face is the shared boundary of a cell and its right
//! neighbour in some dimension; faces on the boundary of phase space are not
//! walls.

use std::collections::HashMap;

use crate::network::{InputCombination, RegulatoryNetwork, Sign};
use crate::parameter::{Parameter, ParameterGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellGrid {
    thresholds: Vec<usize>,
    strides: Vec<usize>,
    n_cells: usize,
}

impl CellGrid {
    /// Grid with `thresholds[i]` thresholds in dimension `i`.
    pub fn new(thresholds: Vec<usize>) -> Self {
        let mut strides = Vec::with_capacity(thresholds.len());
        let mut n_cells = 1;
        for &m in &thresholds {
            strides.push(n_cells);
            n_cells *= m + 1;
        }
        CellGrid {
            thresholds,
            strides,
            n_cells,
        }
    }

    pub fn of_network(network: &RegulatoryNetwork) -> Self {
        CellGrid::new(network.nodes().iter().map(|n| n.n_outputs()).collect())
    }

    pub fn dim(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self, dim: usize) -> usize {
        self.thresholds[dim]
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn coordinate(&self, cell: usize, dim: usize) -> usize {
        cell / self.strides[dim] % (self.thresholds[dim] + 1)
    }

    pub fn coordinates(&self, cell: usize) -> Vec<usize> {
        (0..self.dim()).map(|d| self.coordinate(cell, d)).collect()
    }

    pub fn cell(&self, coordinates: &[usize]) -> usize {
        coordinates
            .iter()
            .zip(&self.strides)
            .map(|(c, s)| c * s)
            .sum()
    }

    pub fn stride(&self, dim: usize) -> usize {
        self.strides[dim]
    }

    /// Interior faces as `(cell, dim)`: the face between `cell` and its
    /// right neighbour in `dim`.
    pub fn faces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for cell in 0..self.n_cells {
            for d in 0..self.dim() {
                if self.coordinate(cell, d) < self.thresholds[d] {
                    out.push((cell, d));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A face of a cell seen from that cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wall {
    pub cell: usize,
    pub dim: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallLabel {
    Absorbing,
    Entrance,
}

#[derive(Debug, Clone)]
struct SourceInfo {
    node: usize,
    rank: usize,
    repressing: bool,
}

/// Everything the transition graphs need about one parameter: the grid and,
/// for every cell and node, the band the node's production lies in.
#[derive(Debug, Clone)]
pub struct Labeling {
    grid: CellGrid,
    sources: Vec<Vec<SourceInfo>>,
    bands: Vec<Vec<u8>>,
    targets: Vec<u8>,
}

impl Labeling {
    pub fn new(graph: &ParameterGraph, parameter: &Parameter) -> Self {
        let network = graph.network();
        let grid = CellGrid::of_network(network);
        let ranks: Vec<Vec<usize>> = (0..network.len())
            .map(|i| graph.vertex(i, parameter.components[i]).order.rank_of())
            .collect();
        let sources: Vec<Vec<SourceInfo>> = network
            .nodes()
            .iter()
            .enumerate()
            .map(|(j, node)| {
                node.sources
                    .iter()
                    .map(|s| {
                        let source = network.node(s.node);
                        let pos = source
                            .target_position(j)
                            .expect("edge is listed on both ends");
                        SourceInfo {
                            node: s.node,
                            rank: ranks[s.node][pos],
                            repressing: s.sign == Sign::Repression,
                        }
                    })
                    .collect()
            })
            .collect();
        let bands = (0..network.len())
            .map(|j| graph.vertex(j, parameter.components[j]).band.0.clone())
            .collect();
        let mut labeling = Labeling {
            grid,
            sources,
            bands,
            targets: Vec::new(),
        };
        let n = labeling.grid.dim();
        let mut targets = vec![0u8; labeling.grid.n_cells() * n];
        for cell in 0..labeling.grid.n_cells() {
            for j in 0..n {
                let a = labeling.input_combination(cell, j);
                targets[cell * n + j] = labeling.bands[j][a.0 as usize];
            }
        }
        labeling.targets = targets;
        labeling
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// Which inputs of node `j` are on in `cell`. A source is above the
    /// threshold it uses towards `j` iff its coordinate exceeds that
    /// threshold's rank; repression swaps on and off.
    pub fn input_combination(&self, cell: usize, j: usize) -> InputCombination {
        let mut bits = 0u32;
        for (k, s) in self.sources[j].iter().enumerate() {
            let above = self.grid.coordinate(cell, s.node) > s.rank;
            if above != s.repressing {
                bits |= 1 << k;
            }
        }
        InputCombination(bits)
    }

    /// Band of node `dim`'s production in `cell`: the coordinate the flow in
    /// that dimension heads towards.
    pub fn target(&self, cell: usize, dim: usize) -> usize {
        self.targets[cell * self.grid.dim() + dim] as usize
    }

    pub fn wall_label(&self, wall: Wall) -> WallLabel {
        let c = self.grid.coordinate(wall.cell, wall.dim);
        let t = self.target(wall.cell, wall.dim);
        let entrance = match wall.side {
            Side::Left => t >= c,
            Side::Right => t <= c,
        };
        if entrance {
            WallLabel::Entrance
        } else {
            WallLabel::Absorbing
        }
    }

    /// Walls of a cell: interior faces only.
    pub fn walls(&self, cell: usize) -> Vec<Wall> {
        let mut out = Vec::new();
        for dim in 0..self.grid.dim() {
            let c = self.grid.coordinate(cell, dim);
            if c > 0 {
                out.push(Wall {
                    cell,
                    dim,
                    side: Side::Left,
                });
            }
            if c < self.grid.thresholds(dim) {
                out.push(Wall {
                    cell,
                    dim,
                    side: Side::Right,
                });
            }
        }
        out
    }

    pub fn is_attracting(&self, cell: usize) -> bool {
        (0..self.grid.dim()).all(|d| self.target(cell, d) == self.grid.coordinate(cell, d))
    }

    /// Labels of the face between `cell` and `cell + e_dim`, seen from each
    /// side.
    fn face_labels(&self, cell: usize, dim: usize) -> (WallLabel, WallLabel) {
        let right = cell + self.grid.stride(dim);
        (
            self.wall_label(Wall {
                cell,
                dim,
                side: Side::Right,
            }),
            self.wall_label(Wall {
                cell: right,
                dim,
                side: Side::Left,
            }),
        )
    }
}

/// A state transition graph together with the cells its vertices stand for.
#[derive(Debug, Clone)]
pub struct StateGraph {
    pub adjacency: Vec<Vec<usize>>,
    /// Cell represented by each vertex (`None` for face vertices).
    pub vertex_cell: Vec<Option<usize>>,
    /// For wall-graph edges between faces, the cell the flow crosses.
    edge_cell: HashMap<(usize, usize), usize>,
}

impl StateGraph {
    /// Graph whose vertex `v` stands for cell `v`.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let vertex_cell = (0..adjacency.len()).map(Some).collect();
        StateGraph {
            adjacency,
            vertex_cell,
            edge_cell: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    /// Cells underlying a set of vertices forming a recurrent component:
    /// cell vertices themselves, plus the cells crossed by face-to-face
    /// edges inside the component.
    pub fn cells_of(&self, component: &[usize]) -> Vec<usize> {
        let mut cells: Vec<usize> = component
            .iter()
            .filter_map(|&v| self.vertex_cell[v])
            .collect();
        if !self.edge_cell.is_empty() {
            let members: std::collections::HashSet<usize> = component.iter().copied().collect();
            for &v in component {
                for &w in &self.adjacency[v] {
                    if members.contains(&w) {
                        if let Some(&c) = self.edge_cell.get(&(v, w)) {
                            cells.push(c);
                        }
                    }
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

/// Cells as vertices; `κ → κ'` across a face absorbing for `κ` and entrance
/// for `κ'`; a self-edge on each attracting cell.
pub fn domain_graph(labeling: &Labeling) -> StateGraph {
    let grid = labeling.grid();
    let mut adjacency = vec![Vec::new(); grid.n_cells()];
    for cell in 0..grid.n_cells() {
        if labeling.is_attracting(cell) {
            adjacency[cell].push(cell);
        }
        for d in 0..grid.dim() {
            let c = grid.coordinate(cell, d);
            let t = labeling.target(cell, d);
            if c < grid.thresholds(d) && t > c {
                let next = cell + grid.stride(d);
                if labeling.target(next, d) > c {
                    adjacency[cell].push(next);
                }
            }
            if c > 0 && t < c {
                let next = cell - grid.stride(d);
                if labeling.target(next, d) < c {
                    adjacency[cell].push(next);
                }
            }
        }
        adjacency[cell].sort_unstable();
    }
    StateGraph {
        adjacency,
        vertex_cell: (0..grid.n_cells()).map(Some).collect(),
        edge_cell: HashMap::new(),
    }
}

struct FaceIndex {
    faces: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl FaceIndex {
    fn new(grid: &CellGrid) -> Self {
        let faces = grid.faces();
        let index = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        FaceIndex { faces, index }
    }

    /// Face id of a wall.
    fn of(&self, grid: &CellGrid, wall: Wall) -> usize {
        let key = match wall.side {
            Side::Right => (wall.cell, wall.dim),
            Side::Left => (wall.cell - grid.stride(wall.dim), wall.dim),
        };
        self.index[&key]
    }
}

/// Faces plus attracting cells as vertices. Entrance faces of a cell map to
/// its absorbing faces; entrance faces of an attracting cell map to that
/// cell, which maps to itself.
pub fn wall_graph(labeling: &Labeling) -> StateGraph {
    let grid = labeling.grid();
    let faces = FaceIndex::new(grid);
    let attracting: Vec<usize> = (0..grid.n_cells())
        .filter(|&c| labeling.is_attracting(c))
        .collect();
    let n = faces.faces.len() + attracting.len();
    let mut adjacency = vec![Vec::new(); n];
    let mut vertex_cell = vec![None; faces.faces.len()];
    vertex_cell.extend(attracting.iter().map(|&c| Some(c)));
    let mut edge_cell = HashMap::new();
    let attracting_vertex: HashMap<usize, usize> = attracting
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, faces.faces.len() + k))
        .collect();
    for cell in 0..grid.n_cells() {
        let walls = labeling.walls(cell);
        let (entrances, exits): (Vec<Wall>, Vec<Wall>) = walls
            .into_iter()
            .partition(|w| labeling.wall_label(*w) == WallLabel::Entrance);
        for e in &entrances {
            let from = faces.of(grid, *e);
            for x in &exits {
                let to = faces.of(grid, *x);
                adjacency[from].push(to);
                edge_cell.insert((from, to), cell);
            }
            if let Some(&v) = attracting_vertex.get(&cell) {
                adjacency[from].push(v);
            }
        }
        if let Some(&v) = attracting_vertex.get(&cell) {
            adjacency[v].push(v);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
        list.dedup();
    }
    StateGraph {
        adjacency,
        vertex_cell,
        edge_cell,
    }
}

/// Faces and cells as vertices: a cell maps to its absorbing faces, an
/// entrance face maps to the cell it enters, and attracting cells map to
/// themselves. Every cell is a vertex so that flow can pass through
/// non-attracting cells.
pub fn wall_domain_graph(labeling: &Labeling) -> StateGraph {
    let grid = labeling.grid();
    let faces = FaceIndex::new(grid);
    let nf = faces.faces.len();
    let mut adjacency = vec![Vec::new(); nf + grid.n_cells()];
    let mut vertex_cell = vec![None; nf];
    vertex_cell.extend((0..grid.n_cells()).map(Some));
    for cell in 0..grid.n_cells() {
        let v = nf + cell;
        for w in labeling.walls(cell) {
            let f = faces.of(grid, w);
            match labeling.wall_label(w) {
                WallLabel::Absorbing => adjacency[v].push(f),
                WallLabel::Entrance => adjacency[f].push(v),
            }
        }
        if labeling.is_attracting(cell) {
            adjacency[v].push(v);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    StateGraph {
        adjacency,
        vertex_cell,
        edge_cell: HashMap::new(),
    }
}

/// True if some face is absorbing from both sides.
pub fn has_black_wall(labeling: &Labeling) -> bool {
    labeling.grid().faces().into_iter().any(|(cell, dim)| {
        labeling.face_labels(cell, dim) == (WallLabel::Absorbing, WallLabel::Absorbing)
    })
}

/// Renders a graph as `cells <n>` followed by `u v` lines.
pub fn render_edges(graph: &StateGraph) -> String {
    let mut out = format!("cells {}\n", graph.len());
    for (u, list) in graph.adjacency.iter().enumerate() {
        for v in list {
            out.push_str(&format!("{u} {v}\n"));
        }
    }
    out
}
