//! Structured quadrilateral meshes of the unit square.
//!
//! Cells are axis-aligned squares stored as leaves of a quadtree over an
//! integer lattice with `2^LATTICE_BITS` units per side, so every node
//! coordinate is exact in `f64`. Refinement is one-irregular across edges;
//! the resulting hanging nodes are constrained to the average of the two
//! endpoints of the coarse edge they sit on.
//!
//! Straight axis-aligned slits are carved by duplicating the nodes that
//! lie strictly inside the slit (plus a boundary endpoint), so cells on
//! the two faces no longer share degrees of freedom.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::MeshError;

/// A point in the plane.
pub type Point = [f64; 2];

const LATTICE_BITS: u32 = 24;
const LATTICE: u64 = 1 << LATTICE_BITS;

/// Quadtree address of a cell: refinement level and integer position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct CellKey {
    level: u8,
    i: u32,
    j: u32,
}

impl CellKey {
    fn size(self) -> u64 {
        LATTICE >> self.level
    }

    fn origin(self) -> (u64, u64) {
        (self.i as u64 * self.size(), self.j as u64 * self.size())
    }

    fn children(self) -> [CellKey; 4] {
        let (l, i, j) = (self.level + 1, self.i * 2, self.j * 2);
        [
            CellKey { level: l, i, j },
            CellKey { level: l, i: i + 1, j },
            CellKey { level: l, i, j: j + 1 },
            CellKey { level: l, i: i + 1, j: j + 1 },
        ]
    }

    fn center(self) -> Point {
        let (x, y) = self.origin();
        let h = self.size() as f64 / 2.0;
        [to_coord(x) + h / LATTICE as f64, to_coord(y) + h / LATTICE as f64]
    }
}

fn to_coord(v: u64) -> f64 {
    v as f64 / LATTICE as f64
}

fn to_lattice(v: f64) -> Option<u64> {
    if !(0.0..=1.0).contains(&v) {
        return None;
    }
    let scaled = v * LATTICE as f64;
    (scaled.fract() == 0.0).then_some(scaled as u64)
}

/// Tag attached to every boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Left,
    RightTopHalf,
    RightBottomHalf,
    TopLeftHalf,
    TopRightHalf,
    Bottom,
    SlitFacePlus,
    SlitFaceMinus,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 8] = [
        BoundaryTag::Left,
        BoundaryTag::RightTopHalf,
        BoundaryTag::RightBottomHalf,
        BoundaryTag::TopLeftHalf,
        BoundaryTag::TopRightHalf,
        BoundaryTag::Bottom,
        BoundaryTag::SlitFacePlus,
        BoundaryTag::SlitFaceMinus,
    ];

    pub fn is_slit_face(self) -> bool {
        matches!(self, BoundaryTag::SlitFacePlus | BoundaryTag::SlitFaceMinus)
    }
}

/// The coordinate line a slit lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlitAxis {
    /// Constant `y`; the `+` face is above.
    Horizontal,
    /// Constant `x`; the `+` face is to the right.
    Vertical,
}

/// A straight, axis-aligned slit between two mesh nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlitSpec {
    pub p0: Point,
    pub p1: Point,
    pub side: SlitAxis,
}

impl SlitSpec {
    pub fn new(p0: Point, p1: Point) -> Result<Self, MeshError> {
        let side = if p0[1] == p1[1] && p0[0] != p1[0] {
            SlitAxis::Horizontal
        } else if p0[0] == p1[0] && p0[1] != p1[1] {
            SlitAxis::Vertical
        } else {
            return Err(MeshError::Alignment(format!(
                "slit {p0:?}-{p1:?} is not a non-degenerate axis-aligned segment"
            )));
        };
        Ok(SlitSpec { p0, p1, side })
    }

    /// Coordinate of the line the slit lies on.
    pub fn line(&self) -> f64 {
        match self.side {
            SlitAxis::Horizontal => self.p0[1],
            SlitAxis::Vertical => self.p0[0],
        }
    }

    /// Range covered along the slit direction.
    pub fn span(&self) -> (f64, f64) {
        let a = self.along(self.p0);
        let b = self.along(self.p1);
        (a.min(b), a.max(b))
    }

    fn along(&self, p: Point) -> f64 {
        match self.side {
            SlitAxis::Horizontal => p[0],
            SlitAxis::Vertical => p[1],
        }
    }

    fn across(&self, p: Point) -> f64 {
        match self.side {
            SlitAxis::Horizontal => p[1],
            SlitAxis::Vertical => p[0],
        }
    }

    /// Euclidean distance from `p` to the segment.
    pub fn distance(&self, p: Point) -> f64 {
        let (lo, hi) = self.span();
        let t = self.along(p).clamp(lo, hi);
        let d_along = self.along(p) - t;
        let d_across = self.across(p) - self.line();
        d_along.hypot(d_across)
    }
}

/// Axis-aligned rectangle `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn unit() -> Self {
        Rect { min: [0.0, 0.0], max: [1.0, 1.0] }
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

/// An active cell. Nodes are counterclockwise starting at the lower-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub nodes: [usize; 4],
    pub level: u8,
    pub origin: Point,
    pub size: f64,
}

impl Cell {
    pub fn center(&self) -> Point {
        [self.origin[0] + 0.5 * self.size, self.origin[1] + 0.5 * self.size]
    }

    pub fn area(&self) -> f64 {
        self.size * self.size
    }
}

/// A hanging node sitting at the midpoint of a coarse edge; its value is
/// `0.5 * (parents[0] + parents[1])`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HangingNode {
    pub node: usize,
    pub parents: [usize; 2],
}

impl HangingNode {
    pub const WEIGHTS: [f64; 2] = [0.5, 0.5];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    nodes: Vec<Point>,
    cells: Vec<Cell>,
    hanging: Vec<HangingNode>,
    boundary: Vec<BoundaryEdge>,
    h_min: f64,
    keys: Vec<CellKey>,
    key_index: HashMap<CellKey, usize>,
    max_level: u8,
    slits: Vec<SlitSpec>,
    duplicated: usize,
}

impl Mesh {
    /// Uniform mesh with `4^n_global` cells.
    pub fn unit_square(n_global: u32) -> Mesh {
        assert!(n_global < LATTICE_BITS, "refinement level {n_global} exceeds lattice resolution");
        let m = 1u32 << n_global;
        let keys = (0..m)
            .flat_map(|j| (0..m).map(move |i| CellKey { level: n_global as u8, i, j }))
            .collect();
        Mesh::from_keys(keys, Vec::new()).expect("uniform mesh has no slits")
    }

    /// Refines every cell whose center lies in `region`, `levels` times, then
    /// restores one-irregularity.
    pub fn refine_box(&self, region: Rect, levels: u32) -> Mesh {
        let mut keys: BTreeSet<CellKey> = self.keys.iter().copied().collect();
        for pass in 0..levels {
            let marked: Vec<CellKey> =
                keys.iter().copied().filter(|k| region.contains(k.center())).collect();
            if marked.is_empty() {
                if pass == 0 {
                    log::warn!("refinement box {region:?} selects no cells; mesh unchanged");
                }
                break;
            }
            for k in marked {
                assert!((k.level as u32) < LATTICE_BITS - 1, "refinement exceeds lattice resolution");
                keys.remove(&k);
                keys.extend(k.children());
            }
            close_one_irregular(&mut keys);
        }
        let keys: Vec<CellKey> = keys.into_iter().collect();
        Mesh::from_keys(keys, self.slits.clone())
            .expect("slits carved on the coarse mesh stay aligned after refinement")
    }

    /// Duplicates the nodes strictly inside `slit` (and a boundary endpoint)
    /// so that the two faces are disconnected.
    pub fn carve_slit(&self, slit: SlitSpec) -> Result<Mesh, MeshError> {
        let mut slits = self.slits.clone();
        slits.push(slit);
        Mesh::from_keys(self.keys.clone(), slits)
    }

    fn from_keys(mut keys: Vec<CellKey>, slits: Vec<SlitSpec>) -> Result<Mesh, MeshError> {
        keys.sort_by_key(|k| {
            let (x, y) = k.origin();
            (y, x, k.level)
        });

        // Corner lattice points, numbered row by row.
        let mut lattice_points = BTreeSet::new();
        for k in &keys {
            let (x, y) = k.origin();
            let s = k.size();
            for (dx, dy) in [(0, 0), (s, 0), (s, s), (0, s)] {
                lattice_points.insert((y + dy, x + dx));
            }
        }
        let mut point_ids: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
        let mut lattice_of: Vec<(u64, u64)> = Vec::with_capacity(lattice_points.len());
        for (id, &(y, x)) in lattice_points.iter().enumerate() {
            point_ids.insert((x, y), vec![id]);
            lattice_of.push((x, y));
        }

        let mut cell_nodes: Vec<[usize; 4]> = keys
            .iter()
            .map(|k| {
                let (x, y) = k.origin();
                let s = k.size();
                [(x, y), (x + s, y), (x + s, y + s), (x, y + s)].map(|p| point_ids[&p][0])
            })
            .collect();

        let mut duplicated = 0;
        for slit in &slits {
            duplicated +=
                carve(slit, &keys, &mut cell_nodes, &mut point_ids, &mut lattice_of)?;
        }

        let nodes: Vec<Point> =
            lattice_of.iter().map(|&(x, y)| [to_coord(x), to_coord(y)]).collect();

        let mut node_cells: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (c, cn) in cell_nodes.iter().enumerate() {
            for &n in cn {
                node_cells[n].push(c);
            }
        }
        let key_index: HashMap<CellKey, usize> =
            keys.iter().enumerate().map(|(c, &k)| (k, c)).collect();

        let hanging = find_hanging(&keys, &cell_nodes, &point_ids, &node_cells);
        let boundary = tag_boundary(&keys, &cell_nodes, &slits);

        let max_level = keys.iter().map(|k| k.level).max().unwrap_or(0);
        let cells = keys
            .iter()
            .zip(&cell_nodes)
            .map(|(k, &nodes)| {
                let (x, y) = k.origin();
                Cell {
                    nodes,
                    level: k.level,
                    origin: [to_coord(x), to_coord(y)],
                    size: to_coord(k.size()),
                }
            })
            .collect::<Vec<_>>();
        let smallest = cells.iter().map(|c| c.size).fold(f64::INFINITY, f64::min);

        Ok(Mesh {
            nodes,
            cells,
            hanging,
            boundary,
            h_min: std::f64::consts::SQRT_2 * smallest,
            keys,
            key_index,
            max_level,
            slits,
            duplicated,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_level(&self, cell: usize) -> u8 {
        self.cells[cell].level
    }

    pub fn hanging_nodes(&self) -> &[HangingNode] {
        &self.hanging
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn slits(&self) -> &[SlitSpec] {
        &self.slits
    }

    /// Number of node copies created by slit carving.
    pub fn duplicated_nodes(&self) -> usize {
        self.duplicated
    }

    /// Minimum cell diameter (diagonal of the smallest cell).
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    /// Sorted, deduplicated nodes on edges carrying `tag`.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .boundary
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        set.into_iter().collect()
    }

    /// Index of the cell containing `p`. Cells are treated as half-open
    /// `[x0, x1) x [y0, y1)` except on the right and top sides of the domain,
    /// so points on interior edges resolve to the cell above / to the right.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
            return None;
        }
        for level in (0..=self.max_level).rev() {
            let m = 1u64 << level;
            let idx = |v: f64| ((v * m as f64).floor() as u64).min(m - 1) as u32;
            let key = CellKey { level, i: idx(p[0]), j: idx(p[1]) };
            if let Some(&c) = self.key_index.get(&key) {
                return Some(c);
            }
        }
        None
    }
}

/// Refines cells until neighbours across every edge differ by at most one level.
fn close_one_irregular(keys: &mut BTreeSet<CellKey>) {
    loop {
        let set: HashSet<CellKey> = keys.iter().copied().collect();
        let mut coarse = BTreeSet::new();
        for k in keys.iter() {
            if k.level < 2 {
                continue;
            }
            let m = 1i64 << k.level;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ni, nj) = (k.i as i64 + di, k.j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= m || nj >= m {
                    continue;
                }
                if let Some(cover) = covering_cell(&set, k.level, ni as u32, nj as u32) {
                    if cover.level + 1 < k.level {
                        coarse.insert(cover);
                    }
                }
            }
        }
        if coarse.is_empty() {
            return;
        }
        for k in coarse {
            keys.remove(&k);
            keys.extend(k.children());
        }
    }
}

/// The active cell at level `<= level` containing the level-`level` address,
/// or `None` when the region is covered by finer cells.
fn covering_cell(set: &HashSet<CellKey>, level: u8, i: u32, j: u32) -> Option<CellKey> {
    (0..=level).rev().find_map(|l| {
        let shift = level - l;
        let key = CellKey { level: l, i: i >> shift, j: j >> shift };
        set.contains(&key).then_some(key)
    })
}

/// Duplicates slit nodes in place; returns the number of copies made.
fn carve(
    slit: &SlitSpec,
    keys: &[CellKey],
    cell_nodes: &mut [[usize; 4]],
    point_ids: &mut HashMap<(u64, u64), Vec<usize>>,
    lattice_of: &mut Vec<(u64, u64)>,
) -> Result<usize, MeshError> {
    let misaligned = || {
        MeshError::Alignment(format!("slit {:?}-{:?} does not follow mesh edges", slit.p0, slit.p1))
    };
    let line = to_lattice(slit.line()).ok_or_else(misaligned)?;
    let (lo, hi) = slit.span();
    let (lo, hi) = (to_lattice(lo).ok_or_else(misaligned)?, to_lattice(hi).ok_or_else(misaligned)?);
    let horizontal = slit.side == SlitAxis::Horizontal;
    let lattice_point = |t: u64| if horizontal { (t, line) } else { (line, t) };

    // Lattice nodes on the segment, in order along the slit.
    let mut stations: Vec<u64> = point_ids
        .keys()
        .filter(|&&(x, y)| {
            let (t, s) = if horizontal { (x, y) } else { (y, x) };
            s == line && t >= lo && t <= hi
        })
        .map(|&(x, y)| if horizontal { x } else { y })
        .collect();
    stations.sort_unstable();
    if stations.first() != Some(&lo) || stations.last() != Some(&hi) {
        return Err(misaligned());
    }

    // Every consecutive pair must be an edge of some cell.
    let mut edges: HashSet<((u64, u64), (u64, u64))> = HashSet::new();
    for k in keys {
        let (x, y) = k.origin();
        let s = k.size();
        let c = [(x, y), (x + s, y), (x + s, y + s), (x, y + s)];
        for e in 0..4 {
            let (a, b) = (c[e], c[(e + 1) % 4]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    for w in stations.windows(2) {
        let (a, b) = (lattice_point(w[0]), lattice_point(w[1]));
        if !edges.contains(&(a.min(b), a.max(b))) {
            return Err(misaligned());
        }
    }

    let on_boundary = |t: u64| {
        let (x, y) = lattice_point(t);
        x == 0 || y == 0 || x == LATTICE || y == LATTICE
    };
    let dup: Vec<u64> = stations
        .iter()
        .copied()
        .filter(|&t| (t != lo && t != hi) || on_boundary(t))
        .collect();

    let mut copies = 0;
    for t in dup {
        let p = lattice_point(t);
        let original = point_ids[&p][0];
        let copy = lattice_of.len();
        lattice_of.push(p);
        point_ids.get_mut(&p).expect("station is a node").push(copy);
        copies += 1;
        for (k, cn) in keys.iter().zip(cell_nodes.iter_mut()) {
            let c = k.center();
            let across = if horizontal { c[1] } else { c[0] };
            if across > slit.line() {
                for n in cn.iter_mut() {
                    if *n == original {
                        *n = copy;
                    }
                }
            }
        }
    }
    Ok(copies)
}

fn find_hanging(
    keys: &[CellKey],
    cell_nodes: &[[usize; 4]],
    point_ids: &HashMap<(u64, u64), Vec<usize>>,
    node_cells: &[Vec<usize>],
) -> Vec<HangingNode> {
    // Two nodes are joined when some cell has them as adjacent corners.
    let joined = |p: usize, q: usize| {
        node_cells[p].iter().any(|&c| {
            let cn = &cell_nodes[c];
            (0..4).any(|e| {
                let (a, b) = (cn[e], cn[(e + 1) % 4]);
                (a == p && b == q) || (a == q && b == p)
            })
        })
    };
    let mut found: BTreeMap<usize, [usize; 2]> = BTreeMap::new();
    for (k, cn) in keys.iter().zip(cell_nodes) {
        if k.size() < 2 {
            continue;
        }
        let (x, y) = k.origin();
        let s = k.size();
        let corners = [(x, y), (x + s, y), (x + s, y + s), (x, y + s)];
        for e in 0..4 {
            let (pa, pb) = (corners[e], corners[(e + 1) % 4]);
            let mid = ((pa.0 + pb.0) / 2, (pa.1 + pb.1) / 2);
            let Some(ids) = point_ids.get(&mid) else { continue };
            let (a, b) = (cn[e], cn[(e + 1) % 4]);
            for &m in ids {
                if joined(m, a) && joined(m, b) {
                    found.insert(m, [a.min(b), a.max(b)]);
                }
            }
        }
    }
    found.into_iter().map(|(node, parents)| HangingNode { node, parents }).collect()
}

fn tag_boundary(keys: &[CellKey], cell_nodes: &[[usize; 4]], slits: &[SlitSpec]) -> Vec<BoundaryEdge> {
    let mut out = Vec::new();
    for (k, cn) in keys.iter().zip(cell_nodes) {
        let (x, y) = k.origin();
        let s = k.size();
        let corners = [(x, y), (x + s, y), (x + s, y + s), (x, y + s)];
        let center = k.center();
        for e in 0..4 {
            let (pa, pb) = (corners[e], corners[(e + 1) % 4]);
            let nodes = [cn[e], cn[(e + 1) % 4]];
            let mid = [to_coord(pa.0 + pb.0) / 2.0, to_coord(pa.1 + pb.1) / 2.0];
            let tag = if pa.0 == 0 && pb.0 == 0 {
                Some(BoundaryTag::Left)
            } else if pa.0 == LATTICE && pb.0 == LATTICE {
                Some(if mid[1] > 0.5 { BoundaryTag::RightTopHalf } else { BoundaryTag::RightBottomHalf })
            } else if pa.1 == 0 && pb.1 == 0 {
                Some(BoundaryTag::Bottom)
            } else if pa.1 == LATTICE && pb.1 == LATTICE {
                Some(if mid[0] < 0.5 { BoundaryTag::TopLeftHalf } else { BoundaryTag::TopRightHalf })
            } else {
                slits.iter().find_map(|sl| {
                    let along_line = match sl.side {
                        SlitAxis::Horizontal => pa.1 == pb.1 && to_coord(pa.1) == sl.line(),
                        SlitAxis::Vertical => pa.0 == pb.0 && to_coord(pa.0) == sl.line(),
                    };
                    let (lo, hi) = sl.span();
                    let t = sl.along(mid);
                    (along_line && t > lo && t < hi).then(|| {
                        if sl.across(center) > sl.line() {
                            BoundaryTag::SlitFacePlus
                        } else {
                            BoundaryTag::SlitFaceMinus
                        }
                    })
                })
            };
            if let Some(tag) = tag {
                out.push(BoundaryEdge { nodes, tag });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let m = Mesh::unit_square(0);
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.n_nodes(), 4);
        assert!((m.h_min() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(m.hanging_nodes().is_empty());
    }

    #[test]
    fn uniform_counts() {
        for n in 0..6 {
            let m = Mesh::unit_square(n);
            assert_eq!(m.n_cells(), 4usize.pow(n));
            assert_eq!(m.n_nodes(), ((1 << n) + 1) * ((1 << n) + 1));
            assert!(m.hanging_nodes().is_empty());
        }
        let m = Mesh::unit_square(2);
        assert_eq!((m.n_cells(), m.n_nodes()), (16, 25));
    }

    #[test]
    fn preset_global_h_min() {
        let m = Mesh::unit_square(7);
        assert!((m.h_min() - 0.0110485).abs() < 5e-8);
        assert_eq!(m.h_min(), std::f64::consts::SQRT_2 / 128.0);
    }

    #[test]
    fn node_numbering_is_row_major() {
        let m = Mesh::unit_square(2);
        for j in 0..5 {
            for i in 0..5 {
                assert_eq!(m.nodes()[j * 5 + i], [i as f64 / 4.0, j as f64 / 4.0]);
            }
        }
    }

    #[test]
    fn cells_are_counterclockwise_and_positive() {
        let m = Mesh::unit_square(3).refine_box(Rect::new([0.0, 0.0], [0.3, 0.3]), 2);
        for c in m.cells() {
            let p: Vec<Point> = c.nodes.iter().map(|&n| m.nodes()[n]).collect();
            let mut area = 0.0;
            for a in 0..4 {
                let b = (a + 1) % 4;
                area += p[a][0] * p[b][1] - p[b][0] * p[a][1];
            }
            assert!((0.5 * area - c.area()).abs() < 1e-15);
            assert!(c.area() > 0.0);
        }
    }

    #[test]
    fn global_refine_box_matches_uniform() {
        let refined = Mesh::unit_square(2).refine_box(Rect::unit(), 1);
        let uniform = Mesh::unit_square(3);
        assert_eq!(refined.nodes(), uniform.nodes());
        assert_eq!(refined.cells(), uniform.cells());
        assert_eq!(refined.h_min(), uniform.h_min());
    }

    #[test]
    fn refinement_halves_h_min() {
        let m = Mesh::unit_square(3).refine_box(Rect::new([0.4, 0.4], [0.6, 0.6]), 1);
        let all = m.refine_box(Rect::unit(), 1);
        assert_eq!(all.n_cells(), 4 * m.n_cells());
        assert_eq!(all.h_min(), m.h_min() / 2.0);
    }

    #[test]
    fn empty_box_leaves_mesh_unchanged() {
        let m = Mesh::unit_square(2);
        let r = m.refine_box(Rect::new([2.0, 2.0], [3.0, 3.0]), 3);
        assert_eq!(r.cells(), m.cells());
    }

    #[test]
    fn local_refinement_h_min() {
        // 7 global + 3 local and 7 global + 1 local.
        let base = Mesh::unit_square(7);
        let region = Rect::new([0.45, 0.45], [1.0, 0.55]);
        let three = base.refine_box(region, 3);
        assert!((three.h_min() - 0.00138107).abs() < 5e-9);
        let one = base.refine_box(Rect::new([0.45, 0.0], [0.55, 1.0]), 1);
        assert!((one.h_min() - 0.00552427).abs() < 5e-9);
    }

    fn neighbour_levels_ok(m: &Mesh) -> bool {
        // Any two cells sharing an edge segment differ by at most one level.
        let cells = m.cells();
        for a in cells {
            for b in cells {
                let touch_x = (a.origin[0] + a.size == b.origin[0])
                    && a.origin[1] < b.origin[1] + b.size
                    && b.origin[1] < a.origin[1] + a.size;
                let touch_y = (a.origin[1] + a.size == b.origin[1])
                    && a.origin[0] < b.origin[0] + b.size
                    && b.origin[0] < a.origin[0] + a.size;
                if (touch_x || touch_y) && (a.level as i32 - b.level as i32).abs() > 1 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn closure_restores_one_irregularity() {
        let m = Mesh::unit_square(2).refine_box(Rect::new([0.0, 0.0], [0.15, 0.15]), 4);
        assert!(neighbour_levels_ok(&m));
        assert!(!m.hanging_nodes().is_empty());
    }

    #[test]
    fn hanging_nodes_are_edge_midpoints() {
        let m = Mesh::unit_square(3).refine_box(Rect::new([0.3, 0.3], [0.7, 0.7]), 2);
        let hanging: HashSet<usize> = m.hanging_nodes().iter().map(|h| h.node).collect();
        for h in m.hanging_nodes() {
            let [a, b] = h.parents;
            let (pa, pb, ph) = (m.nodes()[a], m.nodes()[b], m.nodes()[h.node]);
            assert_eq!([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0], ph);
            assert!(!hanging.contains(&a) && !hanging.contains(&b));
            assert_eq!(HangingNode::WEIGHTS.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn slit_duplicates_interior_and_boundary_nodes() {
        let m = Mesh::unit_square(2);
        let slit = SlitSpec::new([0.5, 0.5], [1.0, 0.5]).unwrap();
        let c = m.carve_slit(slit).unwrap();
        assert_eq!(c.duplicated_nodes(), 2);
        assert_eq!(c.n_nodes(), m.n_nodes() + 2);
        assert_eq!(c.n_cells(), m.n_cells());
        let copies: Vec<Point> = c.nodes()[m.n_nodes()..].to_vec();
        assert_eq!(copies, vec![[0.75, 0.5], [1.0, 0.5]]);
    }

    #[test]
    fn slit_disconnects_faces() {
        let m = Mesh::unit_square(3);
        let slit = SlitSpec::new([0.5, 0.5], [1.0, 0.5]).unwrap();
        let c = m.carve_slit(slit).unwrap();
        let tip = 4 * 9 + 4;
        assert_eq!(c.nodes()[tip], [0.5, 0.5]);
        let above: HashSet<usize> = c
            .cells()
            .iter()
            .filter(|cell| cell.center()[1] > 0.5 && cell.center()[0] > 0.5)
            .flat_map(|cell| cell.nodes)
            .collect();
        let below: HashSet<usize> = c
            .cells()
            .iter()
            .filter(|cell| cell.center()[1] < 0.5 && cell.center()[0] > 0.5)
            .flat_map(|cell| cell.nodes)
            .collect();
        let shared: Vec<usize> = above.intersection(&below).copied().collect();
        assert_eq!(shared, vec![tip]);
    }

    #[test]
    fn slit_faces_are_tagged() {
        let c = Mesh::unit_square(2).carve_slit(SlitSpec::new([0.5, 0.5], [1.0, 0.5]).unwrap()).unwrap();
        assert_eq!(c.boundary_nodes(BoundaryTag::SlitFacePlus).len(), 3);
        assert_eq!(c.boundary_nodes(BoundaryTag::SlitFaceMinus).len(), 3);
        let plus = c.boundary_nodes(BoundaryTag::SlitFacePlus);
        let minus = c.boundary_nodes(BoundaryTag::SlitFaceMinus);
        let common: Vec<_> = plus.iter().filter(|n| minus.contains(n)).collect();
        assert_eq!(common.len(), 1);
        // Right boundary halves meet at the duplicated endpoint without sharing it.
        let top = c.boundary_nodes(BoundaryTag::RightTopHalf);
        let bottom = c.boundary_nodes(BoundaryTag::RightBottomHalf);
        assert!(top.iter().all(|n| !bottom.contains(n)));
    }

    #[test]
    fn misaligned_slit_is_rejected() {
        let m = Mesh::unit_square(1);
        let err = m.carve_slit(SlitSpec::new([0.5, 0.3], [1.0, 0.3]).unwrap());
        assert!(matches!(err, Err(MeshError::Alignment(_))));
        assert!(SlitSpec::new([0.1, 0.2], [0.3, 0.4]).is_err());
    }

    #[test]
    fn carve_keeps_counts_under_refinement() {
        let slit = SlitSpec::new([0.5, 0.5], [0.5, 1.0]).unwrap();
        let m = Mesh::unit_square(3).carve_slit(slit).unwrap();
        let r = m.refine_box(Rect::new([0.4, 0.4], [0.6, 1.0]), 1);
        assert_eq!(r.slits().len(), 1);
        let plain = Mesh::unit_square(3).refine_box(Rect::new([0.4, 0.4], [0.6, 1.0]), 1);
        assert_eq!(r.n_cells(), plain.n_cells());
        assert_eq!(r.n_nodes(), plain.n_nodes() + r.duplicated_nodes());
    }

    #[test]
    fn hanging_nodes_across_a_slit_are_not_constrained() {
        // Fine cells above the slit, coarse cells below it.
        let slit = SlitSpec::new([0.25, 0.5], [1.0, 0.5]).unwrap();
        let m = Mesh::unit_square(2).refine_box(Rect::new([0.0, 0.5], [1.0, 0.75]), 1).carve_slit(slit).unwrap();
        for h in m.hanging_nodes() {
            let p = m.nodes()[h.node];
            if p[1] == 0.5 && p[0] > 0.25 {
                panic!("constraint across slit at {p:?}");
            }
        }
    }

    #[test]
    fn boundary_partition() {
        let m = Mesh::unit_square(1);
        let bottom = m.boundary_nodes(BoundaryTag::Bottom);
        assert_eq!(bottom.len(), 3);
        assert!(bottom.iter().all(|&n| m.nodes()[n][1] == 0.0));

        let m = Mesh::unit_square(2);
        let rt = m.boundary_nodes(BoundaryTag::RightTopHalf);
        assert_eq!(rt.len(), 3);
        assert!(rt.iter().all(|&n| m.nodes()[n][0] == 1.0 && m.nodes()[n][1] >= 0.5));

        let m = Mesh::unit_square(3).refine_box(Rect::new([0.0, 0.0], [0.2, 1.0]), 1);
        let union: BTreeSet<usize> = BoundaryTag::ALL
            .iter()
            .filter(|t| !t.is_slit_face())
            .flat_map(|&t| m.boundary_nodes(t))
            .collect();
        let expected: BTreeSet<usize> = (0..m.n_nodes())
            .filter(|&n| {
                let p = m.nodes()[n];
                p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0
            })
            .collect();
        assert_eq!(union, expected);
        // Every boundary edge carries exactly one tag.
        let mut seen = HashSet::new();
        for e in m.boundary_edges() {
            assert!(seen.insert((e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]))));
        }
    }

    #[test]
    fn locate_prefers_upper_right_cell() {
        let m = Mesh::unit_square(1);
        let c = m.locate([0.5, 0.5]).unwrap();
        assert_eq!(m.cells()[c].origin, [0.5, 0.5]);
        let c = m.locate([1.0, 1.0]).unwrap();
        assert_eq!(m.cells()[c].origin, [0.5, 0.5]);
        assert!(m.locate([1.1, 0.2]).is_none());
        let r = m.refine_box(Rect::new([0.0, 0.0], [0.3, 0.3]), 2);
        let c = r.locate([0.1, 0.1]).unwrap();
        let cell = &r.cells()[c];
        assert!(cell.origin[0] <= 0.1 && 0.1 < cell.origin[0] + cell.size);
    }
}
