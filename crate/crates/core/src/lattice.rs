//! Hypercubic lattice geometry, region algebra and the leveled overlapping
//! coarse-graining used to split relative entropies across a lattice.
//!
//! Sites are stored in lexicographic order of their integer coordinates with
//! the first axis most significant; a [`Region`] is a sorted set of site
//! indices into its [`Lattice`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Coordinate metric used for distances, diameters and metric balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Maximum norm, the default.
    #[default]
    Chebyshev,
    /// Taxicab norm.
    Manhattan,
}

impl Metric {
    /// Distance between two coordinate tuples.
    pub fn eval(self, a: &[i64], b: &[i64]) -> usize {
        let it = a.iter().zip(b).map(|(x, y)| (x - y).unsigned_abs() as usize);
        match self {
            Metric::Chebyshev => it.max().unwrap_or(0),
            Metric::Manhattan => it.sum(),
        }
    }

    /// All non-zero offsets of norm at most `radius`, sorted by norm.
    pub fn ball_offsets(self, dim: usize, radius: usize) -> Vec<(Vec<i64>, usize)> {
        let r = radius as i64;
        let mut out = Vec::new();
        let mut cur = vec![-r; dim];
        loop {
            let norm = self.eval(&cur, &vec![0; dim]);
            if norm > 0 && norm <= radius {
                out.push((cur.clone(), norm));
            }
            let mut b = dim;
            loop {
                if b == 0 {
                    out.sort_by_key(|(o, n)| (*n, o.clone()));
                    return out;
                }
                b -= 1;
                if cur[b] < r {
                    cur[b] += 1;
                    break;
                }
                cur[b] = -r;
            }
        }
    }

    fn neighbour_offsets(self, dim: usize) -> Vec<Vec<i64>> {
        self.ball_offsets(dim, 1).into_iter().map(|(o, _)| o).collect()
    }
}

/// A box `[lo, lo + side - 1]^D` of integer sites.
///
/// The canonical lattice `⟦-L, L⟧^D` has `lo = -L` and `side = 2L + 1`; other
/// boxes arise when a lattice is padded for a coarse-graining.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    lo: i64,
    side: usize,
}

impl Lattice {
    /// The lattice `⟦-L, L⟧^D`.
    pub fn new(dim: usize, half_side: usize) -> Result<Self> {
        Self::with_box(dim, -(half_side as i64), 2 * half_side + 1)
    }

    /// An arbitrary box with lower corner `lo` in every axis.
    pub fn with_box(dim: usize, lo: i64, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(LabError::Domain("empty lattice".into()));
        }
        let n = side
            .checked_pow(dim as u32)
            .ok_or_else(|| LabError::Capability("lattice too large".into()))?;
        if n > 50_000_000 {
            return Err(LabError::Capability(format!("lattice with {n} sites")));
        }
        Ok(Self { dim, lo, side })
    }

    /// Spatial dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Side length of the box.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Lowest coordinate along every axis.
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Always false; lattices have at least one site.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of a site.
    pub fn coord(&self, index: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        let mut rem = index;
        for b in (0..self.dim).rev() {
            out[b] = self.lo + (rem % self.side) as i64;
            rem /= self.side;
        }
        out
    }

    /// Index of a coordinate tuple, if it lies inside the box.
    pub fn index_of(&self, coord: &[i64]) -> Option<usize> {
        if coord.len() != self.dim {
            return None;
        }
        let mut idx = 0usize;
        for &x in coord {
            let off = x - self.lo;
            if off < 0 || off as usize >= self.side {
                return None;
            }
            idx = idx * self.side + off as usize;
        }
        Some(idx)
    }

    /// Distance between two sites.
    pub fn site_distance(&self, a: usize, b: usize, metric: Metric) -> usize {
        metric.eval(&self.coord(a), &self.coord(b))
    }

    /// The whole lattice as a region.
    pub fn full_region(&self) -> Region {
        Region::from_sorted_unchecked((0..self.len()).collect())
    }

    /// Translate `site` by `offset`; `None` when leaving the box.
    pub fn shifted(&self, site: usize, offset: &[i64]) -> Option<usize> {
        let c: Vec<i64> = self.coord(site).iter().zip(offset).map(|(x, o)| x + o).collect();
        self.index_of(&c)
    }

    /// Region of sites given by coordinates; errors on coordinates outside.
    pub fn region_from_coords(&self, coords: &[Vec<i64>]) -> Result<Region> {
        let mut v = Vec::with_capacity(coords.len());
        for c in coords {
            v.push(
                self.index_of(c)
                    .ok_or_else(|| LabError::Domain(format!("coordinate {c:?} outside lattice")))?,
            );
        }
        Ok(Region::new(v))
    }

    /// Diameter of a region under `metric`; zero for empty or singleton sets.
    pub fn diameter(&self, region: &Region, metric: Metric) -> usize {
        let coords: Vec<Vec<i64>> = region.iter().map(|s| self.coord(s)).collect();
        let mut best = 0;
        for i in 0..coords.len() {
            for j in i + 1..coords.len() {
                best = best.max(metric.eval(&coords[i], &coords[j]));
            }
        }
        best
    }

    /// Multi-source breadth-first distances from `sources` over the lattice
    /// graph of `metric`; equal to the coordinate distance because boxes are
    /// convex. Unreached sites (only when `sources` is empty) get `usize::MAX`.
    pub fn distance_field(&self, sources: &[bool], metric: Metric) -> Vec<usize> {
        let n = self.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for (i, &s) in sources.iter().enumerate() {
            if s {
                dist[i] = 0;
                queue.push_back(i);
            }
        }
        let offsets = metric.neighbour_offsets(self.dim);
        let mut coord = vec![0i64; self.dim];
        while let Some(u) = queue.pop_front() {
            let cu = self.coord(u);
            for o in &offsets {
                for b in 0..self.dim {
                    coord[b] = cu[b] + o[b];
                }
                if let Some(w) = self.index_of(&coord) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        dist
    }

    /// Minimal distance between two differently labelled sites, over all
    /// labelled sites (label `None` is ignored). Returns `None` when fewer
    /// than two labels occur.
    pub fn min_distance_between_labels(
        &self,
        labels: &[Option<usize>],
        metric: Metric,
    ) -> Option<usize> {
        let n = self.len();
        let mut dist = vec![usize::MAX; n];
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut queue = VecDeque::new();
        for (i, l) in labels.iter().enumerate() {
            if l.is_some() {
                dist[i] = 0;
                owner[i] = *l;
                queue.push_back(i);
            }
        }
        let offsets = metric.neighbour_offsets(self.dim);
        let mut best: Option<usize> = None;
        let mut coord = vec![0i64; self.dim];
        while let Some(u) = queue.pop_front() {
            let cu = self.coord(u);
            for o in &offsets {
                for b in 0..self.dim {
                    coord[b] = cu[b] + o[b];
                }
                let Some(w) = self.index_of(&coord) else { continue };
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    owner[w] = owner[u];
                    queue.push_back(w);
                } else if owner[w] != owner[u] {
                    let cand = if labels[u].is_some() && labels[w].is_some() {
                        1
                    } else {
                        dist[u] + dist[w] + 1
                    };
                    best = Some(best.map_or(cand, |b: usize| b.min(cand)));
                }
            }
        }
        best
    }
}

/// A set of lattice sites, stored as sorted unique indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Region(Vec<usize>);

impl Region {
    /// Build from arbitrary indices (sorted and deduplicated).
    pub fn new(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self(sites)
    }

    /// The empty region.
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub(crate) fn from_sorted_unchecked(sites: Vec<usize>) -> Self {
        Self(sites)
    }

    /// Region of the `true` entries of a mask.
    pub fn from_mask(mask: &[bool]) -> Self {
        Self(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect())
    }

    /// Boolean mask of length `n`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &s in &self.0 {
            m[s] = true;
        }
        m
    }

    /// Sorted member indices.
    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    /// Iterate over member indices.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for the empty region.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Membership test.
    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }

    /// Set union.
    pub fn union(&self, other: &Region) -> Region {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Region::new(v)
    }

    /// Set intersection.
    pub fn intersection(&self, other: &Region) -> Region {
        Region(self.0.iter().copied().filter(|s| other.contains(*s)).collect())
    }

    /// Set difference `self \ other`.
    pub fn difference(&self, other: &Region) -> Region {
        Region(self.0.iter().copied().filter(|s| !other.contains(*s)).collect())
    }

    /// Subset test.
    pub fn is_subset(&self, other: &Region) -> bool {
        self.0.iter().all(|s| other.contains(*s))
    }

    /// True when the regions share no site.
    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.0.iter().all(|s| !other.contains(*s))
    }
}

impl FromIterator<usize> for Region {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Region::new(iter.into_iter().collect())
    }
}

/// Boundary `∂R`: sites outside `R` reached by an interaction touching `R`.
///
/// With `supports` the interaction is given by the supports of its non-zero
/// terms; without it every metric ball of radius `r` counts as a term. The
/// result is restricted to `universe` when given (for models living on part
/// of a lattice).
pub fn boundary(
    lattice: &Lattice,
    region: &Region,
    r: usize,
    metric: Metric,
    supports: Option<&[Region]>,
    universe: Option<&Region>,
) -> Region {
    let mut out = Vec::new();
    match supports {
        Some(terms) => {
            for t in terms {
                if !t.is_disjoint(region) {
                    out.extend(t.iter().filter(|s| !region.contains(*s)));
                }
            }
        }
        None => {
            let offsets = metric.ball_offsets(lattice.dim(), r);
            for s in region.iter() {
                for (o, _) in &offsets {
                    if let Some(w) = lattice.shifted(s, o) {
                        if !region.contains(w) {
                            out.push(w);
                        }
                    }
                }
            }
        }
    }
    let b = Region::new(out);
    match universe {
        Some(u) => b.intersection(u),
        None => b,
    }
}

/// `R∂ = R ∪ ∂R`.
pub fn closure(
    lattice: &Lattice,
    region: &Region,
    r: usize,
    metric: Metric,
    supports: Option<&[Region]>,
    universe: Option<&Region>,
) -> Region {
    region.union(&boundary(lattice, region, r, metric, supports, universe))
}

/// Minimal pairwise distance between two non-empty regions.
pub fn distance(lattice: &Lattice, a: &Region, b: &Region, metric: Metric) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(LabError::Domain("distance of an empty region".into()));
    }
    if a.len().saturating_mul(b.len()) <= 4_000_000 {
        let ca: Vec<Vec<i64>> = a.iter().map(|s| lattice.coord(s)).collect();
        let cb: Vec<Vec<i64>> = b.iter().map(|s| lattice.coord(s)).collect();
        let mut best = usize::MAX;
        for x in &ca {
            for y in &cb {
                best = best.min(metric.eval(x, y));
            }
        }
        return Ok(best);
    }
    let field = lattice.distance_field(&a.mask(lattice.len()), metric);
    Ok(b.iter().map(|s| field[s]).min().unwrap_or(usize::MAX))
}

/// Parameters `(k, c, ℓ)` of a coarse-graining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseGrainingParams {
    /// Buffer width.
    pub k: usize,
    /// Overlap width.
    pub c: usize,
    /// Side of the top-level cells.
    pub ell: usize,
    /// Interaction range the buffer and overlap must dominate.
    #[serde(default = "default_range")]
    pub r: usize,
    /// Metric used to shrink cells and measure separations.
    #[serde(default)]
    pub metric: Metric,
}

fn default_range() -> usize {
    1
}

impl CoarseGrainingParams {
    /// Check the validity gate against a lattice of side `side` in dimension `dim`.
    pub fn validate(&self, dim: usize, side: usize) -> Result<()> {
        let kc = self.k + self.c;
        if self.ell <= 2 * dim * kc {
            return Err(LabError::Config(format!(
                "need ell > 2D(k+c): ell = {}, 2D(k+c) = {}",
                self.ell,
                2 * dim * kc
            )));
        }
        if self.k < self.r {
            return Err(LabError::Config(format!("need k >= r: k = {}, r = {}", self.k, self.r)));
        }
        if self.c < self.r {
            return Err(LabError::Config(format!("need c >= r: c = {}, r = {}", self.c, self.r)));
        }
        if self.ell > side {
            return Err(LabError::Config(format!(
                "need ell <= 2L+1: ell = {}, 2L+1 = {side}",
                self.ell
            )));
        }
        if self.ell % 2 == 0 {
            return Err(LabError::Config(format!("need ell odd: ell = {}", self.ell)));
        }
        if self.r == 0 {
            return Err(LabError::Config("need r >= 1".into()));
        }
        Ok(())
    }
}

/// One cell of the coarse-graining: `C^∂ ⊇ C ⊇ C̊`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    /// The fattened cell `C^∂_{a,i}`.
    pub fattened: Region,
    /// The cell `C_{a,i}` (fattened cell minus a buffer of width `k`).
    pub cell: Region,
    /// The interior `C̊_{a,i}` (minus buffer and overlap, width `k + c`).
    pub interior: Region,
}

/// All cells of one level together with the skeleton `C^a` they live in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    /// Level index `a ∈ ⟦0, D⟧`.
    pub a: usize,
    /// Skeleton `C^a`.
    pub skeleton: Region,
    /// Cells ordered lexicographically by their smallest site.
    pub cells: Vec<Cell>,
}

impl Level {
    /// `C_a`, the union of the cells of this level.
    pub fn union_cells(&self) -> Region {
        Region::new(self.cells.iter().flat_map(|c| c.cell.iter()).collect())
    }

    /// `C̊_a`, the union of the interiors of this level.
    pub fn union_interiors(&self) -> Region {
        Region::new(self.cells.iter().flat_map(|c| c.interior.iter()).collect())
    }
}

/// The four-set partition `W ⊔ X ⊔ Y ⊔ Z` of the lattice attached to a level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPartition {
    /// Complement of the skeleton.
    pub w: Region,
    /// Interiors `C̊_a`.
    pub x: Region,
    /// Collars `C_a \ C̊_a`.
    pub y: Region,
    /// Buffers `C^a \ C_a`.
    pub z: Region,
}

/// Role of a site inside a cell, used for exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellRole {
    /// In `C̊`.
    Interior,
    /// In `C \ C̊`.
    Collar,
    /// In `C^∂ \ C`.
    Buffer,
}

impl CellRole {
    /// Lower-case name.
    pub fn as_str(self) -> &'static str {
        match self {
            CellRole::Interior => "interior",
            CellRole::Collar => "collar",
            CellRole::Buffer => "buffer",
        }
    }
}

/// Leveled overlapping coarse-graining of a (possibly padded) lattice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseGraining {
    /// Parameters used to build it.
    pub params: CoarseGrainingParams,
    /// The lattice the construction ran on; larger than the input when padded.
    pub lattice: Lattice,
    /// Sites of the padded lattice that belong to the physical system.
    pub physical: Region,
    /// Levels indexed by `a = 0..=D`.
    pub levels: Vec<Level>,
}

/// Smallest box containing `lattice` whose side is a multiple of `ell`,
/// padded as symmetrically as possible (the high side takes the odd site).
pub fn padded_lattice(lattice: &Lattice, ell: usize) -> Result<Lattice> {
    let side = lattice.side().div_ceil(ell) * ell;
    let extra = side - lattice.side();
    Lattice::with_box(lattice.dim(), lattice.lo() - (extra / 2) as i64, side)
}

impl CoarseGraining {
    /// Build the coarse-graining of `lattice` (restricted to `physical` when
    /// the model lives on part of it). When `ell` does not divide the side the
    /// lattice is padded; padded sites take part in the geometry only.
    pub fn build(
        lattice: &Lattice,
        physical: Option<&Region>,
        params: CoarseGrainingParams,
    ) -> Result<Self> {
        params.validate(lattice.dim(), lattice.side())?;
        let padded = padded_lattice(lattice, params.ell)?;
        let physical_sites: Vec<usize> = match physical {
            Some(p) => p.iter().map(|s| padded.index_of(&lattice.coord(s)).expect("inside")).collect(),
            None => (0..lattice.len()).map(|s| padded.index_of(&lattice.coord(s)).expect("inside")).collect(),
        };
        let physical = Region::new(physical_sites);
        let levels = construct_levels(&padded, &params);
        Ok(Self { params, lattice: padded, physical, levels })
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// True when padding added sites outside the physical system.
    pub fn is_padded(&self) -> bool {
        self.physical.len() != self.lattice.len()
    }

    /// Level `a`.
    pub fn level(&self, a: usize) -> &Level {
        &self.levels[a]
    }

    /// Partition `(W_a, X_a, Y_a, Z_a)` for `a ∈ ⟦1, D⟧` on the padded lattice.
    pub fn partition(&self, a: usize) -> LevelPartition {
        let lvl = &self.levels[a];
        let all = self.lattice.full_region();
        let c_a = lvl.union_cells();
        let x = lvl.union_interiors();
        LevelPartition {
            w: all.difference(&lvl.skeleton),
            y: c_a.difference(&x),
            z: lvl.skeleton.difference(&c_a),
            x,
        }
    }

    /// Partition restricted to the physical sites.
    pub fn physical_partition(&self, a: usize) -> LevelPartition {
        let p = self.partition(a);
        let f = |r: &Region| r.intersection(&self.physical);
        LevelPartition { w: f(&p.w), x: f(&p.x), y: f(&p.y), z: f(&p.z) }
    }

    /// All cells restricted to physical sites, as `(level, index, cell)`,
    /// dropping cells with no physical site.
    pub fn physical_cells(&self) -> Vec<(usize, usize, Cell)> {
        let mut out = Vec::new();
        for lvl in &self.levels {
            for (i, c) in lvl.cells.iter().enumerate() {
                let cell = Cell {
                    fattened: c.fattened.intersection(&self.physical),
                    cell: c.cell.intersection(&self.physical),
                    interior: c.interior.intersection(&self.physical),
                };
                if !cell.cell.is_empty() {
                    out.push((lvl.a, i, cell));
                }
            }
        }
        out
    }

    /// Rows `(site, level, cell, role)` over physical sites, for CSV export.
    pub fn site_roles(&self) -> Vec<(usize, usize, usize, CellRole)> {
        let mut out = Vec::new();
        for lvl in &self.levels {
            for (i, c) in lvl.cells.iter().enumerate() {
                for s in c.fattened.iter().filter(|s| self.physical.contains(*s)) {
                    let role = if c.interior.contains(s) {
                        CellRole::Interior
                    } else if c.cell.contains(s) {
                        CellRole::Collar
                    } else {
                        CellRole::Buffer
                    };
                    out.push((s, lvl.a, i, role));
                }
            }
        }
        out.sort_by_key(|&(s, a, i, _)| (s, a, i));
        out
    }

    /// Verify the structural properties by exhaustive enumeration.
    pub fn verify(&self) -> CoarseGrainingReport {
        verify(self, &self.lattice.full_region())
    }

    /// Verify the properties after restriction to the physical sites.
    pub fn verify_physical(&self) -> CoarseGrainingReport {
        verify(self, &self.physical)
    }
}

fn construct_levels(lat: &Lattice, p: &CoarseGrainingParams) -> Vec<Level> {
    let dim = lat.dim();
    let n = lat.len();
    let kc = p.k + p.c;
    let mut levels: Vec<Level> = Vec::with_capacity(dim + 1);

    // Top level: the ℓ-blocks.
    let blocks_per_axis = lat.side() / p.ell;
    let mut label = vec![usize::MAX; n];
    for (s, l) in label.iter_mut().enumerate() {
        let c = lat.coord(s);
        let mut id = 0;
        for &x in &c {
            id = id * blocks_per_axis + ((x - lat.lo()) as usize) / p.ell;
        }
        *l = id;
    }
    let skeleton = vec![true; n];
    let n_blocks = blocks_per_axis.pow(dim as u32);
    let cells = shrink_cells(lat, &label, &skeleton, n_blocks, p);
    levels.push(Level { a: dim, skeleton: Region::from_mask(&skeleton), cells });

    let mut skeleton_mask = skeleton;
    for a in (0..dim).rev() {
        let upper_interior = levels.last().expect("level").union_interiors().mask(n);
        for (s, m) in skeleton_mask.iter_mut().enumerate() {
            if upper_interior[s] {
                *m = false;
            }
        }
        if a == 0 {
            let (label, count) = components(lat, &skeleton_mask);
            let mut cells: Vec<Cell> = (0..count)
                .map(|_| Cell { fattened: Region::empty(), cell: Region::empty(), interior: Region::empty() })
                .collect();
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
            for s in 0..n {
                if label[s] != usize::MAX {
                    members[label[s]].push(s);
                }
            }
            for (c, m) in cells.iter_mut().zip(members) {
                let r = Region::from_sorted_unchecked(m);
                c.fattened = r.clone();
                c.cell = r.clone();
                c.interior = r;
            }
            levels.push(Level { a: 0, skeleton: Region::from_mask(&skeleton_mask), cells });
            break;
        }
        // Sites of the skeleton within 2(D-a)(k+c) along an axis of an interior above.
        let reach = (2 * (dim - a) * kc) as i64;
        let mut fattened = vec![false; n];
        let mut shift = vec![0i64; dim];
        for s in 0..n {
            if !skeleton_mask[s] {
                continue;
            }
            'search: for b in 0..dim {
                for j in 1..=reach {
                    for sign in [-1i64, 1] {
                        shift.iter_mut().for_each(|x| *x = 0);
                        shift[b] = sign * j;
                        if let Some(w) = lat.shifted(s, &shift) {
                            if upper_interior[w] {
                                fattened[s] = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let (label, count) = components(lat, &fattened);
        let cells = shrink_cells(lat, &label, &skeleton_mask, count, p);
        levels.push(Level { a, skeleton: Region::from_mask(&skeleton_mask), cells });
    }
    levels.reverse();
    levels
}

/// Face-connected components of a mask, labelled in order of their smallest site.
fn components(lat: &Lattice, mask: &[bool]) -> (Vec<usize>, usize) {
    let n = lat.len();
    let mut label = vec![usize::MAX; n];
    let offsets = Metric::Manhattan.neighbour_offsets(lat.dim());
    let mut count = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if !mask[s] || label[s] != usize::MAX {
            continue;
        }
        label[s] = count;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for o in &offsets {
                if let Some(w) = lat.shifted(u, o) {
                    if mask[w] && label[w] == usize::MAX {
                        label[w] = count;
                        queue.push_back(w);
                    }
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Shrink labelled fattened cells by their distance to the rest of the skeleton.
fn shrink_cells(
    lat: &Lattice,
    label: &[usize],
    skeleton: &[bool],
    count: usize,
    p: &CoarseGrainingParams,
) -> Vec<Cell> {
    let kc = p.k + p.c;
    let offsets = p.metric.ball_offsets(lat.dim(), kc);
    let mut fat = vec![Vec::new(); count];
    let mut cell = vec![Vec::new(); count];
    let mut int = vec![Vec::new(); count];
    for s in 0..lat.len() {
        let l = label[s];
        if l == usize::MAX {
            continue;
        }
        let mut d = kc + 1;
        for (o, norm) in &offsets {
            if let Some(w) = lat.shifted(s, o) {
                if skeleton[w] && label[w] != l {
                    d = *norm;
                    break;
                }
            }
        }
        fat[l].push(s);
        if d > p.k {
            cell[l].push(s);
        }
        if d > kc {
            int[l].push(s);
        }
    }
    fat.into_iter()
        .zip(cell)
        .zip(int)
        .map(|((f, c), i)| Cell {
            fattened: Region::from_sorted_unchecked(f),
            cell: Region::from_sorted_unchecked(c),
            interior: Region::from_sorted_unchecked(i),
        })
        .collect()
}

/// Outcome of the exhaustive property scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseGrainingReport {
    /// Disjointness within levels and the size chain `|C̊| ≤ |C| ≤ |C^∂| ≤ ℓ^D`.
    pub property1: bool,
    /// Level-0 cells fit in boxes of side `2D(k+c)` and are `ℓ − 2D(k+c)` apart.
    pub property2: bool,
    /// Cover of the lattice with multiplicity at most `D + 1`.
    pub property3: bool,
    /// `c ≤ dist(Z_a, X_a)` and `C^a \ C^{a-1} = C̊_a`.
    pub property4: bool,
    /// Cells of one level are at least `2k` apart.
    pub property5: bool,
    /// `W ⊔ X ⊔ Y ⊔ Z` is a partition for every level `a ≥ 1`.
    pub partition: bool,
    /// Largest number of cells containing one site.
    pub max_multiplicity: usize,
    /// Measured `dist(Z_a, X_a)` for `a = 1..=D` (`None` when a side is empty).
    pub xz_distance: Vec<Option<usize>>,
    /// Largest cell size per level together with the tighter analytic size bound.
    pub cell_size_vs_tight_bound: Vec<(usize, f64)>,
    /// Human-readable descriptions of every violation found.
    pub violations: Vec<String>,
}

impl CoarseGrainingReport {
    /// True when every property holds.
    pub fn all_pass(&self) -> bool {
        self.property1
            && self.property2
            && self.property3
            && self.property4
            && self.property5
            && self.partition
    }
}

fn verify(cg: &CoarseGraining, universe: &Region) -> CoarseGrainingReport {
    let lat = &cg.lattice;
    let p = cg.params;
    let dim = lat.dim();
    let n = lat.len();
    let kc = p.k + p.c;
    let in_u = universe.mask(n);
    let restrict = |r: &Region| -> Region { r.intersection(universe) };
    let mut violations = Vec::new();

    // Property 1.
    let mut p1 = true;
    let cap = p.ell.pow(dim as u32);
    for lvl in &cg.levels {
        let mut owner = vec![false; n];
        for (i, c) in lvl.cells.iter().enumerate() {
            let (f, cc, int) = (restrict(&c.fattened), restrict(&c.cell), restrict(&c.interior));
            if !(int.is_subset(&cc) && cc.is_subset(&f)) || f.len() > cap {
                p1 = false;
                violations.push(format!("level {} cell {i}: size chain violated", lvl.a));
            }
            for s in f.iter() {
                if owner[s] {
                    p1 = false;
                    violations.push(format!("level {} cell {i}: overlaps another cell at site {s}", lvl.a));
                }
                owner[s] = true;
            }
        }
    }

    // Property 2.
    let mut p2 = true;
    let box_side = 2 * dim * kc;
    let lvl0 = &cg.levels[0];
    let mut labels0: Vec<Option<usize>> = vec![None; n];
    for (i, c) in lvl0.cells.iter().enumerate() {
        let cell = restrict(&c.fattened);
        if cell.is_empty() {
            continue;
        }
        for b in 0..dim {
            let xs: Vec<i64> = cell.iter().map(|s| lat.coord(s)[b]).collect();
            let extent = (xs.iter().max().unwrap() - xs.iter().min().unwrap() + 1) as usize;
            if extent > box_side {
                p2 = false;
                violations.push(format!("level 0 cell {i}: extent {extent} > 2D(k+c) = {box_side}"));
            }
        }
        for s in cell.iter() {
            labels0[s] = Some(i);
        }
    }
    if let Some(d) = lat.min_distance_between_labels(&labels0, p.metric) {
        if d < p.ell - box_side {
            p2 = false;
            violations.push(format!("level 0 cells at distance {d} < ell - 2D(k+c)"));
        }
    }
    if restrict(&lvl0.skeleton) != restrict(&lvl0.union_cells()) {
        p2 = false;
        violations.push("level 0 cells do not tile C^0".into());
    }

    // Property 3.
    let mut mult = vec![0usize; n];
    for lvl in &cg.levels {
        for c in &lvl.cells {
            for s in c.cell.iter() {
                mult[s] += 1;
            }
        }
    }
    let mut p3 = true;
    let mut max_mult = 0;
    for s in 0..n {
        if !in_u[s] {
            continue;
        }
        max_mult = max_mult.max(mult[s]);
        if mult[s] == 0 {
            p3 = false;
            violations.push(format!("site {s} uncovered"));
        }
        if mult[s] > dim + 1 {
            p3 = false;
            violations.push(format!("site {s} in {} cells", mult[s]));
        }
    }

    // Property 4 and the partition identity.
    let mut p4 = true;
    let mut part_ok = true;
    let mut xz = Vec::new();
    for a in 1..=dim {
        let part = cg.partition(a);
        let (w, x, y, z) = (restrict(&part.w), restrict(&part.x), restrict(&part.y), restrict(&part.z));
        let total = w.len() + x.len() + y.len() + z.len();
        let union = w.union(&x).union(&y).union(&z);
        if total != universe.len() || union != *universe {
            part_ok = false;
            violations.push(format!("level {a}: W, X, Y, Z do not partition the lattice"));
        }
        let removed = restrict(&cg.levels[a].skeleton).difference(&restrict(&cg.levels[a - 1].skeleton));
        if removed != x {
            p4 = false;
            violations.push(format!("level {a}: C^a minus C^(a-1) differs from the interiors"));
        }
        let d = if x.is_empty() || z.is_empty() {
            None
        } else {
            let field = lat.distance_field(&x.mask(n), p.metric);
            z.iter().map(|s| field[s]).min()
        };
        if let Some(d) = d {
            if d < p.c {
                p4 = false;
                violations.push(format!("level {a}: dist(Z, X) = {d} < c = {}", p.c));
            }
        }
        xz.push(d);
    }

    // Property 5.
    let mut p5 = true;
    for lvl in &cg.levels {
        let mut labels: Vec<Option<usize>> = vec![None; n];
        for (i, c) in lvl.cells.iter().enumerate() {
            for s in restrict(&c.cell).iter() {
                labels[s] = Some(i);
            }
        }
        if let Some(d) = lat.min_distance_between_labels(&labels, p.metric) {
            if d < 2 * p.k {
                p5 = false;
                violations.push(format!("level {}: cells at distance {d} < 2k", lvl.a));
            }
        }
    }

    let sizes = cg
        .levels
        .iter()
        .map(|lvl| {
            let largest = lvl.cells.iter().map(|c| restrict(&c.cell).len()).max().unwrap_or(0);
            let thin = (2 * (dim - lvl.a) * kc) as f64;
            let tight = thin.powi((dim - lvl.a) as i32) * (p.ell as f64 - thin).powi(lvl.a as i32);
            (largest, tight)
        })
        .collect();

    CoarseGrainingReport {
        property1: p1,
        property2: p2,
        property3: p3,
        property4: p4,
        property5: p5,
        partition: part_ok,
        max_multiplicity: max_mult,
        xz_distance: xz,
        cell_size_vs_tight_bound: sizes,
        violations,
    }
}
